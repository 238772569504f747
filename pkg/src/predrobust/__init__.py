"""Volatility-robust testing for predictive regressions.

The headline test replaces the regression t-ratio with a sign-instrumented
statistic whose terms are rescaled by a one-sided kernel estimate of the
innovation volatility path; it stays standard normal under the null no
matter how persistent the predictor or how wild the variance dynamics.
"""

from .core import (
    BandwidthSpec,
    DEFAULT_LEVELS,
    DegenerateInstrument,
    DegenerateRegressor,
    DegenerateVolatility,
    EmptyWindow,
    ExcessiveFailures,
    InsufficientNullDraws,
    InvalidConfig,
    KernelSpec,
    LengthMismatch,
    METHOD_OLS_T,
    METHOD_TAU_NONLINEAR,
    METHOD_TAU_ORACLE,
    METHOD_TAU_SIGMA_HAT,
    NonFinite,
    PredrobustError,
    RegressionSample,
    Seed,
    TestOutcome,
    TooShort,
    VOL_ESTIMATED,
    VOL_TRUE,
    VolatilityPath,
    VolatilityUnderflow,
    ZeroVolatility,
    as_generator,
    build_sample,
    default_bandwidth,
    default_kernel,
    recursive_demean,
)
from .kernels import kernel_l2, kernel_value, riemann_sum_error, weight_row
from .estimators import (
    GammaTransform,
    cauchy_fit,
    decompose_volatility,
    nonlinear_iv_fit,
    ols_fit,
    sign_convention,
    volatility_estimate,
    volatility_path,
)
from .inference import (
    NormalDist,
    normal_cdf,
    normal_quantile,
    ols_t_stat,
    size_adjusted_cv,
    tau_nonlinear,
    tau_oracle,
    tau_sigma_hat,
    two_sided_p,
)
from .dgp import (
    BreakVol,
    ConstantVol,
    ContinuousDgpConfig,
    DiscreteDgpConfig,
    GarchVol,
    GbmVol,
    RegimeVol,
    SimulatedDataset,
    correlated_pair,
    simulate_continuous,
    simulate_discrete,
    write_dataset_csv,
)
from .montecarlo import (
    McConfig,
    PowerCurve,
    ReproduceReport,
    SizeTable,
    TABULATION_BANDWIDTH,
    reproduce_table,
    run_power,
    run_size,
    write_power_svg,
)

__version__ = "0.1.0"
