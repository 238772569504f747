"""Test statistics and their normal reference distribution.

The headline statistic studentizes each term of a sign-instrument sum by a
trailing-window volatility estimate, so that conditional heteroskedasticity
of essentially arbitrary form leaves the null distribution standard normal.
Companion statistics: the infeasible variant that plugs in the true
volatility, the general nonlinear-IV statistic, and the conventional
(homoskedastic) least-squares t-ratio kept as the distorted benchmark.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .core import (
    BandwidthSpec,
    DEFAULT_LEVELS,
    DegenerateVolatility,
    InsufficientNullDraws,
    InvalidConfig,
    KernelSpec,
    METHOD_OLS_T,
    METHOD_TAU_NONLINEAR,
    METHOD_TAU_ORACLE,
    METHOD_TAU_SIGMA_HAT,
    NonFinite,
    RegressionSample,
    TestOutcome,
    UNIFORM,
    VolatilityPath,
    ZeroVolatility,
    default_bandwidth,
    default_kernel,
)
from .estimators import (
    GammaTransform,
    nonlinear_iv_fit,
    ols_fit,
    sign_convention,
    volatility_path,
)

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# volatility estimates below this fraction of the largest squared residual
# are treated as degenerate rather than divided by
VOL_FLOOR_FRACTION = 1e-12

# the bandwidth rate band with clean bias/variance guarantees; outside it the
# statistic still computes but a warning is issued
BANDWIDTH_BAND = (0.0, 0.5)


# ---------------------------------------------------------------------------
# standard normal distribution
# ---------------------------------------------------------------------------

def normal_cdf(x: float) -> float:
    """Phi(x) through the complementary error function (double precision)."""
    return 0.5 * math.erfc(-x / _SQRT2)


# Rational approximation coefficients for the inverse normal CDF
# (Acklam's algorithm), refined below by one Halley step.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Inverse of normal_cdf on (0, 1); rational seed plus one Halley step."""
    if not (0.0 < p < 1.0):
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise InvalidConfig(f"quantile level must lie in [0,1], got {p}")
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            (((( _D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((( _A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            ((((( _B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            (((( _D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    # one Halley refinement against the CDF
    err = normal_cdf(x) - p
    u = err * _SQRT2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


class NormalDist:
    """Standard normal reference; stateless."""

    cdf = staticmethod(normal_cdf)
    quantile = staticmethod(normal_quantile)


def two_sided_p(statistic: float) -> float:
    """2 * (1 - Phi(|stat|)), computed as erfc(|stat|/sqrt(2)) for accuracy."""
    if math.isnan(statistic):
        raise InvalidConfig("statistic is NaN")
    return math.erfc(abs(statistic) / _SQRT2)


def _outcome(statistic: float, method: str, levels, diagnostics=None) -> TestOutcome:
    p = two_sided_p(statistic)
    rejected = {float(lv): p <= lv for lv in levels}
    return TestOutcome(
        statistic=float(statistic),
        p_value=p,
        method=method,
        rejected_at=rejected,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def tau_sigma_hat(
    sample: RegressionSample,
    kernel: KernelSpec = None,
    bandwidth=None,
    levels=DEFAULT_LEVELS,
    allow_non_lipschitz: bool = False,
) -> TestOutcome:
    """Feasible sign-IV statistic with estimated trailing-window volatility.

    Each term sgn(x_{t-1}) y_t is divided by the volatility estimate at that
    observation's own normalized time (t-1)/T, built from full-sample
    least-squares residuals; the scaled sum is referred to N(0, 1).

    ``bandwidth`` may be a BandwidthSpec or a plain number (taken as an
    explicit h).  The uniform kernel has no Lipschitz bound and so sits
    outside the smoothness the theory asks of the window; it must be
    enabled explicitly via ``allow_non_lipschitz``.
    """
    kernel = kernel if kernel is not None else default_kernel()
    if kernel.family == UNIFORM and not allow_non_lipschitz:
        raise InvalidConfig(
            "the uniform kernel is not Lipschitz; pass allow_non_lipschitz=True "
            "to use it anyway"
        )
    if bandwidth is None:
        bandwidth = default_bandwidth()
    if isinstance(bandwidth, (int, float)):
        bandwidth = BandwidthSpec.explicit(float(bandwidth))
    h = bandwidth.resolve(sample.T)
    if not (BANDWIDTH_BAND[0] < h < BANDWIDTH_BAND[1]):
        warnings.warn(
            f"bandwidth h={h:.4g} lies outside the ({BANDWIDTH_BAND[0]}, "
            f"{BANDWIDTH_BAND[1]}) band the rate theory covers; proceeding anyway",
            stacklevel=2,
        )

    if not np.any(sample.y):
        return _outcome(0.0, METHOD_TAU_SIGMA_HAT, levels,
                        diagnostics={"beta_hat": 0.0, "bandwidth": h,
                                     "kernel": kernel.family, "volatility": None})

    beta_hat = ols_fit(sample)
    try:
        path = volatility_path(sample, beta_hat, kernel, h)
    except ZeroVolatility as exc:
        raise DegenerateVolatility(str(exc)) from exc
    usq_max = float(np.max((sample.y - beta_hat * sample.x_lag) ** 2))
    if (path.values**2 < VOL_FLOOR_FRACTION * usq_max).any():
        raise DegenerateVolatility(
            "a windowed volatility estimate is vanishingly small relative to "
            "the largest squared residual"
        )
    terms = sign_convention(sample.x_lag) * sample.y / path.values
    stat = float(np.sum(terms)) / math.sqrt(sample.T)
    return _outcome(
        stat,
        METHOD_TAU_SIGMA_HAT,
        levels,
        diagnostics={
            "beta_hat": beta_hat,
            "bandwidth": h,
            "kernel": kernel.family,
            "volatility": path,
        },
    )


def tau_oracle(
    sample: RegressionSample,
    true_vol: VolatilityPath,
    levels=DEFAULT_LEVELS,
) -> TestOutcome:
    """Infeasible variant of the sign-IV statistic using the true volatility.

    An exact finite-sample pivot when the supplied path is the conditional
    standard deviation of y: every scaled term is a martingale difference
    with unit conditional variance.
    """
    if len(true_vol) != sample.T:
        raise InvalidConfig("volatility path length must equal T")
    if (true_vol.values == 0.0).any():
        raise ZeroVolatility("true volatility contains zeros")
    terms = sign_convention(sample.x_lag) * sample.y / true_vol.values
    stat = float(np.sum(terms)) / math.sqrt(sample.T)
    return _outcome(stat, METHOD_TAU_ORACLE, levels,
                    diagnostics={"volatility": true_vol})


def tau_nonlinear(
    sample: RegressionSample,
    gamma: GammaTransform,
    levels=DEFAULT_LEVELS,
) -> TestOutcome:
    """Nonlinear-IV statistic for a general instrument transform.

    Defined as sum gamma(x) x / sqrt(sum gamma(x)^2) times the IV slope; the
    sum gamma(x) x factor cancels against the slope's denominator, so the
    statistic is computed in the cancelled form
    sum gamma(x) y / sqrt(sum gamma(x)^2), which is also numerically exact
    when the uncancelled factor would be zero over zero.  With the sign
    transform this reduces to the unit-volatility oracle statistic.
    """
    g = gamma.apply(sample.x_lag)
    ssq = float(np.sum(g * g))
    if ssq == 0.0:
        raise DegenerateInstrument("instrument transform is identically zero")
    stat = float(np.sum(g * sample.y)) / math.sqrt(ssq)
    denom = float(np.sum(g * sample.x_lag))
    beta = nonlinear_iv_fit(sample, gamma) if denom != 0.0 else None
    return _outcome(stat, METHOD_TAU_NONLINEAR, levels,
                    diagnostics={"beta_tilde": beta, "gamma": gamma.kind})


def ols_t_stat(sample: RegressionSample, levels=DEFAULT_LEVELS) -> TestOutcome:
    """Conventional t-ratio for the no-intercept least-squares slope.

    Homoskedastic standard errors on purpose: this is the textbook statistic
    whose size distortion under persistent regressors and correlated shocks
    the robust statistic is measured against.  Callers wanting the
    mean-adjusted version demean both series first.
    """
    beta_hat = ols_fit(sample)
    resid = sample.y - beta_hat * sample.x_lag
    ssr = float(np.sum(resid * resid))
    sxx = float(np.sum(sample.x_lag * sample.x_lag))
    if ssr == 0.0:
        stat = 0.0 if beta_hat == 0.0 else math.copysign(math.inf, beta_hat)
    else:
        s2 = ssr / (sample.T - 1)
        stat = beta_hat * math.sqrt(sxx / s2)
    return _outcome(stat, METHOD_OLS_T, levels,
                    diagnostics={"beta_hat": beta_hat})


def size_adjusted_cv(null_statistics, level: float) -> float:
    """Empirical critical value: the (1-level) quantile of |null statistic|.

    Uses the ceil((1-level) * n)-th order statistic, so that rejecting when
    |stat| strictly exceeds the value leaves exactly the nominal fraction of
    the defining draws above it (absent ties).
    """
    if not (0.0 < level < 1.0):
        raise InvalidConfig(f"level must lie in (0,1), got {level}")
    stats = np.abs(np.asarray(null_statistics, dtype=np.float64))
    if stats.ndim != 1:
        raise InvalidConfig("null statistics must be one-dimensional")
    if len(stats) < 1000:
        raise InsufficientNullDraws(
            f"need at least 1000 null draws for a usable critical value, "
            f"got {len(stats)}"
        )
    if not np.isfinite(stats).all():
        raise NonFinite("null statistics contain NaN or infinite values")
    k = math.ceil((1.0 - level) * len(stats))
    return float(np.sort(stats)[k - 1])
