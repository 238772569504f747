"""Slope estimators and the trailing-window kernel variance estimator.

The slope estimators share one instrumental form: beta(gamma) =
sum gamma(x_{t-1}) y_t / sum gamma(x_{t-1}) x_{t-1}.  The identity transform
recovers least squares without an intercept, the sign transform recovers the
Cauchy estimator.  All sums are plain ``np.sum`` over the same elementwise
products, so the specialized and general entry points agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    DegenerateInstrument,
    DegenerateRegressor,
    EmptyWindow,
    InvalidConfig,
    KernelSpec,
    RegressionSample,
    VolatilityPath,
    VOL_ESTIMATED,
    ZeroVolatility,
)
from .kernels import weight_row

GAMMA_SIGN = "sign"
GAMMA_IDENTITY = "identity"
GAMMA_CUSTOM = "custom"


def sign_convention(x) -> np.ndarray:
    """sgn with sgn(0) = +1, applied elementwise."""
    return np.where(np.asarray(x, dtype=np.float64) >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class GammaTransform:
    """Instrument transform gamma applied to the lagged predictor."""

    kind: str
    func: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in (GAMMA_SIGN, GAMMA_IDENTITY, GAMMA_CUSTOM):
            raise InvalidConfig(f"unknown transform kind {self.kind!r}")
        if self.kind == GAMMA_CUSTOM and self.func is None:
            raise InvalidConfig("custom transform requires a function")

    @classmethod
    def sign(cls) -> "GammaTransform":
        return cls(GAMMA_SIGN)

    @classmethod
    def identity(cls) -> "GammaTransform":
        return cls(GAMMA_IDENTITY)

    @classmethod
    def custom(cls, func: Callable) -> "GammaTransform":
        return cls(GAMMA_CUSTOM, func)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.kind == GAMMA_SIGN:
            return sign_convention(x)
        if self.kind == GAMMA_IDENTITY:
            return np.asarray(x, dtype=np.float64)
        return np.asarray(self.func(np.asarray(x, dtype=np.float64)), dtype=np.float64)


def nonlinear_iv_fit(sample: RegressionSample, gamma: GammaTransform) -> float:
    """IV slope with instrument gamma(x_{t-1})."""
    gx = gamma.apply(sample.x_lag)
    denom = float(np.sum(gx * sample.x_lag))
    if denom == 0.0:
        raise DegenerateInstrument(
            "instrument is orthogonal to the regressor (sum gamma(x) * x = 0)"
        )
    return float(np.sum(gx * sample.y)) / denom


def ols_fit(sample: RegressionSample) -> float:
    """Least-squares slope through the origin; demean first if you need one."""
    if float(np.sum(sample.x_lag * sample.x_lag)) == 0.0:
        raise DegenerateRegressor("regressor is identically zero")
    return nonlinear_iv_fit(sample, GammaTransform.identity())


def cauchy_fit(sample: RegressionSample) -> float:
    """Sign-instrument slope: sum sgn(x_{t-1}) y_t / sum |x_{t-1}|.

    The denominator written with sgn(x)*x equals sum |x| term by term
    (sgn(0)*0 = 0 = |0|), so this is the general IV fit at gamma = sign.
    """
    if float(np.sum(np.abs(sample.x_lag))) == 0.0:
        raise DegenerateRegressor("regressor is identically zero")
    return nonlinear_iv_fit(sample, GammaTransform.sign())


# ---------------------------------------------------------------------------
# kernel variance estimation
# ---------------------------------------------------------------------------

def volatility_estimate(residuals_sq, r: float, kernel: KernelSpec, h: float) -> float:
    """Kernel-weighted average of squared residuals over the window [r-h, r].

    For r below h there is no full trailing window; the value at r = h is
    used instead, so the estimate is flat on [0, h).
    """
    usq = np.asarray(residuals_sq, dtype=np.float64)
    if usq.ndim != 1:
        raise InvalidConfig("residuals_sq must be one-dimensional")
    if (usq < 0.0).any() or not np.isfinite(usq).all():
        raise InvalidConfig("squared residuals must be finite and non-negative")
    if not (0.0 <= r <= 1.0):
        raise InvalidConfig(f"reference point r={r} outside [0,1]")
    r_eff = max(r, h)
    w = weight_row(kernel, h, r_eff, len(usq))
    total = float(np.sum(w))
    if total <= 0.0:
        raise EmptyWindow(f"window at r={r_eff:.6g} carries no weight")
    value = float(np.sum(usq * w)) / total
    if value == 0.0:
        raise ZeroVolatility(
            f"all residuals in the window ending at r={r_eff:.6g} are zero"
        )
    return value


def volatility_path(
    sample: RegressionSample,
    beta_for_residuals: float,
    kernel: KernelSpec,
    h: float,
) -> VolatilityPath:
    """Estimated volatility (sd units) at r_t = (t-1)/T for t = 1..T.

    Residuals are formed with the supplied slope over the full sample; each
    entry is the square root of the windowed variance estimate at that
    entry's own normalized time.
    """
    T = sample.T
    usq = (sample.y - beta_for_residuals * sample.x_lag) ** 2
    values = np.empty(T)
    boundary = None
    for t in range(1, T + 1):
        r = (t - 1) / T
        if r < h:
            if boundary is None:
                boundary = np.sqrt(volatility_estimate(usq, h, kernel, h))
            values[t - 1] = boundary
        else:
            values[t - 1] = np.sqrt(volatility_estimate(usq, r, kernel, h))
    return VolatilityPath(values=values, kind=VOL_ESTIMATED)


def decompose_volatility(
    sample: RegressionSample,
    true_beta: float,
    true_vol: VolatilityPath,
    true_eps,
    kernel: KernelSpec,
    h: float,
    r: float,
):
    """Split the variance estimate at r into its four diagnostic sources.

    With u_t = y_t - true_beta * x_{t-1} = v_t * eps_t and d = beta_hat -
    true_beta, the windowed average of squared OLS residuals separates into

        avg(v^2)                the volatility signal itself,
        avg(v^2 (eps^2 - 1))    squared-innovation noise around it,
        d^2 avg(x^2)            slope-estimation error, squared term,
        -2 d avg(x u)           slope-estimation error, cross term,

    and the four add back to the windowed residual average (same weights,
    same window) up to floating-point rounding.  Simulation diagnostics
    only: requires the generating slope, volatility path, and innovations.
    """
    eps = np.asarray(true_eps, dtype=np.float64)
    if len(true_vol) != sample.T or len(eps) != sample.T:
        raise InvalidConfig("true volatility and innovations must have length T")
    r_eff = max(r, h)
    w = weight_row(kernel, h, r_eff, sample.T)
    total = float(np.sum(w))
    if total <= 0.0:
        raise EmptyWindow(f"window at r={r_eff:.6g} carries no weight")

    def wavg(z) -> float:
        return float(np.sum(w * z)) / total

    beta_hat = ols_fit(sample)
    d = beta_hat - true_beta
    u = sample.y - true_beta * sample.x_lag
    v2 = true_vol.values**2
    s1 = wavg(v2)
    s2 = wavg(v2 * (eps * eps - 1.0))
    s3 = d * d * wavg(sample.x_lag * sample.x_lag)
    s4 = -2.0 * d * wavg(sample.x_lag * u)
    return s1, s2, s3, s4
