"""Shared domain types, validation, index conventions, and deterministic seeding.

Index conventions used throughout the package:

* A regression sample pairs a response ``y_t`` with the lagged predictor
  ``x_{t-1}``, for t = 1..T.  The ``y`` vector holds (y_1, ..., y_T) and the
  ``x_lag`` vector holds (x_0, ..., x_{T-1}); entry ``i`` (0-based) of both
  arrays belongs to the same regression pair.
* Normalized time for volatility purposes is r_t = (t-1)/T, so the weight a
  kernel places on an observation depends only on how far in the (scaled)
  past it lies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

class PredrobustError(Exception):
    """Base class for all package-specific errors."""


class LengthMismatch(PredrobustError):
    pass


class TooShort(PredrobustError):
    pass


class NonFinite(PredrobustError):
    pass


class InvalidConfig(PredrobustError):
    pass


class EmptyWindow(PredrobustError):
    """A kernel window contains no positively-weighted observations."""


class ZeroVolatility(PredrobustError):
    """All in-window squared residuals are zero."""


class DegenerateRegressor(PredrobustError):
    pass


class DegenerateInstrument(PredrobustError):
    pass


class DegenerateVolatility(PredrobustError):
    """An estimated volatility is too close to zero to divide by."""


class InsufficientNullDraws(PredrobustError):
    pass


class VolatilityUnderflow(PredrobustError):
    pass


class ExcessiveFailures(PredrobustError):
    """Too many Monte Carlo replications failed; results would be biased."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _as_float_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidConfig(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# regression sample
# ---------------------------------------------------------------------------

MIN_T = 4


@dataclass(frozen=True)
class RegressionSample:
    """A validated (y_t, x_{t-1}) sample of effective size T.

    Both arrays are stored read-only; T >= 4 and every value finite.
    """

    y: np.ndarray
    x_lag: np.ndarray

    def __post_init__(self):
        y = _as_float_vector(self.y, "y")
        x = _as_float_vector(self.x_lag, "x_lag")
        if len(y) != len(x):
            raise LengthMismatch(
                f"y has {len(y)} entries but x_lag has {len(x)}"
            )
        if len(y) < MIN_T:
            raise TooShort(f"need at least {MIN_T} pairs, got {len(y)}")
        if not (np.isfinite(y).all() and np.isfinite(x).all()):
            raise NonFinite("sample contains NaN or infinite values")
        object.__setattr__(self, "y", _freeze(y))
        object.__setattr__(self, "x_lag", _freeze(x))

    @property
    def T(self) -> int:
        return len(self.y)


def build_sample(raw_y, raw_x) -> RegressionSample:
    """Align two contemporaneous observed series into lagged regression pairs.

    Row t of the raw input carries (y_t, x_t) at the same date.  The
    regression pairs y_t with the previous period's x, so the first raw row
    contributes only its x value and the last row only its y value:
    T = N - 1 pairs from N input rows.
    """
    y = _as_float_vector(raw_y, "raw_y")
    x = _as_float_vector(raw_x, "raw_x")
    if len(y) != len(x):
        raise LengthMismatch(f"raw_y has {len(y)} rows but raw_x has {len(x)}")
    if len(y) < MIN_T + 1:
        raise TooShort(
            f"need at least {MIN_T + 1} rows to form {MIN_T} pairs, got {len(y)}"
        )
    if not (np.isfinite(y).all() and np.isfinite(x).all()):
        raise NonFinite("raw series contain NaN or infinite values")
    return RegressionSample(y=y[1:], x_lag=x[:-1])


def recursive_demean(sample: RegressionSample) -> RegressionSample:
    """Subtract running means of strictly-past observations from both series.

    The demeaned predictor entry paired with y_t is
    x_{t-1} - mean(x_0..x_{t-2}), and the demeaned response is
    y_t - mean(y_1..y_{t-1}).  Only indices before t enter either mean, so a
    sign instrument built from the demeaned predictor remains a function of
    information available at t-1.  The first pair has no past to average
    over and is dropped: the output is one pair shorter.
    """
    if sample.T < MIN_T + 1:
        raise TooShort(
            f"need at least {MIN_T + 1} pairs so the demeaned sample keeps "
            f"{MIN_T}, got {sample.T}"
        )
    y, x = sample.y, sample.x_lag
    idx = np.arange(1, sample.T, dtype=np.float64)
    run_mean_y = np.cumsum(y)[:-1] / idx
    run_mean_x = np.cumsum(x)[:-1] / idx
    return RegressionSample(y=y[1:] - run_mean_y, x_lag=x[1:] - run_mean_x)


# ---------------------------------------------------------------------------
# kernels and bandwidths (types only; evaluation lives in kernels.py)
# ---------------------------------------------------------------------------

EPANECHNIKOV = "epanechnikov"
QUARTIC = "quartic"
UNIFORM = "uniform"

_KERNEL_FAMILIES = (EPANECHNIKOV, QUARTIC, UNIFORM)

# sup|K'| over the support; the uniform kernel jumps at its endpoints and
# has no finite Lipschitz constant.
_LIPSCHITZ = {
    EPANECHNIKOV: 6.0,
    QUARTIC: 10.0 / math.sqrt(3.0),
    UNIFORM: math.inf,
}


@dataclass(frozen=True)
class KernelSpec:
    """A one-sided kernel supported on [0, 1] that integrates to one."""

    family: str
    lipschitz_bound: float = field(default=0.0)

    def __post_init__(self):
        if self.family not in _KERNEL_FAMILIES:
            raise InvalidConfig(
                f"unknown kernel family {self.family!r}; "
                f"choose one of {_KERNEL_FAMILIES}"
            )
        if self.lipschitz_bound == 0.0:
            object.__setattr__(self, "lipschitz_bound", _LIPSCHITZ[self.family])
        if self.lipschitz_bound <= 0:
            raise InvalidConfig("lipschitz_bound must be positive")

    @property
    def is_lipschitz(self) -> bool:
        return math.isfinite(self.lipschitz_bound)

    @classmethod
    def epanechnikov(cls) -> "KernelSpec":
        return cls(EPANECHNIKOV)

    @classmethod
    def quartic(cls) -> "KernelSpec":
        return cls(QUARTIC)

    @classmethod
    def uniform(cls) -> "KernelSpec":
        return cls(UNIFORM)


def default_kernel() -> KernelSpec:
    return KernelSpec.epanechnikov()


@dataclass(frozen=True)
class BandwidthSpec:
    """Either an explicit bandwidth h or a rate rule h = c * T**(-alpha).

    The resolved value must satisfy 0 < h < 1 and h*T >= 2 so that every
    full window spans at least two observations.
    """

    h: Optional[float] = None
    c: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        explicit = self.h is not None
        rated = self.c is not None or self.alpha is not None
        if explicit == rated:
            raise InvalidConfig(
                "give either an explicit h or a (c, alpha) rate rule, not both"
            )
        if explicit:
            if not (0.0 < self.h < 1.0):
                raise InvalidConfig(f"explicit bandwidth must lie in (0,1), got {self.h}")
        else:
            if self.c is None or self.alpha is None:
                raise InvalidConfig("rate rule needs both c and alpha")
            if self.c <= 0:
                raise InvalidConfig(f"rate constant must be positive, got {self.c}")
            if not (0.0 < self.alpha < 0.5):
                raise InvalidConfig(
                    f"rate exponent must lie in (0, 1/2), got {self.alpha}"
                )

    @classmethod
    def explicit(cls, h: float) -> "BandwidthSpec":
        return cls(h=h)

    @classmethod
    def rate(cls, c: float, alpha: float) -> "BandwidthSpec":
        return cls(c=c, alpha=alpha)

    def resolve(self, T: int) -> float:
        """Concrete bandwidth for a sample of size T."""
        if self.h is not None:
            h = self.h
        else:
            h = self.c * float(T) ** (-self.alpha)
        if not (0.0 < h < 1.0):
            raise InvalidConfig(f"resolved bandwidth {h:.6g} outside (0,1) at T={T}")
        if h * T < 2.0:
            raise InvalidConfig(
                f"resolved bandwidth {h:.6g} puts fewer than two observations "
                f"per window at T={T}"
            )
        return h


def default_bandwidth() -> BandwidthSpec:
    """h = T**(-1/3): midpoint-ish exponent of the admissible rate band."""
    return BandwidthSpec.rate(1.0, 1.0 / 3.0)


# ---------------------------------------------------------------------------
# volatility paths and test outcomes
# ---------------------------------------------------------------------------

VOL_ESTIMATED = "estimated"
VOL_TRUE = "true_simulated"


@dataclass(frozen=True)
class VolatilityPath:
    """Volatility (standard-deviation units) evaluated at r_t = (t-1)/T."""

    values: np.ndarray
    kind: str = VOL_ESTIMATED

    def __post_init__(self):
        v = _as_float_vector(self.values, "values")
        if self.kind not in (VOL_ESTIMATED, VOL_TRUE):
            raise InvalidConfig(f"unknown volatility path kind {self.kind!r}")
        if not np.isfinite(v).all() or (v <= 0.0).any():
            raise InvalidConfig("volatility path must be strictly positive and finite")
        object.__setattr__(self, "values", _freeze(v))

    def __len__(self) -> int:
        return len(self.values)


METHOD_TAU_SIGMA_HAT = "tau_sigma_hat"
METHOD_TAU_ORACLE = "tau_oracle"
METHOD_TAU_NONLINEAR = "tau_nonlinear_iv"
METHOD_OLS_T = "ols_t"

DEFAULT_LEVELS = (0.01, 0.05, 0.10)


@dataclass(frozen=True)
class TestOutcome:
    """Result of one test: statistic, two-sided normal p-value, decisions."""

    statistic: float
    p_value: float
    method: str
    rejected_at: dict
    diagnostics: Optional[dict] = None

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise InvalidConfig(f"p-value {self.p_value} outside [0,1]")


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Seed:
    """Master seed plus a splittable derivation of per-replication substreams.

    Identical (master, replication, cell) always yields the same generator
    state, no matter how replications are distributed over workers.
    """

    master: int

    def __post_init__(self):
        if not (0 <= int(self.master) < 2**64):
            raise InvalidConfig("master seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "master", int(self.master))

    def substream(self, replication: int = 0, cell: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence((self.master, int(replication), int(cell)))
        return np.random.Generator(np.random.PCG64(seq))


def as_generator(seed) -> np.random.Generator:
    """Accept a Seed, an integer, or a ready Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.substream()
    return Seed(int(seed)).substream()
