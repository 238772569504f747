"""Simulated data-generating processes for size and power experiments.

Two families:

* discrete time: y_t = (beta_bar/T) x_{t-1} + sigma_eps_t eps_t with an
  AR(1) predictor x_t = (1 - kappa_bar/T) x_{t-1} + sigma_eta_t eta_t,
  innovations jointly normal with correlation rho (default -0.98), and the
  volatility profile constant, single upward break, or GARCH(1,1);
* continuous time: an Euler discretization at daily step delta = 1/252 of a
  predictive diffusion with the same local-to-unity predictor, observed on a
  monthly grid (stride 21, so 12 observations per year), with constant,
  breaking, geometric-Brownian, or regime-switching spot volatility.

Every replication draws from its own deterministic substream, and the
single-path entry points run the same vectorized code as the Monte Carlo
batch paths (a batch of one), so results never depend on how replications
are grouped or distributed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import (
    InvalidConfig,
    RegressionSample,
    Seed,
    VOL_TRUE,
    VolatilityPath,
    VolatilityUnderflow,
    as_generator,
)

GARCH_BURN_IN = 200
GBM_VARIANCE_FLOOR = 1e-8
MONTH_STRIDE = 21

SAMPLING_MONTHLY = "monthly"
SAMPLING_DAILY = "daily"


# ---------------------------------------------------------------------------
# volatility model configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantVol:
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise InvalidConfig("sigma must be positive")

    @property
    def label(self) -> str:
        return "cnst"


@dataclass(frozen=True)
class BreakVol:
    """Volatility sigma0 before the break fraction, sigma1 from it onward."""

    sigma0: float = 1.0
    sigma1: float = 4.0
    break_frac: float = 0.8

    def __post_init__(self):
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise InvalidConfig("break volatilities must be positive")
        if not (0.0 < self.break_frac < 1.0):
            raise InvalidConfig("break fraction must lie in (0,1)")

    @property
    def label(self) -> str:
        return "sb"


@dataclass(frozen=True)
class GarchVol:
    """GARCH(1,1) variance recursion 1 + alpha*(shock)^2 + beta*var."""

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvalidConfig("GARCH coefficients must be non-negative")

    @property
    def label(self) -> str:
        name = "arch" if self.beta == 0.0 else "igarch" if self.alpha + self.beta >= 1.0 else "garch"
        if self.beta == 0.0:
            return f"{name}-{self.alpha:g}"
        return f"{name}-{self.alpha:g}-{self.beta:g}"


@dataclass(frozen=True)
class GbmVol:
    """Geometric Brownian variance with drift (omega^2/2T) and an optional
    squared diffusion coefficient (omega^2 instead of omega per root-time)."""

    omega_bar: float = 9.0
    rho_w1z: float = -0.4
    squared_diffusion: bool = False

    def __post_init__(self):
        if self.omega_bar <= 0:
            raise InvalidConfig("omega_bar must be positive")
        if not (-1.0 < self.rho_w1z < 1.0):
            raise InvalidConfig("|rho_w1z| must be below one")

    @property
    def label(self) -> str:
        return "gbm-alt" if self.squared_diffusion else "gbm"


@dataclass(frozen=True)
class RegimeVol:
    """Two-state volatility chain whose transition matrix relaxes toward its
    limit at exponential rate lam in scaled time."""

    lam: float = 60.0
    sigma0: float = 1.0
    sigma1: float = 4.0

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidConfig("decay rate must be non-negative")
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise InvalidConfig("regime volatilities must be positive")

    @property
    def label(self) -> str:
        return "rs"


# ---------------------------------------------------------------------------
# DGP configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteDgpConfig:
    T: int
    beta_bar: float = 0.0
    kappa_bar: float = 0.0
    rho_eps_eta: float = -0.98
    vol_model: object = field(default_factory=ConstantVol)
    garch_raw_innovation: bool = False

    def __post_init__(self):
        if self.T < 10:
            raise InvalidConfig(f"T must be at least 10, got {self.T}")
        if self.kappa_bar < 0:
            raise InvalidConfig("kappa_bar must be non-negative")
        if not (-1.0 < self.rho_eps_eta < 1.0):
            raise InvalidConfig("|rho_eps_eta| must be below one")
        if not isinstance(self.vol_model, (ConstantVol, BreakVol, GarchVol)):
            raise InvalidConfig(
                f"discrete volatility model must be constant, break, or GARCH, "
                f"got {type(self.vol_model).__name__}"
            )

    @property
    def label(self) -> str:
        return self.vol_model.label


@dataclass(frozen=True)
class ContinuousDgpConfig:
    years: int
    delta: float = 1.0 / 252.0
    beta_bar: float = 0.0
    kappa_bar: float = 0.0
    rho_w1w2: float = -0.98
    vol_model: object = field(default_factory=ConstantVol)
    sampling: str = SAMPLING_MONTHLY
    stride: int = MONTH_STRIDE

    def __post_init__(self):
        if self.years < 1:
            raise InvalidConfig("years must be a positive count")
        if self.delta <= 0:
            raise InvalidConfig("delta must be positive")
        steps = self.years / self.delta
        if abs(steps - round(steps)) > 1e-9:
            raise InvalidConfig("years/delta must be an integer step count")
        if self.kappa_bar < 0:
            raise InvalidConfig("kappa_bar must be non-negative")
        if not (-1.0 < self.rho_w1w2 < 1.0):
            raise InvalidConfig("|rho_w1w2| must be below one")
        if self.sampling not in (SAMPLING_MONTHLY, SAMPLING_DAILY):
            raise InvalidConfig(f"unknown sampling mode {self.sampling!r}")
        if self.stride < 1:
            raise InvalidConfig("stride must be positive")
        if not isinstance(
            self.vol_model, (ConstantVol, BreakVol, GbmVol, RegimeVol)
        ):
            raise InvalidConfig(
                f"continuous volatility model must be constant, break, GBM, or "
                f"regime switching, got {type(self.vol_model).__name__}"
            )

    @property
    def n_steps(self) -> int:
        return round(self.years / self.delta)

    @property
    def label(self) -> str:
        return self.vol_model.label


@dataclass(frozen=True)
class SimulatedDataset:
    """One simulated path with the ground truth the tests cannot see."""

    sample: RegressionSample
    true_vol_y: VolatilityPath
    true_eps: np.ndarray
    x_full: np.ndarray  # predictor levels including the final, unused value
    meta: dict


# ---------------------------------------------------------------------------
# draws
# ---------------------------------------------------------------------------

def correlated_pair(rng: np.random.Generator, rho: float, size=None):
    """(z1, z2) standard normal with corr(z1, z2) = rho."""
    if not (-1.0 < rho < 1.0):
        raise InvalidConfig(f"|rho| must be below one, got {rho}")
    z1 = rng.standard_normal(size)
    w = rng.standard_normal(size)
    return z1, rho * z1 + math.sqrt(1.0 - rho * rho) * w


def _stack_normal_pairs(rngs: Sequence[np.random.Generator], n: int):
    """Per-replication draws (z1 then w, each of length n), stacked by row."""
    R = len(rngs)
    z1 = np.empty((R, n))
    w = np.empty((R, n))
    for i, rng in enumerate(rngs):
        z1[i] = rng.standard_normal(n)
        w[i] = rng.standard_normal(n)
    return z1, w


# ---------------------------------------------------------------------------
# discrete time
# ---------------------------------------------------------------------------

def _garch_sigma_paths(eps, eta, alpha, beta, raw, burn):
    """Volatility (sd) paths for both innovation sequences.

    The recorded path starts after `burn` presample steps whose states carry
    forward.  With `raw` the recursion squares the standardized innovation
    itself; otherwise the scaled shock sigma_{t-1} * eps_{t-1}.
    """
    R, n = eps.shape
    init = 1.0 / (1.0 - alpha - beta) if alpha + beta < 1.0 else 1.0
    ve = np.full(R, init)
    vn = np.full(R, init)
    T = n - burn
    se = np.empty((R, T))
    sn = np.empty((R, T))
    for t in range(n):
        sqrt_ve = np.sqrt(ve)
        sqrt_vn = np.sqrt(vn)
        if t >= burn:
            se[:, t - burn] = sqrt_ve
            sn[:, t - burn] = sqrt_vn
        shock_e = eps[:, t] if raw else sqrt_ve * eps[:, t]
        shock_n = eta[:, t] if raw else sqrt_vn * eta[:, t]
        ve = 1.0 + alpha * shock_e * shock_e + beta * ve
        vn = 1.0 + alpha * shock_n * shock_n + beta * vn
    return se, sn


def _simulate_discrete_batch(config: DiscreteDgpConfig, rngs):
    """(y, x_lag, sigma_eps, eps, x_full) matrices, one replication per row."""
    T = config.T
    vol = config.vol_model
    burn = GARCH_BURN_IN if isinstance(vol, GarchVol) else 0
    z1, w = _stack_normal_pairs(rngs, burn + T)
    rho = config.rho_eps_eta
    eps_all = z1
    eta_all = rho * z1 + math.sqrt(1.0 - rho * rho) * w

    if isinstance(vol, ConstantVol):
        se = np.full((len(rngs), T), vol.sigma)
        sn = se
    elif isinstance(vol, BreakVol):
        frac = np.arange(1, T + 1, dtype=np.float64) / T
        profile = np.where(frac >= vol.break_frac, vol.sigma1, vol.sigma0)
        se = np.broadcast_to(profile, (len(rngs), T)).copy()
        sn = se
    else:
        se, sn = _garch_sigma_paths(
            eps_all, eta_all, vol.alpha, vol.beta,
            config.garch_raw_innovation, burn,
        )

    eps = eps_all[:, burn:]
    eta = eta_all[:, burn:]
    u = se * eps
    e = sn * eta
    rho_x = 1.0 - config.kappa_bar / T
    x_full = np.empty((len(rngs), T + 1))
    x_full[:, 0] = 0.0
    for t in range(T):
        x_full[:, t + 1] = rho_x * x_full[:, t] + e[:, t]
    x_lag = x_full[:, :T]
    y = (config.beta_bar / T) * x_lag + u
    return y, x_lag, se, eps, x_full


def simulate_discrete(config: DiscreteDgpConfig, seed) -> SimulatedDataset:
    """One replication of the discrete-time process (a batch of one)."""
    rng = as_generator(seed)
    y, x_lag, se, eps, x_full = _simulate_discrete_batch(config, [rng])
    return SimulatedDataset(
        sample=RegressionSample(y=y[0], x_lag=x_lag[0]),
        true_vol_y=VolatilityPath(values=se[0], kind=VOL_TRUE),
        true_eps=eps[0].copy(),
        x_full=x_full[0].copy(),
        meta={"kind": "discrete", "config": config},
    )


# ---------------------------------------------------------------------------
# continuous time
# ---------------------------------------------------------------------------

def _continuous_spot_vol(config: ContinuousDgpConfig, rngs, w1):
    """Spot volatility path sigma_k for each day, one replication per row.

    Any extra randomness a model needs (the variance diffusion's driver, the
    chain's uniforms) is drawn here, after the two price-equation normals,
    so the per-replication draw order stays fixed across models.
    """
    vol = config.vol_model
    R = len(rngs)
    n = config.n_steps
    Ty = float(config.years)
    delta = config.delta

    if isinstance(vol, ConstantVol):
        return np.full((R, n), vol.sigma)

    if isinstance(vol, BreakVol):
        frac = np.arange(n, dtype=np.float64) / n
        profile = np.where(frac >= vol.break_frac, vol.sigma1, vol.sigma0)
        return np.broadcast_to(profile, (R, n)).copy()

    if isinstance(vol, GbmVol):
        g3 = np.empty((R, n))
        for i, rng in enumerate(rngs):
            g3[i] = rng.standard_normal(n)
        rho = vol.rho_w1z
        z = rho * w1 + math.sqrt(1.0 - rho * rho) * g3
        nu = (vol.omega_bar**2 if vol.squared_diffusion else vol.omega_bar) / math.sqrt(Ty)
        drift = 0.5 * vol.omega_bar**2 / Ty
        sig = np.empty((R, n))
        var = np.ones(R)
        sqrt_delta = math.sqrt(delta)
        for k in range(n):
            sig[:, k] = np.sqrt(var)
            var = np.maximum(
                var * (1.0 + drift * delta + nu * sqrt_delta * z[:, k]),
                GBM_VARIANCE_FLOOR,
            )
        if not np.isfinite(sig).all():
            raise VolatilityUnderflow("variance diffusion became non-finite")
        return sig

    # regime switching: start from the invariant law of the limiting matrix,
    # then step the chain daily with the time-t transition probabilities
    u0 = np.empty(R)
    us = np.empty((R, n))
    for i, rng in enumerate(rngs):
        u0[i] = rng.random()
        us[i] = rng.random(n)
    state = (u0 < 0.2).astype(np.float64)
    sig = np.empty((R, n))
    span = vol.sigma1 - vol.sigma0
    for k in range(n):
        sig[:, k] = vol.sigma0 + span * state
        decay = math.exp(-vol.lam * (k * delta) / Ty)
        p_up = np.where(state == 1.0, 0.2 + 0.8 * decay, 0.2 * (1.0 - decay))
        state = (us[:, k] < p_up).astype(np.float64)
    return sig


def _simulate_continuous_batch(config: ContinuousDgpConfig, rngs):
    """(y, x_lag, vol, eps, x_full) matrices at the configured sampling."""
    n = config.n_steps
    Ty = float(config.years)
    delta = config.delta
    sqrt_delta = math.sqrt(delta)
    R = len(rngs)

    g1, g2 = _stack_normal_pairs(rngs, n)
    rho = config.rho_w1w2
    w1 = g1
    w2 = rho * g1 + math.sqrt(1.0 - rho * rho) * g2
    sig = _continuous_spot_vol(config, rngs, w1)

    a = 1.0 - (config.kappa_bar / Ty) * delta
    shock_x = sig * sqrt_delta * w2
    X = np.empty((R, n + 1))
    X[:, 0] = 0.0
    for k in range(n):
        X[:, k + 1] = a * X[:, k] + shock_x[:, k]

    drift_y = (config.beta_bar / Ty) * delta * X[:, :n]
    diff_y = sig * sqrt_delta * w1

    if config.sampling == SAMPLING_DAILY:
        y = drift_y + diff_y
        vol_step = sig * sqrt_delta
        if (vol_step <= 0.0).any() or not np.isfinite(vol_step).all():
            raise VolatilityUnderflow("daily volatility path degenerate")
        return y, X[:, :n], vol_step, w1.copy(), X

    stride = config.stride
    m = n // stride
    used = m * stride
    y = (drift_y[:, :used] + diff_y[:, :used]).reshape(R, m, stride).sum(axis=2)
    var_m = (sig[:, :used] ** 2 * delta).reshape(R, m, stride).sum(axis=2)
    vol_m = np.sqrt(var_m)
    if (vol_m <= 0.0).any() or not np.isfinite(vol_m).all():
        raise VolatilityUnderflow("aggregated volatility path degenerate")
    drift_m = drift_y[:, :used].reshape(R, m, stride).sum(axis=2)
    eps_m = (y - drift_m) / vol_m
    x_sampled = X[:, 0 : used + 1 : stride]
    return y, x_sampled[:, :m], vol_m, eps_m, x_sampled


def simulate_continuous(config: ContinuousDgpConfig, seed) -> SimulatedDataset:
    """One replication of the continuous-time process (a batch of one)."""
    rng = as_generator(seed)
    y, x_lag, vol, eps, x_full = _simulate_continuous_batch(config, [rng])
    return SimulatedDataset(
        sample=RegressionSample(y=y[0], x_lag=x_lag[0]),
        true_vol_y=VolatilityPath(values=vol[0], kind=VOL_TRUE),
        true_eps=eps[0].copy(),
        x_full=x_full[0].copy(),
        meta={"kind": "continuous", "config": config},
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def write_dataset_csv(dataset: SimulatedDataset, path) -> None:
    """Write t,y,x,true_vol rows; row 0 carries the initial predictor level.

    The y and true_vol entries of row 0 pad with 0 and the first volatility
    value so all columns align; reading the file back through build_sample
    reconstructs exactly the dataset's regression pairs.
    """
    y = dataset.sample.y
    vol = dataset.true_vol_y.values
    x_full = dataset.x_full
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "y", "x", "true_vol"])
        writer.writerow([0, _fmt(0.0), _fmt(x_full[0]), _fmt(vol[0])])
        for t in range(1, len(y) + 1):
            writer.writerow([t, _fmt(y[t - 1]), _fmt(x_full[t]), _fmt(vol[t - 1])])


def _fmt(value: float) -> str:
    return repr(float(value))
