"""One-sided kernel evaluation on trailing windows.

All kernels live on [0, 1] and weight only past-or-current observations:
the weight on index t at reference point r is K((r - t/T)/h), which is zero
whenever t/T > r.  Flipping any observation that lies ahead of r can never
change a kernel average taken at r.
"""

from __future__ import annotations

import numpy as np

from .core import (
    EPANECHNIKOV,
    QUARTIC,
    UNIFORM,
    EmptyWindow,
    InvalidConfig,
    KernelSpec,
)


def kernel_value(spec: KernelSpec, s, squared: bool = False):
    """Evaluate K(s) (or K(s)^2), exactly zero outside [0, 1].

    Accepts scalars or arrays; the support check treats [0, 1] as closed,
    so the uniform kernel is 1 at both endpoints while the polynomial
    families vanish there.
    """
    s_arr = np.asarray(s, dtype=np.float64)
    if spec.family == EPANECHNIKOV:
        vals = 6.0 * s_arr * (1.0 - s_arr)
    elif spec.family == QUARTIC:
        vals = 30.0 * s_arr**2 * (1.0 - s_arr) ** 2
    elif spec.family == UNIFORM:
        vals = np.ones_like(s_arr)
    else:  # pragma: no cover - KernelSpec validates the family
        raise InvalidConfig(f"unknown kernel family {spec.family!r}")
    if squared:
        vals = vals * vals
    out = np.where((s_arr >= 0.0) & (s_arr <= 1.0), vals, 0.0)
    if np.isscalar(s) or getattr(s, "ndim", 1) == 0:
        return float(out)
    return out


def weight_row(spec: KernelSpec, h: float, r: float, T: int, squared: bool = False) -> np.ndarray:
    """Weights w_t = K((r - t/T)/h) for t = 1..T.

    Positive weight requires t/T in [r-h, r] (both endpoints included).
    Raises EmptyWindow when r >= h yet no index receives positive weight,
    which signals that h*T is too small for the grid.
    """
    if not (0.0 <= r <= 1.0):
        raise InvalidConfig(f"reference point r={r} outside [0,1]")
    # raw evaluation tolerates the full-support window h = 1; estimation
    # entry points are stricter (BandwidthSpec requires h < 1)
    if not (0.0 < h <= 1.0):
        raise InvalidConfig(f"bandwidth h={h} outside (0,1]")
    t_over_T = np.arange(1, T + 1, dtype=np.float64) / T
    w = kernel_value(spec, (r - t_over_T) / h, squared=squared)
    if r >= h and not (w > 0.0).any():
        raise EmptyWindow(
            f"no observation falls in the window [r-h, r] = [{r - h:.6g}, {r:.6g}] "
            f"with positive weight (h*T = {h * T:.3g})"
        )
    return w


def riemann_sum_error(spec: KernelSpec, h: float, T: int, grid) -> float:
    """Worst normalized-sum deviation sup_r |(hT)^{-1} sum_t K_h(r - t/T) - 1|.

    The kernel integrates to one, so the normalized weight sum over a full
    window should be close to one; this measures how close, over a grid of
    reference points that all admit full windows (grid within [h, 1]).
    """
    grid_arr = np.asarray(grid, dtype=np.float64)
    if grid_arr.ndim == 0:
        grid_arr = grid_arr[None]
    if (grid_arr < h).any() or (grid_arr > 1.0).any():
        raise InvalidConfig("grid points must lie in [h, 1] (full windows only)")
    worst = 0.0
    for r in grid_arr:
        s = float(np.sum(weight_row(spec, h, float(r), T))) / (h * T)
        worst = max(worst, abs(s - 1.0))
    return worst


def kernel_l2(spec: KernelSpec) -> float:
    """Exact integral of K^2 over [0, 1] for each family."""
    if spec.family == EPANECHNIKOV:
        return 1.2
    if spec.family == QUARTIC:
        return 10.0 / 7.0
    return 1.0
