# =========================
# file: core/gridutils.py
# =========================
from __future__ import annotations

from typing import Literal, Tuple

import numpy as np
from scipy import special, stats

Parity = Literal["even", "odd", "none"]


def bracket(x):
    """Japanese bracket <x> = (1 + x^2)^(1/2)."""
    return np.sqrt(1.0 + np.square(x))


def uniform_grid(x_max: float, dx: float) -> np.ndarray:
    n = int(round(x_max / dx))
    return dx * np.arange(n + 1, dtype=float)


def grid_spacing(x: np.ndarray) -> float:
    """Spacing of a uniform grid; raises ValueError if the grid is not uniform."""
    steps = np.diff(x)
    h = float(steps.mean())
    if steps.size == 0 or np.max(np.abs(steps - h)) > 1e-9 * max(h, 1.0):
        raise ValueError("grid is not uniform")
    return h


# -------------------------
# Quadrature
# -------------------------
def simpson_weights(n: int, h: float) -> np.ndarray:
    """
    Composite Simpson weights on n uniform nodes.
    Even n closes the last three intervals with the 3/8 rule.
    """
    if n < 2:
        return np.zeros(n)
    if n == 2:
        return np.array([0.5, 0.5]) * h
    if n == 3:
        return np.array([1.0, 4.0, 1.0]) * h / 3.0

    w = np.zeros(n)
    m = n if n % 2 == 1 else n - 3
    if m >= 3:
        core = np.ones(m)
        core[1:-1:2] = 4.0
        core[2:-1:2] = 2.0
        w[:m] += core * h / 3.0
    if m != n:
        w[n - 4:] += np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 * h / 8.0
    return w


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h, dtype=float)
    if n:
        w[0] *= 0.5
        w[-1] *= 0.5
    return w


# -------------------------
# Stencils
# -------------------------
_C1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_C2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0

# one-sided rows for the first two nodes at a forward boundary
_F1 = (
    np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
    np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0,
)
_F2 = (
    np.array([35.0, -104.0, 114.0, -56.0, 11.0]) / 12.0,
    np.array([11.0, -20.0, 6.0, 4.0, -1.0]) / 12.0,
)


def _left_ghosts(values: np.ndarray, parity: Parity) -> np.ndarray:
    ghosts = values[2:0:-1]
    if parity == "odd":
        ghosts = -ghosts
    return ghosts


def derivative(values, h: float, order: int = 1, parity: Parity = "even") -> np.ndarray:
    """
    Fourth-order finite difference along axis 0.

    The left end uses the reflection implied by `parity` (ghost nodes at -x);
    parity="none" and the right end use one-sided five-point rows.
    """
    f = np.asarray(values)
    n = f.shape[0]
    if n < 5:
        raise ValueError("need at least 5 nodes for fourth-order stencils")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")

    central = _C1 if order == 1 else _C2
    forward = _F1 if order == 1 else _F2
    sign = -1.0 if order == 1 else 1.0
    scale = h ** order

    if parity == "none":
        padded = f
        offset = 0
    else:
        padded = np.concatenate([_left_ghosts(f, parity), f], axis=0)
        offset = 2

    out = np.zeros_like(f, dtype=np.result_type(f.dtype, float))
    m = padded.shape[0]
    body = sum(central[k] * padded[k:m - 4 + k] for k in range(5))
    # body[j] is centred at padded index j + 2, i.e. original index j + 2 - offset
    start = 2 - offset
    out[start:start + body.shape[0]] = body

    if parity == "none":
        out[0] = sum(forward[0][k] * f[k] for k in range(5))
        out[1] = sum(forward[1][k] * f[k] for k in range(5))
    out[n - 1] = sign * sum(forward[0][k] * f[n - 1 - k] for k in range(5))
    out[n - 2] = sign * sum(forward[1][k] * f[n - 1 - k] for k in range(5))
    return out / scale


def one_sided_slope(values, h: float, n_points: int = 13) -> float:
    """
    One-sided estimate of f'(0) from the first n_points samples, exact for
    polynomials of degree n_points - 1. Weights in closed form:
    w_k = (-1)^(k-1) C(N, k) / k for k >= 1, w_0 = -H_N.
    """
    f = np.asarray(values[:n_points], dtype=float)
    n = f.size - 1
    k = np.arange(1, n + 1)
    weights = np.empty(n + 1)
    weights[1:] = (-1.0) ** (k - 1) * special.comb(n, k) / k
    weights[0] = -np.sum(1.0 / k)
    return float(weights @ f) / h


# -------------------------
# Fits
# -------------------------
def power_law_fit(t, y) -> Tuple[float, float, float]:
    """
    Least squares slope of log y against log <t>.

    Returns (slope, intercept, 95% half-width of the slope).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    lx = np.log(bracket(t[keep]))
    ly = np.log(y[keep])
    if lx.size < 3:
        return float("nan"), float("nan"), float("inf")
    fit = stats.linregress(lx, ly)
    half = float(stats.t.ppf(0.975, lx.size - 2) * fit.stderr)
    return float(fit.slope), float(fit.intercept), half
