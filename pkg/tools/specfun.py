# =========================
# file: tools/specfun.py
# =========================
"""
Order-zero Bessel functions and the normalised Hankel solutions

    h_±(z) = sqrt(pi/2) e^{±i pi/4} sqrt(z) (J0(z) ± i Y0(z)),

which solve -f'' - f/(4x^2) = f and behave like e^{±iz} for large z.

Small arguments use the ascending series, large arguments the Hankel
asymptotic expansion truncated at its smallest term. Order-one functions are
kept internal to this module's callers that need derivatives (J0' = -J1,
Y0' = -Y1).
"""
from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from core.errors import DomainError
from core.models import EULER_GAMMA

LOGGER = logging.getLogger(__name__)

BRANCH_SWITCH = 14.0
SERIES_TERMS = 80
ASYMPTOTIC_TERMS = 40

_SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


# -------------------------
# Helpers
# -------------------------
def _prepare(z, allow_zero: bool) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(~np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    if allow_zero:
        if np.any(arr < 0):
            raise DomainError("Bessel argument must be nonnegative")
    elif np.any(arr <= 0):
        raise DomainError("logarithmic singularity at z = 0")
    return arr, scalar


def _finish(values: np.ndarray, scalar: bool):
    return values[0].item() if scalar else values


def _harmonic(k: int) -> float:
    return float(np.sum(1.0 / np.arange(1, k + 1))) if k > 0 else 0.0


# -------------------------
# Ascending series
# -------------------------
def _series_j0(z: np.ndarray) -> np.ndarray:
    q = 0.25 * z * z
    term = np.ones_like(z)
    total = term.copy()
    for k in range(1, SERIES_TERMS):
        term = term * (-q) / (k * k)
        total += term
    return total


def _series_j1(z: np.ndarray) -> np.ndarray:
    q = 0.25 * z * z
    term = 0.5 * z
    total = term.copy()
    for k in range(1, SERIES_TERMS):
        term = term * (-q) / (k * (k + 1))
        total += term
    return total


def _series_y0(z: np.ndarray) -> np.ndarray:
    q = 0.25 * z * z
    term = np.ones_like(z)
    j0 = term.copy()
    tail = np.zeros_like(z)
    for k in range(1, SERIES_TERMS):
        term = term * (-q) / (k * k)
        j0 += term
        tail += _harmonic(k) * term
    return (2.0 / np.pi) * ((np.log(0.5 * z) + EULER_GAMMA) * j0 - tail)


def _series_y1(z: np.ndarray) -> np.ndarray:
    q = 0.25 * z * z
    term = 0.5 * z
    j1 = term.copy()
    tail = term * (_harmonic(0) + _harmonic(1))
    for k in range(1, SERIES_TERMS):
        term = term * (-q) / (k * (k + 1))
        j1 += term
        tail += (_harmonic(k) + _harmonic(k + 1)) * term
    return (
        (2.0 / np.pi) * (np.log(0.5 * z) + EULER_GAMMA) * j1
        - 2.0 / (np.pi * z)
        - tail / np.pi
    )


# -------------------------
# Hankel asymptotic expansion
# -------------------------
def _asymptotic_pq(z: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """P and Q of the Hankel expansion, each truncated at the smallest term."""
    mu = 4.0 * order * order
    p = np.ones_like(z)
    q = np.zeros_like(z)
    coeff = 1.0
    previous = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, ASYMPTOTIC_TERMS):
        coeff = coeff * (mu - (2 * k - 1) ** 2) / (8.0 * k)
        term = coeff / z ** k
        magnitude = np.abs(term)
        active &= magnitude < previous
        previous = magnitude
        signed = term if (k // 2) % 2 == 0 else -term
        if k % 2 == 0:
            p = p + np.where(active, signed, 0.0)
        else:
            q = q + np.where(active, signed, 0.0)
        if not active.any():
            break
    return p, q


def _asymptotic_jy(z: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    p, q = _asymptotic_pq(z, order)
    amp = np.sqrt(2.0 / (np.pi * z))
    omega = z - (0.5 * order + 0.25) * np.pi
    c, s = np.cos(omega), np.sin(omega)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def _split(z: np.ndarray, switch: float):
    small = z <= switch
    return small, ~small


# -------------------------
# Public functions
# -------------------------
def bessel_j0(z, switch: float = BRANCH_SWITCH):
    arr, scalar = _prepare(z, allow_zero=True)
    out = np.empty_like(arr)
    small, large = _split(arr, switch)
    if small.any():
        out[small] = _series_j0(arr[small])
    if large.any():
        out[large] = _asymptotic_jy(arr[large], 0)[0]
    return _finish(out, scalar)


def bessel_j1(z, switch: float = BRANCH_SWITCH):
    arr, scalar = _prepare(z, allow_zero=True)
    out = np.empty_like(arr)
    small, large = _split(arr, switch)
    if small.any():
        out[small] = _series_j1(arr[small])
    if large.any():
        out[large] = _asymptotic_jy(arr[large], 1)[0]
    return _finish(out, scalar)


def bessel_y0(z, switch: float = BRANCH_SWITCH):
    arr, scalar = _prepare(z, allow_zero=False)
    out = np.empty_like(arr)
    small, large = _split(arr, switch)
    if small.any():
        out[small] = _series_y0(arr[small])
    if large.any():
        out[large] = _asymptotic_jy(arr[large], 0)[1]
    return _finish(out, scalar)


def bessel_y1(z, switch: float = BRANCH_SWITCH):
    arr, scalar = _prepare(z, allow_zero=False)
    out = np.empty_like(arr)
    small, large = _split(arr, switch)
    if small.any():
        out[small] = _series_y1(arr[small])
    if large.any():
        out[large] = _asymptotic_jy(arr[large], 1)[1]
    return _finish(out, scalar)


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return sign


def hankel_h(z, sign: int = 1, switch: float = BRANCH_SWITCH):
    """h_±(z); equals conj(h_∓(z)) on the positive axis."""
    sign = _check_sign(sign)
    arr, scalar = _prepare(z, allow_zero=False)
    out = np.empty(arr.shape, dtype=complex)
    small, large = _split(arr, switch)
    if small.any():
        zs = arr[small]
        pref = _SQRT_HALF_PI * np.exp(sign * 0.25j * np.pi) * np.sqrt(zs)
        out[small] = pref * (_series_j0(zs) + sign * 1j * _series_y0(zs))
    if large.any():
        zl = arr[large]
        p, q = _asymptotic_pq(zl, 0)
        out[large] = np.exp(sign * 1j * zl) * (p + sign * 1j * q)
    return _finish(out, scalar)


def hankel_h_deriv(z, sign: int = 1, switch: float = BRANCH_SWITCH):
    """d/dz h_±(z)."""
    sign = _check_sign(sign)
    arr, scalar = _prepare(z, allow_zero=False)
    out = np.empty(arr.shape, dtype=complex)
    small, large = _split(arr, switch)
    if small.any():
        zs = arr[small]
        pref = _SQRT_HALF_PI * np.exp(sign * 0.25j * np.pi)
        h0 = _series_j0(zs) + sign * 1j * _series_y0(zs)
        h1 = _series_j1(zs) + sign * 1j * _series_y1(zs)
        out[small] = pref * (h0 / (2.0 * np.sqrt(zs)) - np.sqrt(zs) * h1)
    if large.any():
        zl = arr[large]
        p0, q0 = _asymptotic_pq(zl, 0)
        p1, q1 = _asymptotic_pq(zl, 1)
        phase = np.exp(sign * 1j * zl)
        h = phase * (p0 + sign * 1j * q0)
        out[large] = h / (2.0 * zl) + sign * 1j * phase * (p1 + sign * 1j * q1)
    return _finish(out, scalar)


def plane_wave_seed(z, switch: float = BRANCH_SWITCH) -> Tuple[np.ndarray, np.ndarray]:
    """
    Plane-wave seed e^{iz}(P + iQ) and its z-derivative for the inverse-square
    tail; the correction series is the one carried by h_+ at large z.
    """
    arr, scalar = _prepare(z, allow_zero=False)
    if np.any(arr < switch):
        LOGGER.debug("plane-wave seed below the asymptotic range (min z=%.3g)", arr.min())
    p0, q0 = _asymptotic_pq(arr, 0)
    p1, q1 = _asymptotic_pq(arr, 1)
    phase = np.exp(1j * arr)
    value = phase * (p0 + 1j * q0)
    slope = value / (2.0 * arr) + 1j * phase * (p1 + 1j * q1)
    return _finish(value, scalar), _finish(slope, scalar)
