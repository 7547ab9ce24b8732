# =========================
# file: tools/potential.py
# =========================
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from core.errors import ConfigError, DomainError, FloorTooHigh, NonDecayingTail
from core.models import ParityReport, Potential, TailReport
from tools.odesolve import SolverSettings, prufer_angle

LOGGER = logging.getLogger(__name__)


# -------------------------
# Catalog
# -------------------------
def zero_potential() -> Potential:
    def _zero(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return Potential(
        name="zero",
        eval=_zero,
        deriv=_zero,
        deriv2=_zero,
        alpha=math.inf,
        even_extension=True,
        inverse_square_tail=False,
    )


def model_potential(core: float = 1.0) -> Potential:
    """
    V(x) = (c - x^2/4) / (1 + x^2)^2.

    Tail -1/(4x^2) [1 - (4c + 2) x^-2 + ...], so alpha = 2. c = 0 carries one
    Neumann bound state, c = 1/2 is exactly resonant with resonance function
    (1 + x^2)^(1/4), c = 1 is the nonresonant, bound-state free default.
    """
    c = float(core)
    k = 8.0 * c + 1.0

    def _v(x):
        x = np.asarray(x, dtype=float)
        return (c - 0.25 * x * x) / (1.0 + x * x) ** 2

    def _dv(x):
        x = np.asarray(x, dtype=float)
        return x * (x * x - k) / (2.0 * (1.0 + x * x) ** 3)

    def _d2v(x):
        x = np.asarray(x, dtype=float)
        x2 = x * x
        return (-3.0 * x2 * x2 + (3.0 + 5.0 * k) * x2 - k) / (2.0 * (1.0 + x2) ** 4)

    return Potential(
        name="model",
        eval=_v,
        deriv=_dv,
        deriv2=_d2v,
        alpha=2.0,
        even_extension=True,
        params={"core": c},
    )


def mollified_tail(ell: float = 1.0) -> Potential:
    """-(1 - exp(-(x/ell)^4)) / (4x^2): smooth, even, exact inverse-square tail."""
    ell4 = float(ell) ** 4
    small = 1e-2 * float(ell)

    def _parts(x):
        x = np.asarray(x, dtype=float)
        ax = np.where(np.abs(x) < small, small, x)
        s = ax ** 4 / ell4
        g = -np.expm1(-s)
        return x, ax, s, g

    def _v(x):
        x, ax, s, g = _parts(x)
        exact = -g / (4.0 * ax * ax)
        series = -x * x / (4.0 * ell4) + x ** 6 / (8.0 * ell4 * ell4)
        return np.where(np.abs(x) < small, series, exact)

    def _dv(x):
        x, ax, s, g = _parts(x)
        exact = -np.exp(-s) * ax / ell4 + g / (2.0 * ax ** 3)
        series = -x / (2.0 * ell4) + 0.75 * x ** 5 / (ell4 * ell4)
        return np.where(np.abs(x) < small, series, exact)

    def _d2v(x):
        x, ax, s, g = _parts(x)
        exact = np.exp(-s) * (1.0 + 4.0 * s) / ell4 - 1.5 * g / ax ** 4
        series = -0.5 / ell4 + 3.75 * x ** 4 / (ell4 * ell4)
        return np.where(np.abs(x) < small, series, exact)

    return Potential(
        name="mollified_tail",
        eval=_v,
        deriv=_dv,
        deriv2=_d2v,
        alpha=math.inf,
        even_extension=True,
        params={"ell": float(ell)},
    )


def inverse_square() -> Potential:
    """The bare tail -1/(4x^2); only meaningful for x > 0."""

    def _v(x):
        x = np.asarray(x, dtype=float)
        return -0.25 / (x * x)

    def _dv(x):
        x = np.asarray(x, dtype=float)
        return 0.5 / x ** 3

    def _d2v(x):
        x = np.asarray(x, dtype=float)
        return -1.5 / x ** 4

    return Potential(
        name="inverse_square",
        eval=_v,
        deriv=_dv,
        deriv2=_d2v,
        alpha=math.inf,
        even_extension=False,
        regular_at_origin=False,
    )


def poschl_teller(depth: float = 2.0) -> Potential:
    d = float(depth)

    def _v(x):
        return -d / np.cosh(np.asarray(x, dtype=float)) ** 2

    def _dv(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * d * np.tanh(x) / np.cosh(x) ** 2

    def _d2v(x):
        x = np.asarray(x, dtype=float)
        t = np.tanh(x)
        return 2.0 * d * (1.0 - 3.0 * t * t) / np.cosh(x) ** 2

    return Potential(
        name="poschl_teller",
        eval=_v,
        deriv=_dv,
        deriv2=_d2v,
        alpha=math.inf,
        even_extension=True,
        inverse_square_tail=False,
        params={"depth": d},
    )


def tabulated(x: Sequence[float], values: Sequence[float], alpha: float = 2.0, name: str = "table") -> Potential:
    """
    Cubic spline through samples on [0, x_end] with V'(0) = 0, continued by
    -1/(4x^2) beyond the table. Derivatives by five-point centred stencils.
    """
    xs = np.asarray(x, dtype=float)
    vs = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.size < 4 or xs.shape != vs.shape:
        raise ConfigError("tabulated potential needs at least 4 matching samples", "potential.values")
    if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
        raise ConfigError("table abscissae must start at 0 and increase", "potential.x")

    spline = CubicSpline(xs, vs, bc_type=((1, 0.0), "not-a-knot"))
    x_end = float(xs[-1])
    step = 1e-3 * float(np.median(np.diff(xs)))

    def _v(x):
        ax = np.abs(np.asarray(x, dtype=float))
        inside = ax <= x_end
        safe = np.where(inside, x_end, ax)
        return np.where(inside, spline(np.minimum(ax, x_end)), -0.25 / safe ** 2)

    def _dv(x):
        x = np.asarray(x, dtype=float)
        return (_v(x - 2 * step) - 8 * _v(x - step) + 8 * _v(x + step) - _v(x + 2 * step)) / (12 * step)

    def _d2v(x):
        x = np.asarray(x, dtype=float)
        return (
            -_v(x - 2 * step) + 16 * _v(x - step) - 30 * _v(x) + 16 * _v(x + step) - _v(x + 2 * step)
        ) / (12 * step * step)

    return Potential(
        name=name,
        eval=_v,
        deriv=_dv,
        deriv2=_d2v,
        alpha=float(alpha),
        even_extension=True,
        params={"x_end": x_end},
    )


def potential_from_spec(spec) -> Potential:
    kind = spec.kind
    if kind == "zero":
        return zero_potential()
    if kind == "model":
        return model_potential(spec.core)
    if kind == "mollified_tail":
        return mollified_tail(spec.ell)
    if kind == "inverse_square":
        return inverse_square()
    if kind == "poschl_teller":
        return poschl_teller(spec.depth)
    if kind == "table":
        if spec.path:
            df = pd.read_csv(Path(spec.path))
            return tabulated(df.iloc[:, 0].to_numpy(), df.iloc[:, 1].to_numpy(), spec.alpha)
        return tabulated(spec.x, spec.values, spec.alpha)
    raise ConfigError(f"unknown potential kind '{kind}'", "potential.kind")


# -------------------------
# Checks
# -------------------------
def eval_U(pot: Potential, x):
    """U(x) = -2V(x) - xV'(x)."""
    x = np.asarray(x, dtype=float)
    return -2.0 * pot.eval(x) - x * pot.deriv(x)


def check_tail(pot: Potential, x_min: float, x_max: float, n: int) -> TailReport:
    if not (1.0 <= x_min < x_max) or n < 8:
        raise ValueError("check_tail needs 1 <= x_min < x_max and n >= 8")

    x = np.geomspace(x_min, x_max, n)
    ratios = -4.0 * x * x * pot.eval(x)
    dev = np.abs(ratios - 1.0)

    if float(dev.max()) <= 1e-12:
        LOGGER.info("%s: exact inverse-square tail on [%g, %g]", pot.name, x_min, x_max)
        return TailReport(x=x, ratios=ratios, fitted_alpha=None, exact_tail=True)

    top = dev[x >= x_max / 10.0]
    if top.size >= 2 and np.any(top[1:] > 1.1 * top[:-1]):
        raise NonDecayingTail(
            f"|-4x^2 V - 1| does not decrease over the top decade of [{x_min:g}, {x_max:g}]",
            top_decade_ratios=ratios[x >= x_max / 10.0],
        )

    keep = dev > 0
    slope = np.polyfit(np.log(x[keep]), np.log(dev[keep]), 1)[0]
    return TailReport(x=x, ratios=ratios, fitted_alpha=float(-slope), exact_tail=False)


def check_even_extension(pot: Potential, h: float = 1e-2, x_samples: Optional[np.ndarray] = None) -> ParityReport:
    if x_samples is None:
        x_samples = np.concatenate([np.geomspace(1e-3, 50.0, 64), np.linspace(0.1, 10.0, 64)])
    v_scale = max(float(np.max(np.abs(pot.eval(x_samples)))), 1e-300)
    asym = float(np.max(np.abs(pot.eval(x_samples) - pot.eval(-x_samples)))) / v_scale

    v = pot.eval(np.array([-2 * h, -h, h, 2 * h]))
    first = float((v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * h))
    third = float((v[3] - 2 * v[2] + 2 * v[1] - v[0]) / (2 * h ** 3))
    even = asym <= 1e-12 and abs(first) <= 1e-8 * v_scale and abs(third) <= 1e-6 * v_scale
    return ParityReport(max_asymmetry=asym, first_derivative=first, third_derivative=third, even=even)


def count_bound_states(
    pot: Potential,
    E_floor: float,
    x_max: float,
    n_energies: int = 24,
    settings: Optional[SolverSettings] = None,
) -> int:
    """
    Number of Neumann eigenvalues in [E_floor, 0) from the Prüfer angle of the
    solution with f(0)=1, f'(0)=0 at E just below zero (Sturm oscillation).
    """
    if E_floor >= 0:
        raise ValueError("E_floor must be negative")
    if not pot.regular_at_origin:
        raise DomainError(f"potential '{pot.name}' is singular at the origin")

    settings = settings or SolverSettings()
    energies = -np.geomspace(abs(E_floor), 1e-8, n_energies)

    counts = []
    for energy in energies:
        angle = prufer_angle(pot, float(energy), x_max, settings)
        counts.append(int(math.floor(angle / math.pi)))

    if counts[0] > 0:
        raise FloorTooHigh(E_floor, counts[0])
    if any(b < a for a, b in zip(counts[:-1], counts[1:])):
        LOGGER.warning("%s: non-monotone zero counts across the energy sweep %s", pot.name, counts)

    LOGGER.info("%s: %d bound state(s) in [%g, 0)", pot.name, counts[-1], E_floor)
    return counts[-1]
