# =========================
# file: tools/odesolve.py
# =========================
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from core.errors import DomainError, IllConditionedFit, SeedOutOfRange, StepFailure
from core.models import JostSolution, Potential, RegularSolution, SeedKind, ZeroEnergyCoefficients
from tools.specfun import hankel_h, hankel_h_deriv, plane_wave_seed

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "DOP853"
    max_step: float = math.inf
    x_seed: float = 60.0  # X0
    seed_c: float = 40.0  # X* = max(X0, c / xi)
    seed_max: float = 5e4
    hankel_cutoff: float = 0.5
    chunk: int = 16
    threads: int = 1

    @classmethod
    def from_spec(cls, spec, threads: int = 1) -> "SolverSettings":
        return cls(
            rtol=spec.rtol,
            atol=spec.atol,
            method=spec.method,
            x_seed=spec.x_seed,
            seed_c=spec.seed_c,
            seed_max=spec.seed_max,
            hankel_cutoff=spec.hankel_cutoff,
            chunk=spec.chunk,
            threads=threads,
        )


@dataclass(frozen=True, eq=False)
class JostBatch:
    """Jost values for a chunk of frequencies at one common evaluation point."""

    xi: np.ndarray
    x_seed: float
    eval_x: float
    f: np.ndarray
    df: np.ndarray
    kinds: List[SeedKind]


# -------------------------
# Helpers
# -------------------------
def _rhs(pot: Potential, lam: np.ndarray, k: int):
    def fun(x, y):
        f = y[:k]
        df = y[k:]
        return np.concatenate([df, (pot.eval(x) - lam) * f])

    return fun


def _integrate(
    pot: Potential,
    lam: np.ndarray,
    y0: np.ndarray,
    x_start: float,
    x_points: np.ndarray,
    settings: SolverSettings,
    xi: Optional[float] = None,
) -> np.ndarray:
    """Integrate f'' = (V - lam) f for k columns; returns (len(x_points), 2k)."""
    k = lam.size
    x_end = float(x_points[-1])
    if x_end == x_start:
        return np.tile(y0, (x_points.size, 1))

    sol = solve_ivp(
        _rhs(pot, lam, k),
        (x_start, x_end),
        y0,
        method=settings.method,
        t_eval=x_points,
        rtol=settings.rtol,
        atol=settings.atol,
        max_step=settings.max_step,
    )
    if sol.status != 0:
        raise StepFailure(f"integration {x_start:g} -> {x_end:g} failed: {sol.message}", xi=xi)
    LOGGER.debug("integrated %d column(s) over [%g, %g]: nfev=%d", k, x_start, x_end, sol.nfev)
    return sol.y.T


def _chunks(n: int, size: int) -> List[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, max(size, 1))]


def run_chunked(fn, n: int, settings: SolverSettings) -> list:
    """Apply fn to fixed column chunks, in order; thread count never changes the result."""
    slices = _chunks(n, settings.chunk)
    if settings.threads <= 1 or len(slices) == 1:
        return [fn(sl) for sl in slices]
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return list(pool.map(fn, slices))


# -------------------------
# Regular solutions
# -------------------------
def solve_regular_batch(
    pot: Potential,
    lams: Sequence[float],
    x_grid: np.ndarray,
    settings: Optional[SolverSettings] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """phi, phi', theta, theta' with shape (n_x, n_lambda)."""
    settings = settings or SolverSettings()
    lam = np.asarray(lams, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid[0] != 0.0 or np.any(np.diff(x_grid) <= 0):
        raise DomainError("regular solutions need an increasing grid starting at x = 0")
    if not pot.regular_at_origin:
        raise DomainError(f"potential '{pot.name}' is singular at the origin")

    k = lam.size
    # columns: phi (k), theta (k) | phi' (k), theta' (k)
    y0 = np.concatenate([-np.ones(k), np.zeros(k), np.zeros(k), np.ones(k)])
    lam2 = np.concatenate([lam, lam])
    xi = float(np.sqrt(max(lam.min(), 0.0))) if k == 1 else None
    y = _integrate(pot, lam2, y0, 0.0, x_grid, settings, xi=xi)
    return y[:, :k], y[:, 2 * k:3 * k], y[:, k:2 * k], y[:, 3 * k:]


def _scaling_rhs(pot: Potential, lam: np.ndarray, k: int):
    # columns: phi (k), u = d_lam phi (k) | phi' (k), u' (k)
    def fun(x, y):
        shift = pot.eval(x) - lam
        phi, u = y[:k], y[k:2 * k]
        return np.concatenate([y[2 * k:], shift * phi, shift * u - phi])

    return fun


def solve_scaling_batch(
    pot: Potential,
    lams: Sequence[float],
    x_grid: np.ndarray,
    settings: Optional[SolverSettings] = None,
) -> np.ndarray:
    """
    psi(x, xi) = 2 lam d_lam phi - x phi' with shape (n_x, n_lambda).

    d_lam phi solves -u'' + (V - lam) u = phi with u(0) = u'(0) = 0, so psi
    vanishes identically for V = 0.
    """
    settings = settings or SolverSettings()
    lam = np.asarray(lams, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid[0] != 0.0 or np.any(np.diff(x_grid) <= 0):
        raise DomainError("regular solutions need an increasing grid starting at x = 0")
    if not pot.regular_at_origin:
        raise DomainError(f"potential '{pot.name}' is singular at the origin")

    k = lam.size
    y0 = np.concatenate([-np.ones(k), np.zeros(3 * k)])
    sol = solve_ivp(
        _scaling_rhs(pot, lam, k),
        (0.0, float(x_grid[-1])),
        y0,
        method=settings.method,
        t_eval=x_grid,
        rtol=settings.rtol,
        atol=settings.atol,
        max_step=settings.max_step,
    )
    if sol.status != 0:
        raise StepFailure(f"scaling field integration failed: {sol.message}")
    y = sol.y.T
    return 2.0 * lam * y[:, k:2 * k] - x_grid[:, None] * y[:, 2 * k:3 * k]


def solve_regular(
    pot: Potential,
    lam: float,
    x_grid: np.ndarray,
    settings: Optional[SolverSettings] = None,
) -> RegularSolution:
    if lam < 0:
        raise DomainError("solve_regular needs lambda >= 0")
    phi, dphi, theta, dtheta = solve_regular_batch(pot, [lam], x_grid, settings)
    return RegularSolution(
        lam=float(lam),
        x_grid=np.asarray(x_grid, dtype=float),
        phi=phi[:, 0],
        dphi=dphi[:, 0],
        theta=theta[:, 0],
        dtheta=dtheta[:, 0],
    )


# -------------------------
# Jost solutions
# -------------------------
def seeding_point(pot: Potential, xi: float, settings: SolverSettings) -> float:
    if not pot.inverse_square_tail:
        return settings.x_seed
    x_star = max(settings.x_seed, settings.seed_c / xi)
    if x_star > settings.seed_max:
        raise SeedOutOfRange(xi, x_star, settings.seed_max)
    return x_star


def eval_point(x_star: float) -> float:
    """Midpoint of the overlap window [5, X*/2]."""
    return 0.5 * (5.0 + 0.5 * x_star)


def _seed_kind(pot: Potential, xi: float, settings: SolverSettings) -> SeedKind:
    if pot.inverse_square_tail and xi < settings.hankel_cutoff:
        return "hankel"
    return "plane_wave"


def _seed_values(pot: Potential, xi: np.ndarray, x_star: float, kinds: Sequence[SeedKind]):
    f = np.empty(xi.size, dtype=complex)
    df = np.empty(xi.size, dtype=complex)
    for j, (w, kind) in enumerate(zip(xi, kinds)):
        z = x_star * w
        if kind == "hankel":
            f[j] = hankel_h(z, 1)
            df[j] = w * hankel_h_deriv(z, 1)
        elif pot.inverse_square_tail:
            value, slope = plane_wave_seed(z)
            f[j] = value
            df[j] = w * slope
        else:
            f[j] = np.exp(1j * z)
            df[j] = 1j * w * f[j]
    return f, df


def solve_jost(
    pot: Potential,
    xi: float,
    x_grid: np.ndarray,
    settings: Optional[SolverSettings] = None,
    seed: Optional[SeedKind] = None,
) -> JostSolution:
    """
    Outgoing Jost solution f+(x, xi) ~ e^{ix xi}, seeded at X* and integrated
    backward over x_grid. `seed` forces the seeding regime.
    """
    settings = settings or SolverSettings()
    if xi <= 0:
        raise DomainError("solve_jost needs xi > 0")
    x_grid = np.asarray(x_grid, dtype=float)

    x_star = max(seeding_point(pot, xi, settings), float(x_grid[-1]))
    kind = seed or _seed_kind(pot, xi, settings)
    LOGGER.debug("jost xi=%.6g: seed %s at X*=%.6g", xi, kind, x_star)

    f0, df0 = _seed_values(pot, np.array([xi]), x_star, [kind])
    y0 = np.concatenate([f0, df0])
    y = _integrate(pot, np.array([xi * xi]), y0, x_star, x_grid[::-1], settings, xi=xi)[::-1]
    return JostSolution(xi=float(xi), x_grid=x_grid, f=y[:, 0], df=y[:, 1], seed_kind=kind, x_seed=x_star)


def solve_jost_batch(
    pot: Potential,
    xis: np.ndarray,
    settings: Optional[SolverSettings] = None,
) -> JostBatch:
    """One chunk: common X* from the smallest frequency, values at eval_point(X*)."""
    settings = settings or SolverSettings()
    xis = np.asarray(xis, dtype=float)
    x_star = seeding_point(pot, float(xis.min()), settings)
    x_eval = eval_point(x_star)
    kinds = [_seed_kind(pot, float(w), settings) for w in xis]

    f0, df0 = _seed_values(pot, xis, x_star, kinds)
    try:
        y = _integrate(pot, xis * xis, np.concatenate([f0, df0]), x_star, np.array([x_eval]), settings)
    except StepFailure as exc:
        raise StepFailure(str(exc), xi=float(xis.min())) from exc
    k = xis.size
    return JostBatch(xi=xis, x_seed=x_star, eval_x=x_eval, f=y[0, :k], df=y[0, k:], kinds=kinds)


# -------------------------
# Zero energy
# -------------------------
def zero_energy_grid(x_lo: float, x_hi: float, n: int = 200) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(x_lo, x_hi, n)])


def fit_zero_energy_coeffs(
    sol: RegularSolution,
    fit_window: Tuple[float, float],
    basis: Literal["tail", "linear"] = "tail",
) -> ZeroEnergyCoefficients:
    """
    Least squares of (phi0, theta0) against {x^(1/2) log x, x^(1/2)} on the
    window. Tail-free potentials use {x, 1}: there a1 is the coefficient of
    the growing solution.
    """
    x_lo, x_hi = fit_window
    mask = (sol.x_grid >= x_lo) & (sol.x_grid <= x_hi)
    x = sol.x_grid[mask]
    if x.size < 4:
        raise ValueError("fit window holds fewer than 4 samples")

    if basis == "tail":
        root = np.sqrt(x)
        design = np.column_stack([root * np.log(x), root])
    else:
        design = np.column_stack([x, np.ones_like(x)])

    gram = design.T @ design
    cond = float(np.linalg.cond(gram))
    if cond > 1e12:
        raise IllConditionedFit(cond)

    (a1, a2), *_ = np.linalg.lstsq(design, sol.phi[mask], rcond=None)
    (b1, b2), *_ = np.linalg.lstsq(design, sol.theta[mask], rcond=None)
    LOGGER.debug("zero-energy fit on [%g, %g]: cond=%.3g", x_lo, x_hi, cond)
    return ZeroEnergyCoefficients(a1=float(a1), a2=float(a2), b1=float(b1), b2=float(b2), basis=basis)


# -------------------------
# Prüfer angle
# -------------------------
def prufer_angle(pot: Potential, energy: float, x_max: float, settings: Optional[SolverSettings] = None) -> float:
    """
    theta' = cos^2 theta + (E - V) sin^2 theta from theta(0) = pi/2, i.e. the
    solution with f(0) = 1, f'(0) = 0. Zeros of f on (0, x] are floor(theta/pi).
    """
    settings = settings or SolverSettings()

    def fun(x, y):
        s = np.sin(y[0])
        c = np.cos(y[0])
        return [c * c + (energy - float(pot.eval(x))) * s * s]

    sol = solve_ivp(
        fun,
        (0.0, x_max),
        [0.5 * math.pi],
        method=settings.method,
        rtol=settings.rtol,
        atol=settings.atol,
        max_step=settings.max_step,
    )
    if sol.status != 0:
        raise StepFailure(f"Prüfer integration at E={energy:g} failed: {sol.message}")
    return float(sol.y[0, -1])
