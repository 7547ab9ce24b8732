# =========================
# file: tools/evolution.py
# =========================
from __future__ import annotations

import logging
import math
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate

from core.errors import CFLViolation, DomainTooSmall, GridMismatch, NyquistViolation
from core.gridutils import derivative, grid_spacing, simpson_weights, trapezoid_weights, uniform_grid
from core.models import EnergyValue, GridFunction, Potential, SpectralTable, WaveState
from tools.transform import forward, inverse, norm_x, x_function, xi_function

LOGGER = logging.getLogger(__name__)

Source = Callable[[float], np.ndarray]
DataFn = Callable[[np.ndarray], np.ndarray]


# -------------------------
# Helpers
# -------------------------
def check_nyquist(t: float, table: SpectralTable) -> None:
    spacing = table.grid.max_spacing
    if spacing * (t + table.x_max) > math.pi / 4.0 * (1.0 + 1e-9):
        raise NyquistViolation(t, spacing, table.x_max)


def _hat(f: Optional[GridFunction], table: SpectralTable) -> np.ndarray:
    if f is None:
        return np.zeros(table.xi_grid.size)
    return forward(f, table).values


def _sinc_multiplier(t: float, xi: np.ndarray) -> np.ndarray:
    return np.sin(t * xi) / xi


def propagate_hat(ff: np.ndarray, fg: np.ndarray, t: float, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Fourier-side (u, u_t) of the wave group at time t."""
    c, s = np.cos(t * xi), np.sin(t * xi)
    u_hat = c * ff + (s / xi) * fg
    ut_hat = -xi * s * ff + c * fg
    return u_hat, ut_hat


# -------------------------
# Propagators
# -------------------------
def propagate(f: GridFunction, g: Optional[GridFunction], t: float, table: SpectralTable) -> WaveState:
    """
    u(t) = cos(t sqrt A) f + sin(t sqrt A)/sqrt A g by quadrature against
    rho~; u_t from the differentiated multiplier.
    """
    check_nyquist(t, table)
    u_hat, ut_hat = propagate_hat(_hat(f, table), _hat(g, table), t, table.xi_grid)
    u = inverse(xi_function(table, u_hat), table).values
    ut = inverse(xi_function(table, ut_hat), table).values
    return WaveState(t=float(t), u=u, ut=ut)


def propagate_many(
    f: GridFunction, g: Optional[GridFunction], times: Sequence[float], table: SpectralTable
) -> List[WaveState]:
    ff, fg = _hat(f, table), _hat(g, table)
    states = []
    for t in times:
        check_nyquist(t, table)
        u_hat, ut_hat = propagate_hat(ff, fg, t, table.xi_grid)
        pair = inverse(xi_function(table, np.column_stack([u_hat, ut_hat])), table).values
        states.append(WaveState(t=float(t), u=pair[:, 0], ut=pair[:, 1]))
    return states


def propagate_exp(f: GridFunction, t: float, table: SpectralTable, sign: int = 1) -> np.ndarray:
    """e^{+-it sqrt A} f (complex)."""
    check_nyquist(t, table)
    phase = np.exp(sign * 1j * t * table.xi_grid)
    return inverse(xi_function(table, phase * _hat(f, table)), table).values


def sine_propagate(g: GridFunction, t: float, table: SpectralTable) -> np.ndarray:
    check_nyquist(t, table)
    return inverse(xi_function(table, _sinc_multiplier(t, table.xi_grid) * _hat(g, table)), table).values


def simpson_nodes(t: float, n_s: int) -> Tuple[np.ndarray, np.ndarray]:
    n_s = max(n_s, 3)
    if n_s % 2 == 0:
        n_s += 1
    s = np.linspace(0.0, t, n_s)
    return s, simpson_weights(n_s, s[1] - s[0]) if t > 0 else np.zeros(n_s)


def default_duhamel_nodes(t: float, table: SpectralTable) -> int:
    return 2 * int(math.ceil(4.0 * t * float(table.xi_grid[-1]))) + 1


def source_hats(src: Source, s: np.ndarray, table: SpectralTable) -> np.ndarray:
    """F src(s, .) for every s node; shape (n_xi, n_s)."""
    stacked = np.column_stack([src(float(si)) for si in s])
    return forward(x_function(table, stacked), table, check_tail=False).values


def duhamel_hat(src_hat: np.ndarray, s: np.ndarray, w: np.ndarray, t: float, xi: np.ndarray):
    lag = t - s[None, :]
    u_hat = (np.sin(lag * xi[:, None]) / xi[:, None] * src_hat) @ w
    ut_hat = (np.cos(lag * xi[:, None]) * src_hat) @ w
    return u_hat, ut_hat


def duhamel(src: Source, t: float, table: SpectralTable, n_s: Optional[int] = None) -> WaveState:
    """u(t) = int_0^t sin((t - s) sqrt A)/sqrt A src(s) ds, Simpson in s."""
    check_nyquist(t, table)
    if t == 0:
        zero = np.zeros(table.x_grid.size)
        return WaveState(t=0.0, u=zero, ut=zero.copy())
    s, w = simpson_nodes(t, n_s or default_duhamel_nodes(t, table))
    u_hat, ut_hat = duhamel_hat(source_hats(src, s, table), s, w, t, table.xi_grid)
    pair = inverse(xi_function(table, np.column_stack([u_hat, ut_hat])), table).values
    return WaveState(t=float(t), u=pair[:, 0], ut=pair[:, 1])


# -------------------------
# Energy and kernels
# -------------------------
def energy(state: WaveState, pot: Potential, x_grid: np.ndarray) -> EnergyValue:
    """1/2 int (u_t^2 + u_x^2 + V u^2) dx."""
    h = grid_spacing(x_grid)
    w = simpson_weights(x_grid.size, h)
    ux = derivative(state.u, h, order=1, parity="even")
    kinetic = 0.5 * float(np.sum(w * state.ut ** 2))
    gradient = 0.5 * float(np.sum(w * ux ** 2))
    potential_part = 0.5 * float(np.sum(w * pot.eval(x_grid) * state.u ** 2))
    return EnergyValue(
        total=kinetic + gradient + potential_part,
        kinetic=kinetic,
        gradient=gradient,
        potential_part=potential_part,
    )


def _node(table: SpectralTable, x: float) -> int:
    i = int(round(x / table.dx))
    if i < 0 or i >= table.x_grid.size or abs(table.x_grid[i] - x) > 1e-9:
        raise GridMismatch(f"x={x:g} is not a node of the table grid")
    return i


def propagator_kernel(
    x: float, y: float, t: float, xi_band: Tuple[float, float], table: SpectralTable
) -> float:
    """K(x, y; t) = 2 int_band sin(t xi) phi(x, xi^2) phi(y, xi^2) rho(xi^2) d xi."""
    lo, hi = xi_band
    if lo < table.xi_grid[0] * (1 - 1e-12) or hi > table.xi_grid[-1] * (1 + 1e-12):
        raise GridMismatch(f"band [{lo:g}, {hi:g}] leaves the table range")
    mask = (table.xi_grid >= lo) & (table.xi_grid <= hi)
    xi = table.xi_grid[mask]
    weights = trapezoid_weights(xi.size, table.grid.s_step) * table.grid.jacobian[mask]
    i, j = _node(table, x), _node(table, y)
    integrand = np.sin(t * xi) / xi * table.phi_matrix[i, mask] * table.phi_matrix[j, mask] * table.rho_tilde[mask]
    return float(np.sum(weights * integrand))


def free_kernel_reference(x: float, y: float, t: float, xi_band: Tuple[float, float]) -> float:
    """Direct quadrature of the V = 0 kernel (phi = -cos, rho~ = 2/pi)."""
    lo, hi = xi_band
    value, _ = integrate.quad(
        lambda w: 2.0 / math.pi * math.sin(t * w) / w * math.cos(x * w) * math.cos(y * w),
        lo,
        hi,
        limit=2000,
    )
    return float(value)


# -------------------------
# Time-domain oracle
# -------------------------
def _leapfrog(
    pot: Potential,
    f: DataFn,
    g: Optional[DataFn],
    dx: float,
    dt: float,
    length: float,
) -> Iterator[Tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
    """Yields (n, u^{n-1}, u^n, u^{n+1}) for n = 1, 2, ..."""
    x = uniform_grid(length, dx)
    r2 = (dt / dx) ** 2
    v = pot.eval(x)

    u_prev = f(x).astype(float)
    g0 = g(x).astype(float) if g is not None else np.zeros_like(x)
    u_curr = u_prev + dt * g0 + 0.5 * (r2 * _lap(u_prev) - dt * dt * v * u_prev)
    n = 1
    while True:
        u_next = 2.0 * u_curr - u_prev + r2 * _lap(u_curr) - dt * dt * v * u_curr
        yield n, u_prev, u_curr, u_next
        u_prev, u_curr = u_curr, u_next
        n += 1


def _lap(u: np.ndarray) -> np.ndarray:
    """Second difference (unscaled) with the Neumann ghost at 0 and a zero ghost at the far end."""
    out = np.empty_like(u)
    out[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    out[0] = 2.0 * (u[1] - u[0])
    out[-1] = u[-2] - 2.0 * u[-1]
    return out


def _check_fdtd(T: float, dx: float, dt: float, length: float, support: float) -> None:
    if dt > 0.9 * dx:
        raise CFLViolation(f"dt={dt:g} exceeds 0.9 dx={0.9 * dx:g}")
    if length < support + T:
        raise DomainTooSmall(f"length {length:g} < support {support:g} + T {T:g}")


def _snap(T: float, dt: float) -> float:
    n_steps = max(int(math.ceil(T / dt - 1e-9)), 1)
    return T / n_steps


def fdtd_solve(
    pot: Potential,
    f: DataFn,
    g: Optional[DataFn],
    T: float,
    dx: float,
    dt: float,
    length: float,
    support: float,
    times: Optional[Sequence[float]] = None,
) -> List[WaveState]:
    """
    Leapfrog on [0, length] with the Neumann ghost u_{-1} = u_1.

    dt is shrunk so that T is a whole number of steps; output times are
    snapped to the step grid and u_t comes from centred differences.
    """
    _check_fdtd(T, dx, dt, length, support)
    dt = _snap(T, dt)
    wanted = sorted({int(round(t / dt)) for t in (times if times is not None else [T])})

    states: List[WaveState] = []
    if wanted[0] == 0:
        x = uniform_grid(length, dx)
        g0 = g(x).astype(float) if g is not None else np.zeros_like(x)
        states.append(WaveState(t=0.0, u=f(x).astype(float), ut=g0))
        wanted = wanted[1:]
    if not wanted:
        return states

    last = wanted[-1]
    targets = set(wanted)
    for n, u_prev, u_curr, u_next in _leapfrog(pot, f, g, dx, dt, length):
        if n in targets:
            states.append(WaveState(t=n * dt, u=u_curr.copy(), ut=(u_next - u_prev) / (2.0 * dt)))
        if n >= last:
            break

    LOGGER.debug("fdtd: %d steps of dt=%.4g, dx=%.4g", last, dt, dx)
    return states


def fdtd_energy_drift(
    pot: Potential, f: DataFn, g: Optional[DataFn], T: float, dx: float, dt: float, length: float, support: float
) -> float:
    """
    Relative oscillation of the conserved leapfrog energy
    1/2 |(u^{n+1} - u^n)/dt|^2 + 1/2 <u^{n+1}, K u^n>,  K = -Laplacian_h + V,
    in the inner product with half weight at the Neumann node.
    """
    _check_fdtd(T, dx, dt, length, support)
    dt = _snap(T, dt)
    x = uniform_grid(length, dx)
    w = np.full(x.size, dx)
    w[0] *= 0.5
    v = pot.eval(x)
    last = int(round(T / dt))

    values = []
    for n, _, u_curr, u_next in _leapfrog(pot, f, g, dx, dt, length):
        vel = (u_next - u_curr) / dt
        k_u = -_lap(u_curr) / (dx * dx) + v * u_curr
        values.append(0.5 * float(np.sum(w * vel * vel)) + 0.5 * float(np.sum(w * u_next * k_u)))
        if n >= last:
            break
    values = np.asarray(values)
    return float((values.max() - values.min()) / abs(values.mean()))


def relative_difference(spectral: np.ndarray, table: SpectralTable, fdtd: WaveState, fdtd_x: np.ndarray) -> float:
    """||u_spectral - u_fdtd|| / ||u_spectral|| on the table grid."""
    sampled = np.interp(table.x_grid, fdtd_x, fdtd.u)
    norm = norm_x(spectral, table)
    return norm_x(spectral - sampled, table) / norm if norm > 0 else 0.0


def fdtd_convergence_order(
    pot: Potential,
    f: DataFn,
    exact: Callable[[np.ndarray, float], np.ndarray],
    T: float,
    dxs: Sequence[float],
    length: float,
    support: float,
    cfl: float = 0.5,
) -> Tuple[float, List[float]]:
    """Slope of log L2 error against log dx over a dx ladder."""
    errors = []
    for dx in dxs:
        x = uniform_grid(length, dx)
        state = fdtd_solve(pot, f, None, T, dx, cfl * dx, length, support, times=[T])[-1]
        w = simpson_weights(x.size, dx)
        errors.append(float(np.sqrt(np.sum(w * (state.u - exact(x, state.t)) ** 2))))
    slope = np.polyfit(np.log(dxs), np.log(errors), 1)[0]
    LOGGER.info("fdtd convergence: errors=%s order=%.3f", ["%.3e" % e for e in errors], slope)
    return float(slope), errors


def dalembert_even(f: DataFn) -> Callable[[np.ndarray, float], np.ndarray]:
    """Free Neumann solution with g = 0: (f(x + t) + f(|x - t|)) / 2."""

    def exact(x, t):
        return 0.5 * (f(x + t) + f(np.abs(x - t)))

    return exact


# -------------------------
# Checks
# -------------------------
def time_reversal_defect(f: GridFunction, g: Optional[GridFunction], t: float, table: SpectralTable) -> float:
    state = propagate(f, g, t, table)
    back = propagate(x_function(table, state.u), x_function(table, -state.ut), t, table)
    g_values = g.values if g is not None else np.zeros(table.x_grid.size)
    scale = norm_x(f.values, table) + norm_x(g_values, table)
    err = norm_x(back.u - f.values, table) + norm_x(back.ut + g_values, table)
    return err / scale if scale > 0 else 0.0


def snapshots_frame(states: Sequence[WaveState], x_grid: np.ndarray) -> pd.DataFrame:
    """Long format (t, x, u, ut)."""
    frames = [
        pd.DataFrame({"t": np.full(x_grid.size, s.t), "x": x_grid, "u": s.u, "ut": s.ut})
        for s in states
    ]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["t", "x", "u", "ut"])
