# =========================
# file: tools/verify.py
# =========================
"""
Numerical checks of the decay estimates for the distorted wave group:
dispersive, energy, vector-field, local energy decay and divergence form.
Each check samples both sides on a time grid and returns an EstimateReport.
"""
from __future__ import annotations

import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import comb, stirling2

from core.config import AcceptanceSpec, RunConfig, VerificationSpec
from core.errors import ResonantPotential
from core.gridutils import bracket, derivative, grid_spacing, power_law_fit
from core.models import EstimateReport, GridFunction, SpectralTable
from tools.datasets import parity_of, resolve, sample
from tools.evolution import check_nyquist, propagate_hat, propagate_many
from tools.transform import forward, grid_sobolev_norm, inverse, sobolev_norm_hat, x_function, xi_function
from tools.vectorfield import apply_D

LOGGER = logging.getLogger(__name__)

HatDerivative = Callable[[int], np.ndarray]


# -------------------------
# Helpers
# -------------------------
def _hat(f: Optional[GridFunction], table: SpectralTable) -> np.ndarray:
    if f is None:
        return np.zeros(table.xi_grid.size)
    return forward(f, table, check_tail=False).values


def wave_time_derivative(ff, fg, t, xi: np.ndarray, j: int) -> np.ndarray:
    """d^j/dt^j of cos(t xi) ff + sin(t xi)/xi fg; t may be an array (columns)."""
    t = np.asarray(t, dtype=float)
    phase = np.multiply.outer(xi, t) + j * math.pi / 2 if t.ndim else xi * t + j * math.pi / 2
    col = (slice(None),) + (None,) * t.ndim
    return xi[col] ** j * np.cos(phase) * ff[col] + xi[col] ** (j - 1) * np.sin(phase) * fg[col]


def _S_power_hat(m: int, shift: int, dhat: HatDerivative, t, table: SpectralTable) -> np.ndarray:
    """
    Fourier side of (S + shift)^m w at time(s) t, S = t d/dt + x d/dx, where
    dhat(i) gives the Fourier side of d^i w / dt^i.
    Terms without a D factor stay on the xi side.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(dhat(0), dtype=complex)
    for p in range(m + 1):
        cp = comb(m, p, exact=True) * shift ** (m - p)
        if cp == 0:
            continue
        for j in range(p + 1):
            cj = cp * comb(p, j, exact=True)
            for i in range(j + 1):
                c = cj * (stirling2(j, i, exact=True) if j else 1)
                if c == 0:
                    continue
                term = dhat(i) * t ** i
                if p - j:
                    phys = inverse(xi_function(table, term), table)
                    for _ in range(p - j):
                        phys = apply_D(phys)
                    term = forward(phys, table, check_tail=False).values
                out = out + c * term
    return out


def _weighted_l1(values: np.ndarray, weight: np.ndarray, table: SpectralTable) -> float:
    return float(np.sum(table.x_weights * weight * np.abs(values)))


def trend_slope(t: Sequence[float], ratio: Sequence[float]) -> Optional[float]:
    """Slope of log(ratio) against log(t) over the top half of the time grid."""
    t = np.asarray(t, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    top = slice(t.size // 2, None)
    tt, rr = t[top], ratio[top]
    keep = (tt > 0) & (rr > 0)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(tt[keep]), np.log(rr[keep]), 1)[0])


def _ratios(lhs: np.ndarray, rhs) -> np.ndarray:
    rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
    out = np.zeros_like(lhs)
    ok = rhs > 0
    out[ok] = lhs[ok] / rhs[ok]
    return out


def _report(estimate_id, variant, t, lhs, rhs, **extra) -> EstimateReport:
    lhs = np.asarray(lhs, dtype=float)
    rhs_arr = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
    ratio = _ratios(lhs, rhs_arr)
    return EstimateReport(
        estimate_id=estimate_id,
        variant=variant,
        t_samples=[float(v) for v in t],
        lhs=[float(v) for v in lhs],
        rhs=[float(v) for v in rhs_arr],
        sup_ratio=float(ratio.max()) if ratio.size else 0.0,
        **extra,
    )


def _energy_lhs(dhat: HatDerivative, m: int, k: int, l: int, t, table: SpectralTable) -> np.ndarray:
    """sqrt(||xi <xi>^k W_l||^2 + ||<xi>^k W_{l+1}||^2), W_q = F[(S + q)^m d^q u/dt^q]."""
    xi = table.xi_grid[:, None]
    w = table.weights[:, None]
    br = bracket(xi) ** k
    low = _S_power_hat(m, l, lambda i: dhat(l + i), t, table)
    high = _S_power_hat(m, l + 1, lambda i: dhat(l + 1 + i), t, table)
    total = np.sum(w * np.abs(xi * br * low) ** 2, axis=0) + np.sum(w * np.abs(br * high) ** 2, axis=0)
    return np.sqrt(total)


def _data_norm(ff, fg, order: int, table: SpectralTable) -> float:
    """||sqrt(A) f||^2_{H^order} + ||g||^2_{H^order}, distorted side."""
    return sobolev_norm_hat(table.xi_grid * ff, order, table) ** 2 + sobolev_norm_hat(fg, order, table) ** 2


def _require_nonresonant(table: SpectralTable) -> None:
    coeffs = table.coefficients
    if coeffs is None or coeffs.resonant:
        raise ResonantPotential(f"potential '{table.potential_name}' is resonant at zero energy or has no coefficients")


# -------------------------
# Estimates
# -------------------------
def verify_dispersive(
    f: GridFunction,
    g: Optional[GridFunction],
    sigma: float,
    t_grid: Sequence[float],
    table: SpectralTable,
    fit_from: float = 10.0,
    acceptance: AcceptanceSpec = AcceptanceSpec(),
    config_hash: str = "",
) -> EstimateReport:
    """sup_x <x>^-sigma |u(t, x)| against <t>^-sigma times weighted L^1 data norms."""
    x = table.x_grid
    h = grid_spacing(x)
    weight = bracket(x) ** sigma
    states = propagate_many(f, g, t_grid, table)
    lhs = np.array([float(np.max(np.abs(s.u) / weight)) for s in states])

    data = _weighted_l1(derivative(f.values, h, parity=f.parity), weight, table) + _weighted_l1(f.values, weight, table)
    if g is not None:
        data += _weighted_l1(g.values, weight, table)
    t = np.asarray(t_grid, dtype=float)
    rhs = bracket(t) ** -sigma * data

    window = t >= fit_from
    slope, _, half = power_law_fit(t[window], lhs[window])
    fitted = None if math.isnan(slope) else slope

    estimate_id = "dispersive_one" if sigma >= 0.75 else "dispersive_half"
    band = acceptance.one_band if estimate_id == "dispersive_one" else acceptance.half_band
    passed = None
    if fitted is not None:
        passed = bool(fitted - half <= band[1] and fitted + half >= band[0])
    LOGGER.info("dispersive sigma=%g: exponent %s +- %.3g", sigma, fitted, half)
    return _report(
        estimate_id, f"sigma={sigma:g}", t, lhs, rhs,
        fitted_exponent=fitted,
        exponent_halfwidth=None if fitted is None else half,
        passed=passed,
        details={"data_norm": data, "fit_from": fit_from},
        config_hash=config_hash,
    )


def verify_energy(
    f: GridFunction,
    g: Optional[GridFunction],
    k: int,
    l: int,
    t_grid: Sequence[float],
    table: SpectralTable,
    acceptance: AcceptanceSpec = AcceptanceSpec(),
    config_hash: str = "",
) -> EstimateReport:
    """||d_t^l sqrt(A) u||_{H^k} (with its time-derivative partner) against the data in H^{k+l}."""
    return _energy_family("energy", f, g, 0, k, l, t_grid, table, acceptance, config_hash)


def verify_vector_field(
    f: GridFunction,
    g: Optional[GridFunction],
    m: int,
    k: int,
    t_grid: Sequence[float],
    table: SpectralTable,
    l: int = 0,
    acceptance: AcceptanceSpec = AcceptanceSpec(),
    config_hash: str = "",
) -> EstimateReport:
    """Energy bound for S^m u, S = t d/dt + x d/dx; data norms summed over D^j, j <= m."""
    _require_nonresonant(table)
    return _energy_family("vector_field", f, g, m, k, l, t_grid, table, acceptance, config_hash)


def _energy_family(estimate_id, f, g, m, k, l, t_grid, table, acceptance, config_hash) -> EstimateReport:
    t = np.asarray(t_grid, dtype=float)
    for ti in t:
        check_nyquist(ti, table)
    xi = table.xi_grid
    ff, fg = _hat(f, table), _hat(g, table)

    def dhat(i):
        return wave_time_derivative(ff, fg, t, xi, i)

    lhs = _energy_lhs(dhat, m, k, l, t, table)

    total = 0.0
    df, dg = f, g
    for j in range(m + 1):
        if j:
            df = apply_D(df)
            dg = apply_D(dg) if dg is not None else None
        total += _data_norm(_hat(df, table), _hat(dg, table), k + l, table)
    rhs = math.sqrt(total)

    ratio = _ratios(lhs, rhs)
    slope = trend_slope(t, ratio)
    if estimate_id == "energy" and k == 0 and l == 0:
        passed = bool(abs(float(ratio.max(initial=0.0)) - 1.0) <= acceptance.energy) if rhs > 0 else True
    else:
        passed = slope is not None and abs(slope) < acceptance.trend
    return _report(
        estimate_id, f"m={m},k={k},l={l}", t, lhs, rhs,
        trend_slope=slope,
        passed=passed,
        details={"m": m, "k": k, "l": l},
        config_hash=config_hash,
    )


def _increment_ratio(t_fine: np.ndarray, cumulative: np.ndarray, T: float) -> float:
    at = np.interp([T / 4.0, T / 2.0, T], t_fine, cumulative)
    early, late = at[1] - at[0], at[2] - at[1]
    return float(late / early) if early > 0 else float("inf")


def verify_local_energy_decay(
    f: GridFunction,
    m: int,
    k: int,
    l: int,
    T_grid: Sequence[float],
    table: SpectralTable,
    eps: float = 0.05,
    variant: str = "exp",
    dt: float = 0.25,
    acceptance: AcceptanceSpec = AcceptanceSpec(),
    config_hash: str = "",
) -> EstimateReport:
    """
    Cumulative int_0^T ||<x>^-w d_t^l S^m w(t)||^2_{H^k} dt for w = e^{it sqrt A} f
    (variant "exp", weight exponent 1/2 + eps) or w = sin(t sqrt A)/sqrt A f
    (variant "sine", weight exponent 1, f plays the role of g).

    Saturation: the increment over [T/2, T] must shrink against [T/4, T/2]
    at least as fast as 2^(1 - 2 w) does for a front leaving at unit speed.
    """
    _require_nonresonant(table)
    if variant not in ("exp", "sine"):
        raise ValueError("variant must be 'exp' or 'sine'")
    T = np.asarray(T_grid, dtype=float)
    T_max = float(T.max())
    check_nyquist(T_max, table)

    n = int(math.ceil(T_max / dt)) + 1
    t_fine = np.linspace(0.0, T_max, n)
    xi = table.xi_grid
    ff = _hat(f, table)
    col = (slice(None), None)
    if variant == "exp":
        power = 0.5 + eps
        phase = np.exp(1j * np.multiply.outer(xi, t_fine))

        def dhat(i):
            return (1j * xi[col]) ** i * phase * ff[col]
    else:
        power = 1.0

        def dhat(i):
            return wave_time_derivative(np.zeros_like(ff), ff, t_fine, xi, i)

    hat = _S_power_hat(m, l, lambda i: dhat(l + i), t_fine, table)
    phys = inverse(xi_function(table, hat), table).values
    weight = bracket(table.x_grid) ** -power
    sq = np.array([
        grid_sobolev_norm(x_function(table, weight * phys[:, c], parity=f.parity), k) ** 2
        for c in range(t_fine.size)
    ])
    cumulative = integrate.cumulative_trapezoid(sq, t_fine, initial=0.0)
    lhs = np.sqrt(np.interp(T, t_fine, cumulative))

    data_weight = bracket(table.x_grid) ** (0.5 + eps) if variant == "sine" else 1.0
    rhs = 0.0
    df = f
    for j in range(m + 1):
        if j:
            df = apply_D(df)
        rhs += grid_sobolev_norm(df.with_values(data_weight * df.values), k + l)

    r = _increment_ratio(t_fine, cumulative, T_max)
    bound = 2.0 ** (1.0 - 2.0 * power)
    passed = bool(r < 1.0 and r <= bound * (1.0 + acceptance.saturation_tol))
    LOGGER.info("local energy decay (%s): increment ratio %.4f, bound %.4f", variant, r, bound)
    return _report(
        "local_energy_decay", f"{variant},m={m},k={k},l={l},eps={eps:g}", T, lhs, rhs,
        passed=passed,
        details={"increment_ratio": r, "ratio_bound": bound, "weight_power": power},
        config_hash=config_hash,
    )


def verify_divergence_form(
    g_odd: GridFunction,
    k: int,
    l: int,
    t_grid: Sequence[float],
    table: SpectralTable,
    acceptance: AcceptanceSpec = AcceptanceSpec(),
    config_hash: str = "",
) -> EstimateReport:
    """||d_t^l d/dx sin(t sqrt A)/sqrt A (g')||_{H^k} against ||g||_{H^{1+k+l}} for odd g."""
    _require_nonresonant(table)
    h = grid_spacing(table.x_grid)
    t = np.asarray(t_grid, dtype=float)
    for ti in t:
        check_nyquist(ti, table)
    dg = x_function(table, derivative(g_odd.values, h, parity="odd"), parity="even")
    fg = _hat(dg, table)
    hat = wave_time_derivative(np.zeros_like(fg), fg, t, table.xi_grid, l)
    phys = inverse(xi_function(table, hat), table).values
    grad = derivative(phys, h, parity="even")
    lhs = np.array([
        grid_sobolev_norm(x_function(table, grad[:, c], parity="odd"), k) for c in range(t.size)
    ])
    rhs = grid_sobolev_norm(g_odd, 1 + k + l)

    ratio = _ratios(lhs, rhs)
    slope = trend_slope(t, ratio)
    return _report(
        "divergence_form", f"k={k},l={l}", t, lhs, rhs,
        trend_slope=slope,
        passed=slope is not None and abs(slope) < acceptance.trend,
        details={"k": k, "l": l},
        config_hash=config_hash,
    )


# -------------------------
# Config-driven runner
# -------------------------
def scenario_data(cfg: RunConfig, name: str, table: SpectralTable) -> Tuple[GridFunction, Optional[GridFunction]]:
    sc = cfg.scenario(name)
    f = sample(resolve(sc.f), table, parity=parity_of(sc.f.name))
    g = sample(resolve(sc.g), table, parity=parity_of(sc.g.name)) if sc.g is not None else None
    return f, g


def run_verification(spec: VerificationSpec, cfg: RunConfig, table: SpectralTable, config_hash: str = "") -> EstimateReport:
    f, g = scenario_data(cfg, spec.scenario, table)
    acc = cfg.acceptance
    if spec.id in ("dispersive_half", "dispersive_one"):
        sigma = spec.sigma if spec.id == "dispersive_half" else max(spec.sigma, 1.0)
        return verify_dispersive(f, g, sigma, spec.times, table, acceptance=acc, config_hash=config_hash)
    if spec.id == "energy":
        return verify_energy(f, g, spec.k, spec.l, spec.times, table, acceptance=acc, config_hash=config_hash)
    if spec.id == "vector_field":
        return verify_vector_field(f, g, spec.m, spec.k, spec.times, table, l=spec.l, acceptance=acc, config_hash=config_hash)
    if spec.id == "local_energy_decay":
        variant = spec.variant or "exp"
        data = f if variant == "exp" else (g if g is not None else f)
        return verify_local_energy_decay(
            data, spec.m, spec.k, spec.l, spec.times, table, eps=spec.eps, variant=variant,
            acceptance=acc, config_hash=config_hash,
        )
    # divergence form takes the odd datum; g when given, f otherwise
    odd = g if g is not None else f
    return verify_divergence_form(odd, spec.k, spec.l, spec.times, table, acceptance=acc, config_hash=config_hash)
