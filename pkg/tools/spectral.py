# =========================
# file: tools/spectral.py
# =========================
from __future__ import annotations

import dataclasses
import logging
import math
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize

from core.errors import DegenerateWronskian, DomainError, StepFailure
from core.gridutils import simpson_weights, trapezoid_weights, uniform_grid
from core.models import SpectralPoint, SpectralTable, XiGrid, ZeroEnergyCoefficients
from tools.odesolve import (
    SolverSettings,
    eval_point,
    fit_zero_energy_coeffs,
    run_chunked,
    seeding_point,
    solve_jost,
    solve_jost_batch,
    solve_regular,
    solve_regular_batch,
    solve_scaling_batch,
    zero_energy_grid,
)

LOGGER = logging.getLogger(__name__)

PHI_MAGIC = b"DWPH"
WRONSKIAN_FLOOR = 1e-12
CERTIFICATION_TOL = 1e-6


# -------------------------
# Spectral laws
# -------------------------
def _laws(xi, W_phi, W_theta):
    """m, rho, rho_tilde and a(xi) from the two Wronskians."""
    m = -W_theta / W_phi
    rho = np.imag(m) / math.pi
    rho_tilde = 2.0 * xi * rho
    a_coeff = np.conj(1j * W_phi / (2.0 * xi))
    return m, rho, rho_tilde, a_coeff


def spectral_point(
    pot,
    xi: float,
    eval_x: Optional[float] = None,
    settings: Optional[SolverSettings] = None,
) -> SpectralPoint:
    """
    W(f+, phi), W(f+, theta) at eval_x; m = W(theta, f+) / W(f+, phi),
    rho = Im m / pi, rho~ = 2 xi rho and W(f+, phi) = -2i xi conj(a).
    """
    settings = settings or SolverSettings()
    if eval_x is None:
        eval_x = eval_point(seeding_point(pot, xi, settings))

    jost = solve_jost(pot, xi, np.array([eval_x]), settings)
    reg = solve_regular(pot, xi * xi, np.array([0.0, eval_x]), settings)
    f, df = jost.f[-1], jost.df[-1]
    W_phi = f * reg.dphi[-1] - df * reg.phi[-1]
    W_theta = f * reg.dtheta[-1] - df * reg.theta[-1]
    if abs(W_phi) < WRONSKIAN_FLOOR:
        raise DegenerateWronskian(xi, abs(W_phi))

    m, rho, rho_tilde, a_coeff = _laws(xi, W_phi, W_theta)
    return SpectralPoint(
        xi=float(xi),
        W_phi=complex(W_phi),
        W_theta=complex(W_theta),
        m=complex(m),
        rho=float(rho),
        rho_tilde=float(rho_tilde),
        a_coeff=complex(a_coeff),
        eval_x=float(eval_x),
    )


def small_lambda_rho_model(coeffs: ZeroEnergyCoefficients, lam):
    """
    rho(lam) ~ 1 / (pi^2/2 a1^2 + 2 [a1/2 log lam + gamma0 a1 - a2]^2).

    With a1 = 0 this is the constant 1 / (2 a2^2).
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("small_lambda_rho_model needs lambda > 0")
    a1, a2 = coeffs.a1, coeffs.a2
    bracket = 0.5 * a1 * np.log(lam) + coeffs.gamma0 * a1 - a2
    out = 1.0 / (0.5 * math.pi ** 2 * a1 * a1 + 2.0 * bracket * bracket)
    return out.item() if out.ndim == 0 else out


def classify_resonance(coeffs: ZeroEnergyCoefficients, threshold: float = 1e-3) -> bool:
    return abs(coeffs.a1) <= threshold * max(abs(coeffs.a2), 1.0)


def zero_energy_coefficients(
    pot,
    window: Tuple[float, float] = (100.0, 1000.0),
    settings: Optional[SolverSettings] = None,
    threshold: float = 1e-3,
) -> ZeroEnergyCoefficients:
    basis = "tail" if pot.inverse_square_tail else "linear"
    sol = solve_regular(pot, 0.0, zero_energy_grid(*window), settings)
    coeffs = fit_zero_energy_coeffs(sol, window, basis=basis)
    resonant = classify_resonance(coeffs, threshold)
    LOGGER.info(
        "%s: a1=%.6g a2=%.6g b1=%.6g b2=%.6g defect=%.2e resonant=%s",
        pot.name, coeffs.a1, coeffs.a2, coeffs.b1, coeffs.b2, coeffs.defect, resonant,
    )
    return dataclasses.replace(coeffs, resonant=resonant)


# -------------------------
# Frequency grid
# -------------------------
def make_xi_grid(
    xi_min: float,
    xi_max: float,
    t_max: float,
    x_max: float,
    per_decade: int = 48,
    refine: float = 1.0,
) -> XiGrid:
    """
    Nodes uniform in s(xi) = log(xi) / beta + xi / delta with s-step at most 1 / refine.

    beta = ln(10) / per_decade gives per_decade nodes per decade at small xi;
    delta = pi / (4 (t_max + x_max)) caps the spacing at large xi (Nyquist).
    """
    beta = math.log(10.0) / per_decade
    delta = math.pi / (4.0 * (t_max + x_max))

    def s_of(xi):
        return np.log(xi) / beta + xi / delta

    s_lo, s_hi = float(s_of(xi_min)), float(s_of(xi_max))
    if refine <= 0:
        raise DomainError("xi grid refinement must be positive")
    n = int(math.ceil((s_hi - s_lo) * refine)) + 1
    s = np.linspace(s_lo, s_hi, n)
    h = float(s[1] - s[0])

    # Newton in u = log xi, started right of the root (g is convex increasing)
    start = beta * s
    big = delta * s > 1.0
    start[big] = np.minimum(start[big], np.log(delta * s[big]))
    u = optimize.newton(
        lambda u: u / beta + np.exp(u) / delta - s,
        start,
        fprime=lambda u: 1.0 / beta + np.exp(u) / delta,
        tol=1e-14,
        maxiter=200,
    )
    xi = np.exp(u)
    xi[0], xi[-1] = xi_min, xi_max

    jac = beta * delta * xi / (delta + beta * xi)
    return XiGrid(
        xi=xi,
        s_step=h,
        jacobian=jac,
        weights=trapezoid_weights(n, h) * jac,
        log_step=beta * h,
        linear_step=delta * h,
    )


# -------------------------
# Table
# -------------------------
def _column_chunk(pot, xis: np.ndarray, x_grid: np.ndarray, settings: SolverSettings) -> dict:
    try:
        jost = solve_jost_batch(pot, xis, settings)
        x_all = np.union1d(x_grid, [jost.eval_x])
        phi, dphi, theta, dtheta = solve_regular_batch(pot, xis * xis, x_all, settings)
        psi = solve_scaling_batch(pot, xis * xis, x_grid, settings)
    except StepFailure as exc:
        if exc.xi is None:
            raise StepFailure(str(exc), xi=float(xis[0])) from exc
        raise

    row = int(np.searchsorted(x_all, jost.eval_x))
    on_grid = np.searchsorted(x_all, x_grid)
    W_phi = jost.f * dphi[row] - jost.df * phi[row]
    W_theta = jost.f * dtheta[row] - jost.df * theta[row]

    weak = np.abs(W_phi) < WRONSKIAN_FLOOR
    if weak.any():
        j = int(np.argmax(weak))
        raise DegenerateWronskian(float(xis[j]), float(abs(W_phi[j])))

    abel = np.max(np.abs(theta * dphi - dtheta * phi - 1.0), axis=0)
    jost_defect = np.abs(jost.f * np.conj(jost.df) - jost.df * np.conj(jost.f) + 2j * xis) / xis
    LOGGER.debug("chunk xi=[%.4g, %.4g]: X*=%.4g eval_x=%.4g", xis[0], xis[-1], jost.x_seed, jost.eval_x)
    return {
        "phi": phi[on_grid],
        "psi": psi,
        "W_phi": W_phi,
        "W_theta": W_theta,
        "abel": abel,
        "jost": jost_defect,
    }


def build_spectral_table(
    pot,
    grid,
    settings: Optional[SolverSettings] = None,
    zero_window: Tuple[float, float] = (100.0, 1000.0),
    resonance_threshold: float = 1e-3,
) -> SpectralTable:
    """
    Discretised diagonalisation of A on [0, x_max] x [xi_min, xi_max].

    Columns are computed in fixed chunks, so the table is bit-identical for
    identical inputs whatever the thread count.
    """
    settings = settings or SolverSettings()
    x_grid = uniform_grid(grid.x_max, grid.dx)
    x_weights = simpson_weights(x_grid.size, grid.dx)
    xg = make_xi_grid(grid.xi_min, grid.xi_max, grid.t_max, grid.x_max, grid.per_decade, grid.xi_refine)
    LOGGER.info(
        "building %s table: %d x-nodes, %d xi-nodes (chunk=%d, threads=%d)",
        pot.name, x_grid.size, xg.xi.size, settings.chunk, settings.threads,
    )

    parts = run_chunked(lambda sl: _column_chunk(pot, xg.xi[sl], x_grid, settings), xg.xi.size, settings)
    phi_matrix = np.concatenate([p["phi"] for p in parts], axis=1)
    W_phi = np.concatenate([p["W_phi"] for p in parts])
    W_theta = np.concatenate([p["W_theta"] for p in parts])
    abel = np.concatenate([p["abel"] for p in parts])
    psi_matrix = np.concatenate([p["psi"] for p in parts], axis=1)
    jost_defect = np.concatenate([p["jost"] for p in parts])

    m, rho, rho_tilde, a_coeff = _laws(xg.xi, W_phi, W_theta)
    if np.any(rho <= 0):
        LOGGER.warning("%s: nonpositive spectral density at %d nodes", pot.name, int(np.sum(rho <= 0)))
    if abel.max() > CERTIFICATION_TOL:
        LOGGER.warning("%s: Abel defect %.2e exceeds %.0e", pot.name, abel.max(), CERTIFICATION_TOL)

    coeffs = None
    if pot.regular_at_origin:
        coeffs = zero_energy_coefficients(pot, zero_window, settings, resonance_threshold)

    table = SpectralTable(
        grid=xg,
        x_grid=x_grid,
        x_weights=x_weights,
        phi_matrix=phi_matrix,
        rho=rho,
        rho_tilde=rho_tilde,
        m=m,
        a_coeff=a_coeff,
        certification=abel,
        potential_name=pot.name,
        t_max=grid.t_max,
        coefficients=coeffs,
        psi_matrix=psi_matrix,
        jost_defect=jost_defect,
    )
    mass = low_band_mass(table)
    LOGGER.info("%s: dropped band [0, %.3g] carries spectral mass %.3e", pot.name, grid.xi_min, mass)
    return dataclasses.replace(table, low_band_mass=mass)


# -------------------------
# Diagnostics
# -------------------------
def low_band_mass(table: SpectralTable) -> float:
    """Estimate of the integral of rho~ over the dropped band [0, xi_min]."""
    xi_min = float(table.xi_grid[0])
    coeffs = table.coefficients
    if coeffs is not None and coeffs.basis == "tail" and not coeffs.resonant:
        value, _ = integrate.quad(lambda lam: small_lambda_rho_model(coeffs, lam), 0.0, xi_min ** 2, limit=200)
        return float(value)
    return float(table.rho_tilde[0] * xi_min)


def fit_large_xi_law(table: SpectralTable, xi_lo: float = 2.0) -> Tuple[float, float]:
    """(C, p) in |xi pi rho(xi^2) - 1| ~ C xi^-p above xi_lo."""
    mask = table.xi_grid >= xi_lo
    dev = np.abs(table.xi_grid[mask] * math.pi * table.rho[mask] - 1.0)
    keep = dev > 0
    if keep.sum() < 3:
        return 0.0, float("inf")
    slope, intercept = np.polyfit(np.log(table.xi_grid[mask][keep]), np.log(dev[keep]), 1)
    return float(np.exp(intercept)), float(-slope)


def connection_coefficient_bound(table: SpectralTable, xi_lo: float = 2.0) -> float:
    """Smallest C with |a(xi) + 1/2| <= C / xi on the grid above xi_lo."""
    mask = table.xi_grid >= xi_lo
    return float(np.max(table.xi_grid[mask] * np.abs(table.a_coeff[mask] + 0.5)))


# -------------------------
# Serialisation
# -------------------------
def spectrum_frame(table: SpectralTable) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "xi": table.xi_grid,
            "rho": table.rho,
            "rho_tilde": table.rho_tilde,
            "re_m": table.m.real,
            "im_m": table.m.imag,
            "re_a": table.a_coeff.real,
            "im_a": table.a_coeff.imag,
            "weight": table.grid.weights,
            "abel_defect": table.certification,
        }
    )


def write_phi_matrix(matrix: np.ndarray, path) -> Path:
    """
    Little-endian float64, row-major, behind a 16-byte header:
    b"DWPH", u32 rows, u32 cols, 4 reserved zero bytes.
    """
    p = Path(path)
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    rows, cols = matrix.shape
    header = PHI_MAGIC + np.array([rows, cols, 0], dtype="<u4").tobytes()
    p.write_bytes(header + matrix.tobytes(order="C"))
    return p


def read_phi_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != PHI_MAGIC:
        raise ValueError("not a phi matrix dump (bad magic)")
    rows, cols, _ = np.frombuffer(raw[4:16], dtype="<u4")
    return np.frombuffer(raw[16:], dtype="<f8").reshape(int(rows), int(cols)).copy()
