# =========================
# file: tools/transform.py
# =========================
from __future__ import annotations

import logging
import math
import warnings
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from core.errors import BoundaryViolation, DomainError, GridMismatch, TruncationWarning
from core.gridutils import bracket, derivative, grid_spacing, one_sided_slope, simpson_weights
from core.models import GridFunction, Potential, SpectralTable
from tools.specfun import bessel_j0

LOGGER = logging.getLogger(__name__)

DECAY_FLOOR = 1e-10


class Diagonalization(NamedTuple):
    values: GridFunction  # F(Af) on the xi grid
    sup_discrepancy: float
    relative_error: float  # ||F(Af) - xi^2 Ff|| / ||<xi>^2 Ff||


# -------------------------
# Helpers
# -------------------------
def _check_grid(f: GridFunction, grid: np.ndarray, domain: str) -> None:
    if f.domain != domain or f.values.shape[0] != grid.size or not np.allclose(f.grid, grid, rtol=0, atol=1e-12):
        raise GridMismatch(f"function on {f.domain}-grid of {f.values.shape[0]} nodes does not match the table")


def x_function(table: SpectralTable, values, parity: str = "even") -> GridFunction:
    return GridFunction(grid=table.x_grid, values=np.asarray(values), parity=parity, domain="x")


def xi_function(table: SpectralTable, values) -> GridFunction:
    return GridFunction(grid=table.xi_grid, values=np.asarray(values), parity="none", domain="xi")


def norm_x(values, table: SpectralTable) -> float:
    return float(np.sqrt(np.sum(table.x_weights * np.abs(values) ** 2)))


def norm_xi(values, table: SpectralTable) -> float:
    """L^2 norm with respect to rho~(xi) d xi."""
    return float(np.sqrt(np.sum(table.weights * np.abs(values) ** 2)))


# -------------------------
# Transform pair
# -------------------------
def forward(f: GridFunction, table: SpectralTable, check_tail: bool = True) -> GridFunction:
    """Ff(xi) = int_0^inf phi(x, xi^2) f(x) dx, Simpson in x."""
    _check_grid(f, table.x_grid, "x")
    tail = float(np.max(np.abs(f.values[-8:])))
    if check_tail and tail > DECAY_FLOOR:
        warnings.warn(
            f"data reach {tail:.2e} near x_max={table.x_max:g}; the transform is truncated",
            TruncationWarning,
            stacklevel=2,
        )
    weighted = table.x_weights[:, None] * f.values.reshape(table.x_grid.size, -1)
    out = table.phi_matrix.T @ weighted
    return xi_function(table, out.reshape((table.xi_grid.size,) + f.values.shape[1:]))


def inverse(g_hat: GridFunction, table: SpectralTable) -> GridFunction:
    """F^-1 g(x) = int phi(x, xi^2) g(xi) rho~(xi) d xi over the table band."""
    _check_grid(g_hat, table.xi_grid, "xi")
    weighted = table.weights[:, None] * g_hat.values.reshape(table.xi_grid.size, -1)
    out = table.phi_matrix @ weighted
    return x_function(table, out.reshape((table.x_grid.size,) + g_hat.values.shape[1:]))


def plancherel_defect(f: GridFunction, table: SpectralTable) -> float:
    """| ||Ff||^2_rho~ - ||f||^2 | / ||f||^2."""
    norm2 = norm_x(f.values, table) ** 2
    if norm2 == 0:
        return 0.0
    return abs(norm_xi(forward(f, table).values, table) ** 2 - norm2) / norm2


def roundtrip_error(f: GridFunction, table: SpectralTable) -> float:
    norm = norm_x(f.values, table)
    if norm == 0:
        return 0.0
    back = inverse(forward(f, table), table)
    return norm_x(back.values - f.values, table) / norm


def apply_A(f: GridFunction, pot: Potential) -> GridFunction:
    """-f'' + V f with the even reflection at x = 0."""
    h = grid_spacing(f.grid)
    return f.with_values(-derivative(f.values, h, order=2, parity="even") + pot.eval(f.grid) * f.values)


def check_neumann(f: GridFunction) -> None:
    h = grid_spacing(f.grid)
    slope = abs(one_sided_slope(f.values, h))
    norm = float(np.sqrt(np.sum(simpson_weights(f.grid.size, h) * np.abs(f.values) ** 2)))
    if slope > 1e-8 * norm:
        raise BoundaryViolation(slope, norm)


def apply_A_diag(f: GridFunction, table: SpectralTable, pot: Potential) -> Diagonalization:
    """Compares F(-f'' + Vf) with xi^2 Ff."""
    check_neumann(f)
    lhs = forward(apply_A(f, pot), table)
    ff = forward(f, table).values
    diff = lhs.values - table.xi_grid ** 2 * ff
    scale = norm_xi(bracket(table.xi_grid) ** 2 * ff, table)
    rel = norm_xi(diff, table) / scale if scale > 0 else 0.0
    return Diagonalization(values=lhs, sup_discrepancy=float(np.max(np.abs(diff))), relative_error=rel)


# -------------------------
# Sobolev norms
# -------------------------
def sobolev_norm_distorted(f: GridFunction, s: float, table: SpectralTable) -> float:
    """|| <xi>^s Ff ||_rho~."""
    if s < 0:
        raise DomainError("sobolev_norm_distorted needs s >= 0")
    ff = forward(f, table).values
    return norm_xi(bracket(table.xi_grid) ** s * ff, table)


def sobolev_norm_hat(g_hat: np.ndarray, s: float, table: SpectralTable) -> float:
    return norm_xi(bracket(table.xi_grid) ** s * g_hat, table)


def grid_sobolev_norm(f: GridFunction, k: int) -> float:
    """H^k(R+) norm from stencil derivatives; parity alternates with each derivative."""
    h = grid_spacing(f.grid)
    w = simpson_weights(f.grid.size, h)
    values = f.values
    parity = f.parity
    total = float(np.sum(w * np.abs(values) ** 2))
    for _ in range(k):
        values = derivative(values, h, order=1, parity=parity)
        parity = {"even": "odd", "odd": "even"}.get(parity, "none")
        total += float(np.sum(w * np.abs(values) ** 2))
    return math.sqrt(total)


# -------------------------
# Free references
# -------------------------
def hankel_transform(f: GridFunction) -> GridFunction:
    """
    F(xi) = int_0^inf (x xi)^(1/2) J0(x xi) f(x) dx, sampled on the input grid.
    Self-inverse; x^(1/2) exp(-x^2/2) is a fixed point.
    """
    x = f.grid
    h = grid_spacing(x)
    w = simpson_weights(x.size, h)
    z = np.outer(x, x)
    kernel = np.sqrt(z) * bessel_j0(z.ravel()).reshape(z.shape)
    return f.with_values(kernel @ (w * f.values), domain="xi" if f.domain == "x" else "x")


def free_reference_density(dimension: int, lam):
    """rho_1(lam) = lam^(-1/2) / pi for A = -d^2/dx^2; rho_2 = 1/2 for the radial 2D case."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("free densities need lambda > 0")
    if dimension == 1:
        out = lam ** -0.5 / math.pi
    elif dimension == 2:
        out = np.full_like(lam, 0.5)
    else:
        raise ValueError("dimension must be 1 or 2")
    return out.item() if out.ndim == 0 else out


# -------------------------
# CSV I/O
# -------------------------
def write_grid_function(f: GridFunction, path, float_format: str = "%.17g") -> Path:
    """Two columns (coordinate, value), or three (coordinate, re, im) for complex data."""
    coord = "x" if f.domain == "x" else "xi"
    if np.iscomplexobj(f.values):
        df = pd.DataFrame({coord: f.grid, "re": f.values.real, "im": f.values.imag})
    else:
        df = pd.DataFrame({coord: f.grid, "value": f.values})
    p = Path(path)
    df.to_csv(p, index=False, float_format=float_format)
    return p


def read_grid_function(path, parity: str = "even") -> GridFunction:
    df = pd.read_csv(Path(path))
    coord = df.columns[0]
    if df.shape[1] == 3:
        values = df.iloc[:, 1].to_numpy() + 1j * df.iloc[:, 2].to_numpy()
    elif df.shape[1] == 2:
        values = df.iloc[:, 1].to_numpy()
    else:
        raise ValueError("grid-function CSV needs two or three columns")
    domain = "x" if coord == "x" else "xi"
    return GridFunction(grid=df[coord].to_numpy(), values=values, parity=parity, domain=domain)
