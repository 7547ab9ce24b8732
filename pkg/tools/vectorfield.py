# =========================
# file: tools/vectorfield.py
# =========================
"""
Scaling vector field on both sides of the distorted Fourier transform.

On the physical side D = x d/dx and S = t d/dt + D. On the Fourier side
F D = -xi d/dxi F - F + B F, so B measures how far the potential moves S
away from its free form. B splits into a diagonal multiplier h and the
principal-value operator with kernel F(xi, eta) rho~(eta) / (xi^2 - eta^2).
"""
from __future__ import annotations

import logging
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import ExclusionTooWide
from core.gridutils import bracket, derivative, grid_spacing
from core.models import BKernel, DiagonalComparison, GridFunction, Potential, SpectralTable
from tools.evolution import check_nyquist, default_duhamel_nodes, duhamel_hat, simpson_nodes, source_hats
from tools.potential import eval_U
from tools.transform import forward, inverse, norm_x, norm_xi, x_function, xi_function

LOGGER = logging.getLogger(__name__)

Source = Callable[[float], np.ndarray]

MAX_EXCLUSION_STEPS = 8.0
TIME_STEP = 1e-3  # for s d/ds of sources


# -------------------------
# D and B
# -------------------------
def xi_derivative(values: np.ndarray, table: SpectralTable) -> np.ndarray:
    """d/dxi along axis 0 through the s-parametrisation of the grid."""
    ds = derivative(values, table.grid.s_step, order=1, parity="none")
    jac = table.grid.jacobian.reshape((-1,) + (1,) * (np.ndim(values) - 1))
    return ds / jac


def apply_D(f: GridFunction, table: Optional[SpectralTable] = None) -> GridFunction:
    """x f'(x) on the x grid, or xi f'(xi) on a table's xi grid."""
    if f.domain == "xi":
        if table is None:
            raise ValueError("apply_D on the xi grid needs the spectral table")
        xi = table.xi_grid.reshape((-1,) + (1,) * (f.values.ndim - 1))
        return f.with_values(xi * xi_derivative(f.values, table))
    h = grid_spacing(f.grid)
    x = f.grid.reshape((-1,) + (1,) * (f.values.ndim - 1))
    return f.with_values(x * derivative(f.values, h, order=1, parity=f.parity))


def _D_hat(values: np.ndarray, table: SpectralTable) -> np.ndarray:
    return apply_D(xi_function(table, values), table).values


def apply_B(g_hat: GridFunction, table: SpectralTable) -> GridFunction:
    """
    B g = F(D F^-1 g) + xi d/dxi g + g, applied in weak form.

    Integrating by parts moves D and xi d/dxi onto the eigenfunctions:
    B g(xi) = int psi(x, xi) (F^-1 g)(x) dx with psi = 2 lam d_lam phi - x phi'.
    """
    if table.psi_matrix is None:
        raise ValueError("table carries no scaling field; rebuild it with build_spectral_table")
    physical = inverse(g_hat, table).values
    w = table.x_weights if physical.ndim == 1 else table.x_weights[:, None]
    return g_hat.with_values(table.psi_matrix.T @ (w * physical))


def _B(values: np.ndarray, table: SpectralTable) -> np.ndarray:
    return apply_B(xi_function(table, values), table).values


def apply_E(f: GridFunction, table: SpectralTable) -> GridFunction:
    """E = F^-1 B F."""
    return inverse(xi_function(table, _B(forward(f, table, check_tail=False).values, table)), table)


def iterated_commutator_adDB(m: int, f_hat: GridFunction, table: SpectralTable) -> GridFunction:
    """ad_D^m(B) f with D = xi d/dxi; m in {1, 2}."""
    if m not in (1, 2):
        raise ValueError("m must be 1 or 2")

    def ad1(v):
        return _D_hat(_B(v, table), table) - _B(_D_hat(v, table), table)

    v = f_hat.values
    if m == 1:
        return f_hat.with_values(ad1(v))
    return f_hat.with_values(_D_hat(ad1(v), table) - ad1(_D_hat(v, table)))


def adD2_expanded(f_hat: GridFunction, table: SpectralTable) -> GridFunction:
    """D^2 B f - 2 D B D f + B D^2 f."""
    v = f_hat.values
    d1 = _D_hat(v, table)
    d2 = _D_hat(d1, table)
    out = _D_hat(_D_hat(_B(v, table), table), table) - 2.0 * _D_hat(_B(d1, table), table) + _B(d2, table)
    return f_hat.with_values(out)


# -------------------------
# Kernel path
# -------------------------
def kernel_F(table: SpectralTable, pot: Potential) -> BKernel:
    """F(xi, eta) = int phi(x, xi^2) phi(x, eta^2) U(x) dx."""
    u = eval_U(pot, table.x_grid)
    weighted = (table.x_weights * u)[:, None] * table.phi_matrix
    matrix = table.phi_matrix.T @ weighted
    matrix = 0.5 * (matrix + matrix.T)
    LOGGER.info("kernel F: %d x %d, max |F| = %.3e", matrix.shape[0], matrix.shape[1], np.max(np.abs(matrix)))
    return BKernel(
        xi_grid=table.xi_grid,
        eta_grid=table.xi_grid,
        F_matrix=matrix,
        U_samples=u,
        rho_tilde=table.rho_tilde,
        grid=table.grid,
    )


def offdiag_identity_residual(
    f_hat: GridFunction, table: SpectralTable, kernel: BKernel, relative: bool = False
) -> float:
    """
    sup_xi | xi^2 B f - B(xi^2 f) - int F(xi, eta) rho~(eta) f(eta) d eta |,
    divided by the sup of the integral term when relative.
    """
    xi2 = table.xi_grid ** 2
    lhs = xi2 * _B(f_hat.values, table) - _B(xi2 * f_hat.values, table)
    rhs = kernel.F_matrix @ (table.weights * f_hat.values)
    err = float(np.max(np.abs(lhs - rhs)))
    if relative:
        scale = float(np.max(np.abs(rhs)))
        return err / scale if scale > 0 else err
    return err


def identity_refinement(
    pot: Potential,
    coarse: SpectralTable,
    fine: SpectralTable,
    data: Callable[[SpectralTable], GridFunction],
) -> Tuple[float, float]:
    """Relative off-diagonal identity residuals of the same data on a coarse and a fine table."""
    out = []
    for table in (coarse, fine):
        f_hat = forward(data(table), table)
        out.append(offdiag_identity_residual(f_hat, table, kernel_F(table, pot), relative=True))
    LOGGER.info("identity residual %.3e (coarse) -> %.3e (fine)", out[0], out[1])
    return out[0], out[1]


def refinement_passes(coarse: float, fine: float, ratio: float, floor: float) -> bool:
    """The residual drops by at least ratio, or already sits at the floor."""
    return fine <= floor or coarse >= ratio * fine


def singular_B0(
    f_hat: GridFunction,
    kernel: BKernel,
    exclusion_half_width: float = 2.0,
) -> GridFunction:
    """
    PV int F(xi, eta) rho~(eta) f(eta) / (xi^2 - eta^2) d eta.

    With G(eta) = F(xi, eta) rho~(eta) f(eta) / (xi + eta) the integral is
    int (G(eta) - G(xi)) / (xi - eta) + G(xi) log((xi - a) / (b - xi)) on
    [a, b]; nodes closer than exclusion_half_width local steps take the
    limit -G'(xi).
    """
    if exclusion_half_width > MAX_EXCLUSION_STEPS:
        raise ExclusionTooWide(
            f"exclusion of {exclusion_half_width:g} local steps exceeds {MAX_EXCLUSION_STEPS:g}"
        )
    grid = kernel.grid
    xi = kernel.xi_grid
    eta = kernel.eta_grid
    a, b = float(eta[0]), float(eta[-1])

    G = kernel.F_matrix * (kernel.rho_tilde * f_hat.values)[None, :] / (xi[:, None] + eta[None, :])
    G_diag = np.diag(G).copy()
    dG = derivative(G.T, grid.s_step, order=1, parity="none").T / grid.jacobian[None, :]
    dG_diag = np.diag(dG).copy()

    gap = xi[:, None] - eta[None, :]
    local = (grid.jacobian * grid.s_step)[:, None]
    near = np.abs(gap) < exclusion_half_width * local
    np.fill_diagonal(near, True)
    safe_gap = np.where(near, 1.0, gap)
    quotient = np.where(near, -dG_diag[:, None], (G - G_diag[:, None]) / safe_gap)

    with np.errstate(divide="ignore"):
        log_term = np.log(np.maximum(xi - a, 1e-300) / np.maximum(b - xi, 1e-300))
    # the endpoint log diverges; G vanishes there for data supported inside the band
    log_term[0] = log_term[-1] = 0.0
    out = quotient @ grid.weights + G_diag * log_term
    return GridFunction(grid=xi, values=out, parity="none", domain="xi")


def h_formula(table: SpectralTable) -> np.ndarray:
    """4 pi xi^2 rho(xi^2) Re(a'(xi) conj a(xi)); a and conj a each contribute half."""
    da = xi_derivative(table.a_coeff, table)
    return 4.0 * np.pi * table.xi_grid ** 2 * table.rho * np.real(da * np.conj(table.a_coeff))


def diagonal_h(
    table: SpectralTable,
    kernel: BKernel,
    xi0: float,
    width: float = 0.25,
    exclusion_half_width: float = 2.0,
    tol: float = 0.1,
) -> DiagonalComparison:
    """
    Narrowband extraction of the diagonal multiplier at xi0, set against the
    a'(xi) conj a(xi) formula; `disagree` flags a relative gap above tol.
    """
    i = int(np.argmin(np.abs(table.xi_grid - xi0)))
    xi = float(table.xi_grid[i])
    g = np.exp(-0.5 * ((table.xi_grid - xi) / width) ** 2)
    g_hat = xi_function(table, g)

    b_val = _B(g, table)[i]
    b0_val = singular_B0(g_hat, kernel, exclusion_half_width).values[i]
    extracted = float(np.real(b_val - b0_val) / g[i])
    plain = float(np.real(b_val) / g[i])
    formula = float(h_formula(table)[i])
    disagree = abs(extracted - formula) > tol * max(abs(formula), abs(extracted), 1e-3)
    if disagree:
        LOGGER.warning("diagonal h at xi=%.4g: extracted %.4e vs formula %.4e", xi, extracted, formula)
    return DiagonalComparison(xi=xi, h_extracted=extracted, h_formula=formula, plain_ratio=plain, disagree=disagree)


def kernel_offdiag_decay(kernel: BKernel, k: int = 4) -> float:
    """max |F(xi, eta)| (xi^k + eta^k) over xi >= 2 eta + 1."""
    xi = kernel.xi_grid[:, None]
    eta = kernel.eta_grid[None, :]
    mask = xi >= 2.0 * eta + 1.0
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(kernel.F_matrix)[mask] * (xi ** k + eta ** k)[mask]))


def kernel_frame(kernel: BKernel, stride: int = 1) -> pd.DataFrame:
    """(xi, eta, F) triples on every stride-th node."""
    xi = kernel.xi_grid[::stride]
    eta = kernel.eta_grid[::stride]
    mat = kernel.F_matrix[::stride, ::stride]
    xx, ee = np.meshgrid(xi, eta, indexing="ij")
    return pd.DataFrame({"xi": xx.ravel(), "eta": ee.ravel(), "F": mat.ravel()})


# -------------------------
# Commutator identities
# -------------------------
def _physical(table: SpectralTable, values: np.ndarray) -> np.ndarray:
    return inverse(xi_function(table, values), table).values


def commutator_S_cos_residual(f: GridFunction, t: float, table: SpectralTable) -> float:
    """|| S cos(t sqrt A) f - cos(t sqrt A) D f - [E, cos(t sqrt A)] f ||."""
    check_nyquist(t, table)
    xi = table.xi_grid
    ff = forward(f, table).values
    c = np.cos(t * xi)

    u = _physical(table, c * ff)
    t_dt_u = _physical(table, -t * xi * np.sin(t * xi) * ff)
    s_u = t_dt_u + apply_D(x_function(table, u)).values

    cos_df = _physical(table, c * forward(apply_D(f), table).values)
    bracket_hat = _B(c * ff, table) - c * _B(ff, table)
    residual = s_u - cos_df - _physical(table, bracket_hat)
    return norm_x(residual, table)


def commutator_S_sin_residual(g: GridFunction, t: float, table: SpectralTable) -> float:
    """|| S sin(t sqrt A)/sqrt A g - sin(t sqrt A)/sqrt A (Dg + g) - [E, sin(t sqrt A)/sqrt A] g ||."""
    check_nyquist(t, table)
    xi = table.xi_grid
    fg = forward(g, table).values
    sinc = np.sin(t * xi) / xi

    u = _physical(table, sinc * fg)
    t_dt_u = _physical(table, t * np.cos(t * xi) * fg)
    s_u = t_dt_u + apply_D(x_function(table, u)).values

    forcing = forward(g.with_values(apply_D(g).values + g.values), table).values
    bracket_hat = _B(sinc * fg, table) - sinc * _B(fg, table)
    residual = s_u - _physical(table, sinc * forcing) - _physical(table, bracket_hat)
    return norm_x(residual, table)


def _s_ds(src: Source, s: float) -> np.ndarray:
    h = TIME_STEP
    if s < 2 * h:
        # src(0) = 0; one-sided at the origin
        return s * (-3.0 * src(s) + 4.0 * src(s + h) - src(s + 2 * h)) / (2 * h)
    return s * (src(s - 2 * h) - 8.0 * src(s - h) + 8.0 * src(s + h) - src(s + 2 * h)) / (12.0 * h)


def duhamel_S_commutation_residual(
    src: Source, t: float, table: SpectralTable, n_s: Optional[int] = None
) -> float:
    """
    Relative residual of
    S u(t) = int_0^t sin((t-s) sqrt A)/sqrt A (S src)(s) ds + 2 u(t) + int_0^t [E, sin((t-s) sqrt A)/sqrt A] src(s) ds
    for u the Duhamel solution; the last integral is E u(t) - Duhamel(E src).
    """
    check_nyquist(t, table)
    if t == 0:
        return 0.0
    xi = table.xi_grid
    s, w = simpson_nodes(t, n_s or default_duhamel_nodes(t, table))

    src_hat = source_hats(src, s, table)
    u_hat, ut_hat = duhamel_hat(src_hat, s, w, t, xi)
    u = _physical(table, u_hat)
    s_u = t * _physical(table, ut_hat) + apply_D(x_function(table, u)).values

    def s_src(si: float) -> np.ndarray:
        return _s_ds(src, si) + apply_D(x_function(table, src(si))).values

    su_hat, _ = duhamel_hat(source_hats(s_src, s, table), s, w, t, xi)
    e_src_hat = _B(src_hat, table)
    du_e, _ = duhamel_hat(e_src_hat, s, w, t, xi)
    e_u_hat = _B(u_hat, table)

    rhs = _physical(table, su_hat) + 2.0 * u + _physical(table, e_u_hat - du_e)
    scale = norm_x(s_u, table)
    err = norm_x(s_u - rhs, table)
    return err / scale if scale > 0 else err


def commutator_sqrtA_E_ratio(f: GridFunction, s: float, table: SpectralTable) -> float:
    """|| [sqrt A, E] f ||_{H^s} / || sqrt A f ||_{H^(s-1)}, norms on the Fourier side."""
    xi = table.xi_grid
    ff = forward(f, table).values
    comm = xi * _B(ff, table) - _B(xi * ff, table)
    num = norm_xi(bracket(xi) ** s * comm, table)
    den = norm_xi(bracket(xi) ** (s - 1.0) * xi * ff, table)
    return num / den if den > 0 else 0.0


def operator_norm_table(
    table: SpectralTable, suite: Sequence[Tuple[str, GridFunction]], s: float = 1.0
) -> pd.DataFrame:
    """Empirical norm ratios of B, ad_D(B) and [sqrt A, E] over a data suite."""
    rows: Dict[str, list] = {"function": [], "B": [], "adD_B": [], "sqrtA_E": []}
    for name, f in suite:
        g_hat = forward(f, table)
        norm = norm_xi(g_hat.values, table)
        rows["function"].append(name)
        rows["B"].append(norm_xi(apply_B(g_hat, table).values, table) / norm)
        rows["adD_B"].append(norm_xi(iterated_commutator_adDB(1, g_hat, table).values, table) / norm)
        rows["sqrtA_E"].append(commutator_sqrtA_E_ratio(f, s, table))
    return pd.DataFrame(rows)
