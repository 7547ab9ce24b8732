import numpy as np
import pytest
from scipy import integrate

from core.config import GridSpec
from core.errors import ExclusionTooWide
from core.gridutils import derivative
from core.models import BKernel, GridFunction
from tools.datasets import SUITE, sample
from tools.spectral import build_spectral_table, make_xi_grid
from tools.transform import forward, grid_sobolev_norm, norm_x, norm_xi, xi_function
from tools.vectorfield import (
    adD2_expanded,
    apply_B,
    apply_D,
    apply_E,
    commutator_S_cos_residual,
    commutator_S_sin_residual,
    commutator_sqrtA_E_ratio,
    diagonal_h,
    duhamel_S_commutation_residual,
    h_formula,
    identity_refinement,
    iterated_commutator_adDB,
    kernel_F,
    kernel_frame,
    kernel_offdiag_decay,
    offdiag_identity_residual,
    operator_norm_table,
    refinement_passes,
    singular_B0,
    xi_derivative,
)


@pytest.fixture(scope="module")
def model_kernel(model_table, model_pot):
    return kernel_F(model_table, model_pot)


def test_apply_D_in_both_domains(model_table, gaussian_model):
    x = model_table.x_grid
    np.testing.assert_allclose(apply_D(gaussian_model).values, -x * x * np.exp(-0.5 * x * x), atol=1e-6)

    xi = model_table.xi_grid
    g = xi_function(model_table, np.exp(-0.5 * xi ** 2))
    np.testing.assert_allclose(apply_D(g, model_table).values, -xi ** 2 * np.exp(-0.5 * xi ** 2), atol=1e-5)
    with pytest.raises(ValueError):
        apply_D(g)


def test_B_vanishes_for_the_free_operator(free_table, gaussian_free):
    g_hat = forward(gaussian_free, free_table)
    assert norm_xi(apply_B(g_hat, free_table).values, free_table) <= 1e-3 * norm_xi(g_hat.values, free_table)
    assert norm_x(apply_E(gaussian_free, free_table).values, free_table) <= 1e-3 * norm_x(gaussian_free.values, free_table)
    assert commutator_sqrtA_E_ratio(gaussian_free, 1.0, free_table) <= 1e-3


def test_B_is_nontrivial_for_the_model(model_table, gaussian_model):
    g_hat = forward(gaussian_model, model_table)
    assert norm_xi(apply_B(g_hat, model_table).values, model_table) > 1e-3 * norm_xi(g_hat.values, model_table)


def test_second_commutator_expansion(model_table, gaussian_model):
    g_hat = forward(gaussian_model, model_table)
    nested = iterated_commutator_adDB(2, g_hat, model_table).values
    expanded = adD2_expanded(g_hat, model_table).values
    scale = np.max(np.abs(expanded))
    np.testing.assert_allclose(nested, expanded, rtol=0, atol=1e-9 * max(scale, 1.0))
    with pytest.raises(ValueError):
        iterated_commutator_adDB(3, g_hat, model_table)


def test_kernel_is_symmetric_and_vanishes_without_potential(model_kernel, free_table, free_pot):
    np.testing.assert_array_equal(model_kernel.F_matrix, model_kernel.F_matrix.T)
    assert not kernel_F(free_table, free_pot).F_matrix.any()
    assert np.isfinite(kernel_offdiag_decay(model_kernel))


def test_offdiagonal_identity(model_table, model_kernel, gaussian_model):
    g_hat = forward(gaussian_model, model_table)
    assert offdiag_identity_residual(g_hat, model_table, model_kernel, relative=True) <= 5e-2


def test_singular_part_and_diagonal_multiplier(model_table, model_kernel, gaussian_model):
    g_hat = forward(gaussian_model, model_table)
    b0 = singular_B0(g_hat, model_kernel)
    assert b0.domain == "xi" and np.all(np.isfinite(b0.values))
    with pytest.raises(ExclusionTooWide):
        singular_B0(g_hat, model_kernel, exclusion_half_width=9.0)

    comparison = diagonal_h(model_table, model_kernel, 1.0)
    assert comparison.xi == pytest.approx(1.0, abs=0.05)
    assert np.isfinite(comparison.h_extracted) and np.isfinite(comparison.h_formula)


def test_h_formula_vanishes_for_free_case(free_table):
    assert np.max(np.abs(h_formula(free_table))) < 1e-5


def test_commutator_identities(model_table, gaussian_model):
    scale = grid_sobolev_norm(gaussian_model, 1)
    assert commutator_S_cos_residual(gaussian_model, 5.0, model_table) <= 5e-2 * scale
    assert commutator_S_sin_residual(gaussian_model, 5.0, model_table) <= 5e-2 * scale


def test_duhamel_commutation(model_table, gaussian_model):
    values = gaussian_model.values
    residual = duhamel_S_commutation_residual(lambda s: s * values, 3.0, model_table)
    assert residual <= 5e-2
    assert duhamel_S_commutation_residual(lambda s: s * values, 0.0, model_table) == 0.0


def test_operator_norm_table_and_kernel_dump(model_table, model_kernel):
    suite = [(name, sample(SUITE[name], model_table)) for name in ("gaussian", "hermite2", "wide_gaussian")]
    norms = operator_norm_table(model_table, suite)
    assert list(norms.columns) == ["function", "B", "adD_B", "sqrtA_E"]
    assert np.isfinite(norms[["B", "adD_B", "sqrtA_E"]].to_numpy()).all()

    df = kernel_frame(model_kernel, stride=4)
    n = len(model_table.xi_grid[::4])
    assert len(df) == n * n


def test_scaling_field_vanishes_for_the_free_operator(free_table, gaussian_free):
    assert np.max(np.abs(free_table.psi_matrix)) < 1e-5
    xi_f = free_table.xi_grid * forward(gaussian_free, free_table).values
    assert norm_xi(apply_B(xi_function(free_table, xi_f), free_table).values, free_table) <= 1e-4 * norm_xi(xi_f, free_table)


def test_scaling_field_matches_difference_quotients(model_table):
    # psi = xi d/dxi phi - x d/dx phi
    phi = model_table.phi_matrix
    xi = model_table.xi_grid
    x = model_table.x_grid
    by_xi = xi[:, None] * xi_derivative(phi.T, model_table)
    by_x = x[:, None] * derivative(phi, model_table.dx, order=1, parity="even")
    rows = x <= 10.0
    cols = (xi >= 0.1) & (xi <= 5.0)
    expected = (by_xi.T - by_x)[np.ix_(rows, cols)]
    got = model_table.psi_matrix[np.ix_(rows, cols)]
    assert np.max(np.abs(got - expected)) <= 1e-2 * np.max(np.abs(got))


def test_identity_residual_refines(model_pot):
    fine_grid = GridSpec(x_max=20.0, dx=0.05, xi_min=1e-3, xi_max=5.0, per_decade=16, t_max=4.0)
    coarse = build_spectral_table(model_pot, fine_grid.coarsened())
    fine = build_spectral_table(model_pot, fine_grid)
    res_coarse, res_fine = identity_refinement(model_pot, coarse, fine, lambda t: sample(SUITE["gaussian"], t))
    assert res_fine <= 5e-2
    assert refinement_passes(res_coarse, res_fine, 1.5, 1e-3)


def test_refinement_passes():
    assert refinement_passes(0.3, 0.1, 1.5, 1e-3)
    assert not refinement_passes(0.12, 0.1, 1.5, 1e-3)
    assert refinement_passes(1e-4, 1e-4, 1.5, 1e-3)


@pytest.mark.parametrize("xi0", [1.0, 2.0])
def test_diagonal_multiplier_matches_formula(model_table, model_kernel, xi0):
    comparison = diagonal_h(model_table, model_kernel, xi0)
    assert comparison.h_extracted == pytest.approx(comparison.h_formula, rel=0.1)
    assert not comparison.disagree


def _bump_kernel():
    grid = make_xi_grid(0.5, 4.0, 40.0, 60.0, per_decade=48)
    n = grid.xi.size
    kernel = BKernel(
        xi_grid=grid.xi,
        eta_grid=grid.xi,
        F_matrix=np.ones((n, n)),
        U_samples=np.zeros(1),
        rho_tilde=np.ones(n),
        grid=grid,
    )
    bump = np.exp(-(((grid.xi - 2.0) / 0.3) ** 2))
    return kernel, GridFunction(grid=grid.xi, values=bump, parity="none", domain="xi")


def _bump(eta):
    return np.exp(-(((eta - 2.0) / 0.3) ** 2))


def test_singular_part_against_cauchy_quadrature():
    kernel, f_hat = _bump_kernel()
    out = singular_B0(f_hat, kernel).values
    scale = np.max(np.abs(out))
    for target in (1.5, 1.9, 2.3, 2.8):
        i = int(np.argmin(np.abs(kernel.xi_grid - target)))
        xi = float(kernel.xi_grid[i])
        # f / (xi^2 - eta^2) = -[f / (eta + xi)] / (eta - xi)
        pv, _ = integrate.quad(lambda e: -_bump(e) / (e + xi), 0.5, 4.0, weight="cauchy", wvar=xi, limit=200)
        assert abs(out[i] - pv) <= 2e-3 * scale


def test_singular_part_endpoints_are_plain_integrals():
    kernel, f_hat = _bump_kernel()
    out = singular_B0(f_hat, kernel).values
    scale = np.max(np.abs(out))
    for i in (0, -1):
        xi = float(kernel.xi_grid[i])
        plain, _ = integrate.quad(lambda e: _bump(e) / (xi * xi - e * e), 0.5, 4.0, points=[2.0], limit=200)
        assert np.isfinite(out[i])
        assert abs(out[i] - plain) <= 2e-3 * scale


def test_singular_part_is_insensitive_to_the_exclusion(model_table, model_kernel, gaussian_model):
    g_hat = forward(gaussian_model, model_table)
    wide = singular_B0(g_hat, model_kernel, exclusion_half_width=2.0).values
    narrow = singular_B0(g_hat, model_kernel, exclusion_half_width=1.0).values
    assert np.max(np.abs(wide - narrow)) <= 5e-3 * np.max(np.abs(wide))


def test_duhamel_commutation_for_the_free_operator(free_table, gaussian_free):
    values = gaussian_free.values
    assert duhamel_S_commutation_residual(lambda s: s * values, 3.0, free_table) <= 5e-2
