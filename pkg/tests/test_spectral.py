import math

import numpy as np
import pytest

from core.errors import DomainError
from tools.odesolve import SolverSettings
from core.models import ZeroEnergyCoefficients
from tools.potential import model_potential, zero_potential
from tools.spectral import (
    classify_resonance,
    connection_coefficient_bound,
    fit_large_xi_law,
    make_xi_grid,
    read_phi_matrix,
    small_lambda_rho_model,
    spectral_point,
    spectrum_frame,
    write_phi_matrix,
    zero_energy_coefficients,
)


def test_free_spectral_laws(free_table):
    xi = free_table.xi_grid
    band = (xi >= 0.01) & (xi <= 6.0)
    rel = np.abs(free_table.rho[band] * math.pi * xi[band] - 1.0)
    assert rel.max() <= 1e-6
    np.testing.assert_allclose(free_table.rho_tilde[band], 2.0 / math.pi, rtol=1e-6)
    np.testing.assert_allclose(free_table.a_coeff[band], -0.5, atol=1e-6)
    np.testing.assert_allclose(free_table.m[band], 1j / xi[band], rtol=1e-6)


def test_free_spectral_point():
    point = spectral_point(zero_potential(), 2.0)
    assert point.W_phi == pytest.approx(2.0j, abs=1e-8)
    assert point.rho == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-8)


def test_model_m_function_is_independent_of_evaluation_point():
    pot = model_potential(1.0)
    first = spectral_point(pot, 1.2, eval_x=8.0)
    second = spectral_point(pot, 1.2, eval_x=20.0)
    assert abs(first.m - second.m) <= 1e-7 * abs(first.m)


def test_model_table_is_certified(model_table):
    assert np.all(model_table.rho > 0)
    assert model_table.certification.max() <= 1e-6
    assert model_table.phi_matrix.shape == (model_table.x_grid.size, model_table.xi_grid.size)
    np.testing.assert_allclose(model_table.phi_matrix[0], -1.0, atol=1e-10)


def test_model_is_nonresonant_with_wronskian_one(model_table):
    coeffs = model_table.coefficients
    assert coeffs is not None and coeffs.basis == "tail"
    assert not coeffs.resonant
    assert coeffs.defect <= 1e-3


def test_resonant_member_of_the_family_is_detected():
    coeffs = zero_energy_coefficients(model_potential(0.5))
    assert coeffs.resonant
    assert coeffs.a2 == pytest.approx(-1.0, rel=1e-3)


def test_small_lambda_model_tracks_the_table(model_table):
    coeffs = model_table.coefficients
    lam = model_table.xi_grid[0] ** 2
    assert small_lambda_rho_model(coeffs, lam) == pytest.approx(model_table.rho[0], rel=0.15)


def test_small_lambda_model_edge_cases():
    flat = ZeroEnergyCoefficients(a1=0.0, a2=2.0, b1=0.5, b2=0.0)
    assert small_lambda_rho_model(flat, 1e-4) == pytest.approx(1.0 / 8.0)
    assert classify_resonance(flat)
    with pytest.raises(DomainError):
        small_lambda_rho_model(flat, 0.0)


def test_large_xi_behaviour(model_table, free_table):
    c, p = fit_large_xi_law(model_table, xi_lo=2.0)
    assert p > 0.5
    assert connection_coefficient_bound(free_table) < 1e-5
    assert np.isfinite(connection_coefficient_bound(model_table))


def test_low_band_mass_is_small(model_table, free_table):
    assert 0.0 < model_table.low_band_mass < 1e-3
    assert free_table.low_band_mass == pytest.approx(2.0 / math.pi * 1e-5, rel=1e-5)


def test_xi_grid_properties():
    grid = make_xi_grid(1e-3, 8.0, 20.0, 40.0, per_decade=24)
    assert grid.xi[0] == 1e-3 and grid.xi[-1] == 8.0
    assert np.all(np.diff(grid.xi) > 0)
    assert grid.s_step <= 1.0
    assert grid.max_spacing * (20.0 + 40.0) <= math.pi / 4 * (1 + 1e-9)
    assert grid.weights.sum() == pytest.approx(8.0 - 1e-3, rel=1e-4)


def test_spectrum_frame_and_phi_matrix_io(model_table, tmp_path):
    df = spectrum_frame(model_table)
    assert list(df.columns) == ["xi", "rho", "rho_tilde", "re_m", "im_m", "re_a", "im_a", "weight", "abel_defect"]
    assert len(df) == model_table.xi_grid.size

    path = write_phi_matrix(model_table.phi_matrix, tmp_path / "phi_matrix.bin")
    raw = path.read_bytes()
    assert raw[:4] == b"DWPH"
    assert len(raw) == 16 + 8 * model_table.phi_matrix.size
    np.testing.assert_array_equal(read_phi_matrix(path), model_table.phi_matrix)


def test_seeding_further_out_leaves_the_spectral_point_unchanged():
    pot = model_potential(1.0)
    near = spectral_point(pot, 0.05, settings=SolverSettings(seed_c=40.0))
    far = spectral_point(pot, 0.05, settings=SolverSettings(seed_c=80.0))
    assert far.eval_x > near.eval_x
    assert far.m == pytest.approx(near.m, rel=1e-6)
    assert far.rho == pytest.approx(near.rho, rel=1e-6)


def test_weighted_density_at_unit_distance_is_bounded(model_table):
    xi = model_table.xi_grid
    band = xi <= 0.5
    row = int(np.argmin(np.abs(model_table.x_grid - 1.0)))
    weighted = model_table.phi_matrix[row, band] ** 2 * model_table.rho[band]
    assert np.all(np.isfinite(weighted)) and weighted.min() > 0
    assert weighted.max() / weighted.min() <= 1e3


def test_jost_wronskian_is_recorded(free_table, model_table):
    assert free_table.jost_defect.shape == free_table.xi_grid.shape
    assert free_table.jost_defect.max() <= 1e-6
    assert model_table.jost_defect.max() <= 1e-6


def test_refined_xi_grid_halves_the_step():
    base = make_xi_grid(1e-3, 8.0, 20.0, 40.0, per_decade=24)
    fine = make_xi_grid(1e-3, 8.0, 20.0, 40.0, per_decade=24, refine=2.0)
    assert fine.s_step <= 0.5 < base.s_step
    assert fine.xi[0] == base.xi[0] and fine.xi[-1] == base.xi[-1]
    with pytest.raises(DomainError):
        make_xi_grid(1e-3, 8.0, 20.0, 40.0, refine=0.0)
