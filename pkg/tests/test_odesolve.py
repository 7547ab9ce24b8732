import numpy as np
import pytest

from core.errors import DomainError, SeedOutOfRange
from core.models import RegularSolution
from tools.odesolve import (
    SolverSettings,
    eval_point,
    fit_zero_energy_coeffs,
    prufer_angle,
    run_chunked,
    seeding_point,
    solve_jost,
    solve_jost_batch,
    solve_regular,
    solve_regular_batch,
    solve_scaling_batch,
    zero_energy_grid,
)
from tools.potential import inverse_square, model_potential, poschl_teller, zero_potential
from tools.specfun import hankel_h


def test_free_regular_solutions_are_trigonometric():
    x = np.linspace(0.0, 10.0, 201)
    sol = solve_regular(zero_potential(), 4.0, x)
    np.testing.assert_allclose(sol.phi, -np.cos(2 * x), atol=1e-8)
    np.testing.assert_allclose(sol.theta, np.sin(2 * x) / 2, atol=1e-8)
    np.testing.assert_allclose(sol.wronskian, 1.0, atol=1e-9)


def test_regular_wronskian_for_model():
    x = np.linspace(0.0, 40.0, 401)
    sol = solve_regular(model_potential(1.0), 0.25, x)
    assert sol.phi[0] == pytest.approx(-1.0)
    assert sol.dtheta[0] == pytest.approx(1.0)
    np.testing.assert_allclose(sol.wronskian, 1.0, atol=1e-8)


def test_regular_batch_matches_single_solves():
    x = np.linspace(0.0, 8.0, 81)
    pot = model_potential(1.0)
    phi, _, theta, _ = solve_regular_batch(pot, [0.5, 2.0], x)
    single = solve_regular(pot, 2.0, x)
    np.testing.assert_allclose(phi[:, 1], single.phi, atol=1e-8)
    np.testing.assert_allclose(theta[:, 1], single.theta, atol=1e-8)


def test_regular_rejects_negative_energy():
    with pytest.raises(DomainError):
        solve_regular(zero_potential(), -1.0, np.linspace(0, 1, 5))


def test_free_jost_is_plane_wave():
    x = np.linspace(0.0, 30.0, 61)
    jost = solve_jost(zero_potential(), 1.5, x)
    np.testing.assert_allclose(jost.f, np.exp(1.5j * x), atol=1e-8)
    np.testing.assert_allclose(jost.wronskian_conj, -3.0j, atol=1e-8)


@pytest.mark.parametrize("xi", [0.05, 0.8, 3.0])
def test_inverse_square_jost_is_hankel(xi):
    x = np.linspace(1.0, 20.0, 39)
    jost = solve_jost(inverse_square(), xi, x)
    np.testing.assert_allclose(jost.f, hankel_h(x * xi, 1), rtol=1e-7, atol=1e-9)


def test_seeding_point_rules():
    settings = SolverSettings()
    assert seeding_point(model_potential(), 2.0, settings) == settings.x_seed
    assert seeding_point(model_potential(), 0.1, settings) == pytest.approx(400.0)
    assert seeding_point(poschl_teller(), 1e-4, settings) == settings.x_seed
    with pytest.raises(SeedOutOfRange):
        seeding_point(model_potential(), 1e-4, settings)
    assert eval_point(60.0) == pytest.approx(17.5)


def test_jost_batch_agrees_with_single_solve():
    pot = model_potential(1.0)
    xis = np.array([0.6, 0.9, 1.4])
    batch = solve_jost_batch(pot, xis)
    single = solve_jost(pot, 0.9, np.array([batch.eval_x]))
    assert batch.f[1] == pytest.approx(single.f[-1], abs=1e-8)
    wc = batch.f * np.conj(batch.df) - batch.df * np.conj(batch.f)
    np.testing.assert_allclose(wc, -2j * xis, atol=1e-8)


def test_chunked_runs_are_ordered_and_thread_independent():
    settings = SolverSettings(chunk=3, threads=4)
    out = run_chunked(lambda sl: list(range(sl.start, sl.stop)), 10, settings)
    assert [v for part in out for v in part] == list(range(10))


def test_zero_energy_fit_for_free_case_is_linear():
    sol = solve_regular(zero_potential(), 0.0, zero_energy_grid(10.0, 100.0))
    coeffs = fit_zero_energy_coeffs(sol, (10.0, 100.0), basis="linear")
    # phi = -1, theta = x
    assert coeffs.a1 == pytest.approx(0.0, abs=1e-9)
    assert coeffs.a2 == pytest.approx(-1.0)
    assert coeffs.b1 == pytest.approx(1.0)
    assert coeffs.defect < 1e-8


def test_prufer_angle_counts_zeros():
    # f = cos(sqrt(E) x) with E = 1 has zeros at pi/2 + k pi
    angle = prufer_angle(zero_potential(), 1.0, 10.0)
    assert int(np.floor(angle / np.pi)) == 3
    assert prufer_angle(zero_potential(), -1.0, 10.0) < np.pi


@pytest.mark.parametrize("xi", [0.4, 0.5, 0.6])
def test_hankel_and_plane_wave_seeds_overlap(xi):
    pot = model_potential(1.0)
    x = np.array([1.0, 10.0])
    hankel = solve_jost(pot, xi, x, seed="hankel")
    plane = solve_jost(pot, xi, x, seed="plane_wave")
    assert hankel.x_seed == plane.x_seed
    np.testing.assert_allclose(plane.f, hankel.f, rtol=1e-6)
    np.testing.assert_allclose(plane.df, hankel.df, rtol=1e-6)


def test_synthetic_zero_energy_fit():
    x = zero_energy_grid(100.0, 1000.0)
    root = np.sqrt(x)
    log_part = root * np.log(np.maximum(x, 1.0))
    sol = RegularSolution(
        lam=0.0,
        x_grid=x,
        phi=2.0 * log_part + 3.0 * root,
        dphi=np.zeros_like(x),
        theta=-log_part + 0.5 * root,
        dtheta=np.zeros_like(x),
    )
    coeffs = fit_zero_energy_coeffs(sol, (100.0, 1000.0))
    assert (coeffs.a1, coeffs.a2) == pytest.approx((2.0, 3.0), rel=1e-9)
    assert (coeffs.b1, coeffs.b2) == pytest.approx((-1.0, 0.5), rel=1e-9)
    assert coeffs.basis == "tail"


def test_scaling_field_is_the_lambda_derivative():
    pot = model_potential(1.0)
    x = np.linspace(0.0, 10.0, 101)
    lam, step = 1.3, 1e-4
    psi = solve_scaling_batch(pot, [lam], x)[:, 0]
    up, _, _, _ = solve_regular_batch(pot, [lam + step], x)
    down, _, _, _ = solve_regular_batch(pot, [lam - step], x)
    _, dphi, _, _ = solve_regular_batch(pot, [lam], x)
    expected = 2.0 * lam * (up[:, 0] - down[:, 0]) / (2.0 * step) - x * dphi[:, 0]
    np.testing.assert_allclose(psi, expected, atol=1e-5)
    with pytest.raises(DomainError):
        solve_scaling_batch(pot, [lam], x[1:])
