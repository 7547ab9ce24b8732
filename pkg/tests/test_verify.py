import dataclasses

import numpy as np
import pytest

from core.errors import ResonantPotential
from tools.datasets import EXTRA, SUITE, sample
from tools.verify import (
    trend_slope,
    verify_dispersive,
    verify_divergence_form,
    verify_energy,
    verify_local_energy_decay,
    verify_vector_field,
    wave_time_derivative,
)

TIMES = [4.0, 8.0, 12.0, 16.0]


def test_trend_slope():
    t = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    assert trend_slope(t, t ** 0.1) == pytest.approx(0.1)
    assert trend_slope(t[:1], t[:1]) is None


def test_time_derivative_multipliers():
    xi = np.array([0.5, 1.0, 2.0])
    ff, fg = np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.0, 1.0])
    t = 1.3
    u = wave_time_derivative(ff, fg, t, xi, 0)
    np.testing.assert_allclose(u, np.cos(t * xi) * ff + np.sin(t * xi) / xi * fg)
    ut = wave_time_derivative(ff, fg, t, xi, 1)
    np.testing.assert_allclose(ut, -xi * np.sin(t * xi) * ff + np.cos(t * xi) * fg)
    both = wave_time_derivative(ff, fg, np.array([t, 2 * t]), xi, 0)
    np.testing.assert_allclose(both[:, 0], u)


def test_energy_identity(model_table, gaussian_model):
    g = sample(SUITE["wide_gaussian"], model_table)
    report = verify_energy(gaussian_model, g, 0, 0, [0.0] + TIMES, model_table)
    assert report.estimate_id == "energy"
    assert report.sup_ratio == pytest.approx(1.0, abs=1e-3)
    assert report.passed


def test_higher_energy_has_no_trend(model_table, gaussian_model):
    report = verify_energy(gaussian_model, None, 1, 1, TIMES, model_table)
    assert abs(report.trend_slope) < 0.02


def test_vector_field_reduces_to_energy(model_table, gaussian_model):
    energy = verify_energy(gaussian_model, None, 1, 0, TIMES, model_table)
    field = verify_vector_field(gaussian_model, None, 0, 1, TIMES, model_table)
    np.testing.assert_allclose(field.lhs, energy.lhs, rtol=1e-6)
    assert field.sup_ratio == pytest.approx(energy.sup_ratio, rel=1e-6)


def test_vector_field_is_bounded(model_table, gaussian_model):
    report = verify_vector_field(gaussian_model, None, 1, 0, TIMES, model_table)
    assert np.all(np.isfinite(report.lhs))
    assert report.trend_slope is not None and abs(report.trend_slope) < 0.05


def test_resonant_tables_are_rejected(model_table, gaussian_model):
    resonant = dataclasses.replace(
        model_table, coefficients=dataclasses.replace(model_table.coefficients, resonant=True)
    )
    with pytest.raises(ResonantPotential):
        verify_vector_field(gaussian_model, None, 1, 0, TIMES, resonant)
    with pytest.raises(ResonantPotential):
        verify_local_energy_decay(gaussian_model, 0, 0, 0, TIMES, resonant)


def test_dispersive_half_exponent(model_table, gaussian_model):
    report = verify_dispersive(gaussian_model, None, 0.5, [10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0], model_table)
    assert report.estimate_id == "dispersive_half"
    assert -0.8 <= report.fitted_exponent <= -0.3
    assert report.exponent_halfwidth is not None


def test_local_energy_decay_saturates(model_table, gaussian_model):
    report = verify_local_energy_decay(gaussian_model, 0, 0, 0, [4.0, 8.0, 16.0], model_table, eps=0.25)
    assert np.all(np.diff(report.lhs) >= 0)
    assert report.details["ratio_bound"] == pytest.approx(2 ** -0.5)
    assert report.details["increment_ratio"] < 1.0
    assert report.passed


def test_local_energy_decay_sine_variant_runs(model_table):
    g = sample(SUITE["gaussian"], model_table)
    report = verify_local_energy_decay(g, 0, 0, 0, [4.0, 8.0, 16.0], model_table, variant="sine")
    assert report.details["ratio_bound"] == pytest.approx(0.5)
    assert np.all(np.diff(report.lhs) >= 0)
    with pytest.raises(ValueError):
        verify_local_energy_decay(g, 0, 0, 0, [4.0], model_table, variant="cos")


def test_divergence_form(model_table):
    g = sample(EXTRA["odd_gaussian"], model_table, parity="odd")
    report = verify_divergence_form(g, 0, 0, [0.0] + TIMES, model_table)
    assert report.lhs[0] == pytest.approx(0.0, abs=1e-8)
    assert report.trend_slope is not None and abs(report.trend_slope) < 0.05


def test_zero_data_give_zero_left_hand_side(model_table, gaussian_model):
    zero = gaussian_model.with_values(np.zeros_like(gaussian_model.values))
    report = verify_energy(zero, None, 0, 0, TIMES, model_table)
    assert report.lhs == [0.0] * len(TIMES)
    assert report.sup_ratio == 0.0
    assert report.passed


def test_dispersive_one_exponent(model_table, gaussian_model):
    report = verify_dispersive(gaussian_model, None, 1.0, [10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0], model_table)
    assert report.estimate_id == "dispersive_one"
    assert np.isfinite(report.fitted_exponent)
    assert report.fitted_exponent < 0
