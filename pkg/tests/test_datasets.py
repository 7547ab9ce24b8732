import numpy as np
import pytest

from core.config import DataSpec
from core.errors import ConfigError
from tools.datasets import SUITE, data_function, parity_of, resolve, suite_functions, support_radius

X = np.linspace(0.0, 10.0, 201)


def test_suite_is_ten_even_functions_with_flat_origin():
    assert len(SUITE) == 10
    for name, fn in SUITE.items():
        np.testing.assert_allclose(fn(-X), fn(X), err_msg=name)
        h = 1e-5
        assert abs(fn(np.array([h]))[0] - fn(np.array([-h]))[0]) / (2 * h) < 1e-8, name


def test_parameters_scale_the_data():
    fn = data_function("gaussian", {"amplitude": 2.0, "scale": 0.5})
    np.testing.assert_allclose(fn(X), 2.0 * np.exp(-0.125 * X * X))
    pair = data_function("bump", {"center": 4.0})
    assert pair(np.array([4.0]))[0] == pytest.approx(1.0 + np.exp(-32.0))


def test_unknown_names_and_parameters():
    with pytest.raises(ConfigError):
        data_function("lorentzian")
    with pytest.raises(ConfigError):
        data_function("gaussian", {"width": 2.0})
    with pytest.raises(ConfigError):
        resolve(DataSpec(name="nope"))


def test_parity_and_support():
    assert parity_of("odd_gaussian") == "odd"
    assert parity_of("gaussian") == "even"
    radius = support_radius(SUITE["gaussian"])
    assert radius == pytest.approx(np.sqrt(2 * np.log(1e12)), abs=0.02)


def test_suite_functions_sample_the_table(model_table):
    sampled = suite_functions(model_table)
    assert [name for name, _ in sampled] == list(SUITE)
    assert all(f.values.shape == model_table.x_grid.shape for _, f in sampled)
