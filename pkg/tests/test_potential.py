import numpy as np
import pandas as pd
import pytest

from core.config import PotentialSpec
from core.errors import ConfigError, DomainError, FloorTooHigh, NonDecayingTail
from core.models import Potential
from tools.potential import (
    check_even_extension,
    check_tail,
    count_bound_states,
    eval_U,
    inverse_square,
    model_potential,
    mollified_tail,
    poschl_teller,
    potential_from_spec,
    tabulated,
    zero_potential,
)

X = np.linspace(0.1, 12.0, 40)


@pytest.mark.parametrize("pot", [model_potential(1.0), model_potential(0.0), mollified_tail(1.0), poschl_teller()])
def test_derivatives_match_difference_quotients(pot):
    h = 1e-4
    d1 = (pot.eval(X + h) - pot.eval(X - h)) / (2 * h)
    d2 = (pot.eval(X + h) - 2 * pot.eval(X) + pot.eval(X - h)) / h ** 2
    np.testing.assert_allclose(pot.deriv(X), d1, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(pot.deriv2(X), d2, rtol=1e-4, atol=1e-6)


def test_model_potential_values():
    pot = model_potential(1.0)
    assert pot.eval(0.0) == pytest.approx(1.0)
    assert pot.eval(1.0) == pytest.approx(0.75 / 4.0)
    assert pot.alpha == 2.0


def test_tail_fit_recovers_alpha():
    report = check_tail(model_potential(1.0), 10.0, 1000.0, 64)
    assert not report.exact_tail
    assert report.fitted_alpha == pytest.approx(2.0, abs=0.05)


def test_exact_tails_are_flagged():
    assert check_tail(inverse_square(), 1.0, 100.0, 16).exact_tail
    assert check_tail(mollified_tail(1.0), 20.0, 200.0, 16).exact_tail


def test_non_decaying_tail_raises():
    def v(x):
        x = np.asarray(x, dtype=float)
        return -0.25 / x ** 2 * (1.0 + np.sqrt(x))

    pot = Potential(name="bad", eval=v, deriv=v, deriv2=v, alpha=0.0, even_extension=False)
    with pytest.raises(NonDecayingTail) as info:
        check_tail(pot, 1.0, 1000.0, 32)
    assert info.value.top_decade_ratios.size >= 2


def test_check_tail_argument_validation():
    with pytest.raises(ValueError):
        check_tail(model_potential(), 0.5, 10.0, 16)


def test_even_extension():
    assert check_even_extension(model_potential(1.0)).even
    assert check_even_extension(poschl_teller()).even

    def v(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-((x - 0.3) ** 2))

    skew = Potential(name="skew", eval=v, deriv=v, deriv2=v, alpha=0.0, even_extension=False)
    report = check_even_extension(skew)
    assert not report.even
    assert report.max_asymmetry > 1e-3


def test_eval_U_for_inverse_square_vanishes():
    x = np.linspace(1.0, 50.0, 20)
    np.testing.assert_allclose(eval_U(inverse_square(), x), 0.0, atol=1e-14)
    np.testing.assert_allclose(eval_U(mollified_tail(1.0), np.linspace(20.0, 50.0, 5)), 0.0, atol=1e-14)


def test_bound_state_counts():
    assert count_bound_states(zero_potential(), -4.0, 200.0) == 0
    assert count_bound_states(poschl_teller(2.0), -4.0, 200.0) == 1
    assert count_bound_states(model_potential(1.0), -4.0, 1000.0) == 0


def test_bound_state_floor_too_high():
    with pytest.raises(FloorTooHigh):
        count_bound_states(poschl_teller(2.0), -0.5, 200.0)


def test_bound_states_need_regular_origin():
    with pytest.raises(DomainError):
        count_bound_states(inverse_square(), -1.0, 100.0)


def test_tabulated_potential_reproduces_model():
    xs = np.linspace(0.0, 40.0, 2001)
    model = model_potential(1.0)
    table = tabulated(xs, model.eval(xs))
    x = np.linspace(0.0, 39.0, 50)
    np.testing.assert_allclose(table.eval(x), model.eval(x), atol=1e-7)
    np.testing.assert_allclose(table.eval(-x), table.eval(x))
    assert table.eval(100.0) == pytest.approx(-0.25 / 100.0 ** 2)
    np.testing.assert_allclose(table.deriv(x[1:]), model.deriv(x[1:]), atol=1e-5)


def test_tabulated_rejects_bad_samples():
    with pytest.raises(ConfigError):
        tabulated([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ConfigError):
        tabulated([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])


def test_potential_from_spec(tmp_path):
    assert potential_from_spec(PotentialSpec(kind="zero")).name == "zero"
    assert potential_from_spec(PotentialSpec(kind="model", core=0.5)).params["core"] == 0.5

    xs = np.linspace(0.0, 10.0, 101)
    path = tmp_path / "v.csv"
    pd.DataFrame({"x": xs, "v": model_potential().eval(xs)}).to_csv(path, index=False)
    pot = potential_from_spec(PotentialSpec(kind="table", path=str(path)))
    assert pot.eval(2.0) == pytest.approx(model_potential().eval(2.0), abs=1e-5)
