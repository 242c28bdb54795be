from __future__ import annotations

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mvego.gp import Prediction
from mvego.infill import (
    GAConfig,
    IncumbentState,
    MixedGA,
    expected_improvement,
    infill_criterion,
    log_expected_improvement,
    probability_of_feasibility,
)
from mvego.space import MixedSpace


def test_ei_at_incumbent_is_phi_zero():
    assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(0.3989422804014327, rel=1e-14)


def test_ei_reference_value():
    # Phi(0.5) + 2 phi(0.5)
    assert expected_improvement(0.0, 4.0, 1.0) == pytest.approx(1.395593114802612, rel=1e-12)


def test_ei_zero_variance_limit():
    assert expected_improvement(0.2, 0.0, 1.0) == pytest.approx(0.8)
    assert expected_improvement(1.2, 0.0, 1.0) == 0.0


@given(st.floats(-5, 5), st.floats(1e-3, 5), st.floats(-5, 5))
def test_ei_nonnegative_and_bounded_below_by_improvement(mean, sd, y_min):
    ei = expected_improvement(mean, sd**2, y_min)
    assert ei >= 0
    assert ei >= max(y_min - mean, 0) - 1e-12


@given(st.floats(-3, 3), st.floats(0.01, 3), st.floats(-3, 3))
def test_ei_decreases_with_mean(mean, sd, y_min):
    assert expected_improvement(mean + 0.1, sd**2, y_min) <= expected_improvement(mean, sd**2, y_min) + 1e-15


def _mp_log_ei(u, s):
    u = mpmath.mpf(u)
    h = u * mpmath.ncdf(u) + mpmath.npdf(u)
    return float(mpmath.log(s) + mpmath.log(h))


@pytest.mark.parametrize("u", [2.0, 0.0, -1.0, -4.9, -5.1, -8.0, -20.0, -40.0, -300.0])
def test_log_ei_matches_high_precision(u):
    mpmath.mp.dps = 60
    # mean -u/2 and sd 0.5 give a standardized improvement of u
    got = log_expected_improvement(-0.5 * u, 0.25, 0.0)[0]
    assert got == pytest.approx(_mp_log_ei(u, 0.5), rel=1e-8, abs=1e-12)


def test_pof_reference_values():
    assert probability_of_feasibility([Prediction(-0.5, 1.0)]) == pytest.approx(0.6914624612740131)
    two = probability_of_feasibility([Prediction(-0.5, 1.0), Prediction(0.0, 4.0)])
    assert two == pytest.approx(0.6914624612740131 * 0.5)
    assert probability_of_feasibility([]) == 1.0


def test_pof_zero_variance_is_indicator():
    assert probability_of_feasibility([Prediction(-1e-3, 0.0)]) == 1.0
    assert probability_of_feasibility([Prediction(1e-3, 0.0)]) == 0.0


def test_criterion_before_feasible_is_pof():
    assert infill_criterion(0.3, 0.6, feasible_found=False) == 0.6
    assert infill_criterion(0.3, 0.5) == pytest.approx(0.15)


def test_incumbent_uses_feasible_rows_only():
    inc = IncumbentState.from_data([1.0, -5.0, 2.0], [[-1.0], [0.5], [0.0]])
    assert inc.y_min == 1.0 and inc.feasible_found
    none = IncumbentState.from_data([1.0], [[0.1]])
    assert not none.feasible_found and none.y_min == np.inf


SPACE = MixedSpace(((-2.0, 2.0), (0.0, 1.0)), (3, 4))


def _fitness(X, Z):
    return -((X[:, 0] - 0.7) ** 2 + (X[:, 1] - 0.2) ** 2) - 0.5 * (Z[:, 0] != 2) - 0.5 * (Z[:, 1] != 1)


def test_ga_finds_mixed_optimum():
    res = MixedGA(SPACE, GAConfig(population=40, generations=60, seed=1)).run(_fitness)
    assert list(res.z) == [2, 1]
    np.testing.assert_allclose(res.x, [0.7, 0.2], atol=0.05)


def test_ga_history_is_monotone_and_budget_exact():
    cfg = GAConfig(population=10, generations=7, stall_generations=None, seed=4)
    calls = []

    def fitness(X, Z):
        calls.append(len(X))
        return _fitness(X, Z)

    res = MixedGA(SPACE, cfg).run(fitness)
    assert sum(calls) == res.n_evals == 70
    assert np.all(np.diff(res.best_history) >= 0)


def test_ga_reproducible():
    a = MixedGA(SPACE, GAConfig(seed=7)).run(_fitness)
    b = MixedGA(SPACE, GAConfig(seed=7)).run(_fitness)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.value == b.value


def test_ga_config_validation():
    with pytest.raises(ValueError):
        GAConfig(population=1)
    with pytest.raises(ValueError):
        GAConfig(crossover_prob=1.5)
