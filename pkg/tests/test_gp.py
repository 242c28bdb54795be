from __future__ import annotations

import numpy as np
import pytest

from mvego.gp import (
    NumericalError,
    TrainedGP,
    concentrated_log_likelihood,
    factorize,
    gaussian_log_likelihood,
    log_likelihood,
)
from mvego.kernels import KernelSpec, gram
from mvego.space import MixedSpace

LINE = MixedSpace(((0.0, 1.0),), ())
GOLDSTEIN = MixedSpace(((0, 100), (0, 100)), (3, 3))


def test_two_point_closed_form():
    spec = KernelSpec("HoHS", theta=[1.0], p=[2.0])
    gp = TrainedGP.fit(LINE, [[0.0], [1.0]], np.zeros((2, 0)), [0.0, 1.0], spec, nugget=1e-14, standardize=False)
    e = np.exp(-1.0)
    assert gp.mu == pytest.approx(0.5)
    assert gp.spec.sigma_sq == pytest.approx(0.25 / (1 - e))
    pred = gp.predict([[0.5]], np.zeros((1, 0)))
    assert pred.mean[0] == pytest.approx(0.5)
    expected_var = 0.25 / (1 - e) * (1 - 2 * np.exp(-0.5) / (1 + e))
    assert pred.variance[0] == pytest.approx(expected_var, rel=1e-6)


def _instance(seed, kind="CS", n=15):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 100, (n, 2))
    Z = rng.integers(0, 3, (n, 2))
    y = np.sin(X[:, 0] / 20) + Z[:, 0] - 0.5 * Z[:, 1] + 0.01 * X[:, 1]
    spec = KernelSpec.default(kind, GOLDSTEIN, theta=[3.0, 1.0], p=[1.7, 1.9])
    return X, Z, y, spec


@pytest.mark.parametrize("kind", ["CS", "HoHS", "HeHS"])
def test_prediction_matches_dense_formulas(kind):
    X, Z, y, spec = _instance(1, kind)
    gp = TrainedGP.fit(GOLDSTEIN, X, Z, y, spec, standardize=False)
    K = gram(gp.spec, GOLDSTEIN, X, Z)
    K[np.diag_indices_from(K)] += gp.nugget * np.mean(np.diag(gram(gp.spec.with_variance(1.0), GOLDSTEIN, X, Z))) \
        * gp.spec.process_variance
    Ki = np.linalg.inv(K)
    one = np.ones(len(y))
    mu = one @ Ki @ y / (one @ Ki @ one)
    assert gp.mu == pytest.approx(mu, rel=1e-9)
    Xs = np.array([[10.0, 20.0], [55.0, 70.0]])
    Zs = np.array([[0, 2], [1, 1]])
    ks = gram(gp.spec, GOLDSTEIN, Xs, Zs, X, Z)
    mean = mu + ks @ Ki @ (y - mu)
    var = np.diag(gram(gp.spec, GOLDSTEIN, Xs, Zs)) - np.einsum("ij,jk,ik->i", ks, Ki, ks)
    pred = gp.predict(Xs, Zs)
    np.testing.assert_allclose(pred.mean, mean, rtol=1e-8)
    np.testing.assert_allclose(pred.variance, var, rtol=1e-6)


def test_interpolates_training_data():
    X, Z, y, spec = _instance(2)
    gp = TrainedGP.fit(GOLDSTEIN, X, Z, y, spec)
    pred = gp.predict(X, Z)
    assert np.max(np.abs(pred.mean - y)) <= 1e-4 * np.ptp(y)
    assert np.all(pred.variance <= 10 * gp.nugget * gp.spec.sigma_sq * gp.y_scale**2)


def test_concentrated_likelihood_equals_full_at_optimum():
    X, Z, y, spec = _instance(3)
    C = gram(spec.with_variance(1.0), GOLDSTEIN, X, Z)
    L, _ = factorize(C)
    ll, mu, s2 = concentrated_log_likelihood(L, y)
    assert ll == pytest.approx(gaussian_log_likelihood(L * np.sqrt(s2), y, mu), rel=1e-10)
    # a different variance can only lower the likelihood
    assert gaussian_log_likelihood(L * np.sqrt(2 * s2), y, mu) < ll
    assert log_likelihood(X, Z, y, spec.with_variance(s2), GOLDSTEIN) == pytest.approx(ll, rel=1e-8)


def test_constant_responses_are_degenerate_not_fatal():
    X, Z, _, spec = _instance(4)
    gp = TrainedGP.fit(GOLDSTEIN, X, Z, np.full(len(X), 3.0), spec)
    pred = gp.predict(X[:3], Z[:3])
    np.testing.assert_allclose(pred.mean, 3.0)
    np.testing.assert_allclose(pred.variance, 0.0, atol=1e-12)
    assert gp.degenerate


def test_duplicate_points_are_absorbed_by_the_nugget():
    X = np.array([[0.2], [0.2], [0.7]])
    C = gram(KernelSpec("HoHS", theta=[1.0], p=[2.0]), LINE, X, np.zeros((3, 0)))
    L, used = factorize(C)
    assert used == 1e-8
    assert np.allclose(L @ L.T, C, atol=1e-7)


def test_nugget_escalates_by_decades():
    # smallest eigenvalue -1e-7: 1e-8 and 1e-7 fail, 1e-6 succeeds
    C = np.array([[1.0, 1.0 + 1e-7], [1.0 + 1e-7, 1.0]])
    _, used = factorize(C)
    assert used == pytest.approx(1e-6)


def test_factorization_failure_raises():
    with pytest.raises(NumericalError, match="nugget"):
        factorize(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NumericalError):
        factorize(np.full((2, 2), np.nan))
