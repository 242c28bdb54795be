"""Constant-mean Gaussian process regression over a mixed space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf, dpotrs

from .kernels import (
    KernelSpec,
    continuous_scale,
    gram_from_diffs,
    pairwise_diffs,
)
from .space import MixedPoint, MixedSpace

DEFAULT_NUGGET = 1e-8
MAX_ESCALATIONS = 4
LOG_2PI = np.log(2 * np.pi)


class NumericalError(RuntimeError):
    """Covariance factorization failed even after nugget escalation."""


def factorize(C, nugget: float = DEFAULT_NUGGET):
    """Cholesky of ``C + nugget * mean(diag C) * I``.

    The nugget is multiplied by 10 up to ``MAX_ESCALATIONS`` times when the
    factorization fails.

    Returns
    -------
    L : ndarray
        Lower Cholesky factor.
    nugget : float
        Relative nugget that was finally used.
    """
    C = np.asarray(C, dtype=float)
    n = len(C)
    diag = np.diagonal(C)
    level = float(diag.mean()) if n else 1.0
    if not np.isfinite(level) or level <= 0:
        raise NumericalError("covariance matrix has a non-positive diagonal")
    for _ in range(MAX_ESCALATIONS + 1):
        A = np.array(C, order="F")
        A.flat[:: n + 1] += nugget * level
        L, info = dpotrf(A, lower=1, clean=1, overwrite_a=1)
        if info == 0 and np.isfinite(L[-1, -1]):
            return L, nugget
        nugget *= 10.0
    raise NumericalError(
        f"covariance matrix is not positive definite with nugget {nugget / 10:.1e}; "
        "increase the nugget or remove duplicated samples"
    )


def _solve(L, b) -> np.ndarray:
    x, info = dpotrs(L, b, lower=1)
    return x


def fit_mean(L, y) -> float:
    """Generalized least-squares constant mean ``1'K^-1 y / 1'K^-1 1``."""
    y = np.asarray(y, dtype=float)
    Ki1 = _solve(L, np.ones_like(y))
    return float(Ki1 @ y / Ki1.sum())


def analytic_sigma_sq(L, y, mu: float) -> float:
    """Maximum-likelihood process variance for a correlation factor ``L``."""
    r = np.asarray(y, dtype=float) - mu
    return max(float(r @ _solve(L, r)) / len(r), 0.0)


def gaussian_log_likelihood(L, y, mu: float) -> float:
    """``-0.5 [(y-mu)'K^-1(y-mu) + log det K + n log 2pi]`` from ``K = L L'``."""
    r = np.asarray(y, dtype=float) - mu
    a = solve_triangular(L, r, lower=True, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * (a @ a + logdet + len(r) * LOG_2PI))


def concentrated_log_likelihood(L, y) -> tuple[float, float, float]:
    """Likelihood of ``K = sigma^2 R`` at the analytic ``mu`` and ``sigma^2``.

    ``L`` factors the correlation matrix ``R``. Returns ``(loglik, mu, sigma_sq)``;
    a zero variance (constant responses) gives ``-inf``.
    """
    n = len(y)
    sol = _solve(L, np.column_stack([np.ones(n), y]))
    mu = float(sol[:, 0] @ y / sol[:, 0].sum())
    # r'R^-1 r with r = y - mu, expanded to reuse the two solves
    s2 = max(float(y @ sol[:, 1] - mu * sol[:, 0] @ y) / n, 0.0)
    if s2 <= 0:
        return -np.inf, mu, 0.0
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * (n * np.log(s2) + logdet + n + n * LOG_2PI)), mu, s2


def log_likelihood(X, Z, y, spec: KernelSpec, space: MixedSpace, nugget: float = DEFAULT_NUGGET) -> float:
    """Gaussian log marginal likelihood with the GLS mean, at the variance in ``spec``.

    Returns ``-inf`` when the covariance cannot be factorized.
    """
    X = np.asarray(X, dtype=float).reshape(-1, space.q)
    Z = np.asarray(Z, dtype=int).reshape(len(X), space.r)
    D = pairwise_diffs(X, X, continuous_scale(spec.kind, space))
    K = gram_from_diffs(spec, D, Z, Z, spec.discrete_matrices(space))
    try:
        L, _ = factorize(K, nugget)
    except NumericalError:
        return -np.inf
    return gaussian_log_likelihood(L, y, fit_mean(L, y))


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    variance: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


@dataclass
class TrainedGP:
    """A fitted GP, immutable in use.

    The covariance is stored as ``scale * C`` with ``C`` factorized:
    ``scale`` is the shared variance for homoscedastic kernels (``C`` is then a
    correlation matrix) and 1 for ``HeHS``. Responses are standardized
    internally unless ``standardize=False``.
    """

    space: MixedSpace
    spec: KernelSpec
    X: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    mu: float
    nugget: float
    L: np.ndarray
    alpha: np.ndarray
    y_offset: float = 0.0
    y_scale: float = 1.0
    degenerate: bool = False
    _matrices: list = field(default=None, repr=False)

    @classmethod
    def fit(
        cls,
        space: MixedSpace,
        X,
        Z,
        y,
        spec: KernelSpec,
        nugget: float = DEFAULT_NUGGET,
        standardize: bool = True,
        analytic_variance: bool = True,
    ) -> "TrainedGP":
        """Factorize the training covariance and precompute the prediction weights.

        For homoscedastic kernels with ``analytic_variance`` the shared
        variance of ``spec`` is replaced by its closed-form optimum.
        """
        X = np.asarray(X, dtype=float).reshape(-1, space.q)
        Z = np.asarray(Z, dtype=int).reshape(len(X), space.r)
        y = np.asarray(y, dtype=float).ravel()
        offset, scale = 0.0, 1.0
        if standardize:
            offset = float(np.mean(y))
            sd = float(np.std(y))
            scale = sd if sd > 0 else 1.0
        ys = (y - offset) / scale

        spec.validate(space)
        mats = spec.discrete_matrices(space)
        D = pairwise_diffs(X, X, continuous_scale(spec.kind, space))
        C = gram_from_diffs(spec.with_variance(1.0), D, Z, Z, mats)
        L, used = factorize(C, nugget)
        mu = fit_mean(L, ys)
        degenerate = False
        if spec.kind.homoscedastic and analytic_variance:
            s2 = analytic_sigma_sq(L, ys, mu)
            degenerate = s2 <= 0
            spec = spec.with_variance(s2)
        alpha = _solve(L, ys - mu)
        return cls(space, spec, X, Z, y, mu, used, L, alpha, offset, scale, degenerate, mats)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def _var_scale(self) -> float:
        return self.spec.process_variance

    def _cross(self, Xs, Zs) -> np.ndarray:
        D = pairwise_diffs(Xs, self.X, continuous_scale(self.spec.kind, self.space))
        return gram_from_diffs(self.spec.with_variance(1.0), D, Zs, self.Z, self._matrices)

    def _prior_diag(self, Zs) -> np.ndarray:
        diag = np.ones(len(Zs))
        for s, T in enumerate(self._matrices):
            diag *= np.diag(T)[Zs[:, s]]
        return diag

    def predict(self, X, Z, return_raw: bool = False) -> Prediction:
        """Mean and variance at a batch of points, in the original response units.

        With ``return_raw`` the variance is returned before clamping at zero.
        """
        Xs = np.asarray(X, dtype=float).reshape(-1, self.space.q)
        Zs = np.asarray(Z, dtype=int).reshape(len(Xs), self.space.r)
        Ks = self._cross(Xs, Zs)
        mean = self.mu + Ks @ self.alpha
        V = solve_triangular(self.L, Ks.T, lower=True, check_finite=False)
        var = self._var_scale * (self._prior_diag(Zs) - np.sum(V * V, axis=0))
        if not return_raw:
            var = np.maximum(var, 0.0)
        return Prediction(self.y_offset + self.y_scale * mean, self.y_scale**2 * var)

    def predict_point(self, w: MixedPoint) -> Prediction:
        pred = self.predict(w.x, w.z)
        return Prediction(pred.mean[0], pred.variance[0])

    def log_likelihood(self) -> float:
        """Likelihood of the standardized responses under the fitted model."""
        ys = (self.y - self.y_offset) / self.y_scale
        if self._var_scale <= 0:
            return -np.inf
        return gaussian_log_likelihood(self.L * np.sqrt(self._var_scale), ys, self.mu)
