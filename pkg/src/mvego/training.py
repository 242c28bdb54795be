"""Likelihood training of mixed kernels with a CMA evolution strategy."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import squareform

from .gp import (
    DEFAULT_NUGGET,
    NumericalError,
    concentrated_log_likelihood,
    factorize,
    fit_mean,
    gaussian_log_likelihood,
)
from .kernels import (
    KernelKind,
    KernelSpec,
    continuous_scale,
    cs_ratio,
    hs_factor,
)
from .space import MixedSpace, category_count, encode_categories

log = logging.getLogger(__name__)

LOG10_THETA = (-4.0, 3.0)
EXPONENT = (1.0, 2.0)
ANGLE = (1e-6, np.pi - 1e-6)
# radii relative to the response std, which is 1 after standardization
LOG10_RADIUS = (-3.0, 1.0)


class TrainingError(RuntimeError):
    """No hyperparameter candidate produced a finite likelihood."""


@dataclass
class TrainerConfig:
    """Settings of the likelihood maximization.

    ``budget_per_dim`` times the hyperparameter dimension gives the total
    number of likelihood evaluations, shared between the first run and
    ``restarts`` restarts from random points (each restart doubles the
    population).
    """

    popsize: int | None = None
    budget_per_dim: int = 200
    max_evals: int | None = None
    sigma0: float = 0.3
    restarts: int = 1
    seed: int | None = 0
    nugget: float = DEFAULT_NUGGET

    def budget(self, dim: int) -> int:
        return self.max_evals if self.max_evals is not None else self.budget_per_dim * max(dim, 1)


class HyperparameterCodec:
    """Bijection between kernel hyperparameters and the unit box ``[0, 1]^d``.

    Layout: ``theta`` (log10), ``p``, then per kind the hypersphere angles of
    every discrete dimension, the heteroscedastic radii (log10), or the CS
    ``theta_s`` (log10) and ``p_s``.
    """

    def __init__(self, kind, space: MixedSpace):
        self.kind = KernelKind(kind)
        self.space = space
        q, levels = space.q, space.discrete_levels
        blocks = [("theta", q, LOG10_THETA), ("p", q, EXPONENT)]
        if self.kind is KernelKind.CS:
            blocks += [("cs_theta", space.r, LOG10_THETA), ("cs_p", space.r, EXPONENT)]
        else:
            blocks += [(f"angles{s}", b * (b - 1) // 2, ANGLE) for s, b in enumerate(levels)]
            if self.kind is KernelKind.HEHS:
                blocks += [(f"radii{s}", b, LOG10_RADIUS) for s, b in enumerate(levels)]
        self._slices = {}
        lo, hi, start = [], [], 0
        for name, size, (a, b) in blocks:
            self._slices[name] = slice(start, start + size)
            lo += [a] * size
            hi += [b] * size
            start += size
        self.lower = np.array(lo)
        self.upper = np.array(hi)
        self.dim = start

    def _native(self, v) -> np.ndarray:
        v = np.clip(np.asarray(v, dtype=float).ravel(), 0.0, 1.0)
        return self.lower + v * (self.upper - self.lower)

    def parts(self, v):
        """Fast path for training: ``(theta, p, discrete matrices)``."""
        u = self._native(v)
        sl = self._slices
        theta = 10.0 ** u[sl["theta"]]
        p = u[sl["p"]]
        if self.kind is KernelKind.CS:
            mats = []
            for s, (t, e) in enumerate(zip(10.0 ** u[sl["cs_theta"]], u[sl["cs_p"]])):
                b = self.space.discrete_levels[s]
                T = np.full((b, b), cs_ratio(t, e, self.space))
                np.fill_diagonal(T, 1.0)
                mats.append(T)
        else:
            mats = []
            for s, b in enumerate(self.space.discrete_levels):
                radii = 10.0 ** u[sl[f"radii{s}"]] if self.kind is KernelKind.HEHS else None
                L = hs_factor(u[sl[f"angles{s}"]], radii, b)
                mats.append(L @ L.T)
        return theta, p, mats

    def decode(self, v, sigma_sq: float = 1.0) -> KernelSpec:
        u = self._native(v)
        sl = self._slices
        kw = dict(kind=self.kind, theta=10.0 ** u[sl["theta"]], p=u[sl["p"]], sigma_sq=sigma_sq)
        if self.kind is KernelKind.CS:
            kw.update(cs_theta=10.0 ** u[sl["cs_theta"]], cs_p=u[sl["cs_p"]])
        else:
            r = self.space.r
            kw["angles"] = tuple(u[sl[f"angles{s}"]] for s in range(r))
            if self.kind is KernelKind.HEHS:
                kw["radii"] = tuple(10.0 ** u[sl[f"radii{s}"]] for s in range(r))
        return KernelSpec(**kw)

    def encode(self, spec: KernelSpec) -> np.ndarray:
        u = np.empty(self.dim)
        sl = self._slices
        u[sl["theta"]] = np.log10(spec.theta)
        u[sl["p"]] = spec.p
        if self.kind is KernelKind.CS:
            u[sl["cs_theta"]] = np.log10(spec.cs_theta)
            u[sl["cs_p"]] = spec.cs_p
        else:
            for s in range(self.space.r):
                u[sl[f"angles{s}"]] = spec.angles[s]
                if self.kind is KernelKind.HEHS:
                    u[sl[f"radii{s}"]] = np.log10(spec.radii[s])
        return (u - self.lower) / (self.upper - self.lower)

    def initial_vector(self) -> np.ndarray:
        """Default ES mean: moderate length-scales, near-quadratic exponents,
        positively correlated levels, unit radii."""
        v = np.empty(self.dim)
        for name, sl in self._slices.items():
            if name in ("theta", "cs_theta"):
                v[sl] = 0.6
            elif name in ("p", "cs_p"):
                v[sl] = 0.8
            elif name.startswith("angles"):
                v[sl] = 0.35
            else:
                v[sl] = 0.75
        return v


def evolution_strategy(
    objective,
    dim: int,
    config: TrainerConfig | None = None,
    x0=None,
    bounds: tuple[float, float] | None = (0.0, 1.0),
):
    """Minimize ``objective`` with a (mu/mu_w, lambda) CMA-ES and restarts.

    Candidates outside ``bounds`` are evaluated at their projection onto the
    box, with a quadratic penalty on the projection distance added for
    ranking only. Non-finite objective values rank last.

    Returns
    -------
    xbest : ndarray
    fbest : float
    n_evals : int
    """
    config = config or TrainerConfig()
    rng = np.random.default_rng(config.seed)
    budget = config.budget(dim)
    lo, hi = (-np.inf, np.inf) if bounds is None else bounds
    x0 = np.full(dim, 0.5 if bounds is not None else 0.0) if x0 is None else np.asarray(x0, float)
    x0 = np.clip(x0, lo, hi)

    best = {"x": x0.copy(), "f": np.inf}
    n_evals = 0

    def evaluate(x):
        nonlocal n_evals
        xc = np.clip(x, lo, hi)
        f = float(objective(xc))
        n_evals += 1
        if not np.isfinite(f):
            f = np.inf
        if f < best["f"]:
            best["x"], best["f"] = xc.copy(), f
        pen = float(np.sum((x - xc) ** 2))
        return f + 1e3 * pen if np.isfinite(f) else np.inf

    evaluate(x0)
    base_pop = config.popsize or 4 + int(3 * np.log(dim))
    n_runs = 1 + max(config.restarts, 0)
    for run in range(n_runs):
        remaining = budget - n_evals
        if remaining <= 0:
            break
        share = remaining if run == n_runs - 1 else remaining // (n_runs - run)
        if run == 0:
            mean = x0.copy()
            lam = base_pop
        else:
            mean = rng.uniform(0, 1, dim) if bounds is not None else x0 + rng.standard_normal(dim)
            lam = base_pop * 2**run
        _cma_run(evaluate, mean, config.sigma0, lam, share, rng)
    return best["x"], best["f"], n_evals


def _cma_run(evaluate, mean, sigma, lam, budget, rng) -> None:
    n = len(mean)
    mu = lam // 2
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w**2)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, np.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chin = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))

    pc = np.zeros(n)
    ps = np.zeros(n)
    B = np.eye(n)
    Dg = np.ones(n)
    C = np.eye(n)
    invsqrtC = np.eye(n)
    eigen_gen = 0
    used = 0
    gen = 0
    history = []
    while used + lam <= budget:
        gen += 1
        arz = rng.standard_normal((lam, n))
        ary = arz * Dg @ B.T
        arx = mean + sigma * ary
        fit = np.array([evaluate(x) for x in arx])
        used += lam
        order = np.argsort(fit, kind="stable")
        old = mean
        mean = w @ arx[order[:mu]]
        ymean = (mean - old) / sigma

        ps = (1 - cs) * ps + np.sqrt(cs * (2 - cs) * mueff) * invsqrtC @ ymean
        hsig = np.linalg.norm(ps) / np.sqrt(1 - (1 - cs) ** (2 * gen)) / chin < 1.4 + 2 / (n + 1)
        pc = (1 - cc) * pc + hsig * np.sqrt(cc * (2 - cc) * mueff) * ymean
        artmp = ary[order[:mu]]
        C = (
            (1 - c1 - cmu) * C
            + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * C)
            + cmu * (artmp.T * w) @ artmp
        )
        sigma *= np.exp((cs / damps) * (np.linalg.norm(ps) / chin - 1))

        if gen - eigen_gen > lam / (c1 + cmu) / n / 10:
            eigen_gen = gen
            C = np.triu(C) + np.triu(C, 1).T
            evals, B = np.linalg.eigh(C)
            Dg = np.sqrt(np.maximum(evals, 1e-20))
            invsqrtC = B @ np.diag(1 / Dg) @ B.T

        finite = fit[np.isfinite(fit)]
        history.append(finite.min() if finite.size else np.inf)
        if sigma * Dg.max() < 1e-11:
            break
        if len(history) > 10 + int(30 * n / lam):
            recent = history[-(10 + int(30 * n / lam)):]
            if np.isfinite(recent).all() and max(recent) - min(recent) < 1e-10:
                break
        if Dg.max() > 1e7 * Dg.min():
            break


@dataclass
class TrainingResult:
    spec: KernelSpec
    log_likelihood: float
    vector: np.ndarray
    n_evals: int


class LikelihoodObjective:
    """Negative log-likelihood of a fixed dataset as a function of the codec vector.

    Responses are standardized; for homoscedastic kinds the shared variance
    is profiled out analytically. Only the strict upper triangle of the
    covariance is evaluated, and the discrete product is looked up per
    category pair.
    """

    def __init__(self, space: MixedSpace, X, Z, y, kind, nugget: float = DEFAULT_NUGGET):
        self.codec = HyperparameterCodec(kind, space)
        self.space = space
        X = np.asarray(X, dtype=float).reshape(-1, space.q)
        Z = np.asarray(Z, dtype=int).reshape(len(X), space.r)
        y = np.asarray(y, dtype=float).ravel()
        sd = np.std(y)
        self.y = (y - np.mean(y)) / (sd if sd > 0 else 1.0)
        self.n = len(y)
        iu, ju = np.triu_indices(self.n, 1)
        D = np.abs(X[iu] - X[ju]) / continuous_scale(kind, space)
        # log |dx| turns D**p into a single exp per evaluation
        with np.errstate(divide="ignore"):
            self.logD = np.log(D)
        cats = encode_categories(Z, space)
        self.m = category_count(space)
        self.cats = cats
        self.pair_code = cats[iu] * self.m + cats[ju]
        self.nugget = nugget
        self.kind = self.codec.kind

    def covariance(self, v) -> np.ndarray:
        theta, p, mats = self.codec.parts(v)
        if self.logD.shape[1]:
            vals = np.exp(-(np.exp(self.logD * p) @ theta))
        else:
            vals = np.ones(len(self.logD))
        diag = np.ones(self.m)
        if mats:
            # row-major category order makes the product over dimensions a Kronecker product
            M = mats[0]
            for T in mats[1:]:
                M = np.kron(M, T)
            vals *= M.ravel()[self.pair_code]
            diag = np.diagonal(M)
        C = squareform(vals, checks=False)
        C.flat[:: self.n + 1] = diag[self.cats]
        return C

    def log_likelihood(self, v) -> tuple[float, float]:
        """``(loglik, sigma_sq)`` at codec vector ``v``; ``-inf`` on failure."""
        C = self.covariance(v)
        try:
            L, _ = factorize(C, self.nugget)
        except NumericalError:
            return -np.inf, 0.0
        if self.kind.homoscedastic:
            ll, _, s2 = concentrated_log_likelihood(L, self.y)
            return ll, s2
        return gaussian_log_likelihood(L, self.y, fit_mean(L, self.y)), 1.0

    def __call__(self, v) -> float:
        ll = self.log_likelihood(v)[0]
        return -ll if np.isfinite(ll) else np.inf


def train(
    space: MixedSpace,
    X,
    Z,
    y,
    kind,
    config: TrainerConfig | None = None,
    warm_start=None,
) -> TrainingResult:
    """Fit kernel hyperparameters by maximizing the likelihood.

    ``warm_start`` is a codec vector (e.g. the previous iteration's optimum)
    used as the initial ES mean.
    """
    config = config or TrainerConfig()
    if len(np.atleast_1d(y)) < 2:
        raise TrainingError("training needs at least two samples")
    obj = LikelihoodObjective(space, X, Z, y, kind, config.nugget)
    codec = obj.codec
    x0 = codec.initial_vector() if warm_start is None else np.clip(warm_start, 0, 1)
    if codec.dim == 0:
        vbest = np.zeros(0)
        fbest = obj(vbest)
        n_evals = 1
    else:
        vbest, fbest, n_evals = evolution_strategy(obj, codec.dim, config, x0=x0)
    if not np.isfinite(fbest):
        raise TrainingError(f"every {codec.kind.value} hyperparameter candidate failed to factorize")
    ll, s2 = obj.log_likelihood(vbest)
    log.debug("trained %s: loglik %.4f after %d evaluations", codec.kind.value, ll, n_evals)
    return TrainingResult(codec.decode(vbest, sigma_sq=s2), ll, vbest, n_evals)
