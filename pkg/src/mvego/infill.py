"""Constrained infill criterion and its maximization with a mixed-variable GA."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import erfcx, log_ndtr, ndtr

from .gp import Prediction, TrainedGP
from .space import MixedPoint, MixedSpace

FEASIBILITY_TOL = 1e-9
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)
_SQRT_HALF_PI = np.sqrt(np.pi / 2)


@dataclass(frozen=True)
class IncumbentState:
    """Reference minimum for the improvement; ``inf`` until a feasible row exists."""

    y_min: float
    feasible_found: bool

    @classmethod
    def from_data(cls, y, G=None, tol: float = FEASIBILITY_TOL) -> "IncumbentState":
        """Best objective among rows whose constraints (``g <= 0`` form) all hold."""
        y = np.asarray(y, dtype=float)
        feasible = np.ones(len(y), dtype=bool)
        if G is not None and np.size(G):
            feasible = np.all(np.asarray(G).reshape(len(y), -1) <= tol, axis=1)
        if not feasible.any():
            return cls(np.inf, False)
        return cls(float(y[feasible].min()), True)


def expected_improvement(mean, variance, y_min: float, scale: float = 1.0):
    """``E[max(y_min - Y, 0)]`` for ``Y ~ N(mean, variance)``.

    Below a standard deviation of ``1e-12 * scale`` the deterministic limit
    ``max(y_min - mean, 0)`` is used.
    """
    mean = np.asarray(mean, dtype=float)
    s = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    imp = y_min - mean
    tiny = s < 1e-12 * scale
    safe = np.where(tiny, 1.0, s)
    u = imp / safe
    ei = imp * ndtr(u) + safe * np.exp(-0.5 * u**2 - _LOG_SQRT_2PI)
    ei = np.where(tiny, np.maximum(imp, 0.0), ei)
    ei = np.maximum(ei, 0.0)
    return ei if ei.ndim else float(ei)


def _log_h(u):
    """``log(u Phi(u) + phi(u))``, accurate far into the left tail."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    big = u > -5
    ub = u[big]
    out[big] = np.log(ub * ndtr(ub) + np.exp(-0.5 * ub**2 - _LOG_SQRT_2PI))
    # h = phi(u) (1 + u Phi(u)/phi(u)), with the Mills ratio from erfcx
    mid = (u <= -5) & (u > -1e4)
    um = u[mid]
    out[mid] = -0.5 * um**2 - _LOG_SQRT_2PI + np.log1p(um * _SQRT_HALF_PI * erfcx(-um / np.sqrt(2)))
    far = u <= -1e4
    inv2 = 1.0 / u[far] ** 2
    out[far] = -0.5 * u[far] ** 2 - _LOG_SQRT_2PI + np.log(inv2 * (1 - 3 * inv2))
    return out


def log_expected_improvement(mean, variance, y_min: float, scale: float = 1.0):
    """Natural log of :func:`expected_improvement` without underflow."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    s = np.sqrt(np.maximum(np.atleast_1d(np.asarray(variance, dtype=float)), 0.0))
    imp = y_min - mean
    tiny = s < 1e-12 * scale
    out = np.full(mean.shape, -np.inf)
    with np.errstate(divide="ignore"):
        out[tiny] = np.log(np.maximum(imp[tiny], 0.0))
    ok = ~tiny
    out[ok] = np.log(s[ok]) + _log_h(imp[ok] / s[ok])
    return out


def _constraint_arrays(preds):
    if isinstance(preds, Prediction):
        preds = [preds]
    means = np.array([np.atleast_1d(p.mean) for p in preds], dtype=float)
    var = np.array([np.atleast_1d(p.variance) for p in preds], dtype=float)
    return means, np.sqrt(np.maximum(var, 0.0))


def probability_of_feasibility(preds):
    """``prod_i Phi(-g_i / s_i)`` over constraint predictions in ``g <= 0`` form.

    A zero predicted standard deviation turns its factor into the indicator
    of ``g_i <= 0``. An empty list gives 1.
    """
    preds = list(preds) if not isinstance(preds, Prediction) else [preds]
    if not preds:
        return 1.0
    means, sds = _constraint_arrays(preds)
    tiny = sds <= 0
    z = -means / np.where(tiny, 1.0, sds)
    fac = np.where(tiny, (means <= 0).astype(float), ndtr(z))
    pof = np.prod(fac, axis=0)
    return float(pof[0]) if np.ndim(preds[0].mean) == 0 else pof


def log_probability_of_feasibility(preds):
    preds = list(preds)
    if not preds:
        return 0.0
    means, sds = _constraint_arrays(preds)
    tiny = sds <= 0
    z = -means / np.where(tiny, 1.0, sds)
    fac = np.where(tiny, np.where(means <= 0, 0.0, -np.inf), log_ndtr(z))
    return np.sum(fac, axis=0)


def infill_criterion(ei, pof, feasible_found: bool = True):
    """``EI * PoF``; before any feasible observation only ``PoF`` is used."""
    if not feasible_found:
        return pof
    return np.asarray(ei) * np.asarray(pof) if np.ndim(ei) or np.ndim(pof) else float(ei * pof)


class InfillCriterion:
    """EI x PoF evaluated in batches from trained surrogates."""

    def __init__(self, gp_objective: TrainedGP, gp_constraints, incumbent: IncumbentState):
        self.gp_objective = gp_objective
        self.gp_constraints = list(gp_constraints)
        self.incumbent = incumbent
        self.scale = max(1.0, abs(incumbent.y_min)) if incumbent.feasible_found else 1.0

    def _constraint_preds(self, X, Z):
        return [gp.predict(X, Z) for gp in self.gp_constraints]

    def __call__(self, X, Z) -> np.ndarray:
        pof = probability_of_feasibility(self._constraint_preds(X, Z)) if self.gp_constraints else 1.0
        pof = np.broadcast_to(pof, (np.atleast_2d(X).shape[0],))
        if not self.incumbent.feasible_found:
            return np.array(pof, dtype=float)
        pred = self.gp_objective.predict(X, Z)
        ei = expected_improvement(pred.mean, pred.variance, self.incumbent.y_min, self.scale)
        return infill_criterion(ei, pof)

    def log(self, X, Z) -> np.ndarray:
        """Log of the criterion; same maximizer, but no underflow plateaus."""
        n = np.atleast_2d(X).shape[0]
        lpof = log_probability_of_feasibility(self._constraint_preds(X, Z)) if self.gp_constraints else 0.0
        lpof = np.broadcast_to(lpof, (n,))
        if not self.incumbent.feasible_found:
            return np.array(lpof, dtype=float)
        pred = self.gp_objective.predict(X, Z)
        return log_expected_improvement(pred.mean, pred.variance, self.incumbent.y_min, self.scale) + lpof


@dataclass
class GAConfig:
    """Mixed-variable GA settings.

    ``stall_generations=None`` disables the stall stop, so exactly
    ``population * generations`` fitness evaluations are made.
    """

    population: int = 50
    generations: int = 50
    stall_generations: int | None = 15
    crossover_prob: float = 0.9
    mutation_prob_continuous: float = 0.2
    mutation_prob_discrete: float = 0.2
    mutation_scale: float = 0.1
    sbx_eta: float = 2.0
    tournament: int = 3
    seed: int | None = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("GA population must be at least 2")
        for name in ("crossover_prob", "mutation_prob_continuous", "mutation_prob_discrete"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass
class GAResult:
    x: np.ndarray
    z: np.ndarray
    value: float
    best_history: list = field(default_factory=list)
    n_evals: int = 0


class MixedGA:
    """Generational GA over ``x`` in a box and ``z`` in finite level sets (maximization).

    Tournament selection, simulated-binary crossover and bounded Gaussian
    mutation on continuous genes, uniform crossover and uniform resampling on
    discrete genes, one elite carried over unchanged.
    """

    def __init__(self, space: MixedSpace, config: GAConfig | None = None):
        self.space = space
        self.config = config or GAConfig()
        self.rng = np.random.default_rng(self.config.seed)

    def random_population(self, n: int):
        sp = self.space
        X = sp.from_unit(self.rng.uniform(0, 1, (n, sp.q))) if sp.q else np.zeros((n, 0))
        if sp.r:
            Z = np.column_stack([self.rng.integers(0, b, n) for b in sp.discrete_levels])
        else:
            Z = np.zeros((n, 0), dtype=int)
        return X, Z

    def _select(self, fit) -> int:
        idx = self.rng.integers(0, len(fit), self.config.tournament)
        return int(idx[np.argmax(fit[idx])])

    def _sbx(self, a, b):
        """Simulated binary crossover on unit-box coordinates."""
        u = self.rng.uniform(0, 1, a.shape)
        eta = self.config.sbx_eta
        beta = np.where(u <= 0.5, (2 * u) ** (1 / (eta + 1)), (1 / (2 * (1 - u))) ** (1 / (eta + 1)))
        swap = self.rng.uniform(0, 1, a.shape) < 0.5
        c1 = 0.5 * ((1 + beta) * a + (1 - beta) * b)
        c2 = 0.5 * ((1 - beta) * a + (1 + beta) * b)
        c1, c2 = np.where(swap, c2, c1), np.where(swap, c1, c2)
        return np.clip(c1, 0, 1), np.clip(c2, 0, 1)

    def _offspring(self, U, Z, fit):
        cfg, sp = self.config, self.space
        n = cfg.population
        Uc = np.empty((n, sp.q))
        Zc = np.empty((n, sp.r), dtype=int)
        for k in range(0, n, 2):
            i, j = self._select(fit), self._select(fit)
            u1, u2 = U[i].copy(), U[j].copy()
            z1, z2 = Z[i].copy(), Z[j].copy()
            if self.rng.uniform() < cfg.crossover_prob:
                if sp.q:
                    u1, u2 = self._sbx(u1, u2)
                if sp.r:
                    mask = self.rng.uniform(0, 1, sp.r) < 0.5
                    z1, z2 = np.where(mask, z2, z1), np.where(mask, z1, z2)
            Uc[k], Zc[k] = u1, z1
            if k + 1 < n:
                Uc[k + 1], Zc[k + 1] = u2, z2
        if sp.q:
            mut = self.rng.uniform(0, 1, Uc.shape) < cfg.mutation_prob_continuous
            Uc = np.clip(Uc + mut * self.rng.normal(0, cfg.mutation_scale, Uc.shape), 0, 1)
        if sp.r:
            mut = self.rng.uniform(0, 1, Zc.shape) < cfg.mutation_prob_discrete
            fresh = np.column_stack([self.rng.integers(0, b, n) for b in sp.discrete_levels])
            Zc = np.where(mut, fresh, Zc)
        return Uc, Zc

    def run(self, fitness, initial=None) -> GAResult:
        """Maximize ``fitness(X, Z) -> array`` (raw coordinates, batched).

        ``initial`` optionally supplies the first population as ``(X, Z)``;
        missing individuals are drawn uniformly.
        """
        cfg, sp = self.config, self.space
        n = cfg.population
        if initial is not None:
            X0, Z0 = (np.asarray(a) for a in initial)
            X0 = X0.reshape(-1, sp.q)[:n]
            Z0 = Z0.reshape(len(X0), sp.r).astype(int)
            if len(X0) < n:
                Xr, Zr = self.random_population(n - len(X0))
                X0, Z0 = np.vstack([X0, Xr]), np.vstack([Z0, Zr])
        else:
            X0, Z0 = self.random_population(n)
        U = sp.to_unit(X0) if sp.q else np.zeros((n, 0))
        Z = Z0
        fit = self._eval(fitness, U, Z)
        n_evals = n
        b = int(np.argmax(fit))
        best = (U[b].copy(), Z[b].copy(), fit[b])
        history = [best[2]]
        stall = 0
        for _ in range(cfg.generations - 1):
            Uc, Zc = self._offspring(U, Z, fit)
            fc = self._eval(fitness, Uc, Zc)
            n_evals += n
            if best[2] > fc.max():
                w = int(np.argmin(fc))
                Uc[w], Zc[w], fc[w] = best
            U, Z, fit = Uc, Zc, fc
            b = int(np.argmax(fit))
            if fit[b] > best[2]:
                best = (U[b].copy(), Z[b].copy(), fit[b])
                stall = 0
            else:
                stall += 1
            history.append(best[2])
            if cfg.stall_generations is not None and stall >= cfg.stall_generations:
                break
        x = sp.from_unit(best[0])[0] if sp.q else np.zeros(0)
        return GAResult(x, best[1].astype(int), float(best[2]), history, n_evals)

    def _eval(self, fitness, U, Z) -> np.ndarray:
        X = self.space.from_unit(U) if self.space.q else np.zeros((len(Z), 0))
        f = np.asarray(fitness(X, Z), dtype=float).ravel()
        return np.where(np.isnan(f), -np.inf, f)


def maximize_ic(
    gp_objective: TrainedGP,
    gp_constraints,
    space: MixedSpace,
    incumbent: IncumbentState,
    ga_config: GAConfig | None = None,
    initial=None,
    polish: bool = True,
) -> tuple[MixedPoint, float]:
    """Point of largest EI x PoF found by the GA, and its criterion value.

    The GA ranks candidates by the log of the criterion, which has the same
    maximizer but stays informative where the criterion underflows. With
    ``polish`` the continuous part of the GA winner is refined by a bounded
    quasi-Newton search at fixed levels; the refinement is kept only if it
    improves the criterion.
    """
    ic = InfillCriterion(gp_objective, gp_constraints, incumbent)
    res = MixedGA(space, ga_config).run(ic.log, initial=initial)
    x, z, best = res.x, res.z, res.value
    if polish and space.q and np.isfinite(best):
        x, best = _polish(ic.log, space, x, z, best)
    value = float(np.atleast_1d(ic(x[None, :], z[None, :]))[0])
    return MixedPoint(x, z), value


def _polish(log_ic, space: MixedSpace, x, z, best, max_evals: int = 200):
    Zb = z[None, :]

    def neg(u):
        v = float(log_ic(space.from_unit(u), Zb)[0])
        return -v if np.isfinite(v) else 1e300

    u0 = space.to_unit(x[None, :])[0]
    out = minimize(neg, u0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * space.q,
                   options={"maxfun": max_evals})
    if np.isfinite(out.fun) and -out.fun > best:
        return space.from_unit(np.clip(out.x, 0.0, 1.0))[0], -out.fun
    return x, best
