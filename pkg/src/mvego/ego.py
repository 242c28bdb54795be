"""Sequential optimization drivers: mixed-kernel EGO, category-wise EGO and a
penalized GA baseline.

Every driver takes a :class:`Problem`, evaluates it only through
``Problem.evaluate`` and returns a :class:`RunRecord` holding every evaluated
point in order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .gp import NumericalError, TrainedGP
from .infill import FEASIBILITY_TOL, GAConfig, IncumbentState, MixedGA, maximize_ic
from .kernels import KernelKind, KernelSpec
from .space import MixedSpace, encode_categories, lhs_initial_doe
from .training import TrainerConfig, TrainingError, train


@dataclass
class Problem:
    """A constrained mixed-variable problem.

    ``objective(x, z) -> float`` and ``constraints(x, z) -> array`` receive one
    point. ``constraint_sign`` states the convention of the returned values:
    ``"leq"`` means feasible when ``g <= 0``, ``"geq"`` feasible when ``g >= 0``.
    ``defaults`` may hold the budget the problem is usually run with.
    ``batch(X, z) -> (f, G)`` optionally evaluates many continuous points of
    one category at once (used by the brute-force oracle).
    """

    name: str
    space: MixedSpace
    objective: Callable
    constraints: Callable | None = None
    n_constraints: int = 0
    constraint_sign: str = "leq"
    penalty_scale: float = 1.0
    defaults: dict = field(default_factory=dict)
    batch: Callable | None = None

    def __post_init__(self):
        if self.constraint_sign not in ("leq", "geq"):
            raise ValueError("constraint_sign must be 'leq' or 'geq'")
        if self.n_constraints and self.constraints is None:
            raise ValueError("n_constraints > 0 requires a constraints callable")

    def evaluate(self, x, z) -> tuple[float, np.ndarray]:
        """Objective and constraints (declared sign) at one point."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=int)
        f = float(self.objective(x, z))
        if self.n_constraints:
            g = np.asarray(self.constraints(x, z), dtype=float).reshape(self.n_constraints)
        else:
            g = np.zeros(0)
        return f, g

    def to_internal(self, G) -> np.ndarray:
        """Constraint values in the ``<= 0`` convention."""
        G = np.asarray(G, dtype=float)
        return -G if self.constraint_sign == "geq" else G


class CountingProblem:
    """Wraps a problem and counts calls to ``evaluate``."""

    def __init__(self, problem: Problem):
        self.problem = problem
        self.calls = 0

    def __getattr__(self, name):
        return getattr(self.problem, name)

    def evaluate(self, x, z):
        self.calls += 1
        return self.problem.evaluate(x, z)


@dataclass
class IterationLog:
    """One infill step: what was proposed, what came back and the models used."""

    index: int
    x: list
    z: list
    f: float
    g: list
    ic: float
    incumbent: float
    hyperparameters: dict


@dataclass
class RunRecord:
    """Complete trace of one optimization run.

    ``G`` stores constraint values in the problem's declared sign; feasibility
    uses the internal ``<= 0`` form with tolerance ``FEASIBILITY_TOL``.
    """

    method: str
    problem: str
    seed: int
    space: MixedSpace
    n_initial: int
    n_infill: int
    constraint_sign: str = "leq"
    X: np.ndarray = None
    Z: np.ndarray = None
    y: np.ndarray = None
    G: np.ndarray = None
    iterations: list = field(default_factory=list)
    failure: str | None = None
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X is None:
            self.X = np.zeros((0, self.space.q))
            self.Z = np.zeros((0, self.space.r), dtype=int)
            self.y = np.zeros(0)
            self.G = np.zeros((0, 0))

    def append(self, x, z, f: float, g) -> None:
        g = np.asarray(g, dtype=float).ravel()
        if len(self.y) == 0:
            self.G = np.zeros((0, len(g)))
        self.X = np.vstack([self.X, np.reshape(x, (1, self.space.q))])
        self.Z = np.vstack([self.Z, np.reshape(z, (1, self.space.r)).astype(int)])
        self.y = np.append(self.y, float(f))
        self.G = np.vstack([self.G, g[None, :]])

    @property
    def n_evaluations(self) -> int:
        return len(self.y)

    @property
    def internal_G(self) -> np.ndarray:
        return -self.G if self.constraint_sign == "geq" else self.G

    @property
    def feasible(self) -> np.ndarray:
        G = self.internal_G
        if G.size == 0:
            return np.ones(len(self.y), dtype=bool)
        return np.all(G <= FEASIBILITY_TOL, axis=1)

    def best_so_far(self) -> np.ndarray:
        """Best feasible objective after each evaluation (``inf`` until one is feasible)."""
        vals = np.where(self.feasible, self.y, np.inf)
        return np.minimum.accumulate(vals) if len(vals) else vals

    def trajectory(self) -> np.ndarray:
        """Incumbent after the initial design and after each further evaluation."""
        traj = self.best_so_far()
        return traj[self.n_initial - 1:] if self.n_initial else traj

    @property
    def best_index(self) -> int | None:
        vals = np.where(self.feasible, self.y, np.inf)
        if not np.isfinite(vals).any():
            return None
        return int(np.argmin(vals))

    @property
    def best(self) -> dict | None:
        i = self.best_index
        if i is None:
            return None
        return {
            "value": float(self.y[i]),
            "x": self.X[i].tolist(),
            "z": self.Z[i].tolist(),
            "g": self.G[i].tolist(),
            "category": int(encode_categories(self.Z[i:i + 1], self.space)[0]),
            "index": i,
        }

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "problem": self.problem,
            "seed": self.seed,
            "space": self.space.to_dict(),
            "n_initial": self.n_initial,
            "n_infill": self.n_infill,
            "constraint_sign": self.constraint_sign,
            "X": self.X.tolist(),
            "Z": self.Z.tolist(),
            "y": self.y.tolist(),
            "G": self.G.tolist(),
            "iterations": [vars(it) for it in self.iterations],
            "failure": self.failure,
            "settings": self.settings,
            "best": self.best,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        space = MixedSpace.from_dict(d["space"])
        n = len(d["y"])
        rec = cls(
            d["method"], d["problem"], d["seed"], space, d["n_initial"], d["n_infill"],
            d.get("constraint_sign", "leq"),
            np.asarray(d["X"], dtype=float).reshape(n, space.q),
            np.asarray(d["Z"], dtype=int).reshape(n, space.r),
            np.asarray(d["y"], dtype=float),
            np.asarray(d["G"], dtype=float).reshape(n, -1) if n else np.zeros((0, 0)),
            [IterationLog(**it) for it in d["iterations"]],
            d.get("failure"),
            d.get("settings", {}),
        )
        return rec


def _child_seed(seed: int, *tags: int) -> int:
    """Deterministic sub-seed for one stage of a run."""
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


def _initial_design(problem: Problem, n_initial: int, seed: int, doe):
    if doe is None:
        return lhs_initial_doe(problem.space, n_initial, seed)
    X, Z = doe
    return problem.space.check(X, Z)


def _evaluate_design(problem: Problem, record: RunRecord, X, Z) -> None:
    for x, z in zip(X, Z):
        f, g = problem.evaluate(x, z)
        record.append(x, z, f, g)


def _fit_output(space, X, Z, y, kind, config: TrainerConfig, warm):
    """Train and fit one surrogate; constant responses skip training."""
    if np.ptp(y) == 0:
        return TrainedGP.fit(space, X, Z, y, KernelSpec.default(kind, space), config.nugget), warm
    res = train(space, X, Z, y, kind, config, warm_start=warm)
    return TrainedGP.fit(space, X, Z, y, res.spec, config.nugget), res.vector


def run_mixed_ego(
    problem: Problem,
    kind: KernelKind | str,
    n_initial: int,
    n_infill: int,
    seed: int = 0,
    trainer: TrainerConfig | None = None,
    ga: GAConfig | None = None,
    doe=None,
) -> RunRecord:
    """Constrained EGO with one mixed-kernel GP per output.

    Each iteration retrains every surrogate (warm-started from the previous
    hyperparameters), maximizes EI x PoF with the mixed GA and evaluates the
    winner. A training or factorization failure stops the run and is recorded
    in ``RunRecord.failure`` with the history so far.
    """
    kind = KernelKind(kind)
    trainer = trainer or TrainerConfig()
    ga = ga or GAConfig()
    space = problem.space
    record = RunRecord(f"ego-{kind.value}", problem.name, seed, space, n_initial, n_infill,
                       problem.constraint_sign, settings={"kind": kind.value})
    X0, Z0 = _initial_design(problem, n_initial, seed, doe)
    _evaluate_design(problem, record, X0, Z0)
    record.n_initial = len(X0)
    warm = [None] * (1 + problem.n_constraints)
    for t in range(n_infill):
        G = record.internal_G
        responses = [record.y] + [G[:, k] for k in range(G.shape[1])]
        try:
            gps = []
            for k, resp in enumerate(responses):
                cfg = replace(trainer, seed=_child_seed(seed, 1, t, k))
                gp, warm[k] = _fit_output(space, record.X, record.Z, resp, kind, cfg, warm[k])
                gps.append(gp)
        except (TrainingError, NumericalError) as exc:
            record.failure = f"iteration {t}: {exc}"
            break
        incumbent = IncumbentState.from_data(record.y, G)
        w, ic = maximize_ic(gps[0], gps[1:], space, incumbent, replace(ga, seed=_child_seed(seed, 2, t)))
        f, g = problem.evaluate(w.x, w.z)
        record.append(w.x, w.z, f, g)
        record.iterations.append(IterationLog(
            t, w.x.tolist(), w.z.tolist(), f, g.tolist(), ic,
            float(record.best_so_far()[-1]),
            {"objective": _vec(warm[0]), "constraints": [_vec(v) for v in warm[1:]]},
        ))
    return record


def _vec(v):
    return None if v is None else np.asarray(v).tolist()


def run_categorywise_ego(
    problem: Problem,
    n_initial: int,
    n_infill: int,
    seed: int = 0,
    trainer: TrainerConfig | None = None,
    ga: GAConfig | None = None,
    doe=None,
) -> RunRecord:
    """EGO with independent continuous GPs for every category.

    Every category gets the same GA budget; the candidate with the largest
    criterion over all categories is evaluated. Categories with fewer than two
    initial samples are topped up with random points (counted as initial
    evaluations) and a warning is issued.
    """
    trainer = trainer or TrainerConfig()
    ga = ga or GAConfig()
    space = problem.space
    cont = MixedSpace(space.continuous_bounds, ())
    cats = space.categories()
    m = len(cats)
    record = RunRecord("ego-cw", problem.name, seed, space, n_initial, n_infill,
                       problem.constraint_sign)
    X0, Z0 = _initial_design(problem, n_initial, seed, doe)
    X0, Z0 = _top_up(space, X0, Z0, seed)
    _evaluate_design(problem, record, X0, Z0)
    record.n_initial = len(X0)
    kind = KernelKind.HOHS
    n_out = 1 + problem.n_constraints
    warm = [[None] * n_out for _ in range(m)]
    models: list = [None] * m
    stale = set(range(m))

    # with a single category the seeds coincide with run_mixed_ego's
    def ctag(c):
        return (c,) if m > 1 else ()

    for t in range(n_infill):
        G = record.internal_G
        codes = encode_categories(record.Z, space)
        try:
            for c in sorted(stale):
                sel = codes == c
                Xc = record.X[sel]
                responses = [record.y[sel]] + [G[sel, k] for k in range(G.shape[1])]
                gps = []
                for k, resp in enumerate(responses):
                    cfg = replace(trainer, seed=_child_seed(seed, 1, t, *ctag(c), k))
                    empty = np.zeros((len(Xc), 0), dtype=int)
                    gp, warm[c][k] = _fit_output(cont, Xc, empty, resp, kind, cfg, warm[c][k])
                    gps.append(gp)
                models[c] = gps
        except (TrainingError, NumericalError) as exc:
            record.failure = f"iteration {t}: {exc}"
            break
        incumbent = IncumbentState.from_data(record.y, G)
        best = None
        for c in range(m):
            cfg = replace(ga, seed=_child_seed(seed, 2, t, *ctag(c)))
            w, ic = maximize_ic(models[c][0], models[c][1:], cont, incumbent, cfg)
            if best is None or ic > best[2]:
                best = (w.x, c, ic)
        x, c, ic = best
        z = cats[c]
        f, g = problem.evaluate(x, z)
        record.append(x, z, f, g)
        stale = {c}
        record.iterations.append(IterationLog(
            t, x.tolist(), z.tolist(), f, g.tolist(), ic, float(record.best_so_far()[-1]),
            {"category": c, "objective": _vec(warm[c][0]), "constraints": [_vec(v) for v in warm[c][1:]]},
        ))
    return record


def _top_up(space: MixedSpace, X, Z, seed: int):
    codes = encode_categories(Z, space)
    counts = np.bincount(codes, minlength=space.m)
    short = np.flatnonzero(counts < 2)
    if len(short) == 0:
        return X, Z
    warnings.warn(
        f"{len(short)} categories have fewer than 2 initial samples; adding random points",
        stacklevel=3,
    )
    rng = np.random.default_rng(_child_seed(seed, 3))
    cats = space.categories()
    Xs, Zs = [X], [Z]
    for c in short:
        k = 2 - counts[c]
        Xs.append(space.from_unit(rng.uniform(0, 1, (k, space.q))))
        Zs.append(np.repeat(cats[c][None, :], k, axis=0))
    return np.vstack(Xs), np.vstack(Zs)


def run_penalized_ga(
    problem: Problem,
    population: int,
    generations: int,
    seed: int = 0,
    penalty: float = 1e3,
    ga: GAConfig | None = None,
) -> RunRecord:
    """Mixed GA on ``f + rho * sum(max(0, g)^2)`` with the true functions.

    ``rho = penalty * problem.penalty_scale``. Exactly
    ``population * generations`` evaluations are made; the first population
    is a Latin hypercube design drawn with the run seed.
    """
    space = problem.space
    rho = penalty * problem.penalty_scale
    record = RunRecord("ga", problem.name, seed, space, population, population * (generations - 1),
                       problem.constraint_sign, settings={"population": population,
                                                          "generations": generations, "rho": rho})
    cfg = replace(ga or GAConfig(), population=population, generations=generations,
                  stall_generations=None, seed=_child_seed(seed, 4))

    def fitness(X, Z):
        out = np.empty(len(X))
        for i, (x, z) in enumerate(zip(X, Z)):
            f, g = problem.evaluate(x, z)
            record.append(x, z, f, g)
            viol = np.maximum(problem.to_internal(g), 0.0)
            out[i] = -(f + rho * np.sum(viol**2))
        return out

    initial = lhs_initial_doe(space, population, seed)
    MixedGA(space, cfg).run(fitness, initial=initial)
    return record
