"""Analytical mixed-variable constrained test problems and their brute-force optima.

All three problems declare their constraint as ``g >= 0`` (satisfied margin);
the optimization drivers negate it internally.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .ego import Problem
from .space import DomainError, MixedSpace, encode_category

# -- Branin -----------------------------------------------------------------

_BRANIN_F = {(0, 0): (1.0, 0.0), (0, 1): (0.4, 0.0), (1, 0): (-0.75, 3.0), (1, 1): (-0.5, 1.4)}
_BRANIN_G = {(0, 0): (1.0, -0.4), (0, 1): (1.5, -0.4), (1, 0): (1.5, -0.2), (1, 1): (1.2, -0.3)}


def branin_h(x1, x2):
    """Rescaled Branin function on ``[0, 1]^2``."""
    a = 15.0 * np.asarray(x1, dtype=float) - 5.0
    b = 15.0 * np.asarray(x2, dtype=float)
    core = (b - 5.0 / (4 * np.pi**2) * a**2 + 5.0 / np.pi * a - 6.0) ** 2
    core = core + 10.0 * (1 - 1 / (8 * np.pi)) * np.cos(a) + 10.0
    return (core - 54.8104) / 51.9496


def _levels(z1, z2, n1, n2):
    z1, z2 = int(z1), int(z2)
    if not (0 <= z1 < n1 and 0 <= z2 < n2):
        raise DomainError(f"levels ({z1}, {z2}) outside the problem's categories")
    return z1, z2


def _unit_box(*xs, lo=0.0, hi=1.0):
    for x in xs:
        x = np.asarray(x, dtype=float)
        if np.any(x < lo) or np.any(x > hi) or np.any(~np.isfinite(x)):
            raise DomainError(f"continuous variable outside [{lo}, {hi}]")


def branin_block(xi, xj, z1, z2):
    """One Branin block ``(s, u)``: objective term and constraint term."""
    z = _levels(z1, z2, 2, 2)
    a, c = _BRANIN_F[z]
    k, off = _BRANIN_G[z]
    return a * branin_h(xi, xj) + c, k * np.asarray(xi) * np.asarray(xj) + off


def branin_mixed(x1, x2, z1, z2):
    """Branin problem with two binary variables: returns ``(f, g)``, feasible when ``g >= 0``."""
    _unit_box(x1, x2)
    return branin_block(x1, x2, z1, z2)


def branin_augmented(x, z1, z2):
    """Sum of five Branin blocks over consecutive pairs of ``x`` (length 10)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 10:
        raise DomainError("augmented Branin takes 10 continuous variables")
    _unit_box(x)
    f = 0.0
    g = 0.0
    for i in range(5):
        s, u = branin_block(x[..., 2 * i], x[..., 2 * i + 1], z1, z2)
        f = f + s
        g = g + u
    return f, g


# -- Goldstein --------------------------------------------------------------

# (x3, c1) by z1 and (x4, c2) by z2
_GOLD_Z1 = {0: (20.0, 2.0), 1: (50.0, -2.0), 2: (80.0, 1.0)}
_GOLD_Z2 = {0: (20.0, 0.5), 1: (50.0, -1.0), 2: (80.0, -2.0)}


def goldstein_table(z1, z2) -> dict:
    """``x3, x4, c1, c2`` of one Goldstein category."""
    z1, z2 = _levels(z1, z2, 3, 3)
    x3, c1 = _GOLD_Z1[z1]
    x4, c2 = _GOLD_Z2[z2]
    return {"x3": x3, "x4": x4, "c1": c1, "c2": c2}


def goldstein_h(x1, x2, x3, x4):
    x1, x2, x3, x4 = (np.asarray(v, dtype=float) for v in (x1, x2, x3, x4))
    return (
        53.3108
        + 0.184901 * x1
        - 5.02914e-6 * x1**3
        + 7.72522e-8 * x1**4
        - 0.0870775 * x2
        - 0.106959 * x3
        + 7.98772e-6 * x3**3
        + 0.00242482 * x4
        + 1.32851e-6 * x4**3
        - 0.00146393 * x1 * x2
        - 0.00301588 * x1 * x3
        - 0.00272291 * x1 * x4
        + 0.0017004 * x2 * x3
        + 0.0038428 * x2 * x4
        - 0.000198969 * x3 * x4
        + 1.86025e-5 * x1 * x2 * x3
        - 1.88719e-6 * x1 * x2 * x4
        + 2.50923e-5 * x1 * x3 * x4
        - 5.62199e-5 * x2 * x3 * x4
    )


def goldstein_mixed(x1, x2, z1, z2):
    """Goldstein problem with two ternary variables: ``(f, g)``, feasible when ``g >= 0``."""
    _unit_box(x1, x2, lo=0.0, hi=100.0)
    t = goldstein_table(z1, z2)
    f = goldstein_h(x1, x2, t["x3"], t["x4"])
    g = t["c1"] * np.sin(np.asarray(x1) / 10.0) ** 3 + t["c2"] * np.cos(np.asarray(x2) / 20.0) ** 2
    return f, g


# -- problem factories ----------------------------------------------------


def _pair_problem(name, fn, space, defaults):
    def objective(x, z):
        return float(fn(x[0], x[1], z[0], z[1])[0])

    def constraints(x, z):
        return np.array([fn(x[0], x[1], z[0], z[1])[1]], dtype=float)

    def batch(X, z):
        f, g = fn(X[:, 0], X[:, 1], z[0], z[1])
        return f, np.reshape(g, (-1, 1))

    return Problem(name, space, objective, constraints, n_constraints=1,
                   constraint_sign="geq", defaults=defaults, batch=batch)


def branin_problem() -> Problem:
    space = MixedSpace(((0.0, 1.0), (0.0, 1.0)), (2, 2))
    return _pair_problem("branin", branin_mixed, space,
                         dict(n_initial=20, n_infill=20, ga_population=5, ga_generations=8))


def goldstein_problem() -> Problem:
    space = MixedSpace(((0.0, 100.0), (0.0, 100.0)), (3, 3))
    return _pair_problem("goldstein", goldstein_mixed, space,
                         dict(n_initial=27, n_infill=54, ga_population=8, ga_generations=9))


def augmented_branin_problem() -> Problem:
    space = MixedSpace(tuple((0.0, 1.0) for _ in range(10)), (2, 2))

    def objective(x, z):
        return float(branin_augmented(x, z[0], z[1])[0])

    def constraints(x, z):
        return np.array([branin_augmented(x, z[0], z[1])[1]], dtype=float)

    return Problem("augmented_branin", space, objective, constraints, n_constraints=1,
                   constraint_sign="geq",
                   defaults=dict(n_initial=60, n_infill=140, ga_population=10, ga_generations=20))


def rocket_space() -> MixedSpace:
    """Variable ranges of the solid rocket engine case (throat and exit diameters,
    chamber pressure, propellant mass; propellant, material and engine types).

    Only the space is provided: its disciplinary models are not public, so a
    user plugs their own evaluators into :class:`Problem`.
    """
    return MixedSpace(((0.2, 1.0), (0.5, 1.2), (5.0, 300.0), (2000.0, 15000.0)), (4, 2, 3))


BENCHMARKS = {
    "branin": branin_problem,
    "augmented_branin": augmented_branin_problem,
    "goldstein": goldstein_problem,
}


def get_benchmark(name: str) -> Problem:
    try:
        return BENCHMARKS[name]()
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None


# -- oracle ------------------------------------------------------------------


@dataclass
class OracleResult:
    name: str
    resolution: int
    value: float
    x: list
    z: list
    category: int
    feasible: bool = True

    @property
    def infeasible_at_resolution(self) -> bool:
        return not self.feasible


def _grid_oracle(problem: Problem, resolution: int):
    space = problem.space
    axes = [np.linspace(lo, hi, resolution) for lo, hi in space.continuous_bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    best = (np.inf, None, None)
    for z in space.categories():
        f, g = _vectorized(problem, mesh, z)
        f = np.where(g, f, np.inf)
        i = int(np.argmin(f))
        if f.flat[i] < best[0]:
            best = (float(f.flat[i]), [float(m.flat[i]) for m in mesh], [int(v) for v in z])
    return best


def _vectorized(problem: Problem, mesh, z):
    """Objective and feasibility on a grid of one category."""
    pts = np.column_stack([m.ravel() for m in mesh]) if mesh else np.zeros((1, 0))
    if problem.batch is not None:
        f, G = problem.batch(pts, z)
    else:
        rows = [problem.evaluate(x, z) for x in pts]
        f = np.array([r[0] for r in rows])
        G = np.array([r[1] for r in rows]).reshape(len(pts), -1)
    G = problem.to_internal(G)
    feas = np.all(G <= 0, axis=1) if G.size else np.ones(len(pts), dtype=bool)
    shape = mesh[0].shape if mesh else (1,)
    return np.reshape(f, shape), np.reshape(feas, shape)


def _multistart_oracle(problem: Problem, n_starts: int, seed: int):
    space = problem.space
    rng = np.random.default_rng(seed)
    bounds = list(space.continuous_bounds)
    best = (np.inf, None, None)
    for z in space.categories():
        cons = []
        if problem.n_constraints:
            cons = [{"type": "ineq", "fun": lambda x, z=z: -problem.to_internal(problem.constraints(x, z))}]
        for _ in range(n_starts):
            x0 = space.from_unit(rng.uniform(0, 1, space.q))[0]
            res = minimize(lambda x: problem.objective(np.clip(x, space.lower, space.upper), z), x0,
                           method="SLSQP", bounds=bounds, constraints=cons)
            x = np.clip(res.x, space.lower, space.upper)
            g = problem.to_internal(problem.constraints(x, z)) if problem.n_constraints else np.zeros(0)
            f = problem.objective(x, z)
            if np.all(g <= 1e-9) and f < best[0]:
                best = (float(f), x.tolist(), [int(v) for v in z])
    return best


def oracle_optimum(problem: Problem, resolution: int = 400, n_starts: int = 1000, seed: int = 0) -> OracleResult:
    """Best feasible point: dense grid per category for ``q <= 2``, otherwise
    multi-start SLSQP per category."""
    if problem.space.q <= 2:
        value, x, z = _grid_oracle(problem, resolution)
    else:
        value, x, z = _multistart_oracle(problem, n_starts, seed)
        resolution = n_starts
    if x is None:
        return OracleResult(problem.name, resolution, float("inf"), [], [], -1, feasible=False)
    return OracleResult(problem.name, resolution, value, x, z, encode_category(z, problem.space))


ORACLE_CACHE = "oracles.json"


def load_oracle_cache(path: str | Path | None = None) -> dict[str, OracleResult]:
    if path is None:
        text = resources.files("mvego.data").joinpath(ORACLE_CACHE).read_text()
    else:
        text = Path(path).read_text()
    return {rec["name"]: OracleResult(**rec) for rec in json.loads(text)}


def write_oracle_cache(results, path: str | Path) -> None:
    recs = sorted((asdict(r) for r in results), key=lambda r: r["name"])
    Path(path).write_text(json.dumps(recs, indent=2) + "\n")


def cached_oracle(name: str) -> OracleResult:
    return load_oracle_cache()[name]
