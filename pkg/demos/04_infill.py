"""Expected improvement times probability of feasibility, maximized by the mixed GA."""

from __future__ import annotations

import numpy as np

from mvego.benchmarks import branin_problem
from mvego.gp import TrainedGP
from mvego.infill import GAConfig, IncumbentState, expected_improvement, maximize_ic
from mvego.space import lhs_initial_doe
from mvego.training import train

print("EI at the incumbent with unit sd:", expected_improvement(0.0, 1.0, 0.0))
print("EI with zero sd is the plain improvement:", expected_improvement(-0.3, 0.0, 0.0))

problem = branin_problem()
space = problem.space
X, Z = lhs_initial_doe(space, 20, rng_seed=0)
rows = [problem.evaluate(x, z) for x, z in zip(X, Z)]
y = np.array([f for f, _ in rows])
G = problem.to_internal(np.array([g for _, g in rows]))

gp_f = TrainedGP.fit(space, X, Z, y, train(space, X, Z, y, "CS").spec)
gp_g = TrainedGP.fit(space, X, Z, G[:, 0], train(space, X, Z, G[:, 0], "CS").spec)
incumbent = IncumbentState.from_data(y, G)
print(f"best feasible so far: {incumbent.y_min:.4f}")

w, ic = maximize_ic(gp_f, [gp_g], space, incumbent, GAConfig(seed=1))
f, g = problem.evaluate(w.x, w.z)
print(f"GA proposes x={np.round(w.x, 4)}, z={w.z.tolist()} with EI*PoF={ic:.3e}")
print(f"true objective there {f:.4f}, constraint margin {g[0]:.4f}")
