"""Training a mixed GP by likelihood maximization and checking its predictions.

Hyperparameters are mapped to the unit box and tuned with a CMA-ES; for the
homoscedastic kernels the shared variance is solved in closed form.
"""

from __future__ import annotations

import numpy as np

from mvego.benchmarks import branin_problem
from mvego.gp import TrainedGP
from mvego.space import lhs_initial_doe
from mvego.training import TrainerConfig, train

problem = branin_problem()
space = problem.space
X, Z = lhs_initial_doe(space, 20, rng_seed=3)
y = np.array([problem.evaluate(x, z)[0] for x, z in zip(X, Z)])

Xt, Zt = lhs_initial_doe(space, 400, rng_seed=4)
yt = np.array([problem.evaluate(x, z)[0] for x, z in zip(Xt, Zt)])

for kind in ("HeHS", "HoHS", "CS"):
    res = train(space, X, Z, y, kind, TrainerConfig(seed=0))
    gp = TrainedGP.fit(space, X, Z, y, res.spec)
    pred = gp.predict(Xt, Zt)
    rmse = np.sqrt(np.mean((pred.mean - yt) ** 2))
    inside = np.mean(np.abs(pred.mean - yt) <= 2 * pred.std)
    print(f"{kind:5s} loglik {res.log_likelihood:8.3f} after {res.n_evals:5d} evaluations; "
          f"test RMSE {rmse:.3f}, {100 * inside:.0f}% within 2 sd")

gp = TrainedGP.fit(space, X, Z, y, train(space, X, Z, y, "CS").spec)
print("largest error at the training points:", np.max(np.abs(gp.predict(X, Z).mean - y)))
