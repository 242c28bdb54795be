"""Repeated campaigns through the harness, and plugging in a custom problem.

The same campaign is available from the command line:

    mvego run config.json --repetitions 3 --methods CS,GA
    mvego summarize runs/branin
    mvego oracle goldstein --resolution 801
"""

from __future__ import annotations

import tempfile

import numpy as np

from mvego.benchmarks import rocket_space
from mvego.ego import Problem, run_mixed_ego
from mvego.harness import CampaignConfig, run_campaign, summarize

with tempfile.TemporaryDirectory() as out:
    cfg = CampaignConfig(benchmark="branin", methods=["CS", "GA"], repetitions=3)
    run_campaign(cfg, out)
    print(summarize(out))

# A user problem on the rocket-engine space: the disciplinary models are not
# public, so here a made-up smooth surrogate stands in for them.
space = rocket_space()
impulse = np.array([[1.0, 1.1, 0.9, 1.2]]).T  # per propellant type


def mass(x, z):
    dt, de, pc, mp = x
    return float(mp / 1000 + 5 * de**2 / dt - 0.01 * pc * impulse[z[0], 0] + 0.5 * z[1] + 0.3 * z[2])


def reach(x, z):
    # feasible when the (made-up) performance margin is nonnegative
    dt, de, pc, mp = x
    return np.array([impulse[z[0], 0] * mp / 5000 + pc / 100 - 2.5])


problem = Problem("toy_rocket", space, mass, reach, n_constraints=1, constraint_sign="geq")
rec = run_mixed_ego(problem, "CS", 48, 10, seed=0)
print("toy rocket best:", {k: rec.best[k] for k in ("value", "z")})
