"""Mixed spaces, category indexing and the initial design.

A mixed point is a pair (x, z): x lives in a box, z is a tuple of level
indices. Level combinations ("categories") are numbered row-major, and the
initial design spreads samples as evenly as possible over them while the
continuous part follows a Latin hypercube.
"""

from __future__ import annotations

import numpy as np

from mvego.space import MixedSpace, decode_category, encode_categories, lhs_initial_doe

# Goldstein-like space: two variables on [0, 100], two ternary variables
space = MixedSpace(((0.0, 100.0), (0.0, 100.0)), (3, 3))
print(f"q={space.q} continuous, r={space.r} discrete, m={space.m} categories")
for c in (0, 4, 8):
    print(f"  category {c} -> levels {decode_category(c, space)}")

X, Z = lhs_initial_doe(space, 27, rng_seed=0)
counts = np.bincount(encode_categories(Z, space), minlength=space.m)
print("samples per category:", counts.tolist())

# every column of the Latin hypercube hits each of the 27 strata once
strata = np.floor(space.to_unit(X) * 27).astype(int)
print("one sample per stratum in x1:", sorted(strata[:, 0]) == list(range(27)))

# 20 samples over 9 categories: two per category, two categories get a third
X, Z = lhs_initial_doe(space, 20, rng_seed=1)
print("uneven split:", np.bincount(encode_categories(Z, space), minlength=space.m).tolist())
