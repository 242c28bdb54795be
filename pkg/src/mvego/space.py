"""Mixed continuous/discrete search spaces, points and datasets."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc


class DomainError(ValueError):
    """Raised when a point, level or size lies outside its admissible domain."""


@dataclass(frozen=True)
class MixedSpace:
    """Box-bounded continuous dimensions times finite discrete dimensions.

    Parameters
    ----------
    continuous_bounds : sequence of (lower, upper)
        One pair per continuous dimension, ``lower < upper``.
    discrete_levels : sequence of int
        Number of levels ``b_k >= 1`` of each discrete dimension. Levels are
        0-based indices ``0..b_k-1``.
    """

    continuous_bounds: tuple[tuple[float, float], ...] = ()
    discrete_levels: tuple[int, ...] = ()

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.continuous_bounds)
        levels = tuple(int(b) for b in self.discrete_levels)
        for lo, hi in bounds:
            if not lo < hi:
                raise DomainError(f"empty continuous interval [{lo}, {hi}]")
        for b in levels:
            if b < 1:
                raise DomainError(f"discrete dimension needs at least one level, got {b}")
        object.__setattr__(self, "continuous_bounds", bounds)
        object.__setattr__(self, "discrete_levels", levels)

    @property
    def q(self) -> int:
        return len(self.continuous_bounds)

    @property
    def r(self) -> int:
        return len(self.discrete_levels)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.continuous_bounds], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.continuous_bounds], dtype=float)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def m(self) -> int:
        return category_count(self)

    def to_unit(self, X) -> np.ndarray:
        """Map continuous coordinates onto the unit box."""
        X = np.asarray(X, dtype=float).reshape(-1, self.q)
        return (X - self.lower) / self.span

    def from_unit(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float).reshape(-1, self.q)
        return self.lower + U * self.span

    def categories(self) -> np.ndarray:
        """All level tuples, shape ``(m, r)``, in flat-index order."""
        if self.r == 0:
            return np.zeros((1, 0), dtype=int)
        grids = np.indices(self.discrete_levels).reshape(self.r, -1)
        return grids.T.astype(int)

    def contains(self, x, z) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        z = np.asarray(z).ravel()
        if x.size != self.q or z.size != self.r:
            return False
        if np.any(x < self.lower) or np.any(x > self.upper):
            return False
        return bool(np.all((z >= 0) & (z < np.array(self.discrete_levels, dtype=int))))

    def check(self, X, Z) -> tuple[np.ndarray, np.ndarray]:
        """Validate a batch of points and return them as ``(n, q)``/``(n, r)`` arrays."""
        X = np.asarray(X, dtype=float).reshape(-1, self.q)
        Z = np.asarray(Z).reshape(len(X), self.r)
        if Z.size and not np.all(np.equal(np.mod(Z, 1), 0)):
            raise DomainError("discrete levels must be integers")
        Z = Z.astype(int)
        if np.any(X < self.lower) or np.any(X > self.upper):
            raise DomainError("continuous coordinate outside bounds")
        if Z.size and (np.any(Z < 0) or np.any(Z >= np.array(self.discrete_levels))):
            raise DomainError("discrete level outside range")
        return X, Z

    def to_dict(self) -> dict:
        return {
            "continuous_bounds": [list(b) for b in self.continuous_bounds],
            "discrete_levels": list(self.discrete_levels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixedSpace":
        return cls(tuple(tuple(b) for b in d["continuous_bounds"]), tuple(d["discrete_levels"]))


@dataclass(frozen=True)
class MixedPoint:
    """One candidate ``w = {x, z}``."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())
        object.__setattr__(self, "z", np.asarray(self.z, dtype=int).ravel())


@dataclass
class Dataset:
    """Evaluated samples: inputs ``X``/``Z``, objective ``y`` and constraints ``G``.

    ``G`` has shape ``(n, n_g)`` and uses whatever sign convention the caller
    works in; the optimization drivers store the internal ``g <= 0`` form.
    """

    space: MixedSpace
    X: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    G: np.ndarray = field(default=None)

    def __post_init__(self):
        self.X, self.Z = self.space.check(self.X, self.Z)
        self.y = np.asarray(self.y, dtype=float).ravel()
        n = len(self.X)
        if self.G is None:
            self.G = np.zeros((n, 0))
        self.G = np.asarray(self.G, dtype=float).reshape(n, -1)
        if len(self.y) != n:
            raise DomainError(f"{n} points but {len(self.y)} objective values")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def n_constraints(self) -> int:
        return self.G.shape[1]

    def points(self) -> list[MixedPoint]:
        return [MixedPoint(x, z) for x, z in zip(self.X, self.Z)]

    def append(self, x, z, y: float, g=()) -> "Dataset":
        """Return a new dataset with one more row."""
        return Dataset(
            self.space,
            np.vstack([self.X, np.reshape(x, (1, self.space.q))]),
            np.vstack([self.Z, np.reshape(z, (1, self.space.r))]),
            np.append(self.y, y),
            np.vstack([self.G, np.reshape(np.asarray(g, dtype=float), (1, self.n_constraints))]),
        )


def category_count(space: MixedSpace) -> int:
    """Number of level combinations ``m = prod(b_k)`` (1 for a purely continuous space)."""
    return int(np.prod(space.discrete_levels, dtype=np.int64)) if space.r else 1


def encode_category(z: Sequence[int], space: MixedSpace) -> int:
    """Row-major flat index of a level tuple."""
    z = tuple(int(v) for v in np.asarray(z).ravel())
    if len(z) != space.r:
        raise DomainError(f"expected {space.r} levels, got {len(z)}")
    if space.r == 0:
        return 0
    for v, b in zip(z, space.discrete_levels):
        if not 0 <= v < b:
            raise DomainError(f"level {v} outside 0..{b - 1}")
    return int(np.ravel_multi_index(z, space.discrete_levels))


def decode_category(c: int, space: MixedSpace) -> tuple[int, ...]:
    if not 0 <= int(c) < category_count(space):
        raise DomainError(f"category index {c} outside 0..{category_count(space) - 1}")
    if space.r == 0:
        return ()
    return tuple(int(v) for v in np.unravel_index(int(c), space.discrete_levels))


def encode_categories(Z, space: MixedSpace) -> np.ndarray:
    """Vectorized :func:`encode_category` for an ``(n, r)`` array."""
    Z = np.asarray(Z, dtype=int)
    if space.r == 0:
        return np.zeros(len(Z), dtype=int)
    Z = Z.reshape(-1, space.r)
    return np.ravel_multi_index(Z.T, space.discrete_levels).astype(int)


def allocate_categories(n_total: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Assign ``n_total`` samples to ``m`` categories as evenly as possible.

    Every category gets ``n_total // m`` samples; the remainder goes to
    distinct categories drawn uniformly at random. The returned flat indices
    are in random order.
    """
    counts = np.full(m, n_total // m, dtype=int)
    extra = n_total % m
    if extra:
        counts[rng.choice(m, size=extra, replace=False)] += 1
    cats = np.repeat(np.arange(m), counts)
    rng.shuffle(cats)
    return cats


def lhs_initial_doe(space: MixedSpace, n_total: int, rng_seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Initial design: stochastic LHS on the continuous box, balanced categories.

    The continuous part and the category assignment are drawn independently.

    Returns
    -------
    X : ndarray, shape (n_total, q)
    Z : ndarray of int, shape (n_total, r)
    """
    if n_total < 1:
        raise DomainError("the initial design needs at least one sample")
    m = category_count(space)
    if n_total < m:
        warnings.warn(f"{n_total} samples cannot cover all {m} categories", stacklevel=2)
    rng = np.random.default_rng(rng_seed)
    if space.q:
        U = qmc.LatinHypercube(d=space.q, scramble=True, seed=rng).random(n_total)
        X = space.from_unit(U)
    else:
        X = np.zeros((n_total, 0))
    cats = allocate_categories(n_total, m, rng)
    Z = space.categories()[cats]
    return X, Z
