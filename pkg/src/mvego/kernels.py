"""Mixed-variable covariance functions.

A mixed kernel is the product of a p-exponential kernel on the continuous
coordinates and one ``b_s x b_s`` covariance matrix ``T_s`` per discrete
dimension. Three parameterizations of ``T_s`` are available:

``HeHS``
    heteroscedastic hypersphere decomposition, ``T_s = L_s L_s^T`` where
    each row of ``L_s`` is a point of radius ``alpha_{k,0}`` on a hypersphere.
``HoHS``
    homoscedastic variant, all radii equal to one so ``T_s`` is a
    correlation matrix; a shared process variance multiplies the product.
``CS``
    compound symmetry derived from the Gower distance: unit diagonal and a
    single off-diagonal correlation ``exp(-theta_s (1/(r+q))^p_s)``.

Continuous coordinates are compared on the unit box (divided by the range of
each dimension). For ``CS`` they are further divided by ``r + q`` so that
the kernel is exactly the p-exponential of the Gower distance terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .space import DomainError, MixedPoint, MixedSpace


class KernelKind(str, Enum):
    HEHS = "HeHS"
    HOHS = "HoHS"
    CS = "CS"

    @property
    def homoscedastic(self) -> bool:
        return self is not KernelKind.HEHS

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value.lower() == value.lower():
                    return member
        return None


def _arr(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class KernelSpec:
    """Hyperparameters of one mixed kernel.

    ``angles[s]`` holds the ``b_s(b_s-1)/2`` hypersphere angles of dimension
    ``s`` row by row (row ``k`` contributes ``k`` angles). ``radii[s]`` holds
    the ``b_s`` radii of a heteroscedastic dimension. ``cs_theta``/``cs_p``
    are the per-dimension Gower parameters of the CS form. ``sigma_sq`` is
    the shared process variance of the homoscedastic kinds and is ignored
    (treated as 1) for ``HeHS``.
    """

    kind: KernelKind
    theta: np.ndarray
    p: np.ndarray
    angles: tuple = ()
    radii: tuple = ()
    cs_theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cs_p: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma_sq: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        object.__setattr__(self, "theta", _arr(self.theta) if np.size(self.theta) else np.zeros(0))
        object.__setattr__(self, "p", _arr(self.p) if np.size(self.p) else np.zeros(0))
        object.__setattr__(self, "angles", tuple(np.asarray(a, dtype=float).ravel() for a in self.angles))
        object.__setattr__(self, "radii", tuple(np.asarray(a, dtype=float).ravel() for a in self.radii))
        object.__setattr__(self, "cs_theta", np.asarray(self.cs_theta, dtype=float).ravel())
        object.__setattr__(self, "cs_p", np.asarray(self.cs_p, dtype=float).ravel())
        object.__setattr__(self, "sigma_sq", float(self.sigma_sq))
        if np.any(self.theta <= 0) or np.any(self.cs_theta <= 0):
            raise DomainError("length-scale parameters must be positive")
        if np.any((self.p < 1) | (self.p > 2)) or np.any((self.cs_p < 1) | (self.cs_p > 2)):
            raise DomainError("exponents must lie in [1, 2]")
        if self.sigma_sq < 0:
            raise DomainError("process variance must be nonnegative")

    @property
    def process_variance(self) -> float:
        return 1.0 if self.kind is KernelKind.HEHS else self.sigma_sq

    def with_variance(self, sigma_sq: float) -> "KernelSpec":
        return replace(self, sigma_sq=float(sigma_sq))

    def validate(self, space: MixedSpace) -> None:
        """Check that the parameter shapes match ``space``."""
        if self.theta.size != space.q or self.p.size != space.q:
            raise DomainError(f"expected {space.q} continuous parameters")
        if self.kind is KernelKind.CS:
            if self.cs_theta.size != space.r or self.cs_p.size != space.r:
                raise DomainError(f"expected {space.r} CS parameter pairs")
            return
        if len(self.angles) != space.r:
            raise DomainError(f"expected angles for {space.r} discrete dimensions")
        for a, b in zip(self.angles, space.discrete_levels):
            if a.size != b * (b - 1) // 2:
                raise DomainError(f"dimension with {b} levels needs {b * (b - 1) // 2} angles")
        if self.kind is KernelKind.HEHS:
            if len(self.radii) != space.r or any(
                rad.size != b for rad, b in zip(self.radii, space.discrete_levels)
            ):
                raise DomainError("heteroscedastic kernel needs one radius per level")

    def discrete_matrices(self, space: MixedSpace) -> list[np.ndarray]:
        """The ``r`` matrices ``T_s``, each without the shared variance."""
        if self.kind is KernelKind.CS:
            return [
                cs_matrix(t, p, space, s) for s, (t, p) in enumerate(zip(self.cs_theta, self.cs_p))
            ]
        mats = []
        for s, b in enumerate(space.discrete_levels):
            radii = self.radii[s] if self.kind is KernelKind.HEHS else None
            L = hypersphere_cholesky(self.angles[s], radii, n_levels=b)
            mats.append(discrete_matrix_hs(L))
        return mats

    @classmethod
    def default(cls, kind, space: MixedSpace, **overrides) -> "KernelSpec":
        """A mid-range starting point: unit length-scales, ``p = 2``, angles ``pi/2``."""
        kind = KernelKind(kind)
        kw = dict(kind=kind, theta=np.ones(space.q), p=np.full(space.q, 2.0))
        if kind is KernelKind.CS:
            kw.update(cs_theta=np.ones(space.r), cs_p=np.full(space.r, 2.0))
        else:
            kw["angles"] = tuple(np.full(b * (b - 1) // 2, np.pi / 2) for b in space.discrete_levels)
            if kind is KernelKind.HEHS:
                kw["radii"] = tuple(np.ones(b) for b in space.discrete_levels)
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "theta": self.theta.tolist(),
            "p": self.p.tolist(),
            "angles": [a.tolist() for a in self.angles],
            "radii": [a.tolist() for a in self.radii],
            "cs_theta": self.cs_theta.tolist(),
            "cs_p": self.cs_p.tolist(),
            "sigma_sq": self.sigma_sq,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)


def continuous_kernel(x_i, x_j, theta, p, sigma_c_sq: float = 1.0) -> float:
    """p-exponential covariance ``sigma_c^2 exp(-sum theta_k |dx_k|^p_k)``."""
    d = np.abs(_arr(x_i) - _arr(x_j))
    return float(sigma_c_sq * np.exp(-np.sum(_arr(theta) * d ** _arr(p))))


def _angle_count_to_levels(n_angles: int) -> int:
    b = int(round((1 + np.sqrt(1 + 8 * n_angles)) / 2))
    if b * (b - 1) // 2 != n_angles:
        raise DomainError(f"{n_angles} angles do not fill a lower triangle")
    return b


def hypersphere_cholesky(angles, radii=None, n_levels: int | None = None) -> np.ndarray:
    """Lower-triangular factor whose rows are points on hyperspheres.

    Row ``k`` (0-based) uses angles ``a_1..a_k`` and radius ``rho_k``::

        l[k, 0] = rho_k cos(a_1)
        l[k, s] = rho_k sin(a_1)...sin(a_s) cos(a_{s+1})
        l[k, k] = rho_k sin(a_1)...sin(a_k)

    With ``radii=None`` all radii are one (correlation-matrix factor).
    """
    angles = np.asarray(angles, dtype=float).ravel()
    b = n_levels if n_levels is not None else _angle_count_to_levels(angles.size)
    if angles.size != b * (b - 1) // 2:
        raise DomainError(f"{b} levels need {b * (b - 1) // 2} angles, got {angles.size}")
    if np.any((angles <= 0) | (angles >= np.pi)):
        raise DomainError("hypersphere angles must lie in (0, pi)")
    radii = np.ones(b) if radii is None else np.asarray(radii, dtype=float).ravel()
    if radii.size != b:
        raise DomainError(f"expected {b} radii, got {radii.size}")
    if np.any(radii <= 0):
        raise DomainError("hypersphere radii must be positive")
    return hs_factor(angles, radii, b)


def hs_factor(angles: np.ndarray, radii, b: int) -> np.ndarray:
    """Unchecked core of :func:`hypersphere_cholesky`."""
    L = np.zeros((b, b))
    L[0, 0] = 1.0
    start = 0
    for k in range(1, b):
        a = angles[start:start + k]
        start += k
        pref = np.ones(k + 1)
        np.cumprod(np.sin(a), out=pref[1:])
        L[k, :k] = pref[:k] * np.cos(a)
        L[k, k] = pref[k]
    if radii is not None:
        L *= np.asarray(radii)[:, None]
    return L


def discrete_matrix_hs(L) -> np.ndarray:
    """``T = L L^T`` (symmetrized against round-off)."""
    L = np.asarray(L, dtype=float)
    T = L @ L.T
    return 0.5 * (T + T.T)


def gower_distance(w_i: MixedPoint, w_j: MixedPoint, space: MixedSpace) -> float:
    """Range-normalized Manhattan terms plus level-mismatch scores over ``r + q``."""
    cont = np.sum(np.abs(w_i.x - w_j.x) / space.span) if space.q else 0.0
    disc = np.sum(w_i.z != w_j.z) if space.r else 0
    return float((cont + disc) / (space.r + space.q))


def cs_ratio(theta_s: float, p_s: float, space: MixedSpace) -> float:
    """Off-diagonal over diagonal of a Gower CS matrix, for a level mismatch."""
    return float(np.exp(-theta_s * (1.0 / (space.r + space.q)) ** p_s))


def cs_matrix(theta_s: float, p_s: float, space: MixedSpace, dim: int, sigma_sq: float = 1.0) -> np.ndarray:
    """Compound-symmetry matrix of discrete dimension ``dim``.

    ``sigma_sq`` on the diagonal, ``sigma_sq * cs_ratio`` elsewhere.
    """
    if theta_s <= 0:
        raise DomainError("CS length-scale must be positive")
    b = space.discrete_levels[dim]
    c = sigma_sq * cs_ratio(theta_s, p_s, space)
    T = np.full((b, b), c)
    np.fill_diagonal(T, sigma_sq)
    return T


def continuous_scale(kind, space: MixedSpace) -> np.ndarray:
    """Divisor applied to raw continuous differences before the p-exponential."""
    scale = space.span.copy()
    if KernelKind(kind) is KernelKind.CS:
        scale *= space.r + space.q
    return scale


def pairwise_diffs(X1, X2, scale) -> np.ndarray:
    """``|X1_i - X2_j| / scale`` with shape ``(n1, n2, q)``."""
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    return np.abs(X1[:, None, :] - X2[None, :, :]) / scale


def gram_from_diffs(spec: KernelSpec, D, Z1, Z2, matrices=None) -> np.ndarray:
    """Covariance block from precomputed scaled differences and level indices."""
    if D.shape[-1]:
        K = np.exp(-np.einsum("ijk,k->ij", D ** spec.p, spec.theta))
    else:
        K = np.ones(D.shape[:2])
    for s, T in enumerate(matrices):
        K *= T[Z1[:, s][:, None], Z2[:, s][None, :]]
    return spec.process_variance * K


def gram(spec: KernelSpec, space: MixedSpace, X1, Z1, X2=None, Z2=None) -> np.ndarray:
    """Covariance matrix between two batches of mixed points (raw coordinates)."""
    X1 = np.asarray(X1, dtype=float).reshape(-1, space.q)
    Z1 = np.asarray(Z1, dtype=int).reshape(len(X1), space.r)
    if X2 is None:
        X2, Z2 = X1, Z1
    X2 = np.asarray(X2, dtype=float).reshape(-1, space.q)
    Z2 = np.asarray(Z2, dtype=int).reshape(len(X2), space.r)
    D = pairwise_diffs(X1, X2, continuous_scale(spec.kind, space))
    return gram_from_diffs(spec, D, Z1, Z2, spec.discrete_matrices(space))


def mixed_kernel(w_i: MixedPoint, w_j: MixedPoint, spec: KernelSpec, space: MixedSpace) -> float:
    """``k_c(x_i, x_j) * prod_s T_s[z_i_s, z_j_s]`` for two single points."""
    return float(gram(spec, space, w_i.x, w_i.z, w_j.x, w_j.z)[0, 0])


def gower_kernel(w_i: MixedPoint, w_j: MixedPoint, spec: KernelSpec, space: MixedSpace) -> float:
    """CS kernel written directly as a p-exponential of the Gower distance terms.

    Evaluated independently of the matrix form used by :func:`gram`; the two
    agree for ``KernelKind.CS``.
    """
    if spec.kind is not KernelKind.CS:
        raise ValueError("the Gower form only exists for the CS kernel")
    nd = space.r + space.q
    expo = 0.0
    for k in range(space.q):
        term = abs(w_i.x[k] - w_j.x[k]) / space.span[k] / nd
        expo += spec.theta[k] * term ** spec.p[k]
    for k in range(space.r):
        score = 0.0 if w_i.z[k] == w_j.z[k] else 1.0
        expo += spec.cs_theta[k] * (score / nd) ** spec.cs_p[k]
    return float(spec.sigma_sq * np.exp(-expo))


def hyperparameter_count(kind, space: MixedSpace) -> int:
    """Trained hyperparameters, excluding an analytically solved shared variance."""
    kind = KernelKind(kind)
    b = np.array(space.discrete_levels, dtype=int)
    if kind is KernelKind.HEHS:
        return int(2 * space.q + np.sum(b * (b + 1) // 2))
    if kind is KernelKind.HOHS:
        return int(2 * space.q + np.sum(b * (b - 1) // 2))
    return 2 * (space.q + space.r)
