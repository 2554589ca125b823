"""Stationary covariance functions with unit signal variance.

Both families are isotropic: they depend on the inputs only through the
Euclidean distance ``r = ||x - x'||``.  Matérn kernels are restricted to the
half-integer smoothness values that admit closed polynomial-exponential forms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

SE = "se"
MATERN = "matern"
MATERN_NUS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    Parameters
    ----------
    family : {"se", "matern"}
        Squared exponential or Matérn.
    length_scale : float
        Isotropic length scale, in input-space units.
    nu : float, optional
        Matérn smoothness; one of 0.5, 1.5, 2.5.  Ignored for SE.
    """

    family: str
    length_scale: float
    nu: float | None = None

    def __post_init__(self):
        if self.family not in (SE, MATERN):
            raise InvalidInputError(f"unknown kernel family {self.family!r}")
        if not np.isfinite(self.length_scale) or self.length_scale <= 0:
            raise InvalidInputError("length_scale must be a positive finite number")
        if self.family == MATERN:
            if self.nu is None or float(self.nu) not in MATERN_NUS:
                raise InvalidInputError(f"Matérn nu must be one of {MATERN_NUS}, got {self.nu}")
            object.__setattr__(self, "nu", float(self.nu))
        else:
            object.__setattr__(self, "nu", None)
        object.__setattr__(self, "length_scale", float(self.length_scale))

    def with_length_scale(self, length_scale: float) -> "KernelSpec":
        return KernelSpec(self.family, length_scale, self.nu)

    def to_dict(self) -> dict:
        out = {"family": self.family, "length_scale": self.length_scale}
        if self.family == MATERN:
            out["nu"] = self.nu
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        extra = set(d) - {"family", "length_scale", "nu"}
        if extra:
            raise InvalidInputError(f"unknown kernel keys: {sorted(extra)}")
        return cls(d["family"], d["length_scale"], d.get("nu"))

    @property
    def label(self) -> str:
        if self.family == SE:
            return "se"
        return f"matern{int(self.nu * 10)}"


def squared_exponential(length_scale: float = 0.2) -> KernelSpec:
    return KernelSpec(SE, length_scale)


def matern(nu: float = 2.5, length_scale: float = 0.2) -> KernelSpec:
    return KernelSpec(MATERN, length_scale, nu)


def _as_points(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a point or a 2-d array of points")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite coordinates")
    return X


def profile(spec: KernelSpec, r) -> np.ndarray:
    """Kernel value as a function of distance ``r >= 0``."""
    s = np.asarray(r, dtype=float) / spec.length_scale
    if spec.family == SE:
        return np.exp(-0.5 * s * s)
    if spec.nu == 0.5:
        return np.exp(-s)
    if spec.nu == 1.5:
        a = np.sqrt(3.0) * s
        return (1.0 + a) * np.exp(-a)
    a = np.sqrt(5.0) * s
    return (1.0 + a + a * a / 3.0) * np.exp(-a)


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # expansion form; can round slightly negative, and self-distances are not
    # exactly zero, so gram() patches the diagonal.
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(d2, 0.0, out=d2)
    return d2


def cross(spec: KernelSpec, A, B) -> np.ndarray:
    """Cross-covariance matrix ``K[i, j] = k(A[i], B[j])``."""
    A = _as_points(A, "A")
    B = _as_points(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if A.shape[0] * B.shape[0] <= 4096:
        d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    else:
        d2 = _sq_dists(A, B)
    if spec.family == SE:
        return np.exp(-0.5 * d2 / spec.length_scale**2)
    return profile(spec, np.sqrt(d2))


def eval(spec: KernelSpec, x, x2) -> float:  # noqa: A001 - mirrors the public API name
    """k(x, x2) for two single points."""
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x.shape != x2.shape or x.size < 1:
        raise InvalidInputError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(x2))):
        raise InvalidInputError("non-finite coordinate")
    return float(profile(spec, np.sqrt(np.sum((x - x2) ** 2))))


def gram(spec: KernelSpec, X) -> np.ndarray:
    """Symmetric Gram matrix with an exact unit diagonal."""
    X = _as_points(X)
    if X.shape[0] == 0:
        raise InvalidInputError("X must contain at least one point")
    if X.shape[0] ** 2 <= 4096:
        d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    else:
        d2 = _sq_dists(X, X)
        np.fill_diagonal(d2, 0.0)
        d2 = 0.5 * (d2 + d2.T)
    if spec.family == SE:
        K = np.exp(-0.5 * d2 / spec.length_scale**2)
    else:
        K = profile(spec, np.sqrt(d2))
    np.fill_diagonal(K, 1.0)
    return K
