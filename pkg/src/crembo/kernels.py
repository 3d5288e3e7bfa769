"""Kernels over the augmented input (x, z).

The surrogate couples a continuous ARD kernel over the low-dimensional
point x with an index kernel over the discrete embedding identifier z,
composed as a product k((x,z),(x',z')) = k_x(x,x') * k_z(z,z').

Index kernel variants:
  * delta           -- 1 iff z == z' (no sharing across embeddings)
  * smooth_exp      -- exp(-lambda^2 (z - z')^2)
  * learned_latent  -- unit-variance SE kernel between latent vectors phi(z)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange

_SQRT5 = math.sqrt(5.0)


class KernelFamily(enum.Enum):
    MATERN52 = "matern52"
    SQUARED_EXPONENTIAL = "squared_exponential"


class IndexKernelVariant(enum.Enum):
    DELTA = "delta"
    SMOOTH_EXPONENTIAL = "smooth_exponential"
    LEARNED_LATENT = "learned_latent"


@dataclass(frozen=True)
class ContinuousKernelParams:
    """ARD kernel over R^d: signal variance plus one lengthscale per dim."""

    signal_variance: float
    lengthscales: np.ndarray
    family: KernelFamily = KernelFamily.MATERN52

    def __post_init__(self) -> None:
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if self.signal_variance <= 0 or np.any(ls <= 0):
            raise ValueError("kernel parameters must be strictly positive")

    @property
    def d(self) -> int:
        return self.lengthscales.shape[0]


@dataclass(frozen=True)
class IndexKernelParams:
    """Kernel over the embedding index z in {1..K}.

    `lam` is only read by the smooth-exponential variant, `latents` (a K x r
    array of latent vectors) only by the learned-latent variant. When K is
    known it bounds the admissible indices; otherwise only z >= 1 is checked.
    """

    variant: IndexKernelVariant = IndexKernelVariant.SMOOTH_EXPONENTIAL
    lam: float = 1.0
    latents: np.ndarray | None = None
    num_indices: int | None = None

    def __post_init__(self) -> None:
        if self.variant is IndexKernelVariant.SMOOTH_EXPONENTIAL:
            if not (np.isfinite(self.lam) and self.lam >= 0):
                raise ValueError("smooth-exponential kernel needs finite lam >= 0")
        if self.variant is IndexKernelVariant.LEARNED_LATENT:
            if self.latents is None:
                raise ValueError("learned-latent kernel needs latent vectors")
            lat = np.atleast_2d(np.asarray(self.latents, dtype=float))
            object.__setattr__(self, "latents", lat)
            if lat.shape[0] < 1:
                raise ValueError("need K >= 1 latent vectors")
            if self.num_indices is not None and self.num_indices != lat.shape[0]:
                raise ValueError("num_indices disagrees with latent count")
            object.__setattr__(self, "num_indices", lat.shape[0])

    @property
    def r(self) -> int | None:
        return None if self.latents is None else self.latents.shape[1]

    def check_index(self, z: int) -> int:
        z = int(z)
        if z < 1 or (self.num_indices is not None and z > self.num_indices):
            hi = self.num_indices if self.num_indices is not None else "inf"
            raise IndexOutOfRange(f"index {z} outside {{1..{hi}}}")
        return z


@dataclass(frozen=True)
class AugmentedPoint:
    """A low-dimensional point x together with its embedding index z."""

    x: np.ndarray
    z: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "z", int(self.z))
        if self.z < 1:
            raise IndexOutOfRange(f"index {self.z} must be >= 1")


def _scaled_sqdist(p: ContinuousKernelParams, x1: np.ndarray, x2: np.ndarray) -> float:
    if x1.shape != (p.d,) or x2.shape != (p.d,):
        raise DimensionMismatch(
            f"points of shape {x1.shape}/{x2.shape} vs {p.d} lengthscales"
        )
    delta = (x1 - x2) / p.lengthscales
    return float(np.dot(delta, delta))


def _continuous_from_sqdist(p: ContinuousKernelParams, r2):
    if p.family is KernelFamily.SQUARED_EXPONENTIAL:
        return p.signal_variance * np.exp(-0.5 * r2)
    r = np.sqrt(r2)
    return p.signal_variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-_SQRT5 * r)


def k_continuous(p: ContinuousKernelParams, x1: np.ndarray, x2: np.ndarray) -> float:
    """ARD Matern-5/2 or squared-exponential kernel value."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return float(_continuous_from_sqdist(p, _scaled_sqdist(p, x1, x2)))


def k_index(p: IndexKernelParams, z1: int, z2: int) -> float:
    """Index kernel value for a pair of embedding indices."""
    z1 = p.check_index(z1)
    z2 = p.check_index(z2)
    if p.variant is IndexKernelVariant.DELTA:
        return 1.0 if z1 == z2 else 0.0
    if p.variant is IndexKernelVariant.SMOOTH_EXPONENTIAL:
        return float(np.exp(-(p.lam**2) * (z1 - z2) ** 2))
    phi1 = p.latents[z1 - 1]
    phi2 = p.latents[z2 - 1]
    delta = phi1 - phi2
    return float(np.exp(-0.5 * np.dot(delta, delta)))


def k_product(
    cp: ContinuousKernelParams,
    ip: IndexKernelParams,
    a: AugmentedPoint,
    b: AugmentedPoint,
) -> float:
    """Product kernel k_x(a.x, b.x) * k_z(a.z, b.z)."""
    return k_continuous(cp, a.x, b.x) * k_index(ip, a.z, b.z)


def index_matrix(p: IndexKernelParams, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Index-kernel values for all pairs of two index vectors."""
    z1 = np.asarray(z1, dtype=int)
    z2 = np.asarray(z2, dtype=int)
    for zz in (z1, z2):
        if zz.size:
            lo, hi = int(zz.min()), int(zz.max())
            if lo < 1 or (p.num_indices is not None and hi > p.num_indices):
                raise IndexOutOfRange(f"indices span [{lo}, {hi}]")
    z1 = z1[:, None]
    z2 = z2[None, :]
    if p.variant is IndexKernelVariant.DELTA:
        return (z1 == z2).astype(float)
    if p.variant is IndexKernelVariant.SMOOTH_EXPONENTIAL:
        return np.exp(-(p.lam**2) * (z1 - z2) ** 2)
    phi1 = p.latents[z1.ravel() - 1]
    phi2 = p.latents[z2.ravel() - 1]
    diff = phi1[:, None, :] - phi2[None, :, :]
    return np.exp(-0.5 * np.einsum("ijk,ijk->ij", diff, diff))


def gram_matrix(
    cp: ContinuousKernelParams,
    ip: IndexKernelParams,
    x: np.ndarray,
    z: np.ndarray,
) -> np.ndarray:
    """Exactly-symmetric Gram matrix of the product kernel on (x, z) rows."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != cp.d:
        raise DimensionMismatch(f"points of shape {x.shape} vs d={cp.d}")
    scaled = x / cp.lengthscales
    diff = scaled[:, None, :] - scaled[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    return _continuous_from_sqdist(cp, r2) * index_matrix(ip, z, z)


def cross_matrix(
    cp: ContinuousKernelParams,
    ip: IndexKernelParams,
    x1: np.ndarray,
    z1: np.ndarray,
    x2: np.ndarray,
    z2: np.ndarray,
) -> np.ndarray:
    """Kernel values between two point sets (n x m); no symmetry guarantee."""
    s1 = np.asarray(x1, dtype=float) / cp.lengthscales
    s2 = np.asarray(x2, dtype=float) / cp.lengthscales
    r2 = (
        np.sum(s1**2, axis=1)[:, None]
        + np.sum(s2**2, axis=1)[None, :]
        - 2.0 * (s1 @ s2.T)
    )
    np.clip(r2, 0.0, None, out=r2)
    return _continuous_from_sqdist(cp, r2) * index_matrix(ip, z1, z2)


def gram(
    cp: ContinuousKernelParams,
    ip: IndexKernelParams,
    points: list[AugmentedPoint],
) -> np.ndarray:
    """Symmetric PSD matrix of pairwise product-kernel values."""
    if not points:
        raise ValueError("gram needs a nonempty point list")
    for pt in points:
        ip.check_index(pt.z)
    x = np.stack([pt.x for pt in points])
    z = np.array([pt.z for pt in points], dtype=int)
    return gram_matrix(cp, ip, x, z)
