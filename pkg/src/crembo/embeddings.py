"""Random linear embeddings between the low- and high-dimensional spaces.

An embedding is a D x d Gaussian matrix A mapping a bounded low-dimensional
search box into R^D via x = A y, with coordinate-wise clamping onto the
high-dimensional feasible box. The orthogonalized companion shares A's
column span but has orthonormal columns.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InvalidDimensions, OutOfSearchBox
from .numerics import qr_orthonormalize

_ORTHO_TOL = 1e-10


class EmbeddingKind(enum.Enum):
    RANDOM = "random"
    ORTHOGONALIZED = "orthogonalized"


@dataclass(frozen=True)
class Embedding:
    """A D x d embedding matrix with its provenance kind."""

    matrix: np.ndarray
    big_d: int
    d: int
    kind: EmbeddingKind

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", mat)
        if not (self.big_d >= self.d >= 1):
            raise InvalidDimensions(f"need big_d >= d >= 1, got D={self.big_d} d={self.d}")
        if mat.shape != (self.big_d, self.d):
            raise InvalidDimensions(
                f"matrix shape {mat.shape} does not match (D={self.big_d}, d={self.d})"
            )
        if not np.all(np.isfinite(mat)):
            raise ValueError("embedding matrix contains non-finite entries")
        if self.kind is EmbeddingKind.ORTHOGONALIZED:
            gram = mat.T @ mat
            if np.max(np.abs(gram - np.eye(self.d))) > _ORTHO_TOL:
                raise ValueError("orthogonalized embedding has non-orthonormal columns")


@dataclass(frozen=True)
class SearchBox:
    """Low-dimensional box [-w, w]^d paired with a 0-centered high-dim box."""

    low_dim_half_width: float
    high_dim_lo: np.ndarray
    high_dim_hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.high_dim_lo, dtype=float)
        hi = np.asarray(self.high_dim_hi, dtype=float)
        object.__setattr__(self, "high_dim_lo", lo)
        object.__setattr__(self, "high_dim_hi", hi)
        if self.low_dim_half_width <= 0:
            raise ValueError("low_dim_half_width must be > 0")
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("high-dim bounds must be equal-length vectors")
        if np.any(lo >= hi):
            raise ValueError("need lo < hi per coordinate")
        if np.max(np.abs(lo + hi)) > 1e-12:
            raise ValueError("high-dim box must be centered at 0")

    @classmethod
    def symmetric(cls, d: int, big_d: int, half_width: float | None = None,
                  high_dim_bound: float = 1.0) -> "SearchBox":
        """[-w, w]^d with [-b, b]^D, w defaulting to sqrt(d)."""
        w = default_low_dim_box(d) if half_width is None else half_width
        return cls(
            low_dim_half_width=w,
            high_dim_lo=np.full(big_d, -high_dim_bound),
            high_dim_hi=np.full(big_d, high_dim_bound),
        )


def default_low_dim_box(d: int) -> float:
    """Half-width sqrt(d) of the default low-dimensional search box."""
    if d < 1:
        raise InvalidDimensions("d must be >= 1")
    return math.sqrt(d)


def sample_embedding(rng_seed: Any, big_d: int, d: int) -> Embedding:
    """Draw a D x d matrix of i.i.d. standard Gaussian entries."""
    if not (big_d >= d >= 1):
        raise InvalidDimensions(f"need big_d >= d >= 1, got D={big_d} d={d}")
    rng = np.random.default_rng(rng_seed)
    a = rng.standard_normal((big_d, d))
    return Embedding(matrix=a, big_d=big_d, d=d, kind=EmbeddingKind.RANDOM)


def orthogonalize(e: Embedding) -> Embedding:
    """QR-orthonormalize a random embedding, preserving its column span."""
    if e.kind is not EmbeddingKind.RANDOM:
        raise ValueError("orthogonalize expects a Random embedding")
    q = qr_orthonormalize(e.matrix)
    return Embedding(matrix=q, big_d=e.big_d, d=e.d, kind=EmbeddingKind.ORTHOGONALIZED)


def project_up(e: Embedding, y: np.ndarray, box: SearchBox) -> np.ndarray:
    """Map a low-dim point to clamp(A y) inside the high-dimensional box."""
    y = np.asarray(y, dtype=float)
    if y.shape != (e.d,):
        raise OutOfSearchBox(f"point has shape {y.shape}, embedding expects ({e.d},)")
    w = box.low_dim_half_width
    if np.any(np.abs(y) > w):
        raise OutOfSearchBox(f"point leaves [-{w:g}, {w:g}]^{e.d}")
    x = e.matrix @ y
    return np.clip(x, box.high_dim_lo, box.high_dim_hi)


def embedding_to_json(e: Embedding) -> dict:
    """JSON document {big_d, d, kind, entries(row-major)}."""
    return {
        "big_d": e.big_d,
        "d": e.d,
        "kind": e.kind.value,
        "entries": [float(v) for v in e.matrix.ravel(order="C")],
    }


def embedding_from_json(doc: dict) -> Embedding:
    big_d, d = int(doc["big_d"]), int(doc["d"])
    entries = np.asarray(doc["entries"], dtype=float)
    if entries.size != big_d * d:
        raise InvalidDimensions(
            f"expected {big_d * d} entries, got {entries.size}"
        )
    return Embedding(
        matrix=entries.reshape(big_d, d),
        big_d=big_d,
        d=d,
        kind=EmbeddingKind(doc["kind"]),
    )
