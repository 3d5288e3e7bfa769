"""Dense linear algebra needed by the surrogate and the embeddings.

Thin, contract-enforcing wrappers around LAPACK (via numpy/scipy):
Cholesky with geometric jitter escalation, triangular solves, QR
orthonormalization with a fixed sign convention, and numerical rank via
pivoted QR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite, RankDeficient

# Jitter escalation: multiply by 10 per retry, stop at 1e-2 * mean(diag).
JITTER_GROWTH = 10.0
JITTER_CAP_FRACTION = 1e-2
_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L @ L.T == m + jitter_used * I."""

    lower: np.ndarray
    jitter_used: float

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def _require_finite(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def cholesky(
    m: np.ndarray, initial_jitter: float = 0.0, *, validate: bool = True
) -> CholeskyFactor:
    """Factor a symmetric matrix, escalating diagonal jitter until it works.

    The first attempt uses `initial_jitter`; on failure the jitter grows
    geometrically (x10 per retry, starting from a scale-relative floor if
    `initial_jitter` is zero) until the cap 1e-2 * mean(diag) is reached,
    at which point NotPositiveDefinite is raised. `validate=False` skips
    the finiteness/symmetry precondition checks for callers that construct
    the matrix symmetric themselves (hot inner loops).
    """
    if validate:
        m = _require_finite(m, "matrix")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if float(np.max(np.abs(m - m.T), initial=0.0)) > _SYMMETRY_TOL * scale:
            raise ValueError("matrix is not symmetric within tolerance")
    else:
        m = np.asarray(m, dtype=float)
    if initial_jitter < 0:
        raise ValueError("initial_jitter must be >= 0")

    n = m.shape[0]
    mean_diag = float(np.trace(m)) / n if n else 0.0
    cap = JITTER_CAP_FRACTION * abs(mean_diag)
    floor = 1e-12 * max(abs(mean_diag), 1.0)

    jitter = float(initial_jitter)
    eye = np.eye(n)
    while True:
        try:
            lower = np.linalg.cholesky(m + jitter * eye)
            return CholeskyFactor(lower=lower, jitter_used=jitter)
        except np.linalg.LinAlgError:
            nxt = floor if jitter == 0.0 else jitter * JITTER_GROWTH
            if nxt > cap or nxt == jitter:
                raise NotPositiveDefinite(
                    f"factorization failed with jitter up to {jitter:g} (cap {cap:g})"
                ) from None
            jitter = nxt


def solve_cholesky(f: CholeskyFactor, b: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = b by forward then back substitution."""
    b = _require_finite(b, "right-hand side")
    if b.shape[0] != f.n:
        raise DimensionMismatch(
            f"rhs has length {b.shape[0]}, factor is {f.n}x{f.n}"
        )
    y = scipy.linalg.solve_triangular(f.lower, b, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(
        f.lower, y, lower=True, trans="T", check_finite=False
    )


def qr_orthonormalize(m: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of m (tall matrix) via reduced QR.

    Sign convention: the diagonal of R is made nonnegative, so the output
    is a deterministic function of the input. Raises RankDeficient when a
    pivot magnitude falls below 1e-10 relative to the largest.
    """
    m = _require_finite(m, "matrix")
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise DimensionMismatch(f"expected rows >= cols, got shape {m.shape}")
    q, r = np.linalg.qr(m, mode="reduced")
    diag = np.diag(r)
    largest = float(np.max(np.abs(diag), initial=0.0))
    if largest == 0.0 or np.any(np.abs(diag) < 1e-10 * largest):
        raise RankDeficient("columns are not linearly independent within 1e-10")
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs


def numerical_rank(m: np.ndarray, tol: float) -> int:
    """Count pivoted-QR diagonal magnitudes above tol * largest."""
    m = _require_finite(m, "matrix")
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {m.shape}")
    if m.size == 0 or not np.any(m):
        return 0
    _, r, _ = scipy.linalg.qr(m, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(r))
    largest = float(np.max(diag, initial=0.0))
    if largest == 0.0:
        return 0
    return int(np.count_nonzero(diag > tol * largest))
