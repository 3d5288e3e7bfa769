"""Acquisition functions and their mixed-variable maximization.

Minimization convention throughout: expected improvement is computed
against the incumbent (best observed value across all embedding indices),
and UCB is the negated lower-confidence bound. The discrete index is
handled by exhaustive enumeration: the continuous inner problem is solved
per index by random seeding plus derivative-free pattern search, and the
best (x, z) wins with deterministic tie-breaking (smallest z, then
lexicographically smallest x).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.special import erf

from .embeddings import SearchBox
from .kernels import AugmentedPoint
from .surrogate import GpPosterior

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class AcquisitionFunction(enum.Enum):
    EXPECTED_IMPROVEMENT = "expected_improvement"
    UCB = "ucb"


@dataclass(frozen=True)
class AcquisitionConfig:
    function: AcquisitionFunction = AcquisitionFunction.EXPECTED_IMPROVEMENT
    ucb_beta: float = 4.0
    restarts: int = 10
    local_steps: int = 40
    candidate_pool: int | None = None  # None -> 512 * d

    def __post_init__(self) -> None:
        if self.ucb_beta <= 0:
            raise ValueError("ucb_beta must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.candidate_pool is not None and self.candidate_pool < self.restarts:
            raise ValueError("candidate_pool must be >= restarts")

    def pool_size(self, d: int) -> int:
        return self.candidate_pool if self.candidate_pool is not None else 512 * d


def _norm_cdf(u: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(u / math.sqrt(2.0)))


def expected_improvement(mean, variance, incumbent_best) -> float | np.ndarray:
    """Closed-form EI for minimization; zero-variance inputs degenerate to
    max(incumbent_best - mean, 0)."""
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    improvement = incumbent_best - mean
    sigma = np.sqrt(variance)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(sigma > 0, improvement / np.where(sigma > 0, sigma, 1.0), 0.0)
        ei = improvement * _norm_cdf(u) + sigma * _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    ei = np.where(sigma > 0, ei, np.maximum(improvement, 0.0))
    out = np.maximum(ei, 0.0)
    return float(out) if out.ndim == 0 else out


def ucb(mean, variance, beta: float) -> float | np.ndarray:
    """Negated lower-confidence bound: -(mean - sqrt(beta) * sigma)."""
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    out = -mean + math.sqrt(beta) * np.sqrt(variance)
    return float(out) if out.ndim == 0 else out


def _scores(
    p: GpPosterior, cfg: AcquisitionConfig, x: np.ndarray, z: int, incumbent: float
) -> np.ndarray:
    mean, var = p.predict_batch(x, np.full(x.shape[0], z, dtype=int))
    if cfg.function is AcquisitionFunction.EXPECTED_IMPROVEMENT:
        return np.asarray(expected_improvement(mean, var, incumbent))
    return np.asarray(ucb(mean, var, cfg.ucb_beta))


def _lex_min_index(points: np.ndarray, candidates: np.ndarray) -> int:
    best = int(candidates[0])
    for i in candidates[1:]:
        if tuple(points[int(i)]) < tuple(points[best]):
            best = int(i)
    return best


def _refine_pattern_search(
    p: GpPosterior,
    cfg: AcquisitionConfig,
    pts: np.ndarray,
    vals: np.ndarray,
    z: int,
    half_width: float,
    incumbent: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate-wise pattern search with shrinking steps, batched over
    all restart points."""
    n_restarts, d = pts.shape
    steps = np.full(n_restarts, half_width / 4.0)
    eye = np.eye(d)
    offsets = np.concatenate([eye, -eye])  # (2d, d)
    for _ in range(cfg.local_steps):
        cands = pts[:, None, :] + steps[:, None, None] * offsets[None, :, :]
        np.clip(cands, -half_width, half_width, out=cands)
        cvals = _scores(p, cfg, cands.reshape(-1, d), z, incumbent)
        cvals = cvals.reshape(n_restarts, 2 * d)
        best_j = np.argmax(cvals, axis=1)
        best_v = cvals[np.arange(n_restarts), best_j]
        improved = best_v > vals
        pts[improved] = cands[improved, best_j[improved]]
        vals[improved] = best_v[improved]
        steps[~improved] *= 0.5
    return pts, vals


def maximize_over_augmented(
    p: GpPosterior,
    cfg: AcquisitionConfig,
    box: SearchBox,
    k: int,
    rng_seed: Any,
    z_subset: Iterable[int] | None = None,
) -> AugmentedPoint:
    """Maximize the acquisition over (x, z) by per-index continuous search.

    For each index: sample a uniform candidate pool, keep the top `restarts`
    by acquisition value, refine each by pattern search, then reduce across
    indices. Deterministic given the seed; per-index streams are independent,
    so a restriction to a subset of indices reproduces the same inner
    searches.
    """
    if k < 1:
        raise ValueError("need at least one embedding index")
    zs = tuple(z_subset) if z_subset is not None else tuple(range(1, k + 1))
    if not zs or any(z < 1 or z > k for z in zs):
        raise ValueError(f"z subset {zs} outside {{1..{k}}}")

    d = p.training.d
    w = box.low_dim_half_width
    pool = cfg.pool_size(d)
    if pool < cfg.restarts:
        raise ValueError("candidate pool smaller than restart count")
    incumbent = p.training.best_raw_value()
    base_seed: Sequence[int] = (
        [int(rng_seed)] if np.isscalar(rng_seed) else [int(s) for s in rng_seed]
    )

    best: tuple[float, int, np.ndarray] | None = None
    for z in zs:
        rng = np.random.default_rng(list(base_seed) + [int(z)])
        cands = rng.uniform(-w, w, size=(pool, d))
        scores = _scores(p, cfg, cands, z, incumbent)
        top = np.argsort(-scores, kind="stable")[: cfg.restarts]
        pts, vals = _refine_pattern_search(
            p, cfg, cands[top].copy(), scores[top].copy(), z, w, incumbent
        )
        ties = np.flatnonzero(vals == vals.max())
        pick = _lex_min_index(pts, ties)
        cand = (float(vals[pick]), z, pts[pick])
        if (
            best is None
            or cand[0] > best[0]
            or (cand[0] == best[0] and cand[1] < best[1])
            or (cand[0] == best[0] and cand[1] == best[1] and tuple(cand[2]) < tuple(best[2]))
        ):
            best = cand
    assert best is not None
    return AugmentedPoint(x=best[2], z=best[1])
