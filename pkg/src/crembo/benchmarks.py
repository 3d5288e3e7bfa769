"""Embedded synthetic objectives plus Monte-Carlo subspace diagnostics.

Each objective evaluates a low-dimensional base function on the projection
of the high-dimensional point onto a known effective subspace, so adding
any component orthogonal to that subspace never changes the value. The
module also provides the rank-preservation and optimum-recovery checks
for random Gaussian embeddings.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Any

import numpy as np

from .embeddings import Embedding
from .errors import InvalidDimensions, OutOfDomain, RankDeficient
from .numerics import numerical_rank, qr_orthonormalize

_DOMAIN_SLACK = 1e-9

# Per-coordinate stationary point of the Styblinski-Tang polynomial
# (root of 2v^3 - 16v + 2.5) and its value, frozen from root-finding.
STYBLINSKI_TANG_ARGMIN = -2.903534027771177
STYBLINSKI_TANG_MIN_PER_DIM = -39.16616570377141


def _check_domain(v: np.ndarray, lo: np.ndarray, hi: np.ndarray, name: str) -> None:
    if np.any(v < lo - _DOMAIN_SLACK) or np.any(v > hi + _DOMAIN_SLACK):
        raise OutOfDomain(f"point outside the native domain of {name}")


def styblinski_tang(v: np.ndarray) -> float:
    """0.5 * sum(v^4 - 16 v^2 + 5 v) on [-5, 5]^d."""
    v = np.asarray(v, dtype=float)
    _check_domain(v, np.full_like(v, -5.0), np.full_like(v, 5.0), "styblinski_tang")
    return float(0.5 * np.sum(v**4 - 16.0 * v**2 + 5.0 * v))


def sphere(v: np.ndarray) -> float:
    """sum(v^2) on [-5.12, 5.12]^d."""
    v = np.asarray(v, dtype=float)
    _check_domain(v, np.full_like(v, -5.12), np.full_like(v, 5.12), "sphere")
    return float(np.sum(v**2))


def _load_hartmann6() -> dict:
    with resources.files("crembo.data").joinpath("hartmann6.json").open() as fh:
        raw = json.load(fh)
    return {k: np.asarray(val, dtype=float) for k, val in raw.items()}


_HARTMANN6 = _load_hartmann6()
HARTMANN6_MIN = float(_HARTMANN6["minimum"])
HARTMANN6_ARGMIN = _HARTMANN6["minimizer"]


def hartmann6(v: np.ndarray) -> float:
    """Four-term negative-exponential sum on [0, 1]^6."""
    v = np.asarray(v, dtype=float)
    if v.shape != (6,):
        raise OutOfDomain(f"hartmann6 needs 6 coordinates, got shape {v.shape}")
    _check_domain(v, np.zeros(6), np.ones(6), "hartmann6")
    inner = np.sum(_HARTMANN6["A"] * (v[None, :] - _HARTMANN6["P"]) ** 2, axis=1)
    return float(-np.sum(_HARTMANN6["alpha"] * np.exp(-inner)))


@dataclass(frozen=True)
class BaseFunction:
    name: str
    fn: Any
    domain_lo: float
    domain_hi: float
    native_argmin: float | np.ndarray | None  # per-coordinate, None if unknown
    min_per_dim: float | None

    def minimum_value(self, d_e: int) -> float | None:
        if self.min_per_dim is not None:
            return self.min_per_dim * d_e
        if self.name == "hartmann6":
            return HARTMANN6_MIN
        return None


_BASES = {
    "styblinski_tang": BaseFunction(
        "styblinski_tang", styblinski_tang, -5.0, 5.0,
        STYBLINSKI_TANG_ARGMIN, STYBLINSKI_TANG_MIN_PER_DIM,
    ),
    "sphere": BaseFunction("sphere", sphere, -5.12, 5.12, 0.0, 0.0),
    "hartmann6": BaseFunction("hartmann6", hartmann6, 0.0, 1.0, HARTMANN6_ARGMIN, None),
}


@dataclass(frozen=True)
class EmbeddedObjective:
    """A base function evaluated on a d_e-dimensional slice of R^D.

    The high-dimensional box [-1, 1]^D is rescaled affinely onto the base
    function's native domain along each effective coordinate.
    """

    base: BaseFunction
    d_e: int
    big_d: int
    effective_basis: np.ndarray  # D x d_e, orthonormal columns
    benchmark_id: str = ""

    def __post_init__(self) -> None:
        phi = np.asarray(self.effective_basis, dtype=float)
        object.__setattr__(self, "effective_basis", phi)
        if phi.shape != (self.big_d, self.d_e):
            raise InvalidDimensions(
                f"basis shape {phi.shape} vs (D={self.big_d}, d_e={self.d_e})"
            )
        if np.max(np.abs(phi.T @ phi - np.eye(self.d_e))) > 1e-12:
            raise ValueError("effective basis must be orthonormal within 1e-12")

    def rescale(self, u: np.ndarray) -> np.ndarray:
        """Affine map of box coordinates [-1, 1] onto the native domain."""
        lo, hi = self.base.domain_lo, self.base.domain_hi
        return lo + (np.asarray(u, dtype=float) + 1.0) * 0.5 * (hi - lo)

    def optimum_box_coeffs(self) -> np.ndarray:
        """Coefficients c with x*_top = Phi c, in box coordinates."""
        if self.base.native_argmin is None:
            raise ValueError(f"{self.base.name} has no known optimizer")
        argmin = np.broadcast_to(
            np.asarray(self.base.native_argmin, dtype=float), (self.d_e,)
        )
        lo, hi = self.base.domain_lo, self.base.domain_hi
        return (argmin - lo) * 2.0 / (hi - lo) - 1.0

    def optimum_in_box(self) -> np.ndarray:
        """The in-subspace optimizer x*_top as a high-dimensional point."""
        return self.effective_basis @ self.optimum_box_coeffs()

    @property
    def known_optimum_value(self) -> float | None:
        return self.base.minimum_value(self.d_e)

    def __call__(self, x: np.ndarray) -> float:
        return evaluate_embedded(self, x)


def evaluate_embedded(o: EmbeddedObjective, x: np.ndarray) -> float:
    """base(rescale(Phi^T x)); components orthogonal to the effective
    subspace never influence the value."""
    x = np.asarray(x, dtype=float)
    if x.shape != (o.big_d,):
        raise InvalidDimensions(f"point shape {x.shape}, expected ({o.big_d},)")
    u = o.effective_basis.T @ x
    return o.base.fn(o.rescale(u))


def _axis_aligned_basis(big_d: int, d_e: int, rng: np.random.Generator) -> np.ndarray:
    idx = np.sort(rng.choice(big_d, size=d_e, replace=False))
    phi = np.zeros((big_d, d_e))
    phi[idx, np.arange(d_e)] = 1.0
    return phi


def make_embedded(
    base_name: str,
    d_e: int,
    big_d: int,
    basis_seed: Any = 0,
    rotated: bool = False,
    benchmark_id: str = "",
) -> EmbeddedObjective:
    """Build an embedded objective with a seeded effective subspace.

    The default subspace is axis-aligned (a random coordinate subset), which
    keeps the in-subspace optimizer analytically known; `rotated` draws a
    dense random orthonormal basis instead, for stress testing.
    """
    if base_name not in _BASES:
        raise KeyError(f"unknown base function {base_name!r}")
    if base_name == "hartmann6" and d_e != 6:
        raise InvalidDimensions("hartmann6 is fixed at d_e=6")
    if not 1 <= d_e <= big_d:
        raise InvalidDimensions(f"need 1 <= d_e <= D, got d_e={d_e} D={big_d}")
    rng = np.random.default_rng(basis_seed)
    if rotated:
        phi = qr_orthonormalize(rng.standard_normal((big_d, d_e)))
    else:
        phi = _axis_aligned_basis(big_d, d_e, rng)
    return EmbeddedObjective(
        base=_BASES[base_name],
        d_e=d_e,
        big_d=big_d,
        effective_basis=phi,
        benchmark_id=benchmark_id,
    )


_ID_PATTERNS = (
    (re.compile(r"^styblinski_tang_d(\d+)_D(\d+)$"), "styblinski_tang"),
    (re.compile(r"^sphere_d(\d+)_D(\d+)$"), "sphere"),
    (re.compile(r"^hartmann6_D(\d+)$"), "hartmann6"),
)


def make_benchmark(benchmark_id: str, basis_seed: Any = 0) -> EmbeddedObjective:
    """Resolve a registry id like styblinski_tang_d8_D21 or hartmann6_D21."""
    for pattern, base_name in _ID_PATTERNS:
        m = pattern.match(benchmark_id)
        if not m:
            continue
        if base_name == "hartmann6":
            d_e, big_d = 6, int(m.group(1))
        else:
            d_e, big_d = int(m.group(1)), int(m.group(2))
        return make_embedded(
            base_name, d_e, big_d, basis_seed=basis_seed, benchmark_id=benchmark_id
        )
    raise KeyError(f"unknown benchmark id {benchmark_id!r}")


def verify_rank_preservation(
    big_d: int, d: int, d_e: int, trials: int, rng_seed: Any = 0
) -> float:
    """Fraction of trials in which Phi^T A has full rank d_e.

    Each trial draws an orthonormal basis Phi (QR of a Gaussian matrix) and
    an independent Gaussian embedding A, then counts pivoted-QR rank.
    """
    if not 1 <= d_e <= d <= big_d:
        raise InvalidDimensions(
            f"need 1 <= d_e <= d <= D, got d_e={d_e} d={d} D={big_d}"
        )
    rng = np.random.default_rng(rng_seed)
    hits = 0
    for _ in range(trials):
        phi = qr_orthonormalize(rng.standard_normal((big_d, d_e)))
        a = rng.standard_normal((big_d, d))
        if numerical_rank(phi.T @ a, 1e-10) == d_e:
            hits += 1
    return hits / trials


@dataclass(frozen=True)
class RecoveryReport:
    """Result of recovering the in-subspace optimizer through an embedding."""

    recovery_error: float
    within_tolerance: bool
    y_star: np.ndarray
    y_star_norm: float
    x_top_norm: float
    value_at_recovered: float
    value_at_optimum: float
    norm_bounds: dict[float, float]  # eps -> sqrt(d_e) * ||x*_top|| / eps
    norm_bound_holds: dict[float, bool]


def verify_optimum_recovery(
    o: EmbeddedObjective,
    e: Embedding,
    tol: float = 1e-6,
    eps_grid: tuple[float, ...] = (0.1, 0.5),
) -> RecoveryReport:
    """Solve (Phi^T A) y = c by least squares and compare objective values.

    Evaluation ignores box clamping: y* is pushed through the raw embedding.
    The norm bound sqrt(d_e) * ||x*_top|| / eps is reported per eps, never
    asserted.
    """
    if e.big_d != o.big_d:
        raise InvalidDimensions("embedding and objective disagree on D")
    c = o.optimum_box_coeffs()
    m = o.effective_basis.T @ e.matrix  # d_e x d
    if numerical_rank(m, 1e-10) < o.d_e:
        raise RankDeficient("projected embedding lost rank")
    y_star, *_ = np.linalg.lstsq(m, c, rcond=None)
    x_top = o.effective_basis @ c
    f_opt = o.base.fn(o.rescale(c))
    f_rec = o.base.fn(o.rescale(o.effective_basis.T @ (e.matrix @ y_star)))
    error = abs(f_rec - f_opt)
    x_top_norm = float(np.linalg.norm(x_top))
    y_norm = float(np.linalg.norm(y_star))
    bounds = {
        eps: float(np.sqrt(o.d_e) * x_top_norm / eps) for eps in eps_grid
    }
    return RecoveryReport(
        recovery_error=float(error),
        within_tolerance=bool(error < tol),
        y_star=y_star,
        y_star_norm=y_norm,
        x_top_norm=x_top_norm,
        value_at_recovered=float(f_rec),
        value_at_optimum=float(f_opt),
        norm_bounds=bounds,
        norm_bound_holds={eps: bool(y_norm <= b) for eps, b in bounds.items()},
    )
