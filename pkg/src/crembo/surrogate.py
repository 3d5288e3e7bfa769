"""Gaussian-process regression over augmented inputs (x, z).

One surrogate jointly models all embeddings: exact inference through a
Cholesky factor of the product-kernel Gram matrix, plus derivative-free
hyperparameter fitting (multi-start Nelder-Mead on the log marginal
likelihood in log-space). Targets are standardized internally; predictions
are reported on the original scale.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite
from .kernels import (
    AugmentedPoint,
    ContinuousKernelParams,
    IndexKernelParams,
    IndexKernelVariant,
    KernelFamily,
    _continuous_from_sqdist,
    cross_matrix,
    gram_matrix,
)
from .numerics import CholeskyFactor, cholesky

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TrainingSet:
    """Observed (x, z) -> value data with standardized targets."""

    points: tuple[AugmentedPoint, ...]
    targets: np.ndarray
    target_mean: float
    target_std: float

    def __post_init__(self) -> None:
        targets = np.asarray(self.targets, dtype=float)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) != targets.shape[0] or targets.shape[0] < 1:
            raise DimensionMismatch("need equally many points and targets, >= 1")
        if self.target_std <= 0:
            raise ValueError("target_std must be > 0")
        x = np.stack([p.x for p in self.points])
        z = np.array([p.z for p in self.points], dtype=int)
        object.__setattr__(self, "_x", x)
        object.__setattr__(self, "_z", z)

    @classmethod
    def from_raw(cls, points: Sequence[AugmentedPoint], values: Sequence[float]) -> "TrainingSet":
        """Standardize raw objective values to zero mean / unit variance."""
        values = np.asarray(values, dtype=float)
        mean = float(values.mean())
        std = float(values.std())
        if std == 0.0 or not np.isfinite(std):
            std = 1.0
        return cls(
            points=tuple(points),
            targets=(values - mean) / std,
            target_mean=mean,
            target_std=std,
        )

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def z(self) -> np.ndarray:
        return self._z

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    @property
    def d(self) -> int:
        return self._x.shape[1]

    def raw_values(self) -> np.ndarray:
        return self.target_mean + self.target_std * self.targets

    def best_raw_value(self) -> float:
        return float(np.min(self.raw_values()))


@dataclass(frozen=True)
class SurrogateConfig:
    """Kernel choices, initial hyperparameters, and fit-search settings."""

    family: KernelFamily = KernelFamily.MATERN52
    index_variant: IndexKernelVariant = IndexKernelVariant.SMOOTH_EXPONENTIAL
    num_indices: int = 1
    latent_dim: int = 2
    initial_signal_variance: float = 1.0
    initial_lengthscale: float | tuple[float, ...] = 1.0
    initial_noise_variance: float = 1e-6
    initial_lam: float = 1.0
    initial_latents: tuple[tuple[float, ...], ...] | None = None
    restarts: int = 8
    max_fun_evals: int | None = None
    noise_floor: float = 1e-8
    log10_bound: float = 3.0

    def initial_params(
        self, d: int
    ) -> tuple[ContinuousKernelParams, IndexKernelParams, float]:
        ls = np.broadcast_to(
            np.asarray(self.initial_lengthscale, dtype=float), (d,)
        ).copy()
        cp = ContinuousKernelParams(
            signal_variance=self.initial_signal_variance,
            lengthscales=ls,
            family=self.family,
        )
        ip = self._index_params(
            lam=self.initial_lam,
            latents=None
            if self.initial_latents is None
            else np.asarray(self.initial_latents, dtype=float),
        )
        noise = max(self.initial_noise_variance, self.noise_floor)
        return cp, ip, noise

    def _index_params(self, lam: float, latents: np.ndarray | None) -> IndexKernelParams:
        if self.index_variant is IndexKernelVariant.LEARNED_LATENT:
            if latents is None:
                latents = np.zeros((self.num_indices, self.latent_dim))
            return IndexKernelParams(
                variant=self.index_variant,
                latents=latents,
                num_indices=self.num_indices,
            )
        return IndexKernelParams(
            variant=self.index_variant, lam=lam, num_indices=self.num_indices
        )


@dataclass(frozen=True)
class GpPosterior:
    """Immutable fitted surrogate: Cholesky factor plus weight vector."""

    training: TrainingSet
    cp: ContinuousKernelParams
    ip: IndexKernelParams
    noise_variance: float
    chol: CholeskyFactor
    alpha: np.ndarray
    num_indices: int

    def predict(self, q: AugmentedPoint) -> tuple[float, float]:
        mean, var = self.predict_batch(q.x[None, :], np.array([q.z]))
        return float(mean[0]), float(var[0])

    def predict_batch(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean/variance (original scale) at a batch of points."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.training.d:
            raise DimensionMismatch(
                f"query shape {x.shape} vs training dimension {self.training.d}"
            )
        z = np.asarray(z, dtype=int)
        if z.size and (z.min() < 1 or z.max() > self.num_indices):
            raise IndexOutOfRange(
                f"query index outside {{1..{self.num_indices}}}"
            )
        kstar = cross_matrix(self.cp, self.ip, self.training.x, self.training.z, x, z)
        v = scipy.linalg.solve_triangular(
            self.chol.lower, kstar, lower=True, check_finite=False
        )
        mean_std = kstar.T @ self.alpha
        var_std = self.cp.signal_variance - np.einsum("ij,ij->j", v, v)
        np.clip(var_std, 0.0, None, out=var_std)
        t = self.training
        return t.target_mean + t.target_std * mean_std, (t.target_std**2) * var_std


def _lml_from_factor(factor: CholeskyFactor, y: np.ndarray) -> float:
    alpha = scipy.linalg.cho_solve((factor.lower, True), y, check_finite=False)
    return float(
        -0.5 * np.dot(y, alpha)
        - np.sum(np.log(np.diag(factor.lower)))
        - 0.5 * y.shape[0] * _LOG_2PI
    )


def log_marginal_likelihood(
    training: TrainingSet,
    cp: ContinuousKernelParams,
    ip: IndexKernelParams,
    noise_variance: float,
) -> float:
    """-1/2 y^T alpha - sum(log L_ii) - n/2 log(2 pi) on standardized targets."""
    gram = gram_matrix(cp, ip, training.x, training.z)
    factor = cholesky(gram + noise_variance * np.eye(training.n))
    return _lml_from_factor(factor, training.targets)


class _FitWorkspace:
    """Pairwise structures reused across the thousands of likelihood
    evaluations inside one hyperparameter search."""

    def __init__(self, training: TrainingSet, variant: IndexKernelVariant):
        x, z = training.x, training.z
        self.sqdiff = (x[:, None, :] - x[None, :, :]) ** 2
        self.y = training.targets
        self.eye = np.eye(training.n)
        self.variant = variant
        self.kz_fixed: np.ndarray | None = None
        self.zd2: np.ndarray | None = None
        self.z0: np.ndarray | None = None
        if variant is IndexKernelVariant.DELTA:
            self.kz_fixed = (z[:, None] == z[None, :]).astype(float)
        elif variant is IndexKernelVariant.SMOOTH_EXPONENTIAL:
            self.zd2 = ((z[:, None] - z[None, :]) ** 2).astype(float)
        else:
            self.z0 = z - 1

    def _index_part(self, ip: IndexKernelParams) -> np.ndarray:
        if self.kz_fixed is not None:
            return self.kz_fixed
        if self.zd2 is not None:
            return np.exp(-(ip.lam**2) * self.zd2)
        lat = ip.latents
        g = lat @ lat.T
        sq = np.diag(g)[:, None] + np.diag(g)[None, :] - 2.0 * g
        latker = np.exp(-0.5 * np.maximum(sq, 0.0))
        return latker[self.z0][:, self.z0]

    def neg_lml(self, cp: ContinuousKernelParams, ip: IndexKernelParams,
                noise: float) -> float:
        r2 = np.tensordot(self.sqdiff, 1.0 / cp.lengthscales**2, axes=([2], [0]))
        gram = _continuous_from_sqdist(cp, r2) * self._index_part(ip)
        try:
            factor = cholesky(gram + noise * self.eye, validate=False)
        except NotPositiveDefinite:
            return float("inf")
        return -_lml_from_factor(factor, self.y)


def make_posterior(
    training: TrainingSet,
    cp: ContinuousKernelParams,
    ip: IndexKernelParams,
    noise_variance: float,
    num_indices: int | None = None,
) -> GpPosterior:
    """Condition the GP on the training set at fixed hyperparameters."""
    gram = gram_matrix(cp, ip, training.x, training.z)
    factor = cholesky(gram + noise_variance * np.eye(training.n))
    alpha = scipy.linalg.cho_solve(
        (factor.lower, True), training.targets, check_finite=False
    )
    if num_indices is None:
        num_indices = ip.num_indices or int(training.z.max())
    return GpPosterior(
        training=training,
        cp=cp,
        ip=ip,
        noise_variance=noise_variance,
        chol=factor,
        alpha=alpha,
        num_indices=num_indices,
    )


def predict(p: GpPosterior, q: AugmentedPoint) -> tuple[float, float]:
    """Predictive (mean, variance) at one augmented point."""
    return p.predict(q)


def predict_by_index(p: GpPosterior, x: np.ndarray) -> list[tuple[int, float, float]]:
    """Predict at (x, z) for every embedding index z."""
    x = np.asarray(x, dtype=float)
    zs = np.arange(1, p.num_indices + 1)
    means, variances = p.predict_batch(np.tile(x, (p.num_indices, 1)), zs)
    return [(int(z), float(m), float(v)) for z, m, v in zip(zs, means, variances)]


class _ParamPacker:
    """Maps hyperparameters to/from the log-space vector Nelder-Mead sees."""

    def __init__(self, config: SurrogateConfig, d: int, training: TrainingSet):
        self.config = config
        self.d = d
        spread = float(np.max(training.x, initial=0.0) - np.min(training.x, initial=0.0))
        self.ls_scale = max(spread, 1.0)
        self.n_latent = (
            config.num_indices * config.latent_dim
            if config.index_variant is IndexKernelVariant.LEARNED_LATENT
            else 0
        )
        self.has_lam = config.index_variant is IndexKernelVariant.SMOOTH_EXPONENTIAL
        self.n_params = 2 + d + (1 if self.has_lam else 0) + self.n_latent

    def pack(
        self, cp: ContinuousKernelParams, ip: IndexKernelParams, noise: float
    ) -> np.ndarray:
        head = [math.log(cp.signal_variance)]
        head += list(np.log(cp.lengthscales))
        head += [math.log(max(noise, self.config.noise_floor))]
        if self.has_lam:
            head += [math.log(max(ip.lam, 1e-12))]
        if self.n_latent:
            head += list(ip.latents.ravel())
        return np.array(head, dtype=float)

    def unpack(
        self, vec: np.ndarray
    ) -> tuple[ContinuousKernelParams, IndexKernelParams, float]:
        cfg = self.config
        signal = math.exp(vec[0])
        ls = np.exp(vec[1 : 1 + self.d])
        noise = max(math.exp(vec[1 + self.d]), cfg.noise_floor)
        pos = 2 + self.d
        lam = cfg.initial_lam
        latents = None
        if self.has_lam:
            lam = math.exp(vec[pos])
            pos += 1
        if self.n_latent:
            latents = vec[pos : pos + self.n_latent].reshape(
                cfg.num_indices, cfg.latent_dim
            )
        cp = ContinuousKernelParams(
            signal_variance=signal, lengthscales=ls, family=cfg.family
        )
        return cp, cfg._index_params(lam=lam, latents=latents), noise

    def bounds(self) -> list[tuple[float, float]]:
        b = self.config.log10_bound * math.log(10.0)
        out = [(-b, b)]
        ls_mid = math.log(self.ls_scale)
        out += [(ls_mid - b, ls_mid + b)] * self.d
        out += [(math.log(self.config.noise_floor), math.log(10.0))]
        if self.has_lam:
            out += [(-b, b)]
        out += [(-10.0, 10.0)] * self.n_latent
        return out

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        vec = [rng.uniform(math.log(0.1), math.log(10.0))]
        ls0 = np.log(
            np.broadcast_to(
                np.asarray(self.config.initial_lengthscale, dtype=float), (self.d,)
            )
        )
        vec += list(ls0 + rng.uniform(math.log(0.1), math.log(10.0), size=self.d))
        vec += [rng.uniform(math.log(1e-7), math.log(1e-1))]
        if self.has_lam:
            vec += [rng.uniform(math.log(0.1), math.log(10.0))]
        if self.n_latent:
            vec += list(rng.standard_normal(self.n_latent))
        return np.array(vec, dtype=float)


def fit(training: TrainingSet, config: SurrogateConfig, rng_seed: Any) -> GpPosterior:
    """Maximize the log marginal likelihood by multi-start Nelder-Mead.

    The first start is the configured initial point (which callers may warm
    from a previous fit); the remaining `restarts - 1` are random log-space
    draws. Deterministic given the seed. With fewer than two training points
    the initial hyperparameters are used as-is.
    """
    cp0, ip0, noise0 = config.initial_params(training.d)
    if training.n < 2:
        return make_posterior(training, cp0, ip0, noise0, config.num_indices)

    packer = _ParamPacker(config, training.d, training)
    workspace = _FitWorkspace(training, config.index_variant)

    def objective(vec: np.ndarray) -> float:
        cp, ip, noise = packer.unpack(vec)
        return workspace.neg_lml(cp, ip, noise)

    rng = np.random.default_rng(rng_seed)
    starts = [packer.pack(cp0, ip0, noise0)]
    starts += [packer.random_start(rng) for _ in range(max(config.restarts - 1, 0))]

    maxfev = config.max_fun_evals
    if maxfev is None:
        maxfev = 60 + 12 * packer.n_params
    bounds = packer.bounds()

    best_vec, best_val = None, float("inf")
    for start in starts:
        res = scipy.optimize.minimize(
            objective,
            np.clip(start, [lo for lo, _ in bounds], [hi for _, hi in bounds]),
            method="Nelder-Mead",
            bounds=bounds,
            options={"maxfev": maxfev, "xatol": 0.05, "fatol": 1e-3},
        )
        if res.fun < best_val:
            best_vec, best_val = res.x, float(res.fun)

    if best_vec is None or not np.isfinite(best_val):
        cp, ip, noise = cp0, ip0, noise0
    else:
        cp, ip, noise = packer.unpack(best_vec)
    return make_posterior(training, cp, ip, noise, config.num_indices)


def params_to_dict(
    cp: ContinuousKernelParams, ip: IndexKernelParams, noise_variance: float
) -> dict:
    """JSON-safe snapshot of fitted hyperparameters."""
    doc = {
        "family": cp.family.value,
        "signal_variance": float(cp.signal_variance),
        "lengthscales": [float(v) for v in cp.lengthscales],
        "noise_variance": float(noise_variance),
        "index_variant": ip.variant.value,
        "lam": float(ip.lam),
        "num_indices": ip.num_indices,
    }
    if ip.latents is not None:
        doc["latents"] = [[float(v) for v in row] for row in ip.latents]
    return doc


def params_from_dict(doc: dict) -> tuple[ContinuousKernelParams, IndexKernelParams, float]:
    cp = ContinuousKernelParams(
        signal_variance=doc["signal_variance"],
        lengthscales=np.asarray(doc["lengthscales"], dtype=float),
        family=KernelFamily(doc["family"]),
    )
    latents = doc.get("latents")
    ip = IndexKernelParams(
        variant=IndexKernelVariant(doc["index_variant"]),
        lam=doc.get("lam", 1.0),
        latents=None if latents is None else np.asarray(latents, dtype=float),
        num_indices=doc.get("num_indices"),
    )
    return cp, ip, float(doc["noise_variance"])


def warmed_config(
    config: SurrogateConfig,
    cp: ContinuousKernelParams,
    ip: IndexKernelParams,
    noise_variance: float,
) -> SurrogateConfig:
    """Config whose initial point is a previously fitted hyperparameter set."""
    latents = None
    if ip.latents is not None:
        latents = tuple(tuple(float(v) for v in row) for row in ip.latents)
    return dataclasses.replace(
        config,
        initial_signal_variance=float(cp.signal_variance),
        initial_lengthscale=tuple(float(v) for v in cp.lengthscales),
        initial_noise_variance=float(noise_variance),
        initial_lam=float(ip.lam),
        initial_latents=latents,
    )
