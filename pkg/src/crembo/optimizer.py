"""BO drivers: single random embedding, paired random+orthogonal embeddings,
and the self-adaptive multi-embedding variant.

All three share one ask/tell state machine. Every per-iteration random
stream is derived from (run seed, purpose tag, evaluation index), so a
serialized state resumes bit-identically and the batch drivers are plain
lock-step loops over ask/tell.
"""

from __future__ import annotations

import dataclasses
import enum
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .acquisition import AcquisitionConfig, AcquisitionFunction, maximize_over_augmented
from .embeddings import (
    Embedding,
    SearchBox,
    default_low_dim_box,
    embedding_from_json,
    embedding_to_json,
    orthogonalize,
    project_up,
    sample_embedding,
)
from .errors import StaleState
from .kernels import AugmentedPoint, IndexKernelVariant, KernelFamily
from .surrogate import (
    SurrogateConfig,
    TrainingSet,
    fit,
    make_posterior,
    params_from_dict,
    params_to_dict,
    warmed_config,
)

# Stream tags for derived seeds: (seed, tag, index).
_EMBED_TAG = 101
_INIT_TAG = 202
_FIT_TAG = 303
_ACQ_TAG = 404

# Hyperparameters are re-optimized every evaluation up to this data size,
# then every fifth evaluation.
_REFIT_DENSE_UNTIL = 50
_REFIT_STRIDE = 5


class Method(enum.Enum):
    REMBO = "rembo"
    CREMBO = "crembo"
    SA_CREMBO = "sa_crembo"


class CremboMode(enum.Enum):
    PAIRED = "paired"
    ALTERNATE = "alternate"


@dataclass(frozen=True)
class Observation:
    """One objective evaluation: the low-dim point, its embedding index,
    the clamped high-dim point actually evaluated, and the value."""

    y_low: np.ndarray
    z: int
    x_high: np.ndarray
    value: float
    iteration: int


@dataclass(frozen=True)
class RunConfig:
    method: Method
    big_d: int
    d: int
    budget: int
    n_init: int
    seed: int
    k_embeddings: int = 1
    benchmark: str = ""
    low_dim_half_width: float | None = None
    high_dim_bound: float = 1.0
    crembo_mode: CremboMode = CremboMode.PAIRED
    cross_pairs: bool = False
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)

    def __post_init__(self) -> None:
        if self.method is Method.REMBO:
            object.__setattr__(self, "k_embeddings", 1)
        elif self.method is Method.CREMBO:
            object.__setattr__(self, "k_embeddings", 2)
        if not self.budget > self.n_init >= 2:
            raise ValueError("need budget > n_init >= 2")
        if not 1 <= self.d <= self.big_d:
            raise ValueError("need 1 <= d <= big_d")
        if self.k_embeddings < 1:
            raise ValueError("need k_embeddings >= 1")

    @property
    def half_width(self) -> float:
        if self.low_dim_half_width is not None:
            return self.low_dim_half_width
        return default_low_dim_box(self.d)

    @property
    def num_indices(self) -> int:
        """Effective number of embedding indices the surrogate models."""
        if self.method is Method.SA_CREMBO and self.cross_pairs:
            return 2 * self.k_embeddings
        return self.k_embeddings


@dataclass(frozen=True)
class RunResult:
    history: tuple[Observation, ...]
    best_value_trace: np.ndarray
    best_point: Observation
    wall_time: float
    config: RunConfig


def _build_embeddings(cfg: RunConfig) -> list[Embedding]:
    if cfg.method is Method.CREMBO:
        a1 = sample_embedding([cfg.seed, _EMBED_TAG, 1], cfg.big_d, cfg.d)
        return [a1, orthogonalize(a1)]
    base = [
        sample_embedding([cfg.seed, _EMBED_TAG, i], cfg.big_d, cfg.d)
        for i in range(1, cfg.k_embeddings + 1)
    ]
    if cfg.method is Method.SA_CREMBO and cfg.cross_pairs:
        base += [orthogonalize(e) for e in base]
    return base


def _latin_hypercube(rng: np.random.Generator, n: int, d: int, w: float) -> np.ndarray:
    strata = np.stack([rng.permutation(n) for _ in range(d)], axis=1).astype(float)
    u = (strata + rng.uniform(size=(n, d))) / n
    return (2.0 * u - 1.0) * w


class BoState:
    """Ask/tell optimizer state; serializable between calls.

    ask() is a pure function of the current observations (it may cache the
    fitted hyperparameters it computes), tell() appends an observation.
    Running ask/tell in lock-step reproduces the batch drivers exactly.
    """

    def __init__(self, config: RunConfig, embeddings: list[Embedding] | None = None):
        self.config = config
        self.embeddings = embeddings if embeddings is not None else _build_embeddings(config)
        if len(self.embeddings) != config.num_indices:
            raise ValueError("embedding count disagrees with config")
        self.box = SearchBox.symmetric(
            config.d,
            config.big_d,
            half_width=config.half_width,
            high_dim_bound=config.high_dim_bound,
        )
        self.observations: list[Observation] = []
        self._cached_params: dict | None = None
        init_rng = np.random.default_rng([config.seed, _INIT_TAG])
        self._init_points = _latin_hypercube(
            init_rng, config.n_init, config.d, config.half_width
        )

    @property
    def n_evals(self) -> int:
        return len(self.observations)

    def embedding_for(self, z: int) -> Embedding:
        if not 1 <= z <= self.config.num_indices:
            raise StaleState(f"index {z} outside {{1..{self.config.num_indices}}}")
        return self.embeddings[z - 1]

    def high_point(self, y: np.ndarray, z: int) -> np.ndarray:
        return project_up(self.embedding_for(z), np.asarray(y, dtype=float), self.box)

    def _refit_due(self, n: int, z_step: int | None) -> bool:
        if self._cached_params is None:
            return True
        due = n <= _REFIT_DENSE_UNTIL or n % _REFIT_STRIDE == 0
        if (
            self.config.method is Method.CREMBO
            and self.config.crembo_mode is CremboMode.PAIRED
        ):
            # One hyperparameter refit per paired outer iteration.
            due = due and z_step == 1
        return due

    def _crembo_step_index(self, n: int) -> int:
        """Alternating index 1, 2, 1, 2 ... over the BO-phase evaluations."""
        return 1 + (n - self.config.n_init) % 2

    def ask(self) -> tuple[np.ndarray, int]:
        cfg = self.config
        n = self.n_evals
        if n < cfg.n_init:
            z = 1 + n % cfg.num_indices
            return self._init_points[n].copy(), z

        points = [AugmentedPoint(o.y_low, o.z) for o in self.observations]
        values = [o.value for o in self.observations]
        training = TrainingSet.from_raw(points, values)

        z_step = (
            self._crembo_step_index(n) if cfg.method is Method.CREMBO else None
        )
        surr_cfg = dataclasses.replace(cfg.surrogate, num_indices=cfg.num_indices)
        if self._refit_due(n, z_step):
            if self._cached_params is not None:
                surr_cfg = warmed_config(
                    surr_cfg, *params_from_dict(self._cached_params)
                )
            posterior = fit(training, surr_cfg, [cfg.seed, _FIT_TAG, n])
            self._cached_params = params_to_dict(
                posterior.cp, posterior.ip, posterior.noise_variance
            )
        else:
            cp, ip, noise = params_from_dict(self._cached_params)
            posterior = make_posterior(training, cp, ip, noise, cfg.num_indices)

        z_subset = (z_step,) if z_step is not None else None
        point = maximize_over_augmented(
            posterior,
            cfg.acquisition,
            self.box,
            cfg.num_indices,
            [cfg.seed, _ACQ_TAG, n],
            z_subset=z_subset,
        )
        return point.x, point.z

    def tell(self, y: np.ndarray, z: int, value: float) -> None:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.config.d,) or not np.all(np.isfinite(y)):
            raise StaleState(f"low-dim point of shape {y.shape} is invalid")
        x_high = self.high_point(y, int(z))
        self.observations.append(
            Observation(
                y_low=y.copy(),
                z=int(z),
                x_high=x_high,
                value=float(value),
                iteration=self.n_evals,
            )
        )

    def result(self, wall_time: float = 0.0) -> RunResult:
        values = np.array([o.value for o in self.observations])
        trace = np.minimum.accumulate(values)
        best_idx = int(np.argmin(values))
        return RunResult(
            history=tuple(self.observations),
            best_value_trace=trace,
            best_point=self.observations[best_idx],
            wall_time=wall_time,
            config=self.config,
        )

    def to_json(self) -> dict:
        return {
            "config": config_to_dict(self.config),
            "embeddings": [embedding_to_json(e) for e in self.embeddings],
            "observations": [
                {
                    "y_low": [float(v) for v in o.y_low],
                    "z": o.z,
                    "x_high": [float(v) for v in o.x_high],
                    "value": o.value,
                    "iteration": o.iteration,
                }
                for o in self.observations
            ],
            "cached_params": self._cached_params,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BoState":
        config = config_from_dict(doc["config"])
        embeddings = [embedding_from_json(e) for e in doc["embeddings"]]
        state = cls(config, embeddings=embeddings)
        for o in doc["observations"]:
            state.observations.append(
                Observation(
                    y_low=np.asarray(o["y_low"], dtype=float),
                    z=int(o["z"]),
                    x_high=np.asarray(o["x_high"], dtype=float),
                    value=float(o["value"]),
                    iteration=int(o["iteration"]),
                )
            )
        state._cached_params = doc.get("cached_params")
        return state


Objective = Callable[[np.ndarray], float]


def run(cfg: RunConfig, objective: Objective) -> RunResult:
    """Drive a full run: exactly cfg.budget objective evaluations."""
    t0 = time.perf_counter()
    state = BoState(cfg)
    while state.n_evals < cfg.budget:
        y, z = state.ask()
        value = objective(state.high_point(y, z))
        state.tell(y, z, value)
    return state.result(wall_time=time.perf_counter() - t0)


def run_rembo(cfg: RunConfig, objective: Objective) -> RunResult:
    if cfg.method is not Method.REMBO:
        raise ValueError("config method must be rembo")
    return run(cfg, objective)


def run_crembo(cfg: RunConfig, objective: Objective) -> RunResult:
    if cfg.method is not Method.CREMBO:
        raise ValueError("config method must be crembo")
    return run(cfg, objective)


def run_sa_crembo(cfg: RunConfig, objective: Objective) -> RunResult:
    if cfg.method is not Method.SA_CREMBO:
        raise ValueError("config method must be sa_crembo")
    return run(cfg, objective)


def surrogate_config_to_dict(sc: SurrogateConfig) -> dict:
    doc = dataclasses.asdict(sc)
    doc["family"] = sc.family.value
    doc["index_variant"] = sc.index_variant.value
    return doc


def surrogate_config_from_dict(doc: dict) -> SurrogateConfig:
    doc = dict(doc)
    doc["family"] = KernelFamily(doc.get("family", "matern52"))
    doc["index_variant"] = IndexKernelVariant(
        doc.get("index_variant", "smooth_exponential")
    )
    if doc.get("initial_latents") is not None:
        doc["initial_latents"] = tuple(tuple(row) for row in doc["initial_latents"])
    if isinstance(doc.get("initial_lengthscale"), (list, tuple)):
        doc["initial_lengthscale"] = tuple(doc["initial_lengthscale"])
    return SurrogateConfig(**doc)


def acquisition_config_to_dict(ac: AcquisitionConfig) -> dict:
    doc = dataclasses.asdict(ac)
    doc["function"] = ac.function.value
    return doc


def acquisition_config_from_dict(doc: dict) -> AcquisitionConfig:
    doc = dict(doc)
    doc["function"] = AcquisitionFunction(doc.get("function", "expected_improvement"))
    return AcquisitionConfig(**doc)


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "method": cfg.method.value,
        "big_d": cfg.big_d,
        "d": cfg.d,
        "budget": cfg.budget,
        "n_init": cfg.n_init,
        "seed": cfg.seed,
        "k_embeddings": cfg.k_embeddings,
        "benchmark": cfg.benchmark,
        "low_dim_half_width": cfg.low_dim_half_width,
        "high_dim_bound": cfg.high_dim_bound,
        "crembo_mode": cfg.crembo_mode.value,
        "cross_pairs": cfg.cross_pairs,
        "surrogate": surrogate_config_to_dict(cfg.surrogate),
        "acquisition": acquisition_config_to_dict(cfg.acquisition),
    }


def config_from_dict(doc: dict) -> RunConfig:
    return RunConfig(
        method=Method(doc["method"]),
        big_d=int(doc["big_d"]),
        d=int(doc["d"]),
        budget=int(doc["budget"]),
        n_init=int(doc["n_init"]),
        seed=int(doc["seed"]),
        k_embeddings=int(doc.get("k_embeddings", 1)),
        benchmark=doc.get("benchmark", ""),
        low_dim_half_width=doc.get("low_dim_half_width"),
        high_dim_bound=float(doc.get("high_dim_bound", 1.0)),
        crembo_mode=CremboMode(doc.get("crembo_mode", "paired")),
        cross_pairs=bool(doc.get("cross_pairs", False)),
        surrogate=surrogate_config_from_dict(doc.get("surrogate", {})),
        acquisition=acquisition_config_from_dict(doc.get("acquisition", {})),
    )
