"""Random-embedding Bayesian optimization with cross and self-adaptive
multi-embedding variants sharing one product-kernel GP surrogate."""

from .acquisition import (
    AcquisitionConfig,
    AcquisitionFunction,
    expected_improvement,
    maximize_over_augmented,
    ucb,
)
from .benchmarks import (
    EmbeddedObjective,
    evaluate_embedded,
    hartmann6,
    make_benchmark,
    make_embedded,
    sphere,
    styblinski_tang,
    verify_optimum_recovery,
    verify_rank_preservation,
)
from .embeddings import (
    Embedding,
    EmbeddingKind,
    SearchBox,
    default_low_dim_box,
    orthogonalize,
    project_up,
    sample_embedding,
)
from .kernels import (
    AugmentedPoint,
    ContinuousKernelParams,
    IndexKernelParams,
    IndexKernelVariant,
    KernelFamily,
    gram,
    k_continuous,
    k_index,
    k_product,
)
from .optimizer import (
    BoState,
    CremboMode,
    Method,
    Observation,
    RunConfig,
    RunResult,
    run,
    run_crembo,
    run_rembo,
    run_sa_crembo,
)
from .surrogate import (
    GpPosterior,
    SurrogateConfig,
    TrainingSet,
    fit,
    log_marginal_likelihood,
    make_posterior,
    predict,
    predict_by_index,
)

__version__ = "0.1.0"
