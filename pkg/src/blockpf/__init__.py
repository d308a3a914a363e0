"""Block particle filtering with adaptive state-space partitioning."""

from .errors import BlockPFError
from .filters import (
    AdaptiveBlockPF,
    BlockPF,
    BootstrapPF,
    FilterOutput,
    adaptive_bpf_step,
    bootstrap_pf_step,
    bpf_step,
    kalman_step,
    make_partition,
    run_kalman,
    systematic_resample,
)
from .harness import (
    ExperimentConfig,
    FilterConfig,
    ModelConfig,
    build_model,
    known_partition,
    load_config,
    run_experiment,
)
from .metrics import ari, bias_variance, mse, mse_arrays
from .models import (
    LinearGaussianModel,
    Lorenz96Model,
    NoiseCovSpec,
    build_q,
    lorenz96_drift,
    rk4_step,
)
from .partitioning import (
    Partition,
    constrained_kmeans,
    correlation_from_cov,
    csc,
    laplacian_sym,
    sample_covariance,
    spectral_embed,
)
from .rng import derive_stream

__version__ = "0.1.0"

__all__ = [
    "AdaptiveBlockPF",
    "BlockPF",
    "BlockPFError",
    "BootstrapPF",
    "ExperimentConfig",
    "FilterConfig",
    "FilterOutput",
    "LinearGaussianModel",
    "Lorenz96Model",
    "ModelConfig",
    "NoiseCovSpec",
    "Partition",
    "adaptive_bpf_step",
    "ari",
    "bias_variance",
    "bootstrap_pf_step",
    "bpf_step",
    "build_model",
    "build_q",
    "constrained_kmeans",
    "correlation_from_cov",
    "csc",
    "derive_stream",
    "kalman_step",
    "known_partition",
    "laplacian_sym",
    "load_config",
    "lorenz96_drift",
    "make_partition",
    "mse",
    "mse_arrays",
    "rk4_step",
    "run_experiment",
    "run_kalman",
    "sample_covariance",
    "spectral_embed",
    "systematic_resample",
]
