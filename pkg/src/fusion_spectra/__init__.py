"""Kernel sensor-fusion spectra under high-dimensional noise.

Simulates the NCCA and alternating-diffusion matrices of two noisy aligned
point clouds and predicts their eigenvalue spectra independently through
shifted Marchenko-Pastur laws and their free multiplicative convolution.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    FusionSpectraError,
    InputError,
    NumericalError,
    SolverError,
)
from .model import (
    ModelConfig,
    PointCloudPair,
    dump_matrices,
    dump_pair,
    generate,
    load_pair,
    snr_sigma,
    splitmix64,
    trial_seed,
)
from .kernels import (
    KernelStack,
    SpectrumResult,
    affinity,
    fuse,
    operator_norm,
    pairwise_sq_dists,
    spectrum,
    transition,
)
from .bandwidth import (
    BandwidthPolicy,
    bandwidths_for,
    classic_bandwidth,
    percentile_bandwidth,
)
from .measures import Measure
from .freeconv import (
    ConvolutionResult,
    ModelScalars,
    free_multiplicative_convolution,
    haar_orthogonal,
    mc_free_conv,
    noise_measures,
    scalars,
)
from .reference import (
    ReferenceStack,
    ShMatrices,
    build_reference,
    build_sh,
    error_exponent,
    frak_depth,
    numerical_rank,
    surrogate_error,
)
from .harness import (
    RegimeReport,
    RegimeThresholds,
    ad_variant,
    classify,
    fit_rate,
    run_experiment,
)

__all__ = [
    "__version__",
    "BandwidthPolicy",
    "ConfigurationError",
    "ConvolutionResult",
    "FusionSpectraError",
    "InputError",
    "KernelStack",
    "Measure",
    "ModelConfig",
    "ModelScalars",
    "NumericalError",
    "PointCloudPair",
    "ReferenceStack",
    "RegimeReport",
    "RegimeThresholds",
    "ShMatrices",
    "SolverError",
    "SpectrumResult",
    "ad_variant",
    "affinity",
    "bandwidths_for",
    "build_reference",
    "build_sh",
    "classic_bandwidth",
    "classify",
    "dump_matrices",
    "dump_pair",
    "error_exponent",
    "fit_rate",
    "frak_depth",
    "free_multiplicative_convolution",
    "fuse",
    "generate",
    "haar_orthogonal",
    "load_pair",
    "mc_free_conv",
    "noise_measures",
    "numerical_rank",
    "operator_norm",
    "pairwise_sq_dists",
    "percentile_bandwidth",
    "run_experiment",
    "scalars",
    "snr_sigma",
    "spectrum",
    "splitmix64",
    "surrogate_error",
    "transition",
    "trial_seed",
]
