"""Stabilized unrolled reconstruction for ill-posed linear inverse problems.

The package builds sparse parallel-beam projectors, classical regularization
(Landweber, Tikhonov), pluggable denoisers including a fixed-weight residual
CNN, an unrolled engine with per-step convex-combination stabilization whose
weights come from leave-out cross-validation, and instability diagnostics.
"""

from .classical import (
    additive_learned_combination,
    convex_combination,
    landweber,
    tikhonov_solve,
)
from .data import (
    LeaveOutSplit,
    NoiseModel,
    add_poisson_noise,
    make_leaveout_split,
    make_phantom,
    noise_level,
    read_pgm,
    read_raw,
    synthesize_clean,
    write_pgm,
    write_raw,
)
from .denoise import (
    ConvLayer,
    ConvWeights,
    DenoiserSpec,
    apply_denoiser,
    conv_network_forward,
    fixture_weights_path,
    gaussian_denoise,
    load_weights,
    save_weights,
)
from .diagnostics import (
    ProbeReport,
    continuity_probe,
    direction_norm,
    norm_trajectories,
    psnr,
    ssim,
)
from .errors import (
    CapacityError,
    ConfigError,
    ConvergenceFailure,
    DegenerateInputError,
    DivergenceError,
    WeightFormatError,
)
from .radon import (
    DenseMap,
    Geometry,
    SparseOperator,
    build_parallel_radon,
    dense_pseudo_inverse,
    load_operator,
    operator_norm_sq,
    save_operator,
)
from .unroll import (
    IterateTrace,
    MomentumState,
    StepRecord,
    UnrollConfig,
    momentum_update,
    post_process_reconstruct,
    run_unrolled,
    select_beta,
    unroll_step,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "ConvLayer",
    "ConvWeights",
    "ConvergenceFailure",
    "DegenerateInputError",
    "DenoiserSpec",
    "DenseMap",
    "DivergenceError",
    "Geometry",
    "IterateTrace",
    "LeaveOutSplit",
    "MomentumState",
    "NoiseModel",
    "ProbeReport",
    "SparseOperator",
    "StepRecord",
    "UnrollConfig",
    "WeightFormatError",
    "add_poisson_noise",
    "additive_learned_combination",
    "apply_denoiser",
    "build_parallel_radon",
    "continuity_probe",
    "conv_network_forward",
    "convex_combination",
    "dense_pseudo_inverse",
    "direction_norm",
    "fixture_weights_path",
    "gaussian_denoise",
    "landweber",
    "load_operator",
    "load_weights",
    "make_leaveout_split",
    "make_phantom",
    "momentum_update",
    "noise_level",
    "norm_trajectories",
    "operator_norm_sq",
    "post_process_reconstruct",
    "psnr",
    "read_pgm",
    "read_raw",
    "run_unrolled",
    "save_operator",
    "save_weights",
    "select_beta",
    "ssim",
    "synthesize_clean",
    "tikhonov_solve",
    "unroll_step",
    "write_pgm",
    "write_raw",
]
