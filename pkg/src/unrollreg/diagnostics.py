"""Image-quality metrics and instability indicators.

The stability indicators follow the per-step direction picture: each outer
step moves from the classical output toward the learned one, and the norm of
that weighted move, g(i), tends to blow up for unstable recoveries.  The
continuity probe reruns the identical scheme on a slightly perturbed sinogram
and reports the per-step difference of the weighted directions; large values
flag a discontinuous (unregularized) process.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateInputError, DivergenceError

PSNR_CAP_DB = 200.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def psnr(x, reference) -> float:
    """Peak signal-to-noise ratio in dB; peak is the reference's dynamic range.

    Identical images return the documented 200 dB cap instead of infinity.
    """
    x = np.asarray(x, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if x.shape != reference.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {reference.shape}")
    peak = float(reference.max() - reference.min())
    if peak == 0.0:
        raise DegenerateInputError("constant reference has no dynamic range")
    diff = x - reference
    scale = float(np.max(np.abs(diff)))
    if scale == 0.0:
        return PSNR_CAP_DB
    if scale < 1e100:
        mse_log10 = np.log10(float(np.mean(diff * diff)))
    else:
        # huge diverged iterates: factor the scale out so the square cannot overflow
        mse_log10 = 2.0 * np.log10(scale) + np.log10(float(np.mean((diff / scale) ** 2)))
    return min(20.0 * np.log10(peak) - 10.0 * mse_log10, PSNR_CAP_DB)


def _ssim_window() -> np.ndarray:
    half = _SSIM_WINDOW // 2
    coords = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (coords / _SSIM_SIGMA) ** 2)
    kernel = np.outer(kernel, kernel)
    return kernel / kernel.sum()


def ssim(x, reference, data_range: float | None = None) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5, K1/K2 = 0.01/0.03).

    The dynamic range defaults to the reference's max - min; pass ``data_range``
    to fix it explicitly (required for constant references).  Local statistics
    are evaluated on fully interior windows.
    """
    x = np.asarray(x, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if x.shape != reference.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {reference.shape}")
    if x.ndim != 2 or min(x.shape) < _SSIM_WINDOW:
        raise ValueError(f"ssim needs a 2-D image with min side >= {_SSIM_WINDOW}")
    span = float(reference.max() - reference.min()) if data_range is None else float(data_range)
    if span <= 0.0:
        raise DegenerateInputError("constant reference needs an explicit data_range")
    c1 = (_SSIM_K1 * span) ** 2
    c2 = (_SSIM_K2 * span) ** 2

    w = _ssim_window()
    wx = sliding_window_view(x, (_SSIM_WINDOW, _SSIM_WINDOW))
    wy = sliding_window_view(reference, (_SSIM_WINDOW, _SSIM_WINDOW))
    mu_x = np.einsum("ijkl,kl->ij", wx, w)
    mu_y = np.einsum("ijkl,kl->ij", wy, w)
    xx = np.einsum("ijkl,kl->ij", wx * wx, w)
    yy = np.einsum("ijkl,kl->ij", wy * wy, w)
    xy = np.einsum("ijkl,kl->ij", wx * wy, w)
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    ssim_map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())


def direction_norm(classical, learned, beta: float) -> float:
    """Norm of the weighted learned direction, beta * ||learned - classical||."""
    classical = np.asarray(classical, dtype=np.float64)
    learned = np.asarray(learned, dtype=np.float64)
    if classical.shape != learned.shape:
        raise ValueError(f"shape mismatch: {classical.shape} vs {learned.shape}")
    return float(beta * np.linalg.norm(learned - classical))


def norm_trajectories(trace, ground_truth=None):
    """Per-step iterate norms and, when ground truth is given, relative norms."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    norms = trace.column("iterate_norm")
    if ground_truth is None:
        return norms, None
    gt_norm = float(np.linalg.norm(np.asarray(ground_truth, dtype=np.float64)))
    return norms, norms / gt_norm


@dataclass(frozen=True)
class ProbeReport:
    """Paired-run continuity probe: per-step weighted-direction norms and their gap."""

    base_g: np.ndarray
    perturbed_g: np.ndarray
    paired_g: np.ndarray
    sigma: float
    seed: int


def continuity_probe(config, op, y, split, seed: int = 0, sigma: float | None = None) -> ProbeReport:
    """Rerun the scheme on ``y`` and on a Gaussian-perturbed copy, same seeds throughout.

    The perturbation standard deviation defaults to ``max(|y|) / 1000``.  The
    report holds per-step g(i) for both arms plus the paired difference norms.
    Divergence in either arm propagates with the arm named.
    """
    from .unroll import run_unrolled

    y = np.asarray(y, dtype=np.float64)
    if sigma is None:
        sigma = float(np.max(np.abs(y))) / 1000.0
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.normal(0.0, sigma, size=y.shape) if sigma > 0 else np.zeros(y.shape)

    def arm(data, label):
        try:
            _, _, trace = run_unrolled(config, op, data, split, record_directions=True)
        except DivergenceError as err:
            err.arm = label
            raise DivergenceError(
                step=err.step, message=f"{label} arm diverged: {err}", trace=err.trace
            ) from err
        return trace

    base = arm(y, "base")
    perturbed = arm(y + noise, "perturbed")
    base_dirs = base.directions
    pert_dirs = perturbed.directions
    with np.errstate(over="ignore", invalid="ignore"):
        paired = np.array(
            [float(np.linalg.norm(b - p)) for b, p in zip(base_dirs, pert_dirs)]
        )
    return ProbeReport(
        base_g=base.column("direction_norm"),
        perturbed_g=perturbed.column("direction_norm"),
        paired_g=paired,
        sigma=float(sigma),
        seed=seed,
    )
