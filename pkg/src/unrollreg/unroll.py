"""Unrolled reconstruction engine.

Each outer step runs a block of Landweber data-consistency iterations on the
fit rows, applies the configured denoiser (to the block output for the
``composition`` structure, to the layer input for ``addition``), and merges the
two via a convex combination whose weight is either fixed or picked per step by
minimizing the held-out data residual.  Optional FISTA-style momentum
extrapolates each layer's input; an optional nonnegativity projection clamps
each combined iterate at zero.

The momentum counter advances once per outer step.  The held-out residual is
evaluated on the held-out rows only, and the data-consistency gradient uses
their complement, so the selection criterion never sees rows it fitted.
Divergence means a non-finite iterate: large-but-finite iterates are recorded,
since breakdown studies need to observe the growth.

A single run is sequential by nature (each step consumes the previous one),
but runs are otherwise pure functions of their inputs, so distinct runs can
execute concurrently; every run owns its trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classical import convex_combination, landweber
from .denoise import DenoiserSpec, apply_denoiser
from .diagnostics import psnr, ssim
from .errors import DivergenceError

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class UnrollConfig:
    """Hyperparameters of one unrolled run."""

    n_steps: int  # outer steps N
    inner_steps: int  # Landweber steps per layer N0
    tau: float
    denoiser: DenoiserSpec
    structure: str = "composition"  # or "addition"
    beta_mode: float | str = "cv"  # "cv" or a fixed value in [0, 1]
    momentum: bool = False
    nonneg: bool = False
    leaveout_fraction: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.structure not in {"composition", "addition"}:
            raise ValueError(f"unknown structure {self.structure!r}")
        if isinstance(self.beta_mode, str):
            if self.beta_mode != "cv":
                raise ValueError("beta_mode must be 'cv' or a value in [0, 1]")
        elif not 0.0 <= float(self.beta_mode) <= 1.0:
            raise ValueError("fixed beta must lie in [0, 1]")
        if not 0.0 <= self.leaveout_fraction < 1.0:
            raise ValueError("leaveout_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class MomentumState:
    """FISTA counter pair and the previous layer input."""

    t_prev: float
    t_curr: float
    x_prev: np.ndarray

    @classmethod
    def initial(cls, x0) -> "MomentumState":
        t0 = 1.0
        return cls(
            t_prev=t0,
            t_curr=(1.0 + math.sqrt(1.0 + 4.0 * t0 * t0)) / 2.0,
            x_prev=np.asarray(x0, dtype=np.float64).copy(),
        )

    @property
    def gamma(self) -> float:
        return (self.t_prev - 1.0) / self.t_curr


def momentum_update(state: MomentumState, x_new) -> tuple[np.ndarray, MomentumState]:
    """Extrapolate ``x_new`` along its difference from the previous point.

    Returns the extrapolated point and the advanced state.  The very first call
    has gamma = 0, so it returns ``x_new`` unchanged.
    """
    x_new = np.asarray(x_new, dtype=np.float64)
    gamma = state.gamma
    out = x_new + gamma * (x_new - state.x_prev)
    t_next = (1.0 + math.sqrt(1.0 + 4.0 * state.t_curr * state.t_curr)) / 2.0
    return out, MomentumState(t_prev=state.t_curr, t_curr=t_next, x_prev=x_new.copy())


@dataclass
class StepRecord:
    step: int
    iterate_norm: float
    beta: float
    direction_norm: float
    leaveout_residual: float | None
    relative_norm: float | None = None
    psnr: float | None = None
    ssim: float | None = None
    # populated only when a run records directions; not part of CSV traces
    direction_vec: np.ndarray | None = None


@dataclass
class IterateTrace:
    """Per-outer-step diagnostics of one run."""

    records: list = field(default_factory=list)
    iterates: list | None = None
    directions: list | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array(
            [getattr(r, name) if getattr(r, name) is not None else np.nan for r in self.records]
        )

    @property
    def s0_index(self) -> int:
        """1-based step index minimizing the held-out residual (last step if unrecorded)."""
        residuals = [r.leaveout_residual for r in self.records]
        if not residuals or any(r is None for r in residuals):
            return len(self.records)
        return self.records[int(np.argmin(residuals))].step


def select_beta(op, x_classical, x_learned, y, split) -> float:
    """Pick beta in [0, 1] minimizing the held-out data residual.

    Scans a 33-point uniform grid, then refines around the best grid point with
    a golden-section search down to a 1e-4 bracket.  Exact ties break toward
    the smaller (more classical) beta.
    """
    if split is None or split.held_out.size == 0:
        raise ValueError("beta selection needs a nonempty held-out set")
    s = split.held_out
    y_s = np.asarray(y, dtype=np.float64).reshape(-1)[s]
    with np.errstate(over="ignore", invalid="ignore"):
        proj_c = op.apply(np.asarray(x_classical, dtype=np.float64).reshape(-1))[s]
        proj_l = op.apply(np.asarray(x_learned, dtype=np.float64).reshape(-1))[s]
    base = proj_c - y_s
    diff = proj_l - proj_c

    def objective(beta):
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.linalg.norm(base + beta * diff))

    grid = np.linspace(0.0, 1.0, 33)
    values = [objective(b) for b in grid]
    best = int(np.argmin(values))

    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    while hi - lo > 1e-4:
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        if objective(c) <= objective(d):
            hi = d
        else:
            lo = c

    candidates = sorted({grid[best], lo, (lo + hi) / 2.0, hi})
    _, beta = min((objective(b), b) for b in candidates)
    return float(beta)


def _as_image(x, op):
    if op.geometry is not None:
        return x.reshape(op.geometry.image_shape)
    return x


def unroll_step(
    prev,
    config: UnrollConfig,
    op,
    y,
    split,
    momentum_state: MomentumState | None = None,
    step: int = 1,
    ground_truth=None,
    keep_direction: bool = False,
):
    """One outer step.  Returns (next iterate, step record, advanced momentum state)."""
    x_in = np.asarray(prev, dtype=np.float64).reshape(-1)
    if config.momentum and momentum_state is not None:
        with np.errstate(over="ignore", invalid="ignore"):
            x_start, momentum_state = momentum_update(momentum_state, x_in)
        if not np.isfinite(x_start).all():
            raise DivergenceError(step=step, message=f"momentum extrapolation non-finite at outer step {step}")
    else:
        x_start = x_in

    fit_mask = split.fit_mask() if split is not None else None
    try:
        classical = landweber(
            op, y, x_start, config.inner_steps, config.tau, fit_mask=fit_mask
        ).reshape(-1)
    except DivergenceError as err:
        raise DivergenceError(
            step=step,
            message=f"non-finite iterate at outer step {step} (inner step {err.step})",
        ) from None

    denoiser_input = classical if config.structure == "composition" else x_start
    with np.errstate(over="ignore", invalid="ignore"):
        learned = apply_denoiser(spec=config.denoiser, x=_as_image(denoiser_input, op)).reshape(-1)
    if not np.isfinite(learned).all():
        raise DivergenceError(step=step, message=f"denoiser output non-finite at outer step {step}")

    if config.beta_mode == "cv":
        beta = select_beta(op, classical, learned, y, split)
    else:
        beta = float(config.beta_mode)

    with np.errstate(over="ignore", invalid="ignore"):
        combined = convex_combination(classical, learned, beta)
    if config.nonneg:
        np.maximum(combined, 0.0, out=combined)
    if not np.isfinite(combined).all():
        raise DivergenceError(step=step, message=f"non-finite iterate at outer step {step}")

    # norms of large-but-finite iterates may overflow to inf; they are recorded
    # as such so breakdown growth stays observable
    with np.errstate(over="ignore", invalid="ignore"):
        residual = None
        if split is not None and split.held_out.size > 0:
            s = split.held_out
            residual = float(
                np.linalg.norm(
                    op.apply(combined)[s] - np.asarray(y, dtype=np.float64).reshape(-1)[s]
                )
            )
        record = StepRecord(
            step=step,
            iterate_norm=float(np.linalg.norm(combined)),
            beta=beta,
            direction_norm=float(beta * np.linalg.norm(learned - classical)),
            leaveout_residual=residual,
        )
        if keep_direction:
            record.direction_vec = beta * (learned - classical)
    if ground_truth is not None:
        gt = np.asarray(ground_truth, dtype=np.float64)
        gt_norm = np.linalg.norm(gt)
        record.relative_norm = record.iterate_norm / gt_norm if gt_norm > 0 else None
        img = _as_image(combined, op)
        if img.ndim == 2 and gt.ndim == 2:
            record.psnr = psnr(img, gt)
            # SSIM statistics overflow on astronomically diverged iterates
            if min(gt.shape) >= 11 and np.max(np.abs(img)) < 1e60:
                record.ssim = ssim(img, gt)
    return combined, record, momentum_state


def run_unrolled(
    config: UnrollConfig,
    op,
    y,
    split,
    ground_truth=None,
    record_iterates: bool = False,
    record_directions: bool = False,
):
    """Run the full unrolled scheme from a zero initial point.

    Returns (final iterate, held-out-criterion pick, trace).  On divergence the
    raised :class:`DivergenceError` carries the partial trace and the failing
    outer step.
    """
    x = np.zeros(op.cols)
    state = MomentumState.initial(x) if config.momentum else None
    trace = IterateTrace(
        iterates=[] if record_iterates else None,
        directions=[] if record_directions else None,
    )
    best_residual = np.inf
    s0_pick = x.copy()
    for i in range(1, config.n_steps + 1):
        try:
            x_next, record, state = unroll_step(
                x,
                config,
                op,
                y,
                split,
                momentum_state=state,
                step=i,
                ground_truth=ground_truth,
                keep_direction=record_directions,
            )
        except DivergenceError as err:
            err.trace = trace
            raise
        if record_directions:
            trace.directions.append(record.direction_vec)
            record.direction_vec = None
        trace.records.append(record)
        if trace.iterates is not None:
            trace.iterates.append(x_next.copy())
        if record.leaveout_residual is not None and record.leaveout_residual < best_residual:
            best_residual = record.leaveout_residual
            s0_pick = x_next.copy()
        x = x_next
    if all(r.leaveout_residual is None for r in trace.records):
        s0_pick = x.copy()
    return _as_image(x, op), _as_image(s0_pick, op), trace


def post_process_reconstruct(
    op, y, alpha_steps: int, tau: float, denoiser: DenoiserSpec, beta_mode="cv", split=None
) -> np.ndarray:
    """Single classical recovery, single denoiser pass, combined along the learned direction.

    Equivalent forms: classical + beta * (learned - classical), i.e. the convex
    combination of the two endpoints.
    """
    fit_mask = split.fit_mask() if split is not None else None
    classical = landweber(
        op, y, np.zeros(op.cols), alpha_steps, tau, fit_mask=fit_mask
    ).reshape(-1)
    learned = apply_denoiser(denoiser, _as_image(classical, op)).reshape(-1)
    if beta_mode == "cv":
        beta = select_beta(op, classical, learned, y, split)
    else:
        beta = float(beta_mode)
        if not 0.0 <= beta <= 1.0:
            raise ValueError("fixed beta must lie in [0, 1]")
    return _as_image(classical + beta * (learned - classical), op)
