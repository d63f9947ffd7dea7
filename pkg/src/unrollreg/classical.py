"""Classical regularization: Landweber iteration, Tikhonov solves, and the
combination rules that merge a classical recovery with a learned one."""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceFailure, DivergenceError


def landweber(op, y, x0, steps: int, tau: float, fit_mask=None) -> np.ndarray:
    """Run ``steps`` gradient steps on 1/2 ||T x - y||^2 starting from ``x0``.

    ``fit_mask`` is an optional boolean row mask; rows where it is False (the
    held-out set) contribute nothing to the gradient.  The iteration count is
    the effective regularization parameter.  Raises :class:`DivergenceError`
    naming the step index if an iterate goes non-finite.
    """
    if not tau > 0:
        raise ValueError("step size tau must be positive")
    if steps < 0:
        raise ValueError("step count must be nonnegative")
    x0 = np.asarray(x0, dtype=np.float64)
    shape = x0.shape
    x = x0.reshape(-1).copy()
    if x.size != op.cols:
        raise ValueError(f"expected {op.cols} image values, got {x.size}")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size != op.rows:
        raise ValueError(f"expected {op.rows} sinogram values, got {y.size}")
    if fit_mask is not None:
        fit_mask = np.asarray(fit_mask, dtype=bool)
        if fit_mask.size != op.rows:
            raise ValueError("fit_mask length must equal the operator row count")

    # overflow is a legitimate outcome in breakdown experiments; the finite
    # check below turns it into a step-indexed error instead of a warning
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, steps + 1):
            residual = op.apply(x) - y
            if fit_mask is not None:
                residual[~fit_mask] = 0.0
            x -= tau * op.apply_adjoint(residual)
            if not np.isfinite(x).all():
                raise DivergenceError(step=k)
    return x.reshape(shape)


def tikhonov_solve(op, y, alpha: float, rtol: float = 1e-10) -> np.ndarray:
    """Solve (T*T + alpha I) x = T* y by conjugate gradients on the normal equations.

    Converges to relative residual ``rtol`` or raises :class:`ConvergenceFailure`
    (carrying the final residual) at the 10n iteration cap.  With ``alpha = 0``
    the operator must have full column rank for the system to be definite.
    """
    if alpha < 0:
        raise ValueError("regularization weight alpha must be nonnegative")
    y = np.asarray(y, dtype=np.float64)
    shaped = y.ndim == 2
    b = op.apply_adjoint(y.reshape(-1))
    n = op.cols
    if np.linalg.norm(b) == 0.0:
        x = np.zeros(n)
    else:
        normal = spla.LinearOperator(
            (n, n),
            matvec=lambda v: op.apply_adjoint(op.apply(v)) + alpha * v,
            dtype=np.float64,
        )
        maxiter = 10 * n
        x, _ = spla.cg(normal, b, rtol=rtol, atol=0.0, maxiter=maxiter)
        # CG's recursive residual can drift; enforce the contract on the true one
        residual = np.linalg.norm(b - normal.matvec(x)) / np.linalg.norm(b)
        if residual > rtol:
            raise ConvergenceFailure(residual=residual, iterations=maxiter)
    if shaped and op.geometry is not None:
        return x.reshape(op.geometry.image_shape)
    return x


def _check_pair(classical, learned):
    classical = np.asarray(classical, dtype=np.float64)
    learned = np.asarray(learned, dtype=np.float64)
    if classical.shape != learned.shape:
        raise ValueError(
            f"shape mismatch: classical {classical.shape} vs learned {learned.shape}"
        )
    return classical, learned


def additive_learned_combination(classical, learned, beta: float) -> np.ndarray:
    """classical + beta * learned, with beta = inf meaning the learned output alone."""
    classical, learned = _check_pair(classical, learned)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if np.isinf(beta):
        return learned.copy()
    return classical + beta * learned


def convex_combination(classical, learned, beta: float) -> np.ndarray:
    """(1 - beta) * classical + beta * learned for beta in [0, 1]."""
    classical, learned = _check_pair(classical, learned)
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return (1.0 - beta) * classical + beta * learned
