"""Discretized parallel-beam Radon operator and desk-scale linear-algebra helpers.

Geometry convention
-------------------
The image has ``n1`` rows and ``n2`` columns of unit-side pixels and is centered
at the origin: pixel ``(r, c)`` occupies ``[c - n2/2, c + 1 - n2/2]`` along x and
``[n1/2 - r - 1, n1/2 - r]`` along y (row 0 at the top).  For a view angle
``theta`` (degrees) the rays travel along ``u = (-sin t, cos t)`` and the
detector axis is ``v = (cos t, sin t)``, so the 0-degree projection integrates
down the columns.  The ``m1`` detector bins span the circumscribing detector of
the image square: bin ``j`` sits at ``s_j = (j - (m1-1)/2) * D / m1`` with ``D``
the image diagonal.  Angles are equally spaced over a half-open span (default
``[0, 180)`` degrees).  Rows are ordered angle-major: all rays of the first
angle come first.

Coefficients are exact ray/pixel intersection lengths (Siddon-style parametric
traversal), so every stored value is nonnegative and bounded by the pixel
diagonal.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError

_SPRT_MAGIC = b"SPRT"
_SPRT_VERSION = 1

# Segments shorter than this (relative to the image diagonal) are corner-touch
# artifacts of the traversal, not real chords.
_CHORD_EPS = 1e-12


@dataclass(frozen=True)
class Geometry:
    """Grid and view description attached to an operator."""

    n1: int
    n2: int
    m1: int
    m2: int
    angles_deg: tuple

    @property
    def image_shape(self):
        return (self.n1, self.n2)

    @property
    def sino_shape(self):
        return (self.m2, self.m1)


class SparseOperator:
    """Sparse forward map in compressed sparse row form.

    Immutable after construction; ``apply`` and ``apply_adjoint`` are safe for
    concurrent callers.
    """

    def __init__(self, matrix: sp.csr_matrix, geometry: Geometry | None = None):
        matrix = sp.csr_matrix(matrix)
        matrix.sort_indices()
        self._csr = matrix
        self._csr_t = sp.csr_matrix(matrix.T)
        self.geometry = geometry

    @property
    def rows(self) -> int:
        return self._csr.shape[0]

    @property
    def cols(self) -> int:
        return self._csr.shape[1]

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def row_offsets(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    @classmethod
    def from_dense(cls, a, geometry: Geometry | None = None) -> "SparseOperator":
        return cls(sp.csr_matrix(np.asarray(a, dtype=np.float64)), geometry)

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def _flatten_image(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            if self.geometry is None or x.shape != self.geometry.image_shape:
                raise ValueError(
                    f"image shape {x.shape} does not match operator domain"
                )
            return x.reshape(-1), True
        if x.ndim == 1 and x.size == self.cols:
            return x, False
        raise ValueError(f"expected {self.cols} image values, got shape {x.shape}")

    def _flatten_sino(self, y) -> tuple[np.ndarray, bool]:
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 2:
            if self.geometry is None or y.shape != self.geometry.sino_shape:
                raise ValueError(
                    f"sinogram shape {y.shape} does not match operator range"
                )
            return y.reshape(-1), True
        if y.ndim == 1 and y.size == self.rows:
            return y, False
        raise ValueError(f"expected {self.rows} sinogram values, got shape {y.shape}")

    def apply(self, x) -> np.ndarray:
        """Forward product T x.  2-D input gives a 2-D (m2, m1) sinogram back."""
        flat, shaped = self._flatten_image(x)
        y = self._csr @ flat
        if shaped:
            return y.reshape(self.geometry.sino_shape)
        return y

    def apply_adjoint(self, y) -> np.ndarray:
        """Adjoint product T* y.  2-D input gives a 2-D (n1, n2) image back."""
        flat, shaped = self._flatten_sino(y)
        x = self._csr_t @ flat
        if shaped:
            return x.reshape(self.geometry.image_shape)
        return x


@dataclass(frozen=True)
class DenseMap:
    """Dense linear map, used for the desk-scale truncated-SVD pseudo-inverse."""

    rows: int
    cols: int
    data: np.ndarray
    truncation_tol: float

    def apply(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.size != self.cols:
            raise ValueError(f"expected {self.cols} values, got {y.size}")
        return self.data @ y


def _trace_ray(px, py, ux, uy, n1, n2):
    """Exact intersection lengths of one ray with the pixel grid.

    Returns (flat pixel indices, chord lengths); both empty when the ray misses
    the image square.
    """
    xmin, xmax = -n2 / 2.0, n2 / 2.0
    ymin, ymax = -n1 / 2.0, n1 / 2.0
    diag = np.hypot(n1, n2)

    tmin, tmax = -np.inf, np.inf
    if ux != 0.0:
        tx = np.array([(xmin - px) / ux, (xmax - px) / ux])
        tmin, tmax = max(tmin, tx.min()), min(tmax, tx.max())
    elif not (xmin <= px <= xmax):
        return np.empty(0, np.int64), np.empty(0, np.float64)
    if uy != 0.0:
        ty = np.array([(ymin - py) / uy, (ymax - py) / uy])
        tmin, tmax = max(tmin, ty.min()), min(tmax, ty.max())
    elif not (ymin <= py <= ymax):
        return np.empty(0, np.int64), np.empty(0, np.float64)
    if not tmax > tmin:
        return np.empty(0, np.int64), np.empty(0, np.float64)

    crossings = [np.array([tmin, tmax])]
    if ux != 0.0:
        tx = (xmin + np.arange(n2 + 1) - px) / ux
        crossings.append(tx[(tx > tmin) & (tx < tmax)])
    if uy != 0.0:
        ty = (ymin + np.arange(n1 + 1) - py) / uy
        crossings.append(ty[(ty > tmin) & (ty < tmax)])
    t = np.unique(np.concatenate(crossings))

    lengths = np.diff(t)
    keep = lengths > _CHORD_EPS * diag
    if not keep.any():
        return np.empty(0, np.int64), np.empty(0, np.float64)
    tmid = ((t[:-1] + t[1:]) / 2.0)[keep]
    lengths = lengths[keep]

    cx = np.floor(px + tmid * ux - xmin).astype(np.int64)
    cy = np.floor(py + tmid * uy - ymin).astype(np.int64)
    np.clip(cx, 0, n2 - 1, out=cx)
    np.clip(cy, 0, n1 - 1, out=cy)
    rows = (n1 - 1) - cy
    return rows * n2 + cx, lengths


def build_parallel_radon(n1, n2, m1, m2, angle_span=180.0) -> SparseOperator:
    """Build the sparse parallel-beam projector for an n1 x n2 pixel grid.

    ``m1`` rays per angle, ``m2`` angles equally spaced over the half-open
    ``[0, angle_span)`` degree range.  Deterministic for fixed inputs.
    """
    if min(n1, n2, m1, m2) < 1:
        raise ValueError("all grid dimensions must be >= 1")
    if angle_span <= 0:
        raise ValueError("angle_span must be positive")

    angles = tuple(float(k) * angle_span / m2 for k in range(m2))
    diag = float(np.hypot(n1, n2))
    spacing = diag / m1
    offsets = (np.arange(m1) - (m1 - 1) / 2.0) * spacing

    indptr = np.zeros(m1 * m2 + 1, dtype=np.int64)
    col_chunks = []
    val_chunks = []
    row = 0
    for theta in angles:
        rad = np.deg2rad(theta)
        ux, uy = -np.sin(rad), np.cos(rad)
        vx, vy = np.cos(rad), np.sin(rad)
        for s in offsets:
            cols, lengths = _trace_ray(s * vx, s * vy, ux, uy, n1, n2)
            col_chunks.append(cols)
            val_chunks.append(lengths)
            row += 1
            indptr[row] = indptr[row - 1] + cols.size

    matrix = sp.csr_matrix(
        (
            np.concatenate(val_chunks) if val_chunks else np.empty(0),
            np.concatenate(col_chunks) if col_chunks else np.empty(0, np.int64),
            indptr,
        ),
        shape=(m1 * m2, n1 * n2),
    )
    geometry = Geometry(n1=n1, n2=n2, m1=m1, m2=m2, angles_deg=angles)
    return SparseOperator(matrix, geometry)


def operator_norm_sq(op: SparseOperator, iterations: int = 100, seed: int = 0) -> float:
    """Power-method estimate of ||T||^2 (largest eigenvalue of T* T)."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(op.cols)
    nv = np.linalg.norm(v)
    if nv == 0.0 or op.nnz == 0:
        return 0.0
    v /= nv
    estimate = 0.0
    for _ in range(iterations):
        w = op.apply_adjoint(op.apply(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        estimate = float(v @ w)  # Rayleigh quotient of T*T at unit v
        v = w / nw
    return estimate


def dense_pseudo_inverse(
    op: SparseOperator, truncation_tol: float = 1e-12, size_cap: int = 1 << 22
) -> DenseMap:
    """Truncated-SVD pseudo-inverse of a desk-scale operator.

    Singular values below ``truncation_tol * sigma_max`` are treated as zero.
    Refuses operators with more than ``size_cap`` dense entries.
    """
    if truncation_tol < 0:
        raise ValueError("truncation_tol must be nonnegative")
    if op.rows * op.cols > size_cap:
        raise CapacityError(
            f"operator too large to densify: {op.rows}x{op.cols} > cap {size_cap}"
        )
    a = op.to_dense()
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size and s[0] > 0:
        keep = s >= truncation_tol * s[0]
    else:
        keep = np.zeros_like(s, dtype=bool)
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    pinv = (vt.T * inv_s) @ u.T
    return DenseMap(
        rows=op.cols, cols=op.rows, data=pinv, truncation_tol=float(truncation_tol)
    )


def save_operator(op: SparseOperator, path) -> None:
    """Write the operator as a flat binary file (magic "SPRT"); bit-exact round trip."""
    with open(path, "wb") as fh:
        fh.write(_SPRT_MAGIC)
        fh.write(struct.pack("<I", _SPRT_VERSION))
        fh.write(struct.pack("<QQQ", op.rows, op.cols, op.nnz))
        fh.write(np.ascontiguousarray(op.row_offsets, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(op.col_indices, dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(op.values, dtype="<f8").tobytes())


def load_operator(path) -> SparseOperator:
    """Read an operator written by :func:`save_operator` (geometry is not stored)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _SPRT_MAGIC:
        raise ValueError("not an SPRT operator file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _SPRT_VERSION:
        raise ValueError(f"unsupported SPRT version {version}")
    rows, cols, nnz = struct.unpack_from("<QQQ", blob, 8)
    off = 32
    indptr = np.frombuffer(blob, dtype="<u8", count=rows + 1, offset=off).astype(
        np.int64
    )
    off += 8 * (rows + 1)
    indices = np.frombuffer(blob, dtype="<u4", count=nnz, offset=off).astype(np.int64)
    off += 4 * nnz
    values = np.frombuffer(blob, dtype="<f8", count=nnz, offset=off).copy()
    matrix = sp.csr_matrix((values, indices, indptr), shape=(rows, cols))
    return SparseOperator(matrix, geometry=None)
