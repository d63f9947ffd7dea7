"""Phantoms, sinogram synthesis, Poisson noise injection, and leave-out splits.

All randomness goes through numpy's PCG64 generator seeded explicitly, so every
artifact in the pipeline is reproducible from its seeds alone.

File formats: images and sinograms persist either as 16-bit binary PGM (P5,
maxval 65535, values affinely mapped into the [min, max] range recorded in a
sidecar ``.range`` text file) or as raw float64 little-endian blobs behind an
"IMGF" magic header.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

_IMGF_MAGIC = b"IMGF"
_IMGF_VERSION = 1

# Modified Shepp-Logan ellipses: (value, a, b, x0, y0, phi_deg) on [-1, 1]^2.
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def bar_layout(n1: int, n2: int):
    """Deterministic layout of the bars phantom: (band width, row0, row1).

    Columns whose band index ``c // width`` is odd carry a unit-intensity bar
    spanning rows ``[row0, row1)``; even bands are empty.
    """
    width = max(1, n2 // 8)
    row0 = n1 // 8
    row1 = n1 - n1 // 8
    return width, row0, row1


def make_phantom(kind: str, n1: int, n2: int, seed: int = 0) -> np.ndarray:
    """Generate an (n1, n2) phantom with intensities in [0, 1].

    Kinds: ``shepp_logan`` (analytic ellipse phantom), ``disks`` (seeded random
    disks), ``bars`` (fixed vertical bar pattern).  Deterministic per
    (kind, dims, seed).
    """
    if n1 < 8 or n2 < 8:
        raise ValueError("phantom dimensions must be at least 8x8")

    if kind == "shepp_logan":
        cols = (np.arange(n2) + 0.5) / n2 * 2.0 - 1.0
        rows = 1.0 - (np.arange(n1) + 0.5) / n1 * 2.0
        x, y = np.meshgrid(cols, rows)
        img = np.zeros((n1, n2))
        for value, a, b, x0, y0, phi in _SHEPP_LOGAN:
            rad = np.deg2rad(phi)
            xr = (x - x0) * np.cos(rad) + (y - y0) * np.sin(rad)
            yr = -(x - x0) * np.sin(rad) + (y - y0) * np.cos(rad)
            img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
        return np.clip(img, 0.0, 1.0)

    if kind == "disks":
        rng = _rng(seed)
        img = np.zeros((n1, n2))
        cols = np.arange(n2) + 0.5
        rows = np.arange(n1) + 0.5
        x, y = np.meshgrid(cols, rows)
        for _ in range(int(rng.integers(4, 9))):
            cy = rng.uniform(0.2 * n1, 0.8 * n1)
            cx = rng.uniform(0.2 * n2, 0.8 * n2)
            radius = rng.uniform(0.05, 0.2) * min(n1, n2)
            value = rng.uniform(0.3, 1.0)
            inside = (x - cx) ** 2 + (y - cy) ** 2 <= radius**2
            img = np.maximum(img, np.where(inside, value, 0.0))
        return img

    if kind == "bars":
        width, row0, row1 = bar_layout(n1, n2)
        img = np.zeros((n1, n2))
        bar_cols = (np.arange(n2) // width) % 2 == 1
        img[row0:row1, bar_cols] = 1.0
        return img

    raise ValueError(f"unknown phantom kind {kind!r}")


def synthesize_clean(op, phantom: np.ndarray) -> np.ndarray:
    """Noiseless sinogram of a phantom: exact forward product."""
    return op.apply(phantom)


@dataclass(frozen=True)
class NoiseModel:
    """Poisson noise with photon intensity ``intensity`` and a fixed seed."""

    intensity: float
    seed: int = 0

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("noise intensity must be positive")


def add_poisson_noise(y: np.ndarray, model: NoiseModel, sample: bool = True) -> np.ndarray:
    """Photon-count Poisson noise on the original sinogram scale.

    Normalizes the sinogram to [0, 1], pushes it through the exponential
    photon-count model, draws Poisson counts at intensity ``model.intensity``,
    takes the negative log, and rescales with the *clean* sinogram's range.
    Zero-count draws are clamped to one count before the log.  With
    ``sample=False`` the draw is replaced by its mean and the chain returns the
    input exactly.
    """
    y = np.asarray(y, dtype=np.float64)
    lo = float(y.min())
    hi = float(y.max())
    if not hi > lo:
        raise DegenerateInputError("constant sinogram cannot be normalized")
    y01 = (y - lo) / (hi - lo)
    lam = model.intensity * np.exp(-y01)
    if sample:
        counts = _rng(model.seed).poisson(lam).astype(np.float64)
        counts = np.maximum(counts, 1.0)
    else:
        counts = lam
    y01_noisy = -np.log(counts / model.intensity)
    return y01_noisy * (hi - lo) + lo


def noise_level(y: np.ndarray, y_noisy: np.ndarray) -> float:
    """Euclidean norm of the sinogram perturbation."""
    y = np.asarray(y, dtype=np.float64)
    y_noisy = np.asarray(y_noisy, dtype=np.float64)
    if y.shape != y_noisy.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_noisy.shape}")
    return float(np.linalg.norm(y_noisy - y))


@dataclass(frozen=True)
class LeaveOutSplit:
    """Held-out sinogram rows used by the cross-validation selection criterion."""

    total: int
    held_out: np.ndarray
    fraction: float

    def fit_mask(self) -> np.ndarray:
        """Boolean mask over rows: True for rows the data-consistency steps may use."""
        mask = np.ones(self.total, dtype=bool)
        mask[self.held_out] = False
        return mask


def make_leaveout_split(m: int, fraction: float, seed: int = 0) -> LeaveOutSplit:
    """Uniform without-replacement sample of ``round(fraction * m)`` rows.

    Rounding is half-up, so a 1% split of 16290 rows holds out 163.
    """
    if m < 1:
        raise ValueError("row count must be positive")
    if not 0.0 <= fraction < 1.0:
        raise ValueError("held-out fraction must lie in [0, 1)")
    size = int(np.floor(fraction * m + 0.5))
    held = np.sort(_rng(seed).choice(m, size=size, replace=False))
    return LeaveOutSplit(total=m, held_out=held, fraction=size / m)


def _sidecar_path(path) -> str:
    return os.path.splitext(str(path))[0] + ".range"


def write_pgm(image: np.ndarray, path) -> None:
    """Write a 16-bit P5 PGM plus a ``.range`` sidecar recording [min, max]."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("PGM output expects a 2-D array")
    lo = float(image.min())
    hi = float(image.max())
    if hi > lo:
        scaled = np.round((image - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.zeros_like(image)
    raw = scaled.astype(">u2")
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(raw.tobytes())
    with open(_sidecar_path(path), "w", encoding="ascii") as fh:
        fh.write(f"{lo:.17g} {hi:.17g}\n")


def read_pgm(path) -> np.ndarray:
    """Read a PGM written by :func:`write_pgm`, restoring the recorded range."""
    with open(path, "rb") as fh:
        blob = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            pos = blob.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P5" or fields[3] != b"65535":
        raise ValueError("expected a 16-bit P5 PGM")
    w, h = int(fields[1]), int(fields[2])
    raw = np.frombuffer(blob, dtype=">u2", count=w * h, offset=pos).reshape(h, w)
    with open(_sidecar_path(path), "r", encoding="ascii") as fh:
        lo, hi = (float(tok) for tok in fh.read().split())
    return lo + raw.astype(np.float64) / 65535.0 * (hi - lo)


def write_raw(image: np.ndarray, path) -> None:
    """Write a float64 little-endian blob with an "IMGF" header; bit-exact."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("raw output expects a 2-D array")
    with open(path, "wb") as fh:
        fh.write(_IMGF_MAGIC)
        fh.write(struct.pack("<III", _IMGF_VERSION, image.shape[0], image.shape[1]))
        fh.write(np.ascontiguousarray(image, dtype="<f8").tobytes())


def read_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _IMGF_MAGIC:
        raise ValueError("not an IMGF image file")
    version, rows, cols = struct.unpack_from("<III", blob, 4)
    if version != _IMGF_VERSION:
        raise ValueError(f"unsupported IMGF version {version}")
    return (
        np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=16)
        .reshape(rows, cols)
        .copy()
    )
