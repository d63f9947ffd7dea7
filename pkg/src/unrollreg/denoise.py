"""Pluggable denoisers: classical smoothers, gain surrogates for breakdown
studies, and a small fixed-weight residual CNN loaded from a portable file.

Weight file format ("DNWT"): magic bytes, version u32 LE = 1, layer count
u32 LE; then per layer an activation tag u8 (0 none, 1 relu), out_ch, in_ch,
kh, kw as u32 LE, the kernel as out-major float32 LE, and out_ch float32 LE
biases.  No padding bytes anywhere; round trips are bit-exact.

The residual network computes ``x - net(x)``.  By default the image is
normalized to [0, 1] before inference and mapped back afterwards (the weights
are trained on that scale); pass ``normalize=False`` to run on raw intensities.
Convolutions use reflect padding and float32 accumulation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from importlib import resources

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import median_filter

from .errors import WeightFormatError

_DNWT_MAGIC = b"DNWT"
_DNWT_VERSION = 1
_ACTIVATIONS = {0: "none", 1: "relu"}
_ACTIVATION_TAGS = {"none": 0, "relu": 1}


@dataclass(frozen=True)
class ConvLayer:
    kernel: np.ndarray  # (out_ch, in_ch, kh, kw) float32
    bias: np.ndarray  # (out_ch,) float32
    activation: str  # "relu" or "none"


@dataclass(frozen=True)
class ConvWeights:
    """A sequential stack of square odd-sized conv layers ending in one channel."""

    layers: tuple

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a conv network needs at least one layer")


def _validate_chain(layers, offsets):
    prev_out = 1
    for i, layer in enumerate(layers):
        out_ch, in_ch, kh, kw = layer.kernel.shape
        if kh != kw or kh % 2 == 0:
            raise WeightFormatError(offsets[i], f"layer {i}: kernels must be square and odd-sized")
        if in_ch != prev_out:
            raise WeightFormatError(
                offsets[i], f"layer {i}: expects {in_ch} input channels, previous layer emits {prev_out}"
            )
        prev_out = out_ch
    if prev_out != 1:
        raise WeightFormatError(offsets[-1], "final layer must emit a single channel")


def load_weights(path) -> ConvWeights:
    """Parse a DNWT weight file; failures carry the offending byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _DNWT_MAGIC:
        raise WeightFormatError(0, "bad magic, not a DNWT weight file")
    if len(blob) < 12:
        raise WeightFormatError(len(blob), "truncated header")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _DNWT_VERSION:
        raise WeightFormatError(4, f"unsupported DNWT version {version}")
    (layer_count,) = struct.unpack_from("<I", blob, 8)
    if layer_count < 1:
        raise WeightFormatError(8, "layer count must be at least 1")

    offset = 12
    layers = []
    offsets = []
    for i in range(layer_count):
        offsets.append(offset)
        if offset + 17 > len(blob):
            raise WeightFormatError(offset, f"truncated header of layer {i}")
        tag = blob[offset]
        if tag not in _ACTIVATIONS:
            raise WeightFormatError(offset, f"unknown activation tag {tag}")
        out_ch, in_ch, kh, kw = struct.unpack_from("<IIII", blob, offset + 1)
        offset += 17
        if min(out_ch, in_ch, kh, kw) < 1:
            raise WeightFormatError(offset - 16, f"layer {i}: zero dimension")
        ksize = out_ch * in_ch * kh * kw
        if offset + 4 * (ksize + out_ch) > len(blob):
            raise WeightFormatError(offset, f"truncated weights of layer {i}")
        kernel = (
            np.frombuffer(blob, dtype="<f4", count=ksize, offset=offset)
            .reshape(out_ch, in_ch, kh, kw)
            .copy()
        )
        offset += 4 * ksize
        bias = np.frombuffer(blob, dtype="<f4", count=out_ch, offset=offset).copy()
        offset += 4 * out_ch
        layers.append(ConvLayer(kernel=kernel, bias=bias, activation=_ACTIVATIONS[tag]))
    if offset != len(blob):
        raise WeightFormatError(offset, "trailing bytes after last layer")
    _validate_chain(layers, offsets)
    return ConvWeights(layers=tuple(layers))


def save_weights(weights: ConvWeights, path) -> None:
    """Write weights in the DNWT format (inverse of :func:`load_weights`)."""
    with open(path, "wb") as fh:
        fh.write(_DNWT_MAGIC)
        fh.write(struct.pack("<II", _DNWT_VERSION, len(weights.layers)))
        for layer in weights.layers:
            out_ch, in_ch, kh, kw = layer.kernel.shape
            fh.write(struct.pack("<BIIII", _ACTIVATION_TAGS[layer.activation], out_ch, in_ch, kh, kw))
            fh.write(np.ascontiguousarray(layer.kernel, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())


def fixture_weights_path() -> str:
    """Path of the committed fixture weight file shipped with the package."""
    return str(resources.files("unrollreg").joinpath("fixtures/blur_residual_5x16.dnwt"))


def conv_network_forward(weights: ConvWeights, u: np.ndarray) -> np.ndarray:
    """Run the conv stack on a single-channel float32 image (reflect padding)."""
    act = u.astype(np.float32, copy=False)[None, :, :]
    for layer in weights.layers:
        kh, kw = layer.kernel.shape[2:]
        ph, pw = kh // 2, kw // 2
        padded = np.pad(act, ((0, 0), (ph, ph), (pw, pw)), mode="reflect")
        windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
        act = np.einsum("cxykl,ockl->oxy", windows, layer.kernel) + layer.bias[:, None, None]
        if layer.activation == "relu":
            np.maximum(act, 0.0, out=act)
    return act[0]


@dataclass(frozen=True)
class DenoiserSpec:
    """One of: identity, gaussian(sigma), median(window), gain(g), conv_residual."""

    kind: str
    sigma: float = 0.0
    window: int = 3
    gain_value: float = 1.0
    weights: ConvWeights | None = field(default=None, compare=False)
    normalize: bool = True

    def __post_init__(self):
        if self.kind not in {"identity", "gaussian", "median", "gain", "conv_residual"}:
            raise ValueError(f"unknown denoiser kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("gaussian sigma must be nonnegative")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("median window must be odd and positive")
        if not np.isfinite(self.gain_value):
            raise ValueError("gain must be finite")
        if self.kind == "conv_residual" and self.weights is None:
            raise ValueError("conv_residual needs loaded weights")

    @classmethod
    def identity(cls):
        return cls(kind="identity")

    @classmethod
    def gaussian(cls, sigma: float):
        return cls(kind="gaussian", sigma=sigma)

    @classmethod
    def median(cls, window: int):
        return cls(kind="median", window=window)

    @classmethod
    def gain(cls, g: float):
        return cls(kind="gain", gain_value=g)

    @classmethod
    def conv_residual(cls, weights, normalize: bool = True):
        if not isinstance(weights, ConvWeights):
            weights = load_weights(weights)
        return cls(kind="conv_residual", weights=weights, normalize=normalize)


def gaussian_denoise(x: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with reflect padding; sigma = 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("gaussian_denoise expects a 2-D image")
    if sigma == 0.0:
        return x.copy()
    radius = max(1, int(np.ceil(3.0 * sigma)))
    if radius >= min(x.shape):
        raise ValueError("kernel radius exceeds image size")
    taps = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    taps /= taps.sum()
    out = x
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, mode="reflect")
        acc = np.zeros_like(out)
        for i, w in enumerate(taps):
            sl = [slice(None), slice(None)]
            sl[axis] = slice(i, i + out.shape[axis])
            acc += w * padded[tuple(sl)]
        out = acc
    return out


def apply_denoiser(spec: DenoiserSpec, x: np.ndarray) -> np.ndarray:
    """Apply a denoiser; output has the same shape as the input."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty input")
    if spec.kind == "identity":
        return x.copy()
    if spec.kind == "gain":
        return spec.gain_value * x
    if x.ndim != 2:
        raise ValueError(f"denoiser kind {spec.kind!r} expects a 2-D image")
    if spec.kind == "gaussian":
        return gaussian_denoise(x, spec.sigma)
    if spec.kind == "median":
        return median_filter(x, size=spec.window, mode="reflect")
    # conv_residual: the network estimates the noise on the normalized scale,
    # so the subtraction happens in float64 on the original intensities
    lo = float(x.min())
    hi = float(x.max())
    if spec.normalize and hi > lo:
        u = (x - lo) / (hi - lo)
        scale = hi - lo
    else:
        u = x
        scale = 1.0
    if spec.weights.layers[0].kernel.shape[1] != 1:
        raise ValueError("conv network must take a single input channel")
    net = conv_network_forward(spec.weights, u.astype(np.float32))
    return x - net.astype(np.float64) * scale
