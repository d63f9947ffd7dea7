"""Regenerate the committed fixture weight file.

The fixture is a 5-layer, 16-channel, 3x3 residual stack whose weights are
crafted rather than trained: layer 1 splits a high-pass response into positive
and negative relu channels, layers 2-4 pass them through unchanged, and layer 5
recombines them, so the network output is exactly the high-frequency part of
the input and the residual denoiser reduces to a gentle 3x3 binomial blur.
That gives a deterministic, mass-preserving stand-in for a pretrained denoiser
with reproducible bits.  Run from the repository root:

    python tools/make_fixture_weights.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from unrollreg.denoise import ConvLayer, ConvWeights, save_weights  # noqa: E402

CHANNELS = 16


def binomial_highpass():
    blur = np.outer([1.0, 2.0, 1.0], [1.0, 2.0, 1.0]) / 16.0
    highpass = -blur
    highpass[1, 1] += 1.0
    return highpass.astype(np.float32)


def build_weights():
    hp = binomial_highpass()
    delta = np.zeros((3, 3), dtype=np.float32)
    delta[1, 1] = 1.0

    first = np.zeros((CHANNELS, 1, 3, 3), dtype=np.float32)
    first[0, 0] = hp
    first[1, 0] = -hp

    passthrough = np.zeros((CHANNELS, CHANNELS, 3, 3), dtype=np.float32)
    for c in range(CHANNELS):
        passthrough[c, c] = delta

    last = np.zeros((1, CHANNELS, 3, 3), dtype=np.float32)
    last[0, 0] = delta
    last[0, 1] = -delta

    zeros16 = np.zeros(CHANNELS, dtype=np.float32)
    layers = [
        ConvLayer(kernel=first, bias=zeros16.copy(), activation="relu"),
        ConvLayer(kernel=passthrough.copy(), bias=zeros16.copy(), activation="relu"),
        ConvLayer(kernel=passthrough.copy(), bias=zeros16.copy(), activation="relu"),
        ConvLayer(kernel=passthrough.copy(), bias=zeros16.copy(), activation="relu"),
        ConvLayer(kernel=last, bias=np.zeros(1, dtype=np.float32), activation="none"),
    ]
    return ConvWeights(layers=tuple(layers))


def main():
    out = os.path.join(
        os.path.dirname(__file__), "..", "src", "unrollreg", "fixtures", "blur_residual_5x16.dnwt"
    )
    os.makedirs(os.path.dirname(out), exist_ok=True)
    save_weights(build_weights(), out)
    print(f"wrote {os.path.normpath(out)}")


if __name__ == "__main__":
    main()
