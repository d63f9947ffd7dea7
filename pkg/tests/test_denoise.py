import struct

import numpy as np
import pytest

from unrollreg import (
    ConvLayer,
    ConvWeights,
    DenoiserSpec,
    WeightFormatError,
    apply_denoiser,
    conv_network_forward,
    fixture_weights_path,
    gaussian_denoise,
    load_weights,
    save_weights,
)


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def conv_oracle(weights, u):
    """Direct nested-loop conv-stack evaluation in float64 with reflect padding."""
    act = [u.astype(np.float64)]
    for layer in weights.layers:
        out_ch, in_ch, kh, kw = layer.kernel.shape
        ph, pw = kh // 2, kw // 2
        h, w = act[0].shape
        padded = [np.pad(c, ((ph, ph), (pw, pw)), mode="reflect") for c in act]
        nxt = []
        for o in range(out_ch):
            plane = np.full((h, w), float(layer.bias[o]))
            for c in range(in_ch):
                for i in range(h):
                    for j in range(w):
                        acc = 0.0
                        for ki in range(kh):
                            for kj in range(kw):
                                acc += float(layer.kernel[o, c, ki, kj]) * padded[c][i + ki, j + kj]
                        plane[i, j] += acc
            if layer.activation == "relu":
                plane = np.maximum(plane, 0.0)
            nxt.append(plane)
        act = nxt
    return act[0]


def single_layer_weights(kernel, activation="none"):
    k = np.asarray(kernel, dtype=np.float32)[None, None, :, :]
    return ConvWeights(
        layers=(ConvLayer(kernel=k, bias=np.zeros(1, dtype=np.float32), activation=activation),)
    )


class TestApplyDenoiser:
    def test_identity(self):
        x = rng(1).standard_normal((6, 7))
        out = apply_denoiser(DenoiserSpec.identity(), x)
        assert np.array_equal(out, x)
        assert out is not x

    def test_gain_on_unit_vector(self):
        x = np.zeros((4, 4))
        x[2, 1] = 1.0
        out = apply_denoiser(DenoiserSpec.gain(1.5), x)
        assert out[2, 1] == 1.5
        assert np.count_nonzero(out) == 1

    def test_gain_homogeneous(self):
        x = rng(2).standard_normal((5, 5))
        for g in (-2.0, 0.25, 3.0):
            assert np.array_equal(apply_denoiser(DenoiserSpec.gain(g), x), g * x)

    def test_zero_weight_conv_residual_is_identity(self):
        zero = ConvWeights(
            layers=(
                ConvLayer(
                    kernel=np.zeros((4, 1, 3, 3), np.float32),
                    bias=np.zeros(4, np.float32),
                    activation="relu",
                ),
                ConvLayer(
                    kernel=np.zeros((1, 4, 3, 3), np.float32),
                    bias=np.zeros(1, np.float32),
                    activation="none",
                ),
            )
        )
        spec = DenoiserSpec.conv_residual(zero)
        for seed in range(20):
            x = rng(seed).random((12, 10))
            assert np.array_equal(apply_denoiser(spec, x), x)

    def test_normalization_flag_changes_biased_net(self):
        biased = ConvWeights(
            layers=(
                ConvLayer(
                    kernel=np.zeros((1, 1, 3, 3), np.float32),
                    bias=np.array([0.5], np.float32),
                    activation="none",
                ),
            )
        )
        x = 10.0 * rng(3).random((8, 8)) + 5.0
        with_norm = apply_denoiser(DenoiserSpec.conv_residual(biased, normalize=True), x)
        without = apply_denoiser(DenoiserSpec.conv_residual(biased, normalize=False), x)
        # noise estimate 0.5 lives on the normalized scale in one case only
        assert np.allclose(x - with_norm, 0.5 * (x.max() - x.min()), atol=1e-6)
        assert np.allclose(x - without, 0.5, atol=1e-6)

    def test_median_interior(self):
        x = rng(4).standard_normal((9, 9))
        out = apply_denoiser(DenoiserSpec.median(3), x)
        assert out[4, 4] == np.median(x[3:6, 3:6])

    def test_median_window_validation(self):
        with pytest.raises(ValueError):
            DenoiserSpec.median(2)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            DenoiserSpec(kind="wavelet")


class TestWeightFile:
    def test_round_trip_bitwise(self, tmp_path):
        g = rng(9)
        layers = (
            ConvLayer(
                kernel=g.standard_normal((3, 1, 3, 3)).astype(np.float32),
                bias=g.standard_normal(3).astype(np.float32),
                activation="relu",
            ),
            ConvLayer(
                kernel=g.standard_normal((1, 3, 5, 5)).astype(np.float32),
                bias=g.standard_normal(1).astype(np.float32),
                activation="none",
            ),
        )
        weights = ConvWeights(layers=layers)
        path = tmp_path / "w.dnwt"
        save_weights(weights, path)
        loaded = load_weights(path)
        for a, b in zip(weights.layers, loaded.layers):
            assert a.kernel.tobytes() == b.kernel.tobytes()
            assert a.bias.tobytes() == b.bias.tobytes()
            assert a.activation == b.activation
        path2 = tmp_path / "w2.dnwt"
        save_weights(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_known_kernel_on_ramp(self, tmp_path):
        # hand-checkable single layer: net(x) = K * x, denoised = x - K * x
        kernel = 0.1 * np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
        weights = single_layer_weights(kernel)
        path = tmp_path / "lap.dnwt"
        save_weights(weights, path)
        loaded = load_weights(path)
        ramp = np.arange(16, dtype=np.float64).reshape(4, 4) / 15.0
        got = conv_network_forward(loaded, ramp.astype(np.float32)).astype(np.float64)
        ref = conv_oracle(loaded, ramp)
        assert np.max(np.abs(got - ref)) <= 1e-6

    def test_fixture_loads_and_validates(self):
        weights = load_weights(fixture_weights_path())
        assert len(weights.layers) == 5
        assert weights.layers[0].kernel.shape == (16, 1, 3, 3)
        assert weights.layers[-1].kernel.shape == (1, 16, 3, 3)
        assert weights.layers[-1].activation == "none"

    def test_truncated_file(self, tmp_path):
        src = fixture_weights_path()
        blob = open(src, "rb").read()
        path = tmp_path / "trunc.dnwt"
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(WeightFormatError) as err:
            load_weights(path)
        assert err.value.offset > 0

    def test_bad_magic_offset_zero(self, tmp_path):
        path = tmp_path / "bad.dnwt"
        path.write_bytes(b"WXYZ" + b"\x00" * 20)
        with pytest.raises(WeightFormatError) as err:
            load_weights(path)
        assert err.value.offset == 0

    def test_bad_version(self, tmp_path):
        path = tmp_path / "v9.dnwt"
        path.write_bytes(b"DNWT" + struct.pack("<II", 9, 1))
        with pytest.raises(WeightFormatError) as err:
            load_weights(path)
        assert err.value.offset == 4

    def test_channel_chain_violation(self, tmp_path):
        g = rng(10)
        path = tmp_path / "chain.dnwt"
        with open(path, "wb") as fh:
            fh.write(b"DNWT" + struct.pack("<II", 1, 2))
            for out_ch, in_ch in ((2, 1), (1, 3)):  # 3 != 2: broken chain
                fh.write(struct.pack("<BIIII", 1, out_ch, in_ch, 3, 3))
                fh.write(g.standard_normal(out_ch * in_ch * 9).astype("<f4").tobytes())
                fh.write(np.zeros(out_ch, "<f4").tobytes())
        with pytest.raises(WeightFormatError):
            load_weights(path)

    def test_even_kernel_rejected(self, tmp_path):
        path = tmp_path / "even.dnwt"
        with open(path, "wb") as fh:
            fh.write(b"DNWT" + struct.pack("<II", 1, 1))
            fh.write(struct.pack("<BIIII", 0, 1, 1, 2, 2))
            fh.write(np.zeros(4, "<f4").tobytes())
            fh.write(np.zeros(1, "<f4").tobytes())
        with pytest.raises(WeightFormatError):
            load_weights(path)


class TestConvInference:
    def test_matches_nested_loop_oracle(self):
        weights = load_weights(fixture_weights_path())
        x = rng(12).random((8, 8))
        got = conv_network_forward(weights, x.astype(np.float32)).astype(np.float64)
        ref = conv_oracle(weights, x)
        assert np.max(np.abs(got - ref)) <= 1e-5

    def test_random_net_matches_oracle(self):
        g = rng(13)
        layers = (
            ConvLayer(
                kernel=(0.3 * g.standard_normal((3, 1, 3, 3))).astype(np.float32),
                bias=(0.1 * g.standard_normal(3)).astype(np.float32),
                activation="relu",
            ),
            ConvLayer(
                kernel=(0.3 * g.standard_normal((1, 3, 3, 3))).astype(np.float32),
                bias=(0.1 * g.standard_normal(1)).astype(np.float32),
                activation="none",
            ),
        )
        weights = ConvWeights(layers=layers)
        x = g.random((8, 8))
        got = conv_network_forward(weights, x.astype(np.float32)).astype(np.float64)
        ref = conv_oracle(weights, x)
        assert np.max(np.abs(got - ref)) <= 1e-5

    def test_fixture_is_a_smoother(self):
        # the committed fixture damps noise on a smooth signal
        g = rng(14)
        cols = np.linspace(0, 1, 32)
        smooth = np.tile(np.sin(2 * np.pi * cols), (32, 1))
        noisy = smooth + 0.1 * g.standard_normal((32, 32))
        spec = DenoiserSpec.conv_residual(fixture_weights_path())
        out = apply_denoiser(spec, noisy)
        assert np.mean((out - smooth) ** 2) < np.mean((noisy - smooth) ** 2)


class TestGaussian:
    def test_sigma_zero_identity(self):
        x = rng(15).standard_normal((7, 7))
        assert np.array_equal(gaussian_denoise(x, 0.0), x)

    def test_constant_unchanged(self):
        x = np.full((12, 12), 3.7)
        out = gaussian_denoise(x, 1.5)
        assert np.max(np.abs(out - x)) <= 1e-12

    def test_impulse_matches_kernel_oracle(self):
        n = 15
        x = np.zeros((n, n))
        x[7, 7] = 1.0
        out = gaussian_denoise(x, 1.0)
        # direct kernel evaluation
        radius = 3
        taps = np.exp(-0.5 * np.arange(-radius, radius + 1) ** 2)
        taps /= taps.sum()
        kernel2d = np.outer(taps, taps)
        assert np.max(np.abs(out[4:11, 4:11] - kernel2d)) <= 1e-9
        assert out[0, 0] == 0.0

    def test_mean_preserved_constant(self):
        x = np.full((20, 20), 1.25)
        assert abs(gaussian_denoise(x, 2.0).mean() - x.mean()) <= 1e-9

    def test_mean_preserved_interior_supported(self):
        # phantoms with a quiet boundary band: reflect padding only re-weights
        # zero pixels, so the mean survives
        for seed in range(5):
            inner = rng(seed).random((24, 24))
            x = np.pad(inner, 8)
            out = gaussian_denoise(x, 1.0)
            assert abs(out.mean() - x.mean()) <= 1e-6 * max(abs(x.mean()), 1.0)

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            gaussian_denoise(np.zeros((5, 5)), -1.0)
