import numpy as np
import pytest

from movepose.errors import ConfigurationError, DimensionError
from movepose.ops import (FoldedConv, apply_activation, bilinear_upsample, conv2d, deconv2d,
                          fold_batchnorm)
from movepose.tensor_core import (ConvParams, naive_bilinear_upsample, naive_conv2d,
                                  naive_deconv2d)

from conftest import rel_err

TOL = 1e-4


def random_conv_case(rng, k, s, depthwise):
    cin = int(rng.integers(1, 7))
    cout = cin * int(rng.integers(1, 3)) if depthwise else int(rng.integers(1, 9))
    g = cin if depthwise else 1
    h, w = (int(v) for v in rng.integers(k, 15, 2))
    x = rng.standard_normal((int(rng.integers(1, 3)), cin, h, w)).astype(np.float32)
    wt = rng.standard_normal((cout, cin // g, k, k)).astype(np.float32)
    b = rng.standard_normal(cout).astype(np.float32)
    return x, wt, b, ConvParams(stride=s, padding=int(rng.integers(0, k // 2 + 1)), groups=g)


@pytest.mark.parametrize("k", [1, 3, 5, 7])
@pytest.mark.parametrize("s", [1, 2])
@pytest.mark.parametrize("depthwise", [False, True])
def test_conv2d_matches_oracle(rng, k, s, depthwise):
    for _ in range(4):
        x, w, b, p = random_conv_case(rng, k, s, depthwise)
        assert rel_err(conv2d(x, FoldedConv(w, b), p), naive_conv2d(x, w, b, p)) <= TOL


def test_conv2d_general_groups(rng):
    x = rng.standard_normal((1, 8, 9, 9)).astype(np.float32)
    w = rng.standard_normal((12, 2, 3, 3)).astype(np.float32)
    p = ConvParams(stride=2, padding=1, groups=4)
    assert rel_err(conv2d(x, FoldedConv(w, None), p), naive_conv2d(x, w, None, p)) <= TOL


def test_conv2d_dilation(rng):
    x = rng.standard_normal((1, 3, 12, 12)).astype(np.float32)
    w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
    p = ConvParams(padding=2, dilation=2)
    assert rel_err(conv2d(x, FoldedConv(w, None), p), naive_conv2d(x, w, None, p)) <= TOL


def test_pointwise_identity(rng):
    x = rng.standard_normal((1, 6, 7, 5)).astype(np.float32)
    eye = np.eye(6, dtype=np.float32).reshape(6, 6, 1, 1)
    np.testing.assert_array_equal(conv2d(x, FoldedConv(eye, np.zeros(6, np.float32))), x)


def test_depthwise_equals_independent_channels(rng):
    x = rng.standard_normal((1, 8, 16, 16)).astype(np.float32)
    w = rng.standard_normal((8, 1, 3, 3)).astype(np.float32)
    out = conv2d(x, FoldedConv(w, np.zeros(8, np.float32)), ConvParams(padding=1, groups=8))
    for c in range(8):
        ref = naive_conv2d(x[:, c:c + 1], w[c:c + 1], params=ConvParams(padding=1))
        assert rel_err(out[:, c:c + 1], ref) <= TOL


def test_conv2d_errors():
    with pytest.raises(DimensionError):
        conv2d(np.ones((1, 3, 5, 5)), FoldedConv(np.ones((2, 2, 3, 3), np.float32), None))
    with pytest.raises(ConfigurationError):
        conv2d(np.ones((1, 3, 5, 5)), FoldedConv(np.ones((2, 1, 3, 3), np.float32), None), ConvParams(groups=3))


def test_deconv2d_upsampling_case(rng):
    x = rng.standard_normal((1, 32, 32, 32)).astype(np.float32)
    w = (rng.standard_normal((32, 8, 4, 4)) * 0.1).astype(np.float32)
    b = rng.standard_normal(8).astype(np.float32)
    out = deconv2d(x, FoldedConv(w, b), stride=2, padding=1)
    assert out.shape == (1, 8, 64, 64)
    assert rel_err(out, naive_deconv2d(x, w, b, stride=2, padding=1)) <= TOL


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 7])
@pytest.mark.parametrize("s", [1, 2, 3])
def test_deconv2d_matches_oracle(rng, k, s):
    for _ in range(3):
        cin, opg = (int(v) for v in rng.integers(1, 5, 2))
        g = int(rng.choice([1, cin]))
        x = rng.standard_normal((1, cin, *(int(v) for v in rng.integers(1, 8, 2)))).astype(np.float32)
        w = rng.standard_normal((cin, opg, k, k)).astype(np.float32)
        b = rng.standard_normal(opg * g).astype(np.float32)
        p = int(rng.integers(0, k))
        op = int(rng.integers(0, s))
        try:
            ref = naive_deconv2d(x, w, b, s, p, op, groups=g)
        except ConfigurationError:
            with pytest.raises(ConfigurationError):
                deconv2d(x, FoldedConv(w, b), s, p, op, groups=g)
            continue
        assert rel_err(deconv2d(x, FoldedConv(w, b), s, p, op, groups=g), ref) <= TOL


def test_deconv2d_identity_and_zero_input(rng):
    x = rng.standard_normal((1, 4, 6, 6)).astype(np.float32)
    eye = np.eye(4, dtype=np.float32).reshape(4, 4, 1, 1)
    np.testing.assert_array_equal(deconv2d(x, FoldedConv(eye, np.zeros(4, np.float32)), stride=1), x)
    b = np.array([0.5, -1.0, 2.0], np.float32)
    out = deconv2d(np.zeros((1, 2, 3, 3), np.float32), FoldedConv(rng.standard_normal((2, 3, 4, 4)).astype(np.float32), b),
                   stride=2, padding=1)
    for c in range(3):
        assert np.all(out[0, c] == b[c])


def test_bilinear_examples_and_oracle(rng):
    np.testing.assert_array_equal(bilinear_upsample(np.full((1, 1, 2, 2), 5.0), 2), np.full((1, 1, 4, 4), 5.0))
    np.testing.assert_array_equal(bilinear_upsample(np.full((1, 1, 1, 1), 3.0), 4), np.full((1, 1, 4, 4), 3.0))
    out = bilinear_upsample(np.array([[[[0.0, 1.0], [0.0, 1.0]]]]), 2)
    np.testing.assert_allclose(out[0, 0], np.tile([0.0, 0.25, 0.75, 1.0], (4, 1)), atol=1e-7)
    for scale in (2, 3, 4):
        x = rng.standard_normal((2, 3, int(rng.integers(1, 9)), int(rng.integers(1, 9)))).astype(np.float32)
        assert rel_err(bilinear_upsample(x, scale), naive_bilinear_upsample(x, scale)) <= TOL
    with pytest.raises(ConfigurationError):
        bilinear_upsample(np.ones((1, 1, 2, 2)), 1)


def test_activations():
    x = np.array([-1.0, 0.0, 2.0], np.float32)
    np.testing.assert_array_equal(apply_activation(x, "relu"), [0, 0, 2])
    np.testing.assert_array_equal(apply_activation(np.array([-1, 3, 9], np.float32), "relu6"), [0, 3, 6])
    assert apply_activation(x, "identity") is x
    with pytest.raises(ConfigurationError):
        apply_activation(x, "gelu")


def test_fold_identity_normalization(rng):
    w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
    b = rng.standard_normal(4).astype(np.float32)
    f = fold_batchnorm(w, b, np.zeros(4), np.ones(4), np.ones(4), np.zeros(4), eps=0.0)
    np.testing.assert_array_equal(f.weight, w)
    np.testing.assert_array_equal(f.bias, b)


def test_fold_matches_conv_then_batchnorm(rng):
    for _ in range(10):
        x = rng.standard_normal((1, 3, 10, 10)).astype(np.float32)
        w = rng.standard_normal((5, 3, 3, 3)).astype(np.float32)
        b, mean, beta = rng.standard_normal((3, 5)).astype(np.float32)
        var, gamma = rng.uniform(0.2, 2.0, (2, 5)).astype(np.float32)
        p = ConvParams(padding=1)
        y = naive_conv2d(x, w, b, p)
        ref = ((y - mean.reshape(1, -1, 1, 1)) / np.sqrt(var.reshape(1, -1, 1, 1) + 1e-5)
               * gamma.reshape(1, -1, 1, 1) + beta.reshape(1, -1, 1, 1))
        got = conv2d(x, fold_batchnorm(w, b, mean, var, gamma, beta, 1e-5), p)
        assert rel_err(got, ref) <= TOL


def test_fold_zero_variance_is_finite(rng):
    f = fold_batchnorm(np.ones((2, 1, 1, 1)), None, np.zeros(2), np.zeros(2), np.ones(2), np.zeros(2), eps=1e-5)
    assert np.all(np.isfinite(f.weight)) and np.all(np.isfinite(f.bias))


def test_fold_length_mismatch():
    with pytest.raises(DimensionError):
        fold_batchnorm(np.ones((2, 1, 1, 1)), None, np.zeros(3), np.ones(2), np.ones(2), np.zeros(2))


def test_kernels_are_deterministic(rng):
    x = rng.standard_normal((1, 8, 17, 17)).astype(np.float32)
    f = FoldedConv(rng.standard_normal((16, 8, 5, 5)).astype(np.float32), np.zeros(16, np.float32))
    a = conv2d(x, f, ConvParams(stride=2, padding=2))
    b = conv2d(x, f, ConvParams(stride=2, padding=2))
    np.testing.assert_array_equal(a, b)
    d = FoldedConv(rng.standard_normal((8, 4, 4, 4)).astype(np.float32), np.zeros(4, np.float32))
    np.testing.assert_array_equal(deconv2d(x, d, 2, 1), deconv2d(x, d, 2, 1))
