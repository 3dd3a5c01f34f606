import numba
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from movepose.errors import ConfigurationError, DimensionError
from movepose.tensor_core import (ConvParams, as_tensor, naive_bilinear_upsample, naive_conv2d,
                                  naive_deconv2d)


@numba.njit(cache=True)
def _flat_conv(xd, shape_x, wd, shape_w, out, shape_o, sh, sw, ph, pw, groups):
    # Second, independent formulation over flat buffers with explicit offsets.
    N, C, H, W = shape_x[0], shape_x[1], shape_x[2], shape_x[3]
    O, CG, KH, KW = shape_w[0], shape_w[1], shape_w[2], shape_w[3]
    HO, WO = shape_o[2], shape_o[3]
    OG = O // groups
    for idx in range(N * O * HO * WO):
        wo = idx % WO
        ho = (idx // WO) % HO
        o = (idx // (WO * HO)) % O
        n = idx // (WO * HO * O)
        base_c = (o // OG) * CG
        acc = np.float32(0.0)
        for c in range(CG):
            for i in range(KH):
                y = ho * sh - ph + i
                for j in range(KW):
                    xx = wo * sw - pw + j
                    if 0 <= y < H and 0 <= xx < W:
                        acc += xd[((n * C + base_c + c) * H + y) * W + xx] * wd[((o * CG + c) * KH + i) * KW + j]
        out[idx] = acc


def flat_conv(x, w, stride, pad, groups=1):
    ho = (x.shape[2] + 2 * pad - w.shape[2]) // stride + 1
    wo = (x.shape[3] + 2 * pad - w.shape[3]) // stride + 1
    shape_o = np.array([x.shape[0], w.shape[0], ho, wo])
    out = np.zeros(int(np.prod(shape_o)), np.float32)
    _flat_conv(x.ravel(), np.array(x.shape), w.ravel(), np.array(w.shape), out, shape_o,
               stride, stride, pad, pad, groups)
    return out.reshape(shape_o)


def test_tensor_layout_offset():
    x = as_tensor(np.arange(2 * 3 * 4 * 5).reshape(2, 3, 4, 5))
    n, c, h, w = 1, 2, 3, 4
    assert x.ravel()[((n * 3 + c) * 4 + h) * 5 + w] == x[n, c, h, w]
    assert x.dtype == np.float32 and x.flags.c_contiguous


def test_as_tensor_rejects_zero_extent():
    with pytest.raises(DimensionError):
        as_tensor(np.zeros((1, 0, 3, 3)))


def test_conv_all_ones_valid():
    out = naive_conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)))
    assert out.shape == (1, 1, 1, 1) and out[0, 0, 0, 0] == 9.0


def test_conv_all_ones_padded():
    out = naive_conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)), params=ConvParams(padding=1))
    np.testing.assert_array_equal(out[0, 0], [[4, 6, 4], [6, 9, 6], [4, 6, 4]])


def test_conv_matches_flat_reimplementation(rng):
    x = rng.standard_normal((1, 16, 32, 32)).astype(np.float32)
    w = rng.standard_normal((32, 16, 7, 7)).astype(np.float32)
    out = naive_conv2d(x, w, params=ConvParams(stride=2, padding=3))
    assert out.shape == (1, 32, 16, 16)
    np.testing.assert_array_equal(out, flat_conv(x, w, 2, 3))


def test_conv_grouped_matches_flat_reimplementation(rng):
    x = rng.standard_normal((2, 6, 9, 8)).astype(np.float32)
    w = rng.standard_normal((9, 2, 3, 3)).astype(np.float32)
    out = naive_conv2d(x, w, params=ConvParams(stride=1, padding=1, groups=3))
    np.testing.assert_array_equal(out, flat_conv(x, w, 1, 1, groups=3))


def test_conv_errors():
    with pytest.raises(DimensionError, match="channel axis"):
        naive_conv2d(np.ones((1, 4, 5, 5)), np.ones((2, 3, 3, 3)))
    with pytest.raises(ConfigurationError, match="groups"):
        naive_conv2d(np.ones((1, 4, 5, 5)), np.ones((3, 2, 3, 3)), params=ConvParams(groups=2))
    with pytest.raises(DimensionError, match="bias"):
        naive_conv2d(np.ones((1, 1, 5, 5)), np.ones((2, 1, 3, 3)), bias=np.ones(3))


@settings(max_examples=60, deadline=None)
@given(h=st.integers(1, 12), w=st.integers(1, 12), k=st.sampled_from([1, 3, 5, 7]),
       s=st.integers(1, 3), p=st.integers(0, 3), d=st.integers(1, 2))
def test_conv_output_extent_formula(h, w, k, s, p, d):
    params = ConvParams(stride=s, padding=p, dilation=d)
    ho = (h + 2 * p - d * (k - 1) - 1) // s + 1
    wo = (w + 2 * p - d * (k - 1) - 1) // s + 1
    if ho < 1 or wo < 1:
        with pytest.raises(DimensionError):
            naive_conv2d(np.ones((1, 1, h, w)), np.ones((1, 1, k, k)), params=params)
        return
    out = naive_conv2d(np.ones((1, 1, h, w)), np.ones((1, 1, k, k)), params=params)
    assert out.shape == (1, 1, ho, wo)
    assert params.output_extent(h, w, k, k) == (ho, wo)


def test_conv_linearity(rng):
    for _ in range(10):
        x, y = rng.standard_normal((2, 1, 3, 8, 8)).astype(np.float32)
        w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
        a, b = rng.uniform(-2, 2, 2).astype(np.float32)
        p = ConvParams(padding=1)
        lhs = naive_conv2d(a * x + b * y, w, params=p)
        rhs = a * naive_conv2d(x, w, params=p) + b * naive_conv2d(y, w, params=p)
        assert np.abs(lhs - rhs).max() <= 1e-5 * max(1.0, np.abs(rhs).max())


def test_depthwise_equals_per_channel(rng):
    x = rng.standard_normal((1, 5, 10, 10)).astype(np.float32)
    w = rng.standard_normal((5, 1, 3, 3)).astype(np.float32)
    p = ConvParams(padding=1, groups=5)
    out = naive_conv2d(x, w, params=p)
    for c in range(5):
        single = naive_conv2d(x[:, c:c + 1], w[c:c + 1], params=ConvParams(padding=1))
        np.testing.assert_array_equal(out[:, c:c + 1], single)


def test_deconv_single_tap_broadcasts_kernel():
    w = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
    out = naive_deconv2d(np.full((1, 1, 1, 1), 2.5), w, stride=2)
    np.testing.assert_array_equal(out[0, 0], 2.5 * w[0, 0])


def test_deconv_zero_insertion_tiles():
    out = naive_deconv2d(np.ones((1, 1, 2, 2)), np.ones((1, 1, 2, 2)), stride=2)
    np.testing.assert_array_equal(out, np.ones((1, 1, 4, 4)))


def test_deconv_identity(rng):
    x = rng.standard_normal((1, 3, 5, 4)).astype(np.float32)
    w = np.eye(3, dtype=np.float32).reshape(3, 3, 1, 1)
    np.testing.assert_array_equal(naive_deconv2d(x, w), x)


def test_deconv_output_extent_and_error(rng):
    out = naive_deconv2d(np.ones((1, 2, 5, 6)), np.ones((2, 3, 4, 4)), stride=2, padding=1, output_padding=1)
    assert out.shape == (1, 3, (5 - 1) * 2 - 2 + 4 + 1, (6 - 1) * 2 - 2 + 4 + 1)
    with pytest.raises(ConfigurationError):
        naive_deconv2d(np.ones((1, 1, 1, 1)), np.ones((1, 1, 1, 1)), padding=1)


def test_deconv_is_adjoint_of_conv(rng):
    for _ in range(20):
        cin, cout = rng.integers(1, 5, 2)
        k = int(rng.choice([1, 2, 3, 4, 5]))
        s = int(rng.integers(1, 4))
        p = int(rng.integers(0, k))
        h, w = rng.integers(k + 1, 12, 2)
        weight = rng.standard_normal((cout, cin, k, k)).astype(np.float32)
        x = rng.standard_normal((1, cin, h, w)).astype(np.float32)
        y_shape = naive_conv2d(x, weight, params=ConvParams(stride=s, padding=p)).shape
        y = rng.standard_normal(y_shape).astype(np.float32)
        # output_padding recovers the rows the strided conv dropped
        op = tuple(int(v) for v in (np.array([h, w]) + 2 * p - k) % s)
        back = naive_deconv2d(y, weight, stride=s, padding=p, output_padding=op)
        lhs = float(np.vdot(naive_conv2d(x, weight, params=ConvParams(stride=s, padding=p)).astype(np.float64), y))
        rhs = float(np.vdot(x.astype(np.float64), back))
        assert abs(lhs - rhs) <= 1e-4 * max(abs(lhs), 1.0)


def test_bilinear_oracle_examples():
    np.testing.assert_array_equal(naive_bilinear_upsample(np.full((1, 1, 2, 2), 5.0), 2), np.full((1, 1, 4, 4), 5.0))
    np.testing.assert_array_equal(naive_bilinear_upsample(np.full((1, 1, 1, 1), 3.0), 4), np.full((1, 1, 4, 4), 3.0))
    out = naive_bilinear_upsample(np.array([[[[0.0, 1.0], [0.0, 1.0]]]]), 2)
    for row in out[0, 0]:
        np.testing.assert_allclose(row, [0.0, 0.25, 0.75, 1.0])
    with pytest.raises(ConfigurationError):
        naive_bilinear_upsample(np.ones((1, 1, 2, 2)), 1)
