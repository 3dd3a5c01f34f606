"""Optimized CPU kernels used by the inference graph.

Convolution goes through im2col plus a single BLAS matrix product per group,
with dedicated paths for pointwise (1x1) and depthwise convolutions.
Transposed convolution uses the matching col2im scatter. All kernels take and
return float32 NCHW arrays and never mutate their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, DimensionError
from .tensor_core import (ConvParams, _pair, as_tensor, check_conv_shapes,
                          check_deconv_shapes)

ACTIVATIONS = ("relu", "relu6", "identity")
KERNEL_SIZES = (1, 3, 5, 7)


@dataclass(frozen=True)
class FoldedConv:
    """Convolution weights with any batch-norm affine already multiplied in."""

    weight: np.ndarray
    bias: np.ndarray


def fold_batchnorm(weight, bias, bn_mean, bn_var, bn_gamma, bn_beta, eps: float = 1e-5,
                   out_axis: int = 0) -> FoldedConv:
    """Fold an inference-mode batch norm into the preceding convolution.

    ``out_axis`` names the output-channel axis of ``weight``: 0 for conv
    weights (Cout, Cin/g, Kh, Kw), 1 for deconv weights (Cin, Cout/g, Kh, Kw).
    """
    weight = np.asarray(weight, dtype=np.float32)
    cout = weight.shape[out_axis]
    if bias is None:
        bias = np.zeros(cout, dtype=np.float32)
    vecs = {"bias": bias, "bn_mean": bn_mean, "bn_var": bn_var, "bn_gamma": bn_gamma, "bn_beta": bn_beta}
    for name, v in vecs.items():
        if np.shape(v) != (cout,):
            raise DimensionError(f"{name} must have length {cout} (weight axis {out_axis}), got {np.shape(v)}")
    var = np.asarray(bn_var, dtype=np.float32)
    if np.any(var < 0):
        raise ConfigurationError("bn_var must be non-negative")
    scale = np.asarray(bn_gamma, dtype=np.float32) / np.sqrt(var + np.float32(eps))
    shape = [1] * weight.ndim
    shape[out_axis] = cout
    folded_w = (weight * scale.reshape(shape)).astype(np.float32)
    folded_b = ((np.asarray(bias, dtype=np.float32) - np.asarray(bn_mean, dtype=np.float32)) * scale
                + np.asarray(bn_beta, dtype=np.float32)).astype(np.float32)
    return FoldedConv(np.ascontiguousarray(folded_w), folded_b)


def _windows(x, kh, kw, params: ConvParams, ho, wo):
    ph, pw = params.padding
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    dh, dw = params.dilation
    sh, sw = params.stride
    win = sliding_window_view(x, ((kh - 1) * dh + 1, (kw - 1) * dw + 1), axis=(2, 3))
    return win[:, :, ::sh, ::sw, ::dh, ::dw][:, :, :ho, :wo]


def conv2d(x, folded: FoldedConv, params: ConvParams = ConvParams()) -> np.ndarray:
    x = as_tensor(x)
    w, b = folded.weight, folded.bias
    ho, wo = check_conv_shapes(x, w, b, params)
    n, cin = x.shape[:2]
    cout, cpg, kh, kw = w.shape
    g = params.groups

    if kh == kw == 1 and params.stride == (1, 1) and params.padding == (0, 0) and g == 1:
        out = np.matmul(w.reshape(cout, cin), x.reshape(n, cin, -1))
        out = out.reshape(n, cout, ho, wo)
    elif g == cin and cpg == 1:
        out = _depthwise(x, w, params, ho, wo)
    else:
        win = _windows(x, kh, kw, params, ho, wo)  # (N, Cin, Ho, Wo, Kh, Kw)
        opg = cout // g
        out = np.empty((n, cout, ho, wo), dtype=np.float32)
        for gi in range(g):
            part = win[:, gi * cpg:(gi + 1) * cpg]
            cols = part.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, cpg * kh * kw)
            wmat = w[gi * opg:(gi + 1) * opg].reshape(opg, -1)
            res = cols @ wmat.T  # (N*Ho*Wo, opg)
            out[:, gi * opg:(gi + 1) * opg] = res.reshape(n, ho, wo, opg).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1)
    return np.ascontiguousarray(out, dtype=np.float32)


def _depthwise(x, w, params: ConvParams, ho, wo):
    n, c = x.shape[:2]
    mult = w.shape[0] // c
    kh, kw = w.shape[2:]
    ph, pw = params.padding
    sh, sw = params.stride
    dh, dw = params.dilation
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    if mult > 1:
        xp = np.repeat(xp, mult, axis=1)
    out = np.zeros((n, c * mult, ho, wo), dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            r0, c0 = i * dh, j * dw
            tap = xp[:, :, r0:r0 + (ho - 1) * sh + 1:sh, c0:c0 + (wo - 1) * sw + 1:sw]
            out += tap * w[:, 0, i, j].reshape(1, -1, 1, 1)
    return out


def deconv2d(x, folded: FoldedConv, stride=(2, 2), padding=(0, 0), output_padding=(0, 0),
             groups: int = 1) -> np.ndarray:
    """Transposed convolution by matrix product followed by a col2im scatter-add.

    Each input pixel ``(h, w)`` contributes ``W[:, :, i, j] * x`` to output
    position ``(h*sh - ph + i, w*sw - pw + j)``.
    """
    x = as_tensor(x)
    w, b = folded.weight, folded.bias
    stride, padding, output_padding = _pair(stride), _pair(padding), _pair(output_padding)
    ho, wo = check_deconv_shapes(x, w, b, stride, padding, output_padding, groups)
    n, cin, h, wd = x.shape
    _, opg, kh, kw = w.shape
    ipg = cin // groups
    sh, sw = stride
    full_h = (h - 1) * sh + kh + output_padding[0]
    full_w = (wd - 1) * sw + kw + output_padding[1]
    full = np.zeros((n, opg * groups, full_h, full_w), dtype=np.float32)
    for gi in range(groups):
        xg = x[:, gi * ipg:(gi + 1) * ipg].reshape(n, ipg, h * wd)
        wg = w[gi * ipg:(gi + 1) * ipg].reshape(ipg, opg * kh * kw)
        cols = np.matmul(wg.T, xg).reshape(n, opg, kh, kw, h, wd)
        dst = full[:, gi * opg:(gi + 1) * opg]
        for i in range(kh):
            for j in range(kw):
                dst[:, :, i:i + (h - 1) * sh + 1:sh, j:j + (wd - 1) * sw + 1:sw] += cols[:, :, i, j]
    out = full[:, :, padding[0]:padding[0] + ho, padding[1]:padding[1] + wo]
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1)
    return np.ascontiguousarray(out, dtype=np.float32)


def _interp_matrix(n_in: int, scale: int) -> np.ndarray:
    n_out = n_in * scale
    src = (np.arange(n_out, dtype=np.float64) + 0.5) / scale - 0.5
    src = np.maximum(src, 0.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    m = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1.0 - frac)
    np.add.at(m, (rows, i1), frac)
    return m.astype(np.float32)


def bilinear_upsample(x, scale: int) -> np.ndarray:
    """Separable bilinear upsampling with the half-pixel (align_corners=False) grid."""
    x = as_tensor(x, ndim=4)
    if int(scale) != scale or scale < 2:
        raise ConfigurationError(f"scale must be an integer >= 2, got {scale!r}")
    ry = _interp_matrix(x.shape[2], int(scale))
    rx = _interp_matrix(x.shape[3], int(scale))
    out = np.matmul(np.matmul(ry, x), rx.T)
    return np.ascontiguousarray(out, dtype=np.float32)


def apply_activation(x, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, np.float32(0))
    if kind == "relu6":
        return np.clip(x, np.float32(0), np.float32(6))
    if kind == "identity":
        return x
    raise ConfigurationError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def linear(x, weight, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """``x @ weight.T + bias`` over the last axis."""
    out = np.matmul(x, weight.T)
    if bias is not None:
        out = out + bias
    return out.astype(np.float32, copy=False)
