"""Tensor conventions and naive reference kernels.

A tensor is a C-contiguous ``float32`` numpy array in NCHW layout, so element
``(n, c, h, w)`` lives at flat offset ``((n*C + c)*H + h)*W + w``.

The ``naive_*`` functions are deliberately slow direct loops. They are the
ground truth the optimized kernels in :mod:`movepose.ops` are tested against,
and they accumulate in float32 in a fixed order (``cin``, then ``kh``, then
``kw`` innermost) so results are reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numba
import numpy as np

from .errors import ConfigurationError, DimensionError

Pair = Tuple[int, int]


def as_tensor(x, ndim: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a contiguous float32 array, validating extents."""
    t = np.ascontiguousarray(x, dtype=np.float32)
    if ndim is not None and t.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-D tensor, got shape {t.shape}")
    if any(e < 1 for e in t.shape):
        raise DimensionError(f"all extents must be >= 1, got shape {t.shape}")
    return t


def _pair(v) -> Pair:
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ConfigurationError(f"expected a pair, got {v!r}")
        return int(v[0]), int(v[1])
    return int(v), int(v)


@dataclass(frozen=True)
class ConvParams:
    stride: Pair = (1, 1)
    padding: Pair = (0, 0)
    dilation: Pair = (1, 1)
    groups: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stride", _pair(self.stride))
        object.__setattr__(self, "padding", _pair(self.padding))
        object.__setattr__(self, "dilation", _pair(self.dilation))
        if min(self.stride) < 1:
            raise ConfigurationError(f"stride must be >= 1, got {self.stride}")
        if min(self.padding) < 0:
            raise ConfigurationError(f"padding must be >= 0, got {self.padding}")
        if min(self.dilation) < 1:
            raise ConfigurationError(f"dilation must be >= 1, got {self.dilation}")
        if self.groups < 1:
            raise ConfigurationError(f"groups must be >= 1, got {self.groups}")

    def output_extent(self, h: int, w: int, kh: int, kw: int) -> Pair:
        ho = (h + 2 * self.padding[0] - self.dilation[0] * (kh - 1) - 1) // self.stride[0] + 1
        wo = (w + 2 * self.padding[1] - self.dilation[1] * (kw - 1) - 1) // self.stride[1] + 1
        return ho, wo


def check_conv_shapes(x: np.ndarray, weight: np.ndarray, bias, params: ConvParams) -> Tuple[int, int]:
    """Validate a conv call and return the output spatial extent."""
    if x.ndim != 4:
        raise DimensionError(f"input must be 4-D (N, C, H, W), got shape {x.shape}")
    if weight.ndim != 4:
        raise DimensionError(f"weight must be 4-D (Cout, Cin/groups, Kh, Kw), got shape {weight.shape}")
    cin, cout, g = x.shape[1], weight.shape[0], params.groups
    if cin % g or cout % g:
        raise ConfigurationError(f"groups={g} must divide input channels {cin} and output channels {cout}")
    if weight.shape[1] != cin // g:
        raise DimensionError(
            f"channel axis mismatch: weight axis 1 is {weight.shape[1]}, expected Cin/groups = {cin // g}")
    if bias is not None and np.shape(bias) != (cout,):
        raise DimensionError(f"bias axis 0 must have length Cout={cout}, got shape {np.shape(bias)}")
    ho, wo = params.output_extent(x.shape[2], x.shape[3], weight.shape[2], weight.shape[3])
    if ho < 1 or wo < 1:
        raise DimensionError(f"height/width axis: kernel does not fit input, output extent ({ho}, {wo})")
    return ho, wo


@numba.njit(cache=True)
def _conv_loops(x, w, out, sh, sw, ph, pw, dh, dw, groups):
    n_, cin, h, wd = x.shape
    cout, cpg, kh_, kw_ = w.shape
    _, _, ho_, wo_ = out.shape
    opg = cout // groups
    for n in range(n_):
        for co in range(cout):
            g = co // opg
            for ho in range(ho_):
                for wo in range(wo_):
                    acc = np.float32(0.0)
                    for ci in range(cpg):
                        for kh in range(kh_):
                            hi = ho * sh - ph + kh * dh
                            if hi < 0 or hi >= h:
                                continue
                            for kw in range(kw_):
                                wi = wo * sw - pw + kw * dw
                                if wi < 0 or wi >= wd:
                                    continue
                                acc += x[n, g * cpg + ci, hi, wi] * w[co, ci, kh, kw]
                    out[n, co, ho, wo] = acc


def naive_conv2d(x, weight, bias=None, params: ConvParams = ConvParams()) -> np.ndarray:
    """Direct convolution with zero padding. Bias is added after accumulation."""
    x = as_tensor(x)
    weight = as_tensor(weight)
    ho, wo = check_conv_shapes(x, weight, bias, params)
    out = np.zeros((x.shape[0], weight.shape[0], ho, wo), dtype=np.float32)
    _conv_loops(x, weight, out, *params.stride, *params.padding, *params.dilation, params.groups)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float32).reshape(1, -1, 1, 1)
    return out


def deconv_output_extent(h: int, w: int, kh: int, kw: int, stride: Pair, padding: Pair,
                         output_padding: Pair) -> Pair:
    return ((h - 1) * stride[0] - 2 * padding[0] + kh + output_padding[0],
            (w - 1) * stride[1] - 2 * padding[1] + kw + output_padding[1])


def check_deconv_shapes(x, weight, bias, stride, padding, output_padding, groups) -> Pair:
    if x.ndim != 4:
        raise DimensionError(f"input must be 4-D (N, C, H, W), got shape {x.shape}")
    if weight.ndim != 4:
        raise DimensionError(f"weight must be 4-D (Cin, Cout/groups, Kh, Kw), got shape {weight.shape}")
    if min(stride) < 1 or min(padding) < 0 or min(output_padding) < 0 or groups < 1:
        raise ConfigurationError(
            f"invalid deconv params stride={stride} padding={padding} "
            f"output_padding={output_padding} groups={groups}")
    cin = x.shape[1]
    if cin % groups:
        raise ConfigurationError(f"groups={groups} must divide input channels {cin}")
    if weight.shape[0] != cin:
        raise DimensionError(f"channel axis mismatch: weight axis 0 is {weight.shape[0]}, input has {cin}")
    cout = weight.shape[1] * groups
    if bias is not None and np.shape(bias) != (cout,):
        raise DimensionError(f"bias axis 0 must have length Cout={cout}, got shape {np.shape(bias)}")
    ho, wo = deconv_output_extent(x.shape[2], x.shape[3], weight.shape[2], weight.shape[3],
                                  stride, padding, output_padding)
    if ho < 1 or wo < 1:
        raise ConfigurationError(f"computed deconv output extent ({ho}, {wo}) is not positive")
    return ho, wo


def naive_deconv2d(x, weight, bias=None, stride=(1, 1), padding=(0, 0), output_padding=(0, 0),
                   groups: int = 1) -> np.ndarray:
    """Transposed convolution built literally from zero insertion plus convolution.

    ``stride - 1`` zeros go between neighbouring input samples, the result is
    padded by ``K - 1 - padding`` on each side (cropped where that is negative,
    with ``output_padding`` extra rows/columns at the bottom/right), and
    convolved with the spatially flipped, in/out transposed kernel.
    """
    x = as_tensor(x)
    weight = as_tensor(weight)
    stride, padding, output_padding = _pair(stride), _pair(padding), _pair(output_padding)
    ho, wo = check_deconv_shapes(x, weight, bias, stride, padding, output_padding, groups)
    n, cin, h, w = x.shape
    _, opg, kh, kw = weight.shape
    ipg = cin // groups

    z = np.zeros((n, cin, (h - 1) * stride[0] + 1, (w - 1) * stride[1] + 1), dtype=np.float32)
    z[:, :, ::stride[0], ::stride[1]] = x

    def pad_axis(a, axis, lo, hi):
        if lo < 0:
            a = np.take(a, range(-lo, a.shape[axis]), axis=axis)
            lo = 0
        if hi < 0:
            a = np.take(a, range(0, a.shape[axis] + hi), axis=axis)
            hi = 0
        widths = [(0, 0)] * a.ndim
        widths[axis] = (lo, hi)
        return np.pad(a, widths)

    z = pad_axis(z, 2, kh - 1 - padding[0], kh - 1 - padding[0] + output_padding[0])
    z = pad_axis(z, 3, kw - 1 - padding[1], kw - 1 - padding[1] + output_padding[1])

    # (Cin, Cout/g, Kh, Kw) -> (Cout, Cin/g, Kh, Kw), flipped spatially
    wt = weight.reshape(groups, ipg, opg, kh, kw).transpose(0, 2, 1, 3, 4)
    wt = np.ascontiguousarray(wt.reshape(groups * opg, ipg, kh, kw)[:, :, ::-1, ::-1])
    out = naive_conv2d(z, wt, bias, ConvParams(groups=groups))
    assert out.shape[2:] == (ho, wo)
    return out


@numba.njit(cache=True)
def _bilinear_loops(x, out, scale):
    n_, c_, h, w = x.shape
    for n in range(n_):
        for c in range(c_):
            for oy in range(h * scale):
                sy = (oy + 0.5) / scale - 0.5
                if sy < 0.0:
                    sy = 0.0
                y0 = int(np.floor(sy))
                y1 = min(y0 + 1, h - 1)
                fy = sy - y0
                for ox in range(w * scale):
                    sx = (ox + 0.5) / scale - 0.5
                    if sx < 0.0:
                        sx = 0.0
                    x0 = int(np.floor(sx))
                    x1 = min(x0 + 1, w - 1)
                    fx = sx - x0
                    top = x[n, c, y0, x0] * (1.0 - fx) + x[n, c, y0, x1] * fx
                    bot = x[n, c, y1, x0] * (1.0 - fx) + x[n, c, y1, x1] * fx
                    out[n, c, oy, ox] = top * (1.0 - fy) + bot * fy


def naive_bilinear_upsample(x, scale: int) -> np.ndarray:
    """Per-pixel bilinear upsampling, half-pixel grid (align_corners=False).

    Output pixel ``o`` samples source coordinate ``(o + 0.5)/scale - 0.5``,
    clamped below at 0; the upper neighbour index is clamped at the border.
    """
    x = as_tensor(x, ndim=4)
    if int(scale) != scale or scale < 2:
        raise ConfigurationError(f"scale must be an integer >= 2, got {scale!r}")
    scale = int(scale)
    out = np.empty(x.shape[:2] + (x.shape[2] * scale, x.shape[3] * scale), dtype=np.float32)
    _bilinear_loops(x, out, scale)
    return out
