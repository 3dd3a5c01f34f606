"""Top-down single-person inference: box -> crop -> network -> keypoints."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .config import load_keypoints, load_normalization
from .decode import (AffineTransform, PosePrediction, SimccOutput, dark_decode,
                     flip_fuse, simcc_decode, unmap_coords)
from .errors import ConfigurationError
from .imageio import check_image
from .model.graph import Graph, forward


@dataclass(frozen=True)
class PersonBox:
    x: float
    y: float
    w: float
    h: float
    score: Optional[float] = None

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ConfigurationError(f"person box needs positive width and height, got {self.w}x{self.h}")


@dataclass(frozen=True)
class PreprocessSpec:
    target: Tuple[int, int] = (256, 256)  # (width, height)
    mean: Tuple[float, float, float] = (0.485, 0.456, 0.406)
    std: Tuple[float, float, float] = (0.229, 0.224, 0.225)
    expansion: float = 1.25

    def __post_init__(self):
        if min(self.std) <= 0:
            raise ConfigurationError(f"std components must be positive, got {self.std}")
        if self.expansion <= 0:
            raise ConfigurationError(f"box expansion must be positive, got {self.expansion}")

    @classmethod
    def from_config(cls, size: int = 256, directory=None) -> "PreprocessSpec":
        n = load_normalization(directory)
        return cls((size, size), n.mean, n.std, n.box_expansion)


def compute_affine(box: PersonBox, spec: PreprocessSpec = PreprocessSpec()) -> AffineTransform:
    """Crop-to-original transform for a box grown by ``spec.expansion`` and padded to the crop aspect.

    The crop's corners (0, 0) and (W, H) land on the corners of the adjusted
    box, and the crop centre on the box centre.
    """
    tw, th = spec.target
    cx, cy = box.x + box.w / 2, box.y + box.h / 2
    w, h = box.w * spec.expansion, box.h * spec.expansion
    aspect = tw / th
    if w / h > aspect:
        h = w / aspect
    else:
        w = h * aspect
    s = w / tw
    return AffineTransform([[s, 0.0, cx - s * tw / 2], [0.0, s, cy - s * th / 2]])


def preprocess(image, t: AffineTransform, spec: PreprocessSpec = PreprocessSpec()) -> np.ndarray:
    """Bilinearly sample the crop and normalize it to a (1, 3, H, W) float32 tensor.

    Crop pixel (u, v) samples the image at ``t(u, v)``. Neighbours outside
    the image read as the channel mean, so fully outside samples normalize to 0.
    """
    img = check_image(image).astype(np.float64)
    ih, iw = img.shape[:2]
    tw, th = spec.target
    u, v = np.meshgrid(np.arange(tw, dtype=np.float64), np.arange(th, dtype=np.float64))
    m = t.matrix
    sx = m[0, 0] * u + m[0, 1] * v + m[0, 2]
    sy = m[1, 0] * u + m[1, 1] * v + m[1, 2]
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    fill = np.asarray(spec.mean, dtype=np.float64) * 255.0

    def tap(yy, xx):
        inside = (xx >= 0) & (xx < iw) & (yy >= 0) & (yy < ih)
        vals = img[np.clip(yy, 0, ih - 1), np.clip(xx, 0, iw - 1)]
        return np.where(inside[..., None], vals, fill)

    out = (tap(y0, x0) * (1 - fx) * (1 - fy) + tap(y0, x0 + 1) * fx * (1 - fy)
           + tap(y0 + 1, x0) * (1 - fx) * fy + tap(y0 + 1, x0 + 1) * fx * fy)
    out = (out / 255.0 - np.asarray(spec.mean)) / np.asarray(spec.std)
    return np.ascontiguousarray(out.transpose(2, 0, 1)[None], dtype=np.float32)


class Trace:
    """Counts network invocations made during inference."""

    def __init__(self):
        self.forward_calls = 0

    def forward(self, graph, x):
        self.forward_calls += 1
        return forward(graph, x)


def decode_head(out, graph: Graph) -> PosePrediction:
    if isinstance(out, SimccOutput):
        return simcc_decode(out)
    stride = graph.input_shape[3] / out.shape[-1]
    return dark_decode(out, stride=stride)


def infer_person(graph: Graph, image, box: PersonBox, flip_test: bool = False,
                 spec: Optional[PreprocessSpec] = None,
                 flip_pairs: Optional[Sequence[Tuple[int, int]]] = None,
                 trace: Optional[Trace] = None) -> PosePrediction:
    """Estimate one person's keypoints in original-image coordinates.

    Runs one forward pass, or two with ``flip_test`` (the second on the
    horizontally mirrored crop, fused after un-flipping).
    """
    trace = trace or Trace()
    if spec is None:
        spec = PreprocessSpec.from_config(graph.input_shape[3])
    if spec.target != (graph.input_shape[3], graph.input_shape[2]):
        raise ConfigurationError(f"crop size {spec.target} does not match graph input {graph.input_shape}")
    t = compute_affine(box, spec)
    x = preprocess(image, t, spec)
    out = trace.forward(graph, x)
    if flip_test:
        if flip_pairs is None:
            flip_pairs = load_keypoints().flip_pairs
        out_flipped = trace.forward(graph, np.ascontiguousarray(x[..., ::-1]))
        out = flip_fuse(out, out_flipped, flip_pairs)
    return unmap_coords(decode_head(out, graph), t)
