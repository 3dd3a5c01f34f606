"""Turn head outputs into keypoint coordinates.

Tie-breaking is lowest-index-wins everywhere (``np.argmax`` semantics), so
every decoder is a pure function of its input values. Coordinates use the
pixel-index convention: position ``x`` is where pixel column ``x`` is sampled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, DimensionError

CROP = "crop"
ORIGINAL = "original"


@dataclass(frozen=True)
class SimccOutput:
    """Per-keypoint 1-D classification vectors, ``x``: (..., K, W*k), ``y``: (..., K, H*k)."""

    x: np.ndarray
    y: np.ndarray
    split_ratio: float = 2.0

    def __post_init__(self):
        if self.split_ratio < 1:
            raise ConfigurationError(f"splitting factor must be >= 1, got {self.split_ratio}")
        if self.x.shape[:-1] != self.y.shape[:-1]:
            raise DimensionError(f"x and y vectors disagree on keypoint axes: {self.x.shape} vs {self.y.shape}")


@dataclass
class PosePrediction:
    """``keypoints`` is a (K, 3) array of (x, y, score); ``frame`` is 'crop' or 'original'."""

    keypoints: np.ndarray
    frame: str = CROP
    score: float = field(default=None)

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64)
        if self.keypoints.ndim != 2 or self.keypoints.shape[1] != 3:
            raise DimensionError(f"keypoints must be (K, 3), got {self.keypoints.shape}")
        if self.frame not in (CROP, ORIGINAL):
            raise ConfigurationError(f"unknown coordinate frame {self.frame!r}")
        if self.score is None:
            self.score = float(self.keypoints[:, 2].mean()) if len(self.keypoints) else 0.0

    @property
    def xy(self) -> np.ndarray:
        return self.keypoints[:, :2]

    @property
    def scores(self) -> np.ndarray:
        return self.keypoints[:, 2]


class AffineTransform:
    """2x3 matrix mapping crop coordinates to original-image coordinates."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise DimensionError(f"affine matrix must be 2x3, got {m.shape}")
        if abs(np.linalg.det(m[:, :2])) < 1e-12:
            raise ConfigurationError("affine transform is not invertible")
        self.matrix = m

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def inverse(self) -> "AffineTransform":
        a = np.linalg.inv(self.matrix[:, :2])
        return AffineTransform(np.hstack([a, -(a @ self.matrix[:, 2])[:, None]]))

    def __repr__(self):
        return f"AffineTransform({self.matrix.tolist()})"


def _squeeze_batch(a: np.ndarray, ndim: int) -> np.ndarray:
    while a.ndim > ndim and a.shape[0] == 1:
        a = a[0]
    if a.ndim != ndim:
        raise DimensionError(f"expected a single-person output with {ndim} axes, got shape {a.shape}")
    return a


def _peak_prob(v: np.ndarray, idx: np.ndarray) -> np.ndarray:
    v = v.astype(np.float64)
    z = np.exp(v - v.max(axis=-1, keepdims=True))
    z /= z.sum(axis=-1, keepdims=True)
    return np.take_along_axis(z, idx[:, None], axis=-1)[:, 0]


def simcc_decode(output: SimccOutput) -> PosePrediction:
    """Coordinate = argmax bin / splitting factor, per axis.

    The score is the softmax probability at the x peak times the one at the y
    peak.
    """
    ox = _squeeze_batch(np.asarray(output.x), 2)
    oy = _squeeze_batch(np.asarray(output.y), 2)
    if ox.shape[-1] == 0 or oy.shape[-1] == 0:
        raise DimensionError("SimCC vectors must be non-empty")
    ix = np.argmax(ox, axis=-1)
    iy = np.argmax(oy, axis=-1)
    k = output.split_ratio
    score = _peak_prob(ox, ix) * _peak_prob(oy, iy)
    kps = np.stack([ix / k, iy / k, np.clip(score, 0.0, 1.0)], axis=-1)
    return PosePrediction(kps, CROP)


def _refine_peak(h: np.ndarray, cx: int, cy: int, window_sigma: float, radius: int,
                 max_iter: int = 200, tol: float = 1e-9) -> Tuple[float, float]:
    """Iterated Gaussian-windowed weighted average of heatmap mass around a peak."""
    hh, ww = h.shape
    mx, my = float(cx), float(cy)
    inv = 1.0 / (2.0 * window_sigma * window_sigma)
    for _ in range(max_iter):
        rx, ry = int(round(mx)), int(round(my))
        x0, x1 = max(rx - radius, 0), min(rx + radius, ww - 1)
        y0, y1 = max(ry - radius, 0), min(ry + radius, hh - 1)
        dx = np.arange(x0, x1 + 1) - rx
        dy = np.arange(y0, y1 + 1) - ry
        wx = np.exp(-((dx + rx - mx) ** 2) * inv)
        wy = np.exp(-((dy + ry - my) ** 2) * inv)
        w = h[y0:y1 + 1, x0:x1 + 1] * wy[:, None] * wx[None, :]
        total = w.sum()
        if total <= 0:
            break
        # offsets from the window centre keep an isolated peak exactly on its pixel
        nx = rx + (w.sum(axis=0) @ dx) / total
        ny = ry + (w.sum(axis=1) @ dy) / total
        step = max(abs(nx - mx), abs(ny - my))
        mx, my = nx, ny
        if step < tol:
            break
    return mx, my


def dark_decode(heatmaps, stride: float = 4.0, window_sigma: float = 2.0, radius: int = 6) -> PosePrediction:
    """Sub-pixel heatmap decode by weighted averaging of heatmap mass.

    Negative values are clamped to zero. Starting at the argmax, the estimate
    is repeatedly replaced by the mean of heatmap positions weighted by the
    heatmap value times a Gaussian window (``window_sigma`` bins, truncated at
    ``radius``) centred on the current estimate. A Gaussian blob is recovered
    at its true centre; a second peak farther than ``radius`` bins away has no
    influence, so two separated equal peaks resolve to the first, never the
    midpoint. Coordinates are scaled by ``stride`` into crop pixels; the score
    is the peak value clamped to [0, 1]. An all-zero map yields the argmax
    (0, 0) with score 0.
    """
    hm = np.asarray(heatmaps, dtype=np.float64)
    hm = _squeeze_batch(hm, 3)
    k, hh, ww = hm.shape
    hm = np.maximum(hm, 0.0)
    kps = np.zeros((k, 3))
    for j in range(k):
        flat = int(np.argmax(hm[j]))
        cy, cx = divmod(flat, ww)
        peak = hm[j, cy, cx]
        if peak <= 0:
            x, y = float(cx), float(cy)
        else:
            x, y = _refine_peak(hm[j], cx, cy, window_sigma, radius)
        kps[j] = (x * stride, y * stride, min(max(peak, 0.0), 1.0))
    return PosePrediction(kps, CROP)


def check_flip_pairs(pairs: Iterable[Sequence[int]], num_keypoints: int) -> np.ndarray:
    """Return the keypoint permutation that swaps each (left, right) pair."""
    perm = np.arange(num_keypoints)
    seen = set()
    for a, b in pairs:
        if not (0 <= a < num_keypoints and 0 <= b < num_keypoints):
            raise ConfigurationError(f"flip pair ({a}, {b}) out of range for {num_keypoints} keypoints")
        if a in seen or b in seen:
            raise ConfigurationError(f"keypoint in flip pair ({a}, {b}) appears in more than one pair")
        seen.update((a, b))
        perm[a], perm[b] = b, a
    return perm


def unflip(pred_flipped, flip_pairs):
    """Undo a horizontal flip: reverse the x axis and swap left/right channels."""
    if isinstance(pred_flipped, SimccOutput):
        perm = check_flip_pairs(flip_pairs, pred_flipped.x.shape[-2])
        return SimccOutput(pred_flipped.x[..., perm, ::-1], pred_flipped.y[..., perm, :],
                           pred_flipped.split_ratio)
    hm = np.asarray(pred_flipped)
    perm = check_flip_pairs(flip_pairs, hm.shape[-3])
    return hm[..., perm, :, ::-1]


def flip_fuse(pred, pred_flipped, flip_pairs):
    """Average a prediction with the un-flipped prediction from the mirrored input."""
    back = unflip(pred_flipped, flip_pairs)
    if isinstance(pred, SimccOutput):
        if pred.x.shape != back.x.shape or pred.y.shape != back.y.shape:
            raise DimensionError("flip_fuse inputs must have identical shapes")
        return SimccOutput((pred.x + back.x) / 2, (pred.y + back.y) / 2, pred.split_ratio)
    pred = np.asarray(pred)
    if pred.shape != back.shape:
        raise DimensionError(f"flip_fuse inputs must have identical shapes: {pred.shape} vs {back.shape}")
    return (pred + back) / 2


def unmap_coords(pred: PosePrediction, t: AffineTransform) -> PosePrediction:
    if pred.frame != CROP:
        raise ConfigurationError(f"unmap_coords expects crop-frame coordinates, got {pred.frame!r}")
    kps = pred.keypoints.copy()
    kps[:, :2] = t.apply(kps[:, :2])
    return PosePrediction(kps, ORIGINAL, pred.score)


def map_coords(pred: PosePrediction, t: AffineTransform) -> PosePrediction:
    """Inverse of :func:`unmap_coords`: original-image frame back to the crop."""
    if pred.frame != ORIGINAL:
        raise ConfigurationError(f"map_coords expects original-frame coordinates, got {pred.frame!r}")
    kps = pred.keypoints.copy()
    kps[:, :2] = t.inverse().apply(kps[:, :2])
    return PosePrediction(kps, CROP, pred.score)
