from __future__ import annotations

import numpy as np

from ..errors import DimensionError, NoLabeledKeypointsError


def _xy(pred) -> np.ndarray:
    kps = getattr(pred, "keypoints", pred)
    kps = np.asarray(kps, dtype=np.float64)
    return kps[:, :2]


def oks(pred, gt, constants) -> float:
    """Object keypoint similarity between one prediction and one ground truth.

    Mean over labeled keypoints (v > 0) of exp(-d^2 / (2 * s^2 * j^2)) with
    s^2 the annotation area and j the per-keypoint constant.
    """
    xy = _xy(pred)
    j = np.asarray(constants, dtype=np.float64)
    if xy.shape[0] != gt.keypoints.shape[0] or j.shape != (xy.shape[0],):
        raise DimensionError(
            f"keypoint count mismatch: prediction {xy.shape[0]}, ground truth {gt.keypoints.shape[0]}, "
            f"constants {j.shape}")
    labeled = gt.labeled
    if not labeled.any():
        raise NoLabeledKeypointsError("ground truth has no labeled keypoints; OKS is undefined")
    d2 = ((xy - gt.keypoints[:, :2]) ** 2).sum(axis=1)
    e = np.exp(-d2[labeled] / (2.0 * gt.area * j[labeled] ** 2))
    return float(e.sum() / labeled.sum())


def oks_matrix(preds, gts, constants) -> np.ndarray:
    """OKS for every (prediction, ground truth) pair; 0 where a ground truth has no labels."""
    out = np.zeros((len(preds), len(gts)))
    for gi, g in enumerate(gts):
        if g.num_keypoints == 0:
            continue
        for di, d in enumerate(preds):
            out[di, gi] = oks(d, g, constants)
    return out
