"""COCO keypoint average precision.

Per image, results are taken in descending score order (at most
``max_dets``) and each is greedily matched to the unmatched ground truth with
the highest OKS at or above the threshold. Crowd and unlabeled ground truths,
and those outside the area range, are "ignored": matching one neither helps
nor hurts. Precision is made monotone and sampled at 101 recall points; AP is
the mean over OKS thresholds 0.50:0.05:0.95. Area ranges: medium is
32^2 < area <= 96^2, large is area > 96^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import IngestionError
from .oks import oks_matrix
from .records import AnnotationSet, KeypointResult

THRESHOLDS = np.round(np.linspace(0.5, 0.95, 10), 2)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
AREA_RANGES = {"all": (0.0, np.inf), "medium": (32.0 ** 2, 96.0 ** 2), "large": (96.0 ** 2, np.inf)}
MAX_DETS = 20


@dataclass
class APReport:
    ap: Optional[float]
    ap50: Optional[float]
    ap75: Optional[float]
    ap_m: Optional[float]
    ap_l: Optional[float]
    per_threshold: List[Optional[float]] = field(default_factory=list)
    precision: Optional[np.ndarray] = field(default=None, repr=False)  # (T, 101), area "all"
    recall: List[Optional[float]] = field(default_factory=list)

    def row(self) -> Dict[str, Optional[float]]:
        return {"AP": self.ap, "AP50": self.ap50, "AP75": self.ap75, "AP_M": self.ap_m, "AP_L": self.ap_l}

    def to_dict(self) -> dict:
        d = self.row()
        d["thresholds"] = [float(t) for t in THRESHOLDS]
        d["per_threshold"] = self.per_threshold
        d["recall"] = self.recall
        return d


def _in_range(area: float, rng) -> bool:
    lo, hi = rng
    return lo < area <= hi if lo > 0 else area <= hi


def _evaluate_image(dts: List[KeypointResult], gts, ious: np.ndarray, rng):
    """Greedy matching for one image and area range.

    Returns (scores, matched (T, D) bool, ignored (T, D) bool, n_positive).
    """
    gt_ig = np.array([g.iscrowd or g.num_keypoints == 0 or not _in_range(g.area, rng) for g in gts], dtype=bool)
    gorder = np.argsort(gt_ig, kind="mergesort")
    gt_ig = gt_ig[gorder]
    crowd = np.array([gts[i].iscrowd for i in gorder], dtype=bool)
    ious = ious[:, gorder] if len(gts) else ious
    t_n, d_n, g_n = len(THRESHOLDS), len(dts), len(gts)
    gtm = np.zeros((t_n, g_n), dtype=bool)
    dtm = np.zeros((t_n, d_n), dtype=bool)
    dt_ig = np.zeros((t_n, d_n), dtype=bool)
    for ti, t in enumerate(THRESHOLDS):
        for di in range(d_n):
            best = min(t, 1 - 1e-10)
            m = -1
            for gi in range(g_n):
                if gtm[ti, gi] and not crowd[gi]:
                    continue
                # once matched to a regular gt, never fall back to an ignored one
                if m > -1 and not gt_ig[m] and gt_ig[gi]:
                    break
                if ious[di, gi] < best:
                    continue
                best = ious[di, gi]
                m = gi
            if m == -1:
                continue
            dt_ig[ti, di] = gt_ig[m]
            dtm[ti, di] = True
            gtm[ti, m] = True
    out_of_range = np.array([not _in_range(d.area, rng) for d in dts], dtype=bool)
    dt_ig |= ~dtm & out_of_range[None, :]
    scores = np.array([d.score for d in dts], dtype=np.float64)
    return scores, dtm, dt_ig, int((~gt_ig).sum())


def _accumulate(per_image):
    """Interpolated precision (T, 101) and final recall (T,), or None when no positives."""
    n_pos = sum(p[3] for p in per_image)
    if n_pos == 0:
        return None, None
    scores = np.concatenate([p[0] for p in per_image]) if per_image else np.zeros(0)
    order = np.argsort(-scores, kind="mergesort")
    dtm = np.concatenate([p[1] for p in per_image], axis=1)[:, order] if per_image else np.zeros((10, 0), bool)
    dt_ig = np.concatenate([p[2] for p in per_image], axis=1)[:, order] if per_image else np.zeros((10, 0), bool)
    tps = np.cumsum(dtm & ~dt_ig, axis=1).astype(np.float64)
    fps = np.cumsum(~dtm & ~dt_ig, axis=1).astype(np.float64)
    precision = np.zeros((len(THRESHOLDS), len(RECALL_POINTS)))
    recall = np.zeros(len(THRESHOLDS))
    for ti in range(len(THRESHOLDS)):
        tp, fp = tps[ti], fps[ti]
        rc = tp / n_pos
        pr = tp / np.maximum(tp + fp, np.spacing(1))
        recall[ti] = rc[-1] if len(rc) else 0.0
        pr = np.maximum.accumulate(pr[::-1])[::-1] if len(pr) else pr
        idx = np.searchsorted(rc, RECALL_POINTS, side="left")
        valid = idx < len(pr)
        precision[ti, valid] = pr[idx[valid]]
    return precision, recall


def evaluate_coco(results: Sequence[KeypointResult], gts: AnnotationSet, constants,
                  max_dets: int = MAX_DETS) -> APReport:
    known = set(gts.image_ids)
    by_image_dt: Dict[int, List[KeypointResult]] = {i: [] for i in known}
    for idx, r in enumerate(results):
        if r.image_id not in known:
            raise IngestionError(f"result {idx} references unknown image id {r.image_id!r}")
        by_image_dt[r.image_id].append(r)
    by_image_gt: Dict[int, list] = {i: [] for i in known}
    for g in gts.annotations:
        by_image_gt[g.image_id].append(g)

    images = sorted(known)
    summaries = {}
    curves = {}
    for name, rng in AREA_RANGES.items():
        per_image = []
        for img in images:
            dts = by_image_dt[img]
            order = np.argsort([-d.score for d in dts], kind="mergesort")[:max_dets]
            dts = [dts[i] for i in order]
            g = by_image_gt[img]
            if not dts and not g:
                continue
            ious = oks_matrix(dts, g, constants)
            per_image.append(_evaluate_image(dts, g, ious, rng))
        precision, recall = _accumulate(per_image)
        curves[name] = (precision, recall)
        summaries[name] = None if precision is None else float(precision.mean())

    precision, recall = curves["all"]
    per_t = [None] * len(THRESHOLDS) if precision is None else [float(p) for p in precision.mean(axis=1)]
    return APReport(
        ap=summaries["all"],
        ap50=per_t[0],
        ap75=per_t[5],
        ap_m=summaries["medium"],
        ap_l=summaries["large"],
        per_threshold=per_t,
        precision=precision,
        recall=[] if recall is None else [float(r) for r in recall],
    )
