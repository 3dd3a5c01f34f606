from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence

import numpy as np

from .records import Annotation, KeypointResult


@dataclass
class PCKhReport:
    mean: float
    mean_at_01: float
    fraction: float
    labeled_keypoints: int
    skipped: int

    def row(self) -> Dict[str, float]:
        return {"Mean": self.mean, "Mean@0.1": self.mean_at_01}

    def to_dict(self) -> dict:
        return asdict(self)


def _pairs(results: Sequence[KeypointResult], gts: Sequence[Annotation]):
    """Pair results with ground truths image by image, in input order."""
    by_image: Dict[int, List[KeypointResult]] = defaultdict(list)
    for r in results:
        by_image[r.image_id].append(r)
    used: Dict[int, int] = defaultdict(int)
    for g in gts:
        i = used[g.image_id]
        used[g.image_id] += 1
        yield g, (by_image[g.image_id][i] if i < len(by_image[g.image_id]) else None)


def head_size(g: Annotation, factor: float = 0.6) -> float:
    x1, y1, x2, y2 = g.head_box
    return factor * float(np.hypot(x2 - x1, y2 - y1))


def pck_at(results, gts, fraction: float, head_size_factor: float = 0.6):
    """Fraction of labeled keypoints within ``fraction`` head sizes; (value, count, skipped)."""
    hits = total = skipped = 0
    for g, r in _pairs(results, gts):
        if g.head_box is None:
            skipped += 1
            continue
        lab = g.labeled
        total += int(lab.sum())
        if r is None:
            continue
        d = np.hypot(*(r.keypoints[:, :2] - g.keypoints[:, :2]).T)
        hits += int((d[lab] <= fraction * head_size(g, head_size_factor)).sum())
    return (hits / total if total else 0.0), total, skipped


def pckh(results, gts, fraction: float = 0.5, strict_fraction: float = 0.1,
         head_size_factor: float = 0.6) -> PCKhReport:
    """PCKh at ``fraction`` (reported as Mean) and at ``strict_fraction`` (Mean@0.1).

    A keypoint counts when its error is at most the fraction times
    ``head_size_factor`` times the head-box diagonal. Records without a head
    box are skipped and counted.
    """
    mean, n, skipped = pck_at(results, gts, fraction, head_size_factor)
    strict, _, _ = pck_at(results, gts, strict_fraction, head_size_factor)
    return PCKhReport(mean, strict, fraction, n, skipped)
