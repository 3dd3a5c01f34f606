from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..decode import PosePrediction


@dataclass
class Annotation:
    """Ground-truth person. ``keypoints`` is (K, 3) of (x, y, v) with v in {0, 1, 2}."""

    image_id: int
    keypoints: np.ndarray
    area: float
    bbox: Sequence[float] = (0.0, 0.0, 0.0, 0.0)
    id: Optional[int] = None
    iscrowd: int = 0
    head_box: Optional[Sequence[float]] = None  # MPII head box (x1, y1, x2, y2)

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64).reshape(-1, 3)

    @property
    def labeled(self) -> np.ndarray:
        return self.keypoints[:, 2] > 0

    @property
    def num_keypoints(self) -> int:
        return int(self.labeled.sum())


@dataclass
class KeypointResult:
    """One predicted person in the COCO results format."""

    image_id: int
    keypoints: np.ndarray  # (K, 3) of (x, y, per-keypoint score)
    score: float
    category_id: int = 1

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64).reshape(-1, 3)

    @classmethod
    def from_prediction(cls, image_id: int, pred: PosePrediction, category_id: int = 1) -> "KeypointResult":
        return cls(image_id, pred.keypoints.copy(), float(pred.score), category_id)

    @property
    def area(self) -> float:
        """Area of the keypoints' bounding box, as used for range filtering of unmatched results."""
        x, y = self.keypoints[:, 0], self.keypoints[:, 1]
        return float((x.max() - x.min()) * (y.max() - y.min()))


@dataclass
class AnnotationSet:
    annotations: List[Annotation]
    image_ids: List[int] = field(default_factory=list)
    keypoint_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        known = set(self.image_ids)
        for a in self.annotations:
            if a.image_id not in known:
                known.add(a.image_id)
                self.image_ids.append(a.image_id)
