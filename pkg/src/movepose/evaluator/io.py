"""COCO keypoint JSON: annotation files in, results arrays in and out."""
from __future__ import annotations

import json
from typing import List, Optional, Sequence

import numpy as np

from ..errors import IngestionError, ParseError
from .records import Annotation, AnnotationSet, KeypointResult


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise IngestionError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: malformed JSON: {e}") from e


def _keypoints(raw, k: int, index: int) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != 3 * k:
        n = len(raw) if isinstance(raw, list) else type(raw).__name__
        raise ParseError(f"keypoints must be a list of {3 * k} numbers, got {n}", index)
    try:
        return np.asarray(raw, dtype=np.float64).reshape(k, 3)
    except (TypeError, ValueError) as e:
        raise ParseError("keypoints must be numeric", index) from e


def parse_annotations(doc, num_keypoints: Optional[int] = None) -> AnnotationSet:
    """Read a COCO-style object.

    The keypoint count comes from ``num_keypoints``, else the first category
    listing keypoint names, else the first annotation (16 for MPII exports).
    """
    if isinstance(doc, dict) and "annotations" in doc:
        anns = doc["annotations"]
    else:
        raise ParseError("expected a COCO object with an 'annotations' array")
    names: List[str] = []
    for cat in doc.get("categories", []):
        if cat.get("keypoints"):
            names = list(cat["keypoints"])
            if num_keypoints is not None and num_keypoints != len(names):
                raise ParseError(f"category lists {len(names)} keypoints, expected {num_keypoints}")
            num_keypoints = len(names)
            break
    if num_keypoints is None:
        first = anns[0].get("keypoints") if anns and isinstance(anns[0], dict) else None
        num_keypoints = len(first) // 3 if isinstance(first, list) and first else 17
    image_ids = [im["id"] for im in doc.get("images", []) if "id" in im]
    out = []
    for i, a in enumerate(anns):
        if not isinstance(a, dict):
            raise ParseError("annotation must be an object", i)
        for key in ("image_id", "keypoints"):
            if key not in a:
                raise ParseError(f"missing field {key!r}", i)
        kps = _keypoints(a["keypoints"], num_keypoints, i)
        bbox = a.get("bbox", [0.0, 0.0, 0.0, 0.0])
        if len(bbox) != 4:
            raise ParseError("bbox must have 4 numbers", i)
        area = float(a["area"]) if "area" in a else float(bbox[2]) * float(bbox[3])
        if (kps[:, 2] > 0).any() and not area > 0:
            raise ParseError("annotation with labeled keypoints needs a positive area", i)
        head = a.get("head_box")
        if head is not None and len(head) != 4:
            raise ParseError("head_box must have 4 numbers (x1, y1, x2, y2)", i)
        out.append(Annotation(a["image_id"], kps, area, [float(v) for v in bbox], a.get("id"),
                              int(a.get("iscrowd", 0)), None if head is None else [float(v) for v in head]))
    return AnnotationSet(out, image_ids, names)


def load_coco_annotations(path, num_keypoints: Optional[int] = None) -> AnnotationSet:
    return parse_annotations(_read_json(path), num_keypoints)


def parse_results(doc, num_keypoints: int = 17) -> List[KeypointResult]:
    if not isinstance(doc, list):
        raise ParseError("results must be a JSON array")
    out = []
    for i, r in enumerate(doc):
        if not isinstance(r, dict):
            raise ParseError("result must be an object", i)
        for key in ("image_id", "keypoints", "score"):
            if key not in r:
                raise ParseError(f"missing field {key!r}", i)
        out.append(KeypointResult(r["image_id"], _keypoints(r["keypoints"], num_keypoints, i),
                                  float(r["score"]), int(r.get("category_id", 1))))
    return out


def load_results(path, num_keypoints: int = 17) -> List[KeypointResult]:
    return parse_results(_read_json(path), num_keypoints)


def results_to_json(results: Sequence[KeypointResult]) -> list:
    return [{"image_id": r.image_id, "category_id": r.category_id,
             "keypoints": [float(v) for v in r.keypoints.reshape(-1)], "score": float(r.score)}
            for r in results]


def write_results(path, results: Sequence[KeypointResult]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(results_to_json(results), f)
