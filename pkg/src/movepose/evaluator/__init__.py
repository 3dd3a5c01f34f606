from .coco import APReport, evaluate_coco
from .io import (load_coco_annotations, load_results, parse_annotations, parse_results, results_to_json,
                 write_results)
from .oks import oks, oks_matrix
from .pckh import PCKhReport, pck_at, pckh
from .records import Annotation, AnnotationSet, KeypointResult

__all__ = [
    "APReport", "Annotation", "AnnotationSet", "KeypointResult", "PCKhReport", "evaluate_coco",
    "load_coco_annotations", "load_results", "oks", "oks_matrix", "parse_annotations", "parse_results",
    "pck_at", "pckh", "results_to_json", "write_results",
]
