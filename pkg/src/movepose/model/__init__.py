from .builders import ModelConfig, build, build_lite, build_movepose
from .flops import FlopReport, count_flops
from .graph import Graph, LayerSpec, forward, infer_shapes, validate
from .weights import load_weights, save_weights

__all__ = [
    "FlopReport", "Graph", "LayerSpec", "ModelConfig", "build", "build_lite", "build_movepose",
    "count_flops", "forward", "infer_shapes", "load_weights", "save_weights", "validate",
]
