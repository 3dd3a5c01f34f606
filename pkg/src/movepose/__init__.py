"""CPU inference engine and evaluation toolkit for MovePose-style pose estimation."""
from .decode import (AffineTransform, PosePrediction, SimccOutput, dark_decode, flip_fuse,
                     simcc_decode, unmap_coords)
from .model import ModelConfig, build_lite, build_movepose, count_flops, forward, load_weights, save_weights
from .pipeline import PersonBox, PreprocessSpec, compute_affine, infer_person, preprocess

__version__ = "0.1.0"

__all__ = [
    "AffineTransform", "ModelConfig", "PersonBox", "PosePrediction", "PreprocessSpec", "SimccOutput",
    "build_lite", "build_movepose", "compute_affine", "count_flops", "dark_decode", "flip_fuse", "forward",
    "infer_person", "load_weights", "preprocess", "save_weights", "simcc_decode", "unmap_coords",
]
