"""MovePose and Lite network recipes.

Only the block diagram of the architecture is public, so the layer recipe
here is a reconstruction: a MobileNetV1-style depthwise-separable encoder
(stride 32), a U-Net style decoder that upsamples with stride-2 transposed
convolutions and adds 1x1-projected encoder skip features at strides 16, 8
and 4, a large-kernel depthwise-separable refinement block after every merge,
and either a SimCC head (MovePose) or a heatmap head (Lite) on the stride-4
map.

Recipe version 1. With the default widths the MovePose graph costs about
0.66 GFLOPs at 256x256 input (``movepose flops`` prints the breakdown).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Tuple

from ..errors import ConfigurationError
from .graph import INPUT, Graph, LayerSpec, validate

RECIPE_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    num_keypoints: int = 17
    input_size: int = 256
    split_ratio: float = 2.0
    # stem, then one width per encoder stage at strides 2, 4, 8, 16, 32
    widths: Tuple[int, ...] = (16, 32, 64, 128, 192, 256)
    # extra stride-preserving blocks per encoder stage (strides 2..32)
    depths: Tuple[int, ...] = (0, 1, 1, 2, 1)
    # decoder widths at strides 16, 8, 4; skips are projected to these by 1x1 convs
    decoder_widths: Tuple[int, ...] = (128, 64, 32)
    backbone_kernel: int = 3
    refine_kernel: int = 7
    upsample: str = "deconv"  # or "bilinear", the interpolation baseline
    deconv_kernel: int = 4

    def __post_init__(self):
        if self.split_ratio < 1:
            raise ConfigurationError(f"split_ratio must be >= 1, got {self.split_ratio}")
        if self.input_size % 32:
            raise ConfigurationError(f"input_size must be a multiple of 32, got {self.input_size}")
        if len(self.widths) != 6 or len(self.depths) != 5 or len(self.decoder_widths) != 3:
            raise ConfigurationError(
                "widths needs 6 entries (stem + 5 stages), depths 5, decoder_widths 3")
        for k in (self.backbone_kernel, self.refine_kernel):
            if k % 2 == 0 or k < 1:
                raise ConfigurationError(f"kernel sizes must be odd, got {k}")
        if self.upsample not in ("deconv", "bilinear"):
            raise ConfigurationError(f"upsample must be 'deconv' or 'bilinear', got {self.upsample!r}")
        if self.deconv_kernel not in (2, 4):
            raise ConfigurationError("deconv_kernel must be 2 or 4 for exact 2x upsampling")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["depths"] = list(self.depths)
        d["decoder_widths"] = list(self.decoder_widths)
        return d


class _Builder:
    def __init__(self):
        self.layers: List[LayerSpec] = []

    def add(self, id, kind, inputs, **params) -> str:
        self.layers.append(LayerSpec(id, kind, tuple(inputs), params))
        return id

    def conv_bn_act(self, id, src, out, kernel, stride=1, groups=1, act="relu") -> str:
        x = self.add(id, "conv", [src], out_channels=out, kernel=kernel, stride=stride,
                     padding=kernel // 2, groups=groups, bias=False, bn=True)
        if act:
            x = self.add(f"{id}_act", "activation", [x], fn=act)
        return x

    def dws(self, id, src, cin, cout, kernel, stride=1) -> str:
        """Depthwise kxk (+BN+ReLU) followed by pointwise 1x1 (+BN+ReLU)."""
        x = self.conv_bn_act(f"{id}_dw", src, cin, kernel, stride, groups=cin)
        return self.conv_bn_act(f"{id}_pw", x, cout, 1)

    def upsample(self, id, src, cout, cfg: ModelConfig) -> str:
        if cfg.upsample == "deconv":
            k = cfg.deconv_kernel
            x = self.add(id, "deconv", [src], out_channels=cout, kernel=k, stride=2,
                         padding=(k - 2) // 2, output_padding=0, bias=False, bn=True)
        else:
            x = self.add(f"{id}_interp", "upsample", [src], scale=2)
            x = self.add(id, "conv", [x], out_channels=cout, kernel=1, stride=1, padding=0,
                         groups=1, bias=False, bn=True)
        return self.add(f"{id}_act", "activation", [x], fn="relu")


def _trunk(cfg: ModelConfig) -> Tuple[_Builder, str, int]:
    """Encoder plus decoder up to the stride-4 feature map."""
    b = _Builder()
    w = cfg.widths
    x = b.conv_bn_act("stem", INPUT, w[0], 3, stride=2)
    skips = []
    cin = w[0]
    for stage in range(5):
        cout = w[stage + 1]
        stride = 1 if stage == 0 else 2
        x = b.dws(f"enc{stage + 1}_0", x, cin, cout, cfg.backbone_kernel, stride)
        for i in range(cfg.depths[stage]):
            x = b.dws(f"enc{stage + 1}_{i + 1}", x, cout, cout, cfg.backbone_kernel)
        cin = cout
        skips.append((x, cout))
    # skips[i] sits at stride 2**(i+1); decode from stride 32 back to stride 4
    for level, (skip, _), cdec in zip((16, 8, 4), reversed(skips[1:4]), cfg.decoder_widths):
        up = b.upsample(f"up{level}", x, cdec, cfg)
        lateral = b.conv_bn_act(f"lateral{level}", skip, cdec, 1)
        x = b.add(f"merge{level}", "add", [up, lateral])
        x = b.dws(f"refine{level}", x, cdec, cdec, cfg.refine_kernel)
        cin = cdec
    return b, x, cin


def build_movepose(cfg: ModelConfig = ModelConfig()) -> Graph:
    b, x, _ = _trunk(cfg)
    x = b.add("head_proj", "conv", [x], out_channels=cfg.num_keypoints, kernel=1, stride=1,
              padding=0, groups=1, bias=True, bn=False)
    n = int(round(cfg.input_size * cfg.split_ratio))
    b.add("simcc", "simcc_head", [x], out_x=n, out_y=n, split_ratio=cfg.split_ratio)
    meta = {"model": "movepose", "recipe_version": RECIPE_VERSION, "config": cfg.to_dict()}
    g = Graph("movepose", tuple(b.layers), (1, 3, cfg.input_size, cfg.input_size), meta)
    validate(g, require_head=True)
    return g


def build_lite(cfg: ModelConfig = ModelConfig()) -> Graph:
    b, x, _ = _trunk(cfg)
    b.add("heatmap", "heatmap_head", [x], out_channels=cfg.num_keypoints, kernel=1, bias=True,
          bn=False, output_stride=4)
    meta = {"model": "lite", "recipe_version": RECIPE_VERSION, "config": cfg.to_dict()}
    g = Graph("lite", tuple(b.layers), (1, 3, cfg.input_size, cfg.input_size), meta)
    validate(g, require_head=True)
    return g


def build(model: str, cfg: ModelConfig = ModelConfig()) -> Graph:
    if model == "movepose":
        return build_movepose(cfg)
    if model == "lite":
        return build_lite(cfg)
    raise ConfigurationError(f"unknown model {model!r}; expected 'movepose' or 'lite'")
