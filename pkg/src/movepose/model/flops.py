"""Compute-budget and receptive-field auditor.

MACs per layer:
  conv    Kh*Kw*(Cin/groups)*Cout*Hout*Wout
  deconv  Kh*Kw*(Cout/groups)*Cin*Hin*Win
  simcc   K*(H*W)*(Lx+Ly)
FLOPs are 2*MACs for those; elementwise layers (activation, add, upsample)
count Hout*Wout*Cout FLOPs. Concat is a copy and counts zero. Biases and
folded batch norms are not counted.

Receptive field follows rf += (K-1)*dilation*jump, jump *= stride. A stride-s
transposed conv reaches ceil(K/s) input taps per output, so it adds
(ceil(K/s)-1)*jump and divides the jump by s; bilinear upsampling reads two
taps. Merges take the largest incoming field. A SimCC head is fully
connected, so its field is the whole input.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

from .graph import INPUT, Graph, infer_shapes

ENVELOPE = (0.5e9, 1.0e9)


@dataclass
class LayerFlops:
    id: str
    kind: str
    out_shape: tuple
    macs: int
    flops: int
    params: int
    receptive_field: float


@dataclass
class FlopReport:
    model: str
    input_shape: tuple
    layers: List[LayerFlops]
    total_macs: int
    total_flops: int
    params: int
    envelope: tuple = ENVELOPE
    warnings: List[str] = field(default_factory=list)

    @property
    def gflops(self) -> float:
        return self.total_flops / 1e9

    @property
    def within_envelope(self) -> bool:
        return self.envelope[0] <= self.total_flops <= self.envelope[1]

    @property
    def verdict(self) -> str:
        return "within envelope" if self.within_envelope else "outside envelope"

    @property
    def receptive_field(self) -> float:
        return max((l.receptive_field for l in self.layers), default=1.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gflops"] = self.gflops
        d["verdict"] = self.verdict
        return d


def count_flops(graph: Graph, input_shape: Optional[Sequence[int]] = None) -> FlopReport:
    if input_shape is not None and tuple(input_shape) != tuple(graph.input_shape):
        graph = Graph(graph.name, graph.layers, tuple(input_shape), graph.meta)
    shapes = infer_shapes(graph)
    tshapes = graph.tensor_shapes()
    rf = {INPUT: 1.0}
    jump = {INPUT: 1.0}
    full_extent = float(max(graph.input_shape[2:]))
    rows = []
    for spec in graph.layers:
        src = spec.inputs[0]
        in_shape = shapes[src]
        out = shapes[spec.id]
        kind = spec.kind
        macs = flops = 0
        r, j = rf[src], jump[src]
        if kind in ("conv", "heatmap_head"):
            k = spec.p("kernel", 1)
            s = spec.p("stride", 1) if kind == "conv" else 1
            macs = k * k * (in_shape[1] // spec.p("groups", 1)) * out[1] * out[2] * out[3]
            r, j = r + (k - 1) * j, j * s
        elif kind == "deconv":
            k, s = spec.params["kernel"], spec.params["stride"]
            macs = k * k * (out[1] // spec.p("groups", 1)) * in_shape[1] * in_shape[2] * in_shape[3]
            r, j = r + (math.ceil(k / s) - 1) * j, j / s
        elif kind == "simcc_head":
            macs = in_shape[1] * in_shape[2] * in_shape[3] * out[2]
            r = full_extent
        elif kind == "upsample":
            flops = out[1] * out[2] * out[3]
            s = spec.params["scale"]
            r, j = r + j, j / s
        elif kind in ("activation", "add"):
            flops = out[1] * out[2] * out[3]
            if kind == "add":
                r = max(rf[i] for i in spec.inputs)
        elif kind == "concat":
            r = max(rf[i] for i in spec.inputs)
        n = out[0]
        macs *= n
        flops = 2 * macs if macs else flops * n
        params = sum(math.prod(shape) for name, shape in tshapes.items()
                     if name.rsplit(".", 1)[0] == spec.id)
        rf[spec.id], jump[spec.id] = r, j
        rows.append(LayerFlops(spec.id, kind, out, macs, flops, params, r))
    report = FlopReport(graph.name, tuple(graph.input_shape), rows,
                        sum(r.macs for r in rows), sum(r.flops for r in rows), sum(r.params for r in rows))
    if not report.within_envelope:
        report.warnings.append(
            f"total {report.gflops:.3f} GFLOPs outside the [{ENVELOPE[0] / 1e9:.1f}, {ENVELOPE[1] / 1e9:.1f}] "
            "GFLOPs budget envelope")
    return report


def conv_stack_receptive_field(kernels: Sequence[int], strides: Optional[Sequence[int]] = None) -> float:
    """Receptive field of a plain chain of convolutions."""
    strides = strides or [1] * len(kernels)
    r, j = 1.0, 1.0
    for k, s in zip(kernels, strides):
        r, j = r + (k - 1) * j, j * s
    return r
