"""Declarative layer graph and its forward execution."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import ops
from ..decode import SimccOutput
from ..errors import ConfigurationError, DimensionError, InitializationError
from ..tensor_core import ConvParams, as_tensor, deconv_output_extent

INPUT = "input"
KINDS = ("conv", "deconv", "upsample", "activation", "add", "concat", "simcc_head", "heatmap_head")
HEAD_KINDS = ("simcc_head", "heatmap_head")
BN_SUFFIXES = ("bn_gamma", "bn_beta", "bn_mean", "bn_var")
BN_EPS = 1e-5

Shape = Tuple[int, ...]


@dataclass(frozen=True)
class LayerSpec:
    id: str
    kind: str
    inputs: Tuple[str, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))

    def p(self, key, default=None):
        return self.params.get(key, default)

    def conv_params(self) -> ConvParams:
        k = self.params["kernel"]
        return ConvParams(stride=self.p("stride", 1), padding=self.p("padding", k // 2),
                          groups=self.p("groups", 1))


@dataclass(frozen=True)
class Graph:
    """An ordered layer list plus (optionally) bound raw weight tensors.

    Binding produces a new Graph; a bound graph is never mutated, so it can be
    shared between threads.
    """

    name: str
    layers: Tuple[LayerSpec, ...]
    input_shape: Shape
    meta: dict = field(default_factory=dict)
    tensors: Optional[Dict[str, np.ndarray]] = None
    folded: Optional[Dict[str, ops.FoldedConv]] = None

    @property
    def head(self) -> str:
        return self.layers[-1].kind

    @property
    def is_bound(self) -> bool:
        return self.folded is not None

    def layer(self, layer_id: str) -> LayerSpec:
        for spec in self.layers:
            if spec.id == layer_id:
                return spec
        raise KeyError(layer_id)

    def shapes(self) -> Dict[str, Shape]:
        return infer_shapes(self)

    def tensor_shapes(self) -> Dict[str, Shape]:
        """Expected weight-file tensor names and shapes, in layer order."""
        shapes = self.shapes()
        out: Dict[str, Shape] = {}
        for spec in self.layers:
            cin = shapes[spec.inputs[0]][1] if spec.inputs else None
            if spec.kind in ("conv", "heatmap_head"):
                k = spec.p("kernel", 1)
                cout = spec.params["out_channels"]
                out[f"{spec.id}.weight"] = (cout, cin // spec.p("groups", 1), k, k)
            elif spec.kind == "deconv":
                k = spec.params["kernel"]
                cout = spec.params["out_channels"]
                out[f"{spec.id}.weight"] = (cin, cout // spec.p("groups", 1), k, k)
            elif spec.kind == "simcc_head":
                _, _, h, w = shapes[spec.inputs[0]]
                cout = spec.params["out_x"] + spec.params["out_y"]
                out[f"{spec.id}.weight"] = (cout, h * w)
            else:
                continue
            if spec.p("bias", True):
                out[f"{spec.id}.bias"] = (cout,)
            if spec.p("bn", False):
                for suffix in BN_SUFFIXES:
                    out[f"{spec.id}.{suffix}"] = (cout,)
        return out

    def bind(self, tensors: Dict[str, np.ndarray]) -> "Graph":
        expected = self.tensor_shapes()
        missing = [name for name in expected if name not in tensors]
        if missing:
            layers = sorted({name.rsplit(".", 1)[0] for name in missing})
            raise InitializationError(f"unbound weights for layers: {', '.join(layers)}")
        raw = {}
        for name, shape in expected.items():
            arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
            if arr.shape != shape:
                raise DimensionError(f"tensor {name!r} has shape {arr.shape}, expected {shape}")
            raw[name] = arr
        return replace(self, tensors=raw, folded=_fold_all(self, raw))

    def init_weights(self, seed: int = 0, scale: float = 1.0) -> "Graph":
        """Bind He-style random weights and mildly randomized batch-norm stats."""
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape in self.tensor_shapes().items():
            suffix = name.rsplit(".", 1)[1]
            if suffix == "weight":
                fan_in = int(np.prod(shape[1:]))
                std = scale * np.sqrt(2.0 / max(fan_in, 1))
                t = rng.standard_normal(shape) * std
            elif suffix == "bn_var":
                t = rng.uniform(0.5, 1.5, shape)
            elif suffix == "bn_gamma":
                t = rng.uniform(0.8, 1.2, shape)
            else:
                t = rng.standard_normal(shape) * 0.05
            tensors[name] = t.astype(np.float32)
        return self.bind(tensors)

    def with_constant_weights(self, value: float = 0.0, bias: float = 0.0) -> "Graph":
        """Bind every weight to ``value`` and every bias to ``bias`` (identity batch norm)."""
        tensors = {}
        for name, shape in self.tensor_shapes().items():
            suffix = name.rsplit(".", 1)[1]
            fill = {"weight": value, "bias": bias, "bn_gamma": 1.0, "bn_var": 1.0 - BN_EPS}.get(suffix, 0.0)
            tensors[name] = np.full(shape, fill, dtype=np.float32)
        return self.bind(tensors)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "meta": self.meta,
            "layers": [{"id": s.id, "kind": s.kind, "inputs": list(s.inputs), "params": s.params}
                       for s in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        layers = tuple(LayerSpec(l["id"], l["kind"], tuple(l["inputs"]), dict(l["params"])) for l in d["layers"])
        g = cls(d["name"], layers, tuple(d["input_shape"]), dict(d.get("meta", {})))
        validate(g)
        return g

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        return cls.from_dict(json.loads(text))


def _fold_all(graph: Graph, raw: Dict[str, np.ndarray]) -> Dict[str, ops.FoldedConv]:
    folded = {}
    for spec in graph.layers:
        if spec.kind not in ("conv", "deconv", "simcc_head", "heatmap_head"):
            continue
        w = raw[f"{spec.id}.weight"]
        b = raw.get(f"{spec.id}.bias")
        if spec.p("bn", False):
            folded[spec.id] = ops.fold_batchnorm(
                w, b, raw[f"{spec.id}.bn_mean"], raw[f"{spec.id}.bn_var"],
                raw[f"{spec.id}.bn_gamma"], raw[f"{spec.id}.bn_beta"], BN_EPS,
                out_axis=1 if spec.kind == "deconv" else 0)
        else:
            cout = w.shape[1] * spec.p("groups", 1) if spec.kind == "deconv" else w.shape[0]
            folded[spec.id] = ops.FoldedConv(w, b if b is not None else np.zeros(cout, np.float32))
    return folded


def _layer_shape(spec: LayerSpec, ins: Sequence[Shape]) -> Shape:
    kind = spec.kind
    if kind not in KINDS:
        raise ConfigurationError(f"layer {spec.id!r}: unknown kind {kind!r}")
    want = {"add": None, "concat": None}.get(kind, 1)
    if want is not None and len(ins) != want:
        raise ConfigurationError(f"layer {spec.id!r}: {kind} takes exactly one input, got {len(ins)}")
    if kind in ("add", "concat") and len(ins) < 2:
        raise ConfigurationError(f"layer {spec.id!r}: {kind} needs at least two inputs")
    first = ins[0]
    if kind in ("conv", "heatmap_head"):
        n, cin, h, w = first
        k = spec.p("kernel", 1)
        cout = spec.params["out_channels"]
        g = spec.p("groups", 1)
        if cin % g or cout % g:
            raise ConfigurationError(f"layer {spec.id!r}: groups={g} must divide {cin} and {cout}")
        ho, wo = (spec.conv_params().output_extent(h, w, k, k) if kind == "conv" else (h, w))
        if ho < 1 or wo < 1:
            raise DimensionError(f"layer {spec.id!r}: non-positive output extent ({ho}, {wo})")
        return (n, cout, ho, wo)
    if kind == "deconv":
        n, cin, h, w = first
        k, s = spec.params["kernel"], spec.params["stride"]
        p, op = spec.p("padding", 0), spec.p("output_padding", 0)
        if spec.p("bn", False) and spec.p("groups", 1) != 1:
            raise ConfigurationError(f"layer {spec.id!r}: batch norm on a grouped deconv is not supported")
        ho, wo = deconv_output_extent(h, w, k, k, (s, s), (p, p), (op, op))
        if ho < 1 or wo < 1:
            raise ConfigurationError(f"layer {spec.id!r}: non-positive output extent ({ho}, {wo})")
        return (n, spec.params["out_channels"], ho, wo)
    if kind == "upsample":
        s = spec.params["scale"]
        if s < 2:
            raise ConfigurationError(f"layer {spec.id!r}: scale must be >= 2")
        return first[:2] + (first[2] * s, first[3] * s)
    if kind == "activation":
        if spec.params.get("fn") not in ops.ACTIVATIONS:
            raise ConfigurationError(f"layer {spec.id!r}: unknown activation {spec.params.get('fn')!r}")
        return first
    if kind == "add":
        for s in ins[1:]:
            if s != first:
                raise DimensionError(f"layer {spec.id!r}: add inputs differ in shape: {first} vs {s}")
        return first
    if kind == "concat":
        for s in ins[1:]:
            if (s[0],) + s[2:] != (first[0],) + first[2:]:
                raise DimensionError(f"layer {spec.id!r}: concat inputs differ off the channel axis: {first} vs {s}")
        return (first[0], sum(s[1] for s in ins)) + first[2:]
    # simcc_head
    n, k = first[:2]
    return (n, k, spec.params["out_x"] + spec.params["out_y"])


def infer_shapes(graph: Graph) -> Dict[str, Shape]:
    """Validate graph structure and propagate shapes; returns id -> output shape."""
    shapes: Dict[str, Shape] = {INPUT: tuple(graph.input_shape)}
    if not graph.layers:
        raise ConfigurationError("graph has no layers")
    for spec in graph.layers:
        if spec.id in shapes:
            raise ConfigurationError(f"duplicate layer id {spec.id!r}")
        for ref in spec.inputs:
            if ref not in shapes:
                raise ConfigurationError(
                    f"layer {spec.id!r} references {ref!r}, which is not an earlier layer or the graph input")
        shapes[spec.id] = _layer_shape(spec, [shapes[r] for r in spec.inputs])
    for spec in graph.layers[:-1]:
        if spec.kind in HEAD_KINDS:
            raise ConfigurationError(f"head layer {spec.id!r} must be the last layer")
    return shapes


def validate(graph: Graph, require_head: bool = False) -> None:
    infer_shapes(graph)
    if require_head and graph.layers[-1].kind not in HEAD_KINDS:
        raise ConfigurationError("graph must terminate in a simcc_head or heatmap_head")


def run_layer(spec: LayerSpec, args: List[np.ndarray], folded: Optional[ops.FoldedConv]):
    kind = spec.kind
    if kind == "conv":
        return ops.conv2d(args[0], folded, spec.conv_params())
    if kind == "heatmap_head":
        return ops.conv2d(args[0], folded, ConvParams())
    if kind == "deconv":
        s, p, op = spec.params["stride"], spec.p("padding", 0), spec.p("output_padding", 0)
        return ops.deconv2d(args[0], folded, s, p, op, spec.p("groups", 1))
    if kind == "upsample":
        return ops.bilinear_upsample(args[0], spec.params["scale"])
    if kind == "activation":
        return ops.apply_activation(args[0], spec.params["fn"])
    if kind == "add":
        out = args[0]
        for a in args[1:]:
            out = out + a
        return out
    if kind == "concat":
        return np.concatenate(args, axis=1)
    if kind == "simcc_head":
        x = args[0]
        flat = x.reshape(x.shape[0], x.shape[1], -1)
        return ops.linear(flat, folded.weight, folded.bias)
    raise ConfigurationError(f"unknown layer kind {kind!r}")


def forward(graph: Graph, x):
    """Execute the graph in layer order.

    Returns a :class:`SimccOutput` for a SimCC head, otherwise the last
    layer's tensor (heatmaps for a heatmap head).
    """
    if not graph.is_bound:
        ids = sorted({name.rsplit(".", 1)[0] for name in graph.tensor_shapes()})
        raise InitializationError(f"unbound weights for layers: {', '.join(ids)}")
    x = as_tensor(x)
    if x.shape[1:] != tuple(graph.input_shape[1:]):
        raise DimensionError(f"input shape {x.shape} does not match declared {tuple(graph.input_shape)}")
    values = {INPUT: x}
    refcount: Dict[str, int] = {}
    for spec in graph.layers:
        for r in spec.inputs:
            refcount[r] = refcount.get(r, 0) + 1
    for spec in graph.layers:
        values[spec.id] = run_layer(spec, [values[r] for r in spec.inputs], graph.folded.get(spec.id))
        for r in spec.inputs:
            refcount[r] -= 1
            if refcount[r] == 0:
                del values[r]
    head = graph.layers[-1]
    out = values[head.id]
    if head.kind == "simcc_head":
        lx = head.params["out_x"]
        return SimccOutput(out[..., :lx], out[..., lx:], head.params["split_ratio"])
    return out
