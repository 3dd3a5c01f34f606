"""Latency benchmark harness."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from .decode import SimccOutput, flip_fuse
from .errors import ConfigurationError, MoveposeError
from .model.graph import Graph, forward
from .pipeline import decode_head


@dataclass
class BenchReport:
    model: str
    input_size: int
    upsample: str
    threads: int
    flip_test: bool
    warmup: int
    iters: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    fps: float
    samples_ms: List[float] = field(default_factory=list, repr=False)

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            for key in ("mean_ms", "median_ms", "p95_ms", "fps", "samples_ms"):
                d.pop(key)
        return d


def _same(a, b) -> bool:
    if isinstance(a, SimccOutput):
        return np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    return np.array_equal(a, b)


def run_bench(graph: Graph, iters: int = 50, warmup: int = 5, threads: int = 1, flip_test: bool = False,
              seed: int = 0, flip_pairs: Sequence[Tuple[int, int]] = ()) -> BenchReport:
    """Time forward (+ flip pass and fusion) + decode on a fixed random input.

    Warmup iterations are excluded. Every iteration's head output must equal
    the first one bit for bit, otherwise the run is rejected.
    """
    if iters < 1 or warmup < 0 or threads < 1:
        raise ConfigurationError(f"need iters >= 1, warmup >= 0, threads >= 1 (got {iters}, {warmup}, {threads})")
    x = np.random.default_rng(seed).standard_normal(graph.input_shape).astype(np.float32)
    x_flipped = np.ascontiguousarray(x[..., ::-1])

    def step():
        out = forward(graph, x)
        if flip_test:
            out = flip_fuse(out, forward(graph, x_flipped), flip_pairs)
        decode_head(out, graph)
        return out

    samples = []
    reference = None
    with threadpool_limits(limits=threads):
        for _ in range(warmup):
            step()
        for _ in range(iters):
            t0 = time.perf_counter()
            out = step()
            samples.append((time.perf_counter() - t0) * 1e3)
            if reference is None:
                reference = out
            elif not _same(out, reference):
                raise MoveposeError("model output changed between benchmark iterations")
    s = np.asarray(samples)
    mean = float(s.mean())
    cfg = graph.meta.get("config", {})
    return BenchReport(
        model=graph.name, input_size=int(graph.input_shape[-1]), upsample=cfg.get("upsample", "deconv"),
        threads=threads, flip_test=flip_test, warmup=warmup, iters=iters,
        mean_ms=mean, median_ms=float(np.median(s)), p95_ms=float(np.percentile(s, 95)),
        fps=1000.0 / mean, samples_ms=[float(v) for v in s])
