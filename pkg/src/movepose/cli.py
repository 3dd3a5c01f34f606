"""Command line: ``movepose {infer,eval,bench,flops}``.

Exit codes: 0 success, 1 evaluation/inference failure, 2 I/O or config
failure. Errors print ``error[<category>]: <message>`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from .config import load_keypoints, load_oks_constants, load_pckh
from .errors import ConfigurationError, IngestionError, MoveposeError, WeightsNotFoundError
from .evaluator import (KeypointResult, evaluate_coco, load_coco_annotations, load_results, pckh)
from .evaluator.io import results_to_json
from .imageio import read_image
from .model import ModelConfig, build, count_flops, load_weights
from .pipeline import PersonBox, PreprocessSpec, Trace, infer_person

SWEEP_KERNELS = (3, 5, 7)


def _emit(args, payload: dict, rows, text: str):
    """Write the machine-readable report (JSON or CSV) and a human table."""
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        body = buf.getvalue()
    else:
        body = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(body, encoding="utf-8")
        print(text)
    else:
        sys.stdout.write(body)


def _model_config(args, **overrides) -> ModelConfig:
    kw = dict(input_size=args.input_size)
    if getattr(args, "upsample", None):
        kw["upsample"] = args.upsample
    kw.update(overrides)
    return ModelConfig(**kw)


def _load_graph(args, required: bool):
    graph = build(args.model, _model_config(args))
    if args.weights:
        return load_weights(args.weights, graph)
    if required:
        raise WeightsNotFoundError("--weights is required for this command")
    return graph.init_weights(args.seed)


def _parse_box(text: str) -> PersonBox:
    try:
        x, y, w, h = (float(v) for v in text.split(","))
    except ValueError as e:
        raise ConfigurationError(f"--box expects x,y,w,h, got {text!r}") from e
    return PersonBox(x, y, w, h)


def _boxes_from_json(path, image_id):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IngestionError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise IngestionError(f"{path}: malformed JSON: {e}") from e
    records = doc["annotations"] if isinstance(doc, dict) else doc
    boxes = []
    for i, r in enumerate(records):
        if image_id is not None and r.get("image_id") != image_id:
            continue
        if "bbox" not in r or len(r["bbox"]) != 4:
            raise IngestionError(f"{path}: record {i} has no 4-element bbox")
        boxes.append(PersonBox(*map(float, r["bbox"]), score=r.get("score")))
    return boxes


def cmd_infer(args) -> int:
    graph = _load_graph(args, required=True)
    image = read_image(args.image)
    boxes = [_parse_box(b) for b in args.box or []]
    if args.boxes:
        boxes += _boxes_from_json(args.boxes, args.image_id)
    if not boxes:
        h, w = image.shape[:2]
        boxes = [PersonBox(0.0, 0.0, float(w), float(h))]
    kcfg = load_keypoints()
    spec = PreprocessSpec.from_config(args.input_size)
    trace = Trace()
    results = []
    for box in boxes:
        pred = infer_person(graph, image, box, flip_test=args.flip_test, spec=spec,
                            flip_pairs=kcfg.flip_pairs, trace=trace)
        score = pred.score if box.score is None else pred.score * box.score
        results.append(KeypointResult(args.image_id if args.image_id is not None else 0,
                                      pred.keypoints, float(score)))
    if args.trace:
        print(f"trace: forward_calls={trace.forward_calls} persons={len(boxes)}", file=sys.stderr)
    body = json.dumps(results_to_json(results)) + "\n"
    if args.output:
        Path(args.output).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    if args.csv:
        names = kcfg.names
        with open(args.csv, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["image_id", "person", "keypoint", "name", "x", "y", "score"])
            for p, r in enumerate(results):
                for k, (x, y, s) in enumerate(r.keypoints):
                    w.writerow([r.image_id, p, k, names[k] if k < len(names) else k, repr(x), repr(y), repr(s)])
    return 0


def _fmt(v):
    return "  -  " if v is None else f"{v:.3f}"


def cmd_eval(args) -> int:
    gts = load_coco_annotations(args.annotations)
    results = load_results(args.results, num_keypoints=len(gts.annotations[0].keypoints) if gts.annotations else 17)
    if args.metric == "coco":
        names = gts.keypoint_names or None
        constants = load_oks_constants(names=names)
        report = evaluate_coco(results, gts, constants)
        row = report.row()
        payload = {"metric": "coco", **report.to_dict()}
        text = "  ".join(f"{k:>6}" for k in row) + "\n" + "  ".join(f"{_fmt(v):>6}" for v in row.values())
        if args.plot:
            from .plotting import plot_pr_curves
            plot_pr_curves(report, args.plot)
    else:
        cfg = load_pckh()
        report = pckh(results, gts.annotations, cfg.mean_fraction, cfg.strict_fraction, cfg.head_size_factor)
        row = report.row()
        payload = {"metric": "pckh", **report.to_dict(), **row}
        text = f"{'Mean':>8}  {'Mean@0.1':>8}\n{report.mean:>8.4f}  {report.mean_at_01:>8.4f}"
    _emit(args, payload, [row], text)
    return 0


def cmd_bench(args) -> int:
    graph = _load_graph(args, required=False)
    report = bench_mod.run_bench(graph, args.iters, args.warmup, args.threads, args.flip_test, args.seed,
                                 load_keypoints().flip_pairs)
    payload = report.to_dict(timing=not args.no_timing)
    row = {k: v for k, v in payload.items() if k != "samples_ms"}
    text = (f"{report.model} ({report.upsample}) flip={report.flip_test} threads={report.threads}: "
            f"mean {report.mean_ms:.2f} ms, median {report.median_ms:.2f} ms, p95 {report.p95_ms:.2f} ms, "
            f"{report.fps:.1f} fps over {report.iters} iterations")
    if args.plot:
        from .plotting import plot_latency
        plot_latency(report, args.plot)
    _emit(args, payload, [row], text)
    return 0


def cmd_flops(args) -> int:
    if args.kernel_sweep:
        rows = []
        for k in args.kernel_sweep:
            rep = count_flops(build(args.model, _model_config(args, refine_kernel=k)))
            rows.append({"kernel": k, "total_flops": rep.total_flops, "gflops": rep.gflops,
                         "receptive_field": rep.receptive_field, "params": rep.params})
        payload = {"model": args.model, "sweep": rows}
        text = "\n".join(f"k={r['kernel']}: {r['gflops']:.4f} GFLOPs, receptive field {r['receptive_field']:g}"
                         for r in rows)
        if args.plot:
            from .plotting import plot_kernel_sweep
            plot_kernel_sweep(rows, args.plot)
        _emit(args, payload, rows, text)
        return 0
    report = count_flops(build(args.model, _model_config(args)))
    rows = [{"id": l.id, "kind": l.kind, "out_shape": "x".join(map(str, l.out_shape)), "macs": l.macs,
             "flops": l.flops, "params": l.params, "receptive_field": l.receptive_field} for l in report.layers]
    payload = report.to_dict()
    lines = [f"{'layer':<18}{'kind':<13}{'output':<16}{'MFLOPs':>10}{'RF':>8}"]
    for l in report.layers:
        lines.append(f"{l.id:<18}{l.kind:<13}{'x'.join(map(str, l.out_shape)):<16}"
                     f"{l.flops / 1e6:>10.3f}{l.receptive_field:>8g}")
    lines.append(f"total: {report.gflops:.4f} GFLOPs, {report.params} params, verdict: {report.verdict}")
    for w in report.warnings:
        lines.append(f"warning: {w}")
    if args.plot:
        from .plotting import plot_layer_flops
        plot_layer_flops(report, args.plot)
    if args.output or args.format == "csv":
        _emit(args, payload, rows, "\n".join(lines))
    else:
        print("\n".join(lines))
    return 0


def _kernels(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated kernel sizes, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--model", choices=("movepose", "lite"), default="movepose")
    shared.add_argument("--weights", type=str, default=None, help="MVPW weight file")
    shared.add_argument("--input-size", type=int, default=256)
    shared.add_argument("--flip-test", action="store_true")
    shared.add_argument("--threads", type=int, default=1)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--output", type=str, default=None)
    shared.add_argument("--format", choices=("json", "csv"), default="json")
    shared.add_argument("--plot", type=str, default=None, help="also render a figure to this path")

    p = argparse.ArgumentParser(prog="movepose", description="CPU pose inference, evaluation and audit tools")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("infer", parents=[shared], help="estimate keypoints for boxes in an image")
    s.add_argument("--image", required=True)
    s.add_argument("--box", action="append", help="person box x,y,w,h (repeatable)")
    s.add_argument("--boxes", help="JSON with bbox records (COCO annotations or detections)")
    s.add_argument("--image-id", type=int, default=None)
    s.add_argument("--csv", help="also write per-keypoint CSV here")
    s.add_argument("--trace", action="store_true", help="report forward-call counts on stderr")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("eval", parents=[shared], help="score results against annotations")
    s.add_argument("--results", required=True)
    s.add_argument("--annotations", required=True)
    s.add_argument("--metric", choices=("coco", "pckh"), default="coco")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", parents=[shared], help="latency benchmark")
    s.add_argument("--iters", type=int, default=50)
    s.add_argument("--warmup", type=int, default=5)
    s.add_argument("--upsample", choices=("deconv", "bilinear"), default=None)
    s.add_argument("--no-timing", action="store_true", help="omit timing fields from the report")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("flops", parents=[shared], help="FLOP and receptive-field audit")
    s.add_argument("--upsample", choices=("deconv", "bilinear"), default=None)
    s.add_argument("--kernel-sweep", type=_kernels, nargs="?", const=list(SWEEP_KERNELS), default=None,
                   help="report totals for refinement kernel sizes (default 3,5,7)")
    s.set_defaults(func=cmd_flops)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MoveposeError as e:
        print(f"error[{e.category}]: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
