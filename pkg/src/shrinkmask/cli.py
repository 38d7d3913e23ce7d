"""Command-line interface.

Subcommands: gen-labels, reconstruct, evaluate, study, loss-check, bench,
render. Exit codes: 0 success, 1 data error, 2 usage error. The
SHRINKMASK_THREADS environment variable overrides --threads wherever a
command parallelizes across files or scenes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .geometry import GeometryError, ShrinkParams
from .labels import gen_labels
from .losses import OhemConfig, dice_loss, offset_loss, spw_loss
from .metrics import MatchConfig, aggregate, match_detections
from .postproc import PostprocConfig, reconstruct, run_perturbation_study
from .raster import BitMask, FloatMap, ShapeMismatchError
from .synth import PlacementFailureError, SynthConfig, generate_scene, oracle_predictions

DATA_ERRORS = (
    formats.AnnotationFormatError,
    formats.MapFormatError,
    formats.DetectionFormatError,
    GeometryError,
    PlacementFailureError,
    OSError,
)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _resolve_threads(flag: int | None) -> int:
    env = os.environ.get("SHRINKMASK_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise SystemExit(
                f"error: SHRINKMASK_THREADS must be an integer, got {env!r}"
            ) from None
    if flag is not None:
        return max(1, flag)
    return os.cpu_count() or 1


def _pmap(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- argument types ----------------------------------------------------------


def _open_unit(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"{text} outside (0, 1)")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text} must be non-negative")
    return value


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return _positive_int(w), _positive_int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not WxH") from None


def _k_spec(text: str) -> tuple[int, ...]:
    """Perturbation radii as 'a..b' (inclusive) or a comma list."""
    try:
        if ".." in text:
            lo_s, hi_s = text.split("..")
            lo, hi = int(lo_s), int(hi_s)
            if lo > hi:
                raise ValueError
            ks = tuple(range(lo, hi + 1))
        else:
            ks = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a k range or list") from None
    if any(abs(k) > 10 for k in ks):
        raise argparse.ArgumentTypeError("|k| must be at most 10")
    return ks


def _iou_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma list") from None


# -- gen-labels --------------------------------------------------------------


def _cmd_gen_labels(args: argparse.Namespace) -> int:
    ann_dir = Path(args.ann)
    out_dir = Path(args.out)
    files = sorted(ann_dir.glob("*.txt"))
    if not files:
        print(f"warning: no annotation files in {ann_dir}", file=sys.stderr)
        return 0
    out_dir.mkdir(parents=True, exist_ok=True)
    params = ShrinkParams(args.delta_s)
    threads = _resolve_threads(args.threads)

    def run(path: Path) -> str | None:
        try:
            ann = formats.read_annotation(path)
            maps = gen_labels(ann, params, args.window, args.spw_valid_region)
        except (formats.AnnotationFormatError, GeometryError, OSError) as exc:
            return f"{path}: {exc}"
        formats.write_map(out_dir / f"{path.stem}.shrink.mapf", maps.shrink)
        formats.write_map(out_dir / f"{path.stem}.offset.mapf", maps.offset)
        formats.write_map(out_dir / f"{path.stem}.spw.mapf", maps.spw)
        formats.write_map(out_dir / f"{path.stem}.ignore.mapf", maps.ignore)
        return None

    failures = [msg for msg in _pmap(run, files, threads) if msg is not None]
    for msg in failures:
        print(f"error: {msg}", file=sys.stderr)
    ok = len(files) - len(failures)
    print(f"wrote labels for {ok} scene(s) to {out_dir}")
    return 1 if failures else 0


# -- reconstruct -------------------------------------------------------------


def _as_float_map(grid: BitMask | FloatMap) -> FloatMap:
    if isinstance(grid, BitMask):
        return FloatMap(grid.width, grid.height, grid.bits.astype(np.float64))
    return grid


def _cmd_reconstruct(args: argparse.Namespace) -> int:
    try:
        shrink = _as_float_map(formats.read_map(args.shrink))
        offset = formats.read_map(args.offset)
    except DATA_ERRORS as exc:
        return _fail(str(exc))
    if not isinstance(offset, FloatMap):
        print("error: offset map must hold float values", file=sys.stderr)
        return 2
    cfg = PostprocConfig(
        binarize_threshold=args.threshold,
        min_area=args.min_area,
        min_score=args.min_score,
        extend_mode=args.mode,
        delta_t=args.delta_t,
        offset_aggregation=args.aggregation,
    )
    try:
        dets, timing = reconstruct(shrink, offset, cfg)
    except ShapeMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    formats.write_detections(args.out, dets, cfg, timing)
    print(
        f"{len(dets)} detection(s) in {timing.total_ms:.3f} ms"
        f" (binarize {timing.binarize_ms:.3f},"
        f" components {timing.components_ms:.3f},"
        f" trace {timing.trace_ms:.3f},"
        f" extend {timing.extend_ms:.3f})"
    )
    return 0


# -- evaluate ----------------------------------------------------------------


def _cmd_evaluate(args: argparse.Namespace) -> int:
    det_dir, gt_dir = Path(args.det), Path(args.gt)
    dets = {p.stem: p for p in det_dir.glob("*.txt")}
    gts = {p.stem: p for p in gt_dir.glob("*.txt")}
    unpaired = sorted(set(dets) ^ set(gts))
    for stem in unpaired:
        side = "ground truth" if stem in dets else "detections"
        print(f"error: {stem}: missing {side}", file=sys.stderr)
    stems = sorted(set(dets) & set(gts))
    if not stems:
        print("error: no paired files", file=sys.stderr)
        return 1
    try:
        cfg = MatchConfig(args.iou, args.ignore_overlap)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    threads = _resolve_threads(args.threads)

    def run(stem: str):
        records = formats.read_detections(dets[stem])
        ann = formats.read_annotation(gts[stem])
        return match_detections(records, list(ann.texts), list(ann.ignores), cfg)

    try:
        reports = _pmap(run, stems, threads)
    except DATA_ERRORS as exc:
        return _fail(str(exc))
    print(formats.format_eval_report(aggregate(reports), args.json_style), end="")
    return 1 if unpaired else 0


# -- study -------------------------------------------------------------------


def _cmd_study(args: argparse.Namespace) -> int:
    cfg = SynthConfig(seed=args.seed, width=args.size[0], height=args.size[1])
    try:
        scenes = [generate_scene(cfg, i) for i in range(args.scenes)]
        report = run_perturbation_study(
            scenes,
            args.k,
            PostprocConfig(),
            PostprocConfig(extend_mode="fixed", delta_t=1.0),
            params=ShrinkParams(args.delta_s),
            window=args.window,
            threads=_resolve_threads(args.threads),
        )
    except DATA_ERRORS as exc:
        return _fail(str(exc))
    text = formats.format_study_report(report, args.json_style)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


# -- loss-check --------------------------------------------------------------


def _grad_rel_error(loss_fn, pred: FloatMap, analytic: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error of the analytic gradient against central
    finite differences over every pixel."""
    worst = 0.0
    base = pred.values
    for i in range(pred.height):
        for j in range(pred.width):
            # The map constructor freezes whatever array it adopts, so
            # each probe needs its own copy.
            up = base.copy()
            up[i, j] = base[i, j] + h
            hi = loss_fn(FloatMap(pred.width, pred.height, up))
            down = base.copy()
            down[i, j] = base[i, j] - h
            lo = loss_fn(FloatMap(pred.width, pred.height, down))
            fd = (hi - lo) / (2.0 * h)
            an = analytic[i, j]
            err = abs(fd - an) / max(abs(fd), abs(an), 1e-10)
            worst = max(worst, err)
    return worst


def _cmd_loss_check(args: argparse.Namespace) -> int:
    side = 16
    worst = {"dice": 0.0, "offset": 0.0, "spw": 0.0}
    for trial in range(args.trials):
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(trial,)))
        gt_bits = BitMask.from_array(rng.random((side, side)) < 0.3)
        valid = BitMask.from_array(rng.random((side, side)) < 0.8)
        pred = FloatMap.from_array(rng.uniform(0.02, 0.98, (side, side)))
        _, grad = dice_loss(pred, gt_bits, valid)
        worst["dice"] = max(
            worst["dice"],
            _grad_rel_error(lambda p: dice_loss(p, gt_bits, valid)[0], pred, grad.values),
        )

        region = BitMask.from_array(rng.random((side, side)) < 0.5)
        gt_map = FloatMap.from_array(rng.uniform(0.5, 20.0, (side, side)))
        pred_map = FloatMap.from_array(rng.uniform(0.5, 20.0, (side, side)))
        _, grad = offset_loss(pred_map, gt_map, region)
        worst["offset"] = max(
            worst["offset"],
            _grad_rel_error(
                lambda p: offset_loss(p, gt_map, region)[0], pred_map, grad.values
            ),
        )

        gt_map = FloatMap.from_array(rng.uniform(0.01, 1.0, (side, side)))
        pred_map = FloatMap.from_array(rng.uniform(0.01, 1.0, (side, side)))
        _, grad = spw_loss(pred_map, gt_map, region)
        worst["spw"] = max(
            worst["spw"],
            _grad_rel_error(
                lambda p: spw_loss(p, gt_map, region)[0], pred_map, grad.values
            ),
        )
    passed = all(err < 1e-4 for err in worst.values())
    if args.json_style:
        payload = {"max_relative_error": worst, "passed": passed, "trials": args.trials}
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print("# shrinkmask-loss-check v1")
        for name, err in worst.items():
            print(f"{name} max_rel_err {err:.3e}")
        print(f"trials {args.trials} passed {str(passed).lower()}")
    return 0 if passed else 1


# -- bench -------------------------------------------------------------------


def _cmd_bench(args: argparse.Namespace) -> int:
    width, height = args.size
    cfg = SynthConfig(
        seed=args.seed,
        width=width,
        height=height,
        count_range=(3, 6),
        size_range=(40.0, 120.0),
    )
    post = PostprocConfig()
    try:
        inputs = []
        for i in range(args.scenes):
            ann = generate_scene(cfg, i)
            inputs.append(oracle_predictions(ann))
    except DATA_ERRORS as exc:
        return _fail(str(exc))
    for prob, offset in inputs[:2]:
        reconstruct(prob, offset, post)  # warm caches before timing
    totals = []
    legs = np.zeros(4)
    n_dets = 0
    for _ in range(args.repeat):
        for prob, offset in inputs:
            dets, t = reconstruct(prob, offset, post)
            totals.append(t.total_ms)
            legs += (t.binarize_ms, t.components_ms, t.trace_ms, t.extend_ms)
            n_dets += len(dets)
    mean = float(np.mean(totals))
    p50, p99 = (float(v) for v in np.percentile(totals, [50, 99]))
    legs /= len(totals)
    if args.json_style:
        payload = {
            "size": [width, height],
            "scenes": args.scenes,
            "repeat": args.repeat,
            "post_ms": {"mean": mean, "p50": p50, "p99": p99},
            "legs_ms": {
                "binarize": legs[0],
                "components": legs[1],
                "trace": legs[2],
                "extend": legs[3],
            },
        }
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print("# shrinkmask-bench v1")
        print(f"size {width}x{height} scenes {args.scenes} repeat {args.repeat}")
        print(f"post mean {mean:.3f} ms p50 {p50:.3f} ms p99 {p99:.3f} ms")
        print(
            f"legs binarize {legs[0]:.3f} components {legs[1]:.3f}"
            f" trace {legs[2]:.3f} extend {legs[3]:.3f} (mean ms)"
        )
    return 0


# -- render ------------------------------------------------------------------

GT_COLOR = (64, 220, 64)
IGNORE_COLOR = (120, 120, 120)
ADAPTIVE_COLOR = (80, 140, 255)
FIXED_COLOR = (255, 90, 70)


def _cmd_render(args: argparse.Namespace) -> int:
    from PIL import Image, ImageDraw

    try:
        ann = formats.read_annotation(args.ann)
        dets = formats.read_detections(args.det) if args.det else []
    except DATA_ERRORS as exc:
        return _fail(str(exc))
    img = Image.new("RGB", (ann.width, ann.height), (18, 18, 18))
    draw = ImageDraw.Draw(img)

    def outline(poly, color):
        pts = [tuple(p) for p in poly.array] + [tuple(poly.array[0])]
        draw.line(pts, fill=color, width=2)

    for poly in ann.ignores:
        outline(poly, IGNORE_COLOR)
    for poly in ann.texts:
        outline(poly, GT_COLOR)
    for det in dets:
        outline(det.contour, ADAPTIVE_COLOR if det.mode == "adaptive" else FIXED_COLOR)
    img.save(args.out)
    print(f"wrote {args.out}")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shrinkmask",
        description="Shrink-mask text detection labels, reconstruction, and scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-labels", help="write label maps for annotation files")
    p.add_argument("--ann", required=True, help="directory of annotation .txt files")
    p.add_argument("--out", required=True, help="output directory for .mapf files")
    p.add_argument("--delta-s", type=_open_unit, default=0.4)
    p.add_argument("--window", type=_positive_int, default=32)
    p.add_argument(
        "--spw-valid-region", choices=("all", "shrink-only"), default="all"
    )
    p.add_argument("--threads", type=_positive_int, default=None)
    p.set_defaults(func=_cmd_gen_labels)

    p = sub.add_parser("reconstruct", help="rebuild text contours from maps")
    p.add_argument("--shrink", required=True)
    p.add_argument("--offset", required=True)
    p.add_argument("--mode", choices=("adaptive", "fixed"), default="adaptive")
    p.add_argument("--delta-t", type=_positive_float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=_open_unit, default=0.3)
    p.add_argument("--min-area", type=float, default=16.0)
    p.add_argument("--min-score", type=float, default=0.5)
    p.add_argument(
        "--aggregation",
        choices=("contour-band-mean", "region-mean"),
        default="contour-band-mean",
    )
    p.set_defaults(func=_cmd_reconstruct, parser_name="reconstruct")

    p = sub.add_parser("evaluate", help="score detections against ground truth")
    p.add_argument("--det", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=_iou_list, default=(0.5, 0.75))
    p.add_argument("--ignore-overlap", type=float, default=0.5)
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--json-style", action="store_true")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("study", help="perturbation study: adaptive vs fixed extension")
    p.add_argument("--scenes", type=_positive_int, default=20)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument(
        "--k",
        type=_k_spec,
        default=tuple(range(-3, 4)),
        help="perturbation radii: comma list or range; negative values"
        " need the equals form, e.g. --k=-3..3",
    )
    p.add_argument("--size", type=_size, default=(320, 320))
    p.add_argument("--delta-s", type=_open_unit, default=0.4)
    p.add_argument("--window", type=_positive_int, default=32)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--json-style", action="store_true")
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("loss-check", help="finite-difference gradient validation")
    p.add_argument("--trials", type=_positive_int, default=50)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--json-style", action="store_true")
    p.set_defaults(func=_cmd_loss_check)

    p = sub.add_parser("bench", help="post-processing latency")
    p.add_argument("--scenes", type=_positive_int, default=5)
    p.add_argument("--size", type=_size, default=(640, 640))
    p.add_argument("--repeat", type=_positive_int, default=20)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--json-style", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("render", help="overlay annotations and detections")
    p.add_argument("--ann", required=True)
    p.add_argument("--det", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "parser_name", None) == "reconstruct":
        if args.mode == "fixed" and args.delta_t is None:
            parser.error("--mode fixed requires --delta-t")
    try:
        return args.func(args)
    except SystemExit:
        raise
    except DATA_ERRORS as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
