"""File formats: annotation text, MAPF binary grids, detection records.

Annotation files carry one polygon per line as comma-separated x,y pairs,
optionally ending in ",###" for do-not-care regions, with an optional
"# size WxH" header. MAPF is a little-endian binary container for one
mask or float map. Detection files are line-oriented text with a config
header and an optional timing comment.
"""

from __future__ import annotations

import json
import math
import re
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import GeometryError, Polygon
from .labels import SceneAnnotation
from .metrics import EvalReport
from .postproc import Detection, PostprocConfig, StudyReport, TimingBreakdown
from .raster import BitMask, FloatMap

MAPF_MAGIC = b"MAPF"
MAPF_VERSION = 1
MAPF_DTYPE_MASK = 0
MAPF_DTYPE_F32 = 1
_MAPF_HEADER = struct.Struct("<4sBBII")

_SIZE_RE = re.compile(r"#\s*size\s+(\d+)\s*x\s*(\d+)\s*$", re.IGNORECASE)


class AnnotationFormatError(ValueError):
    """Raised for unparseable annotation lines; message carries line number."""


class MapFormatError(ValueError):
    """Raised for malformed MAPF payloads."""


class DetectionFormatError(ValueError):
    """Raised for malformed detection records."""


# -- annotations -------------------------------------------------------------


def parse_annotation(text: str) -> SceneAnnotation:
    """Parse annotation text into a scene.

    Without a size header, the image spans the polygons' rounded-up
    extent. Raises AnnotationFormatError naming the offending line.
    """
    width = height = None
    texts: list[Polygon] = []
    ignores: list[Polygon] = []
    max_x = max_y = 1.0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _SIZE_RE.match(line)
            if m:
                width, height = int(m.group(1)), int(m.group(2))
            continue
        fields = [f.strip() for f in line.split(",")]
        is_ignore = fields and fields[-1] == "###"
        if is_ignore:
            fields = fields[:-1]
        if len(fields) < 6 or len(fields) % 2 != 0:
            raise AnnotationFormatError(
                f"line {lineno}: need an even count of at least 6 coordinates"
            )
        try:
            coords = [float(f) for f in fields]
        except ValueError as exc:
            raise AnnotationFormatError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(c) for c in coords):
            raise AnnotationFormatError(f"line {lineno}: non-finite coordinate")
        pts = list(zip(coords[0::2], coords[1::2]))
        try:
            poly = Polygon(pts)
        except GeometryError as exc:
            raise AnnotationFormatError(f"line {lineno}: {exc}") from None
        (ignores if is_ignore else texts).append(poly)
        max_x = max(max_x, *(p[0] for p in pts))
        max_y = max(max_y, *(p[1] for p in pts))
    if width is None:
        width, height = math.ceil(max_x), math.ceil(max_y)
    return SceneAnnotation(width, height, tuple(texts), tuple(ignores))


def format_annotation(ann: SceneAnnotation) -> str:
    lines = [f"# size {ann.width}x{ann.height}"]
    for poly in ann.texts:
        lines.append(",".join(repr(float(c)) for c in poly.array.ravel()))
    for poly in ann.ignores:
        lines.append(",".join(repr(float(c)) for c in poly.array.ravel()) + ",###")
    return "\n".join(lines) + "\n"


def read_annotation(path: str | Path) -> SceneAnnotation:
    return parse_annotation(Path(path).read_text(encoding="utf-8"))


def write_annotation(path: str | Path, ann: SceneAnnotation) -> None:
    Path(path).write_text(format_annotation(ann), encoding="utf-8")


# -- MAPF binary maps --------------------------------------------------------


def encode_map(grid: BitMask | FloatMap) -> bytes:
    if isinstance(grid, BitMask):
        payload = np.packbits(grid.bits.astype(np.uint8), axis=1).tobytes()
        dtype = MAPF_DTYPE_MASK
    elif isinstance(grid, FloatMap):
        payload = grid.values.astype("<f4").tobytes()
        dtype = MAPF_DTYPE_F32
    else:
        raise TypeError(f"cannot encode {type(grid).__name__}")
    header = _MAPF_HEADER.pack(MAPF_MAGIC, MAPF_VERSION, dtype, grid.width, grid.height)
    return header + payload


def decode_map(blob: bytes) -> BitMask | FloatMap:
    if len(blob) < _MAPF_HEADER.size:
        raise MapFormatError("truncated header")
    magic, version, dtype, width, height = _MAPF_HEADER.unpack_from(blob)
    if magic != MAPF_MAGIC:
        raise MapFormatError("bad magic; not a MAPF file")
    if version != MAPF_VERSION:
        raise MapFormatError(f"unsupported version {version}")
    if width == 0 or height == 0:
        raise MapFormatError("zero-sized map")
    payload = blob[_MAPF_HEADER.size :]
    if dtype == MAPF_DTYPE_MASK:
        row_bytes = (width + 7) // 8
        if len(payload) != row_bytes * height:
            raise MapFormatError("mask payload length does not match header")
        rows = np.frombuffer(payload, dtype=np.uint8).reshape(height, row_bytes)
        bits = np.unpackbits(rows, axis=1)[:, :width].astype(bool)
        return BitMask(width, height, bits)
    if dtype == MAPF_DTYPE_F32:
        if len(payload) != 4 * width * height:
            raise MapFormatError("float payload length does not match header")
        values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
        return FloatMap(width, height, values.astype(np.float64))
    raise MapFormatError(f"unknown dtype code {dtype}")


def read_map(path: str | Path) -> BitMask | FloatMap:
    return decode_map(Path(path).read_bytes())


def write_map(path: str | Path, grid: BitMask | FloatMap) -> None:
    Path(path).write_bytes(encode_map(grid))


# -- detection files ---------------------------------------------------------


def _format_ring(poly: Polygon) -> str:
    """Vertices at 4-decimal precision, deduplicated at that precision."""
    seen: list[tuple[str, str]] = []
    for x, y in poly.array:
        pair = (f"{x:.4f}", f"{y:.4f}")
        if seen and pair == seen[-1]:
            continue
        seen.append(pair)
    if len(seen) > 1 and seen[0] == seen[-1]:
        seen.pop()
    if len(seen) < 3:
        raise DetectionFormatError("polygon degenerates at 4-decimal precision")
    return ",".join(f"{x},{y}" for x, y in seen)


def format_detections(
    dets: Sequence[Detection],
    cfg: PostprocConfig | None = None,
    timing: TimingBreakdown | None = None,
) -> str:
    lines = ["# shrinkmask-detections v1"]
    if cfg is not None:
        delta = "none" if cfg.delta_t is None else f"{cfg.delta_t:.6f}"
        lines.append(
            "# config"
            f" mode={cfg.extend_mode}"
            f" threshold={cfg.binarize_threshold:.4f}"
            f" min_area={cfg.min_area:.4f}"
            f" min_score={cfg.min_score:.4f}"
            f" aggregation={cfg.offset_aggregation}"
            f" delta_t={delta}"
        )
    if timing is not None:
        lines.append(
            "# timing"
            f" binarize={timing.binarize_ms:.3f}"
            f" components={timing.components_ms:.3f}"
            f" trace={timing.trace_ms:.3f}"
            f" extend={timing.extend_ms:.3f}"
            f" total={timing.total_ms:.3f}"
        )
    for d in dets:
        lines.append(
            f"{d.score:.6f} {d.mode} {d.offset_used:.4f} "
            f"{_format_ring(d.contour)} | {_format_ring(d.shrink_contour)}"
        )
    return "\n".join(lines) + "\n"


def _parse_ring(field: str, lineno: int) -> Polygon:
    try:
        coords = [float(v) for v in field.split(",")]
    except ValueError:
        raise DetectionFormatError(f"line {lineno}: bad coordinate") from None
    if len(coords) < 6 or len(coords) % 2 != 0:
        raise DetectionFormatError(f"line {lineno}: bad coordinate count")
    try:
        return Polygon(list(zip(coords[0::2], coords[1::2])))
    except GeometryError as exc:
        raise DetectionFormatError(f"line {lineno}: {exc}") from None


def parse_detections(text: str) -> list[Detection]:
    dets: list[Detection] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, sep, shrink_field = line.partition(" | ")
        if not sep:
            raise DetectionFormatError(f"line {lineno}: missing shrink contour")
        parts = head.split(" ", 3)
        if len(parts) != 4:
            raise DetectionFormatError(f"line {lineno}: malformed record")
        score_s, mode, offset_s, contour_field = parts
        try:
            score = float(score_s)
            offset = float(offset_s)
        except ValueError:
            raise DetectionFormatError(f"line {lineno}: bad number") from None
        dets.append(
            Detection(
                contour=_parse_ring(contour_field, lineno),
                score=score,
                shrink_contour=_parse_ring(shrink_field, lineno),
                offset_used=offset,
                mode=mode,
            )
        )
    return dets


def read_detections(path: str | Path) -> list[Detection]:
    return parse_detections(Path(path).read_text(encoding="utf-8"))


def write_detections(
    path: str | Path,
    dets: Sequence[Detection],
    cfg: PostprocConfig | None = None,
    timing: TimingBreakdown | None = None,
) -> None:
    Path(path).write_text(format_detections(dets, cfg, timing), encoding="utf-8")


# -- reports -----------------------------------------------------------------


def format_eval_report(report: EvalReport, json_style: bool = False) -> str:
    if json_style:
        payload = {
            "thresholds": [
                {
                    "iou": m.threshold,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f_measure": m.f_measure,
                    "tp": m.tp,
                    "fp": m.fp,
                    "fn": m.fn,
                }
                for m in report.per_threshold
            ]
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    lines = ["# shrinkmask-eval v1"]
    for m in report.per_threshold:
        lines.append(
            f"iou {m.threshold:g}: P {100 * m.precision:.1f}"
            f" R {100 * m.recall:.1f} F {100 * m.f_measure:.1f}"
            f" (tp {m.tp} fp {m.fp} fn {m.fn})"
        )
    return "\n".join(lines) + "\n"


def format_study_report(report: StudyReport, json_style: bool = False) -> str:
    if json_style:
        payload = {
            "delta_t": report.delta_t,
            "scenes": report.scenes,
            "rows": [
                {
                    "k": r.k,
                    "adaptive_mean_iou": r.adaptive_mean_iou,
                    "fixed_mean_iou": r.fixed_mean_iou,
                    "instances": r.instances,
                }
                for r in report.rows
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    lines = [
        "# shrinkmask-study v1",
        f"# scenes {report.scenes} delta_t {report.delta_t:.6f}",
    ]
    for r in report.rows:
        lines.append(
            f"k {r.k:+d}: adaptive {r.adaptive_mean_iou:.4f}"
            f" fixed {r.fixed_mean_iou:.4f} n {r.instances}"
        )
    return "\n".join(lines) + "\n"
