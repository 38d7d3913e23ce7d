"""Detection scoring: greedy IoU matching and micro-averaged P/R/F.

Detections overlapping a do-not-care region beyond the configured
fraction are removed before counting, mirroring the usual ICDAR-style
treatment of ignore zones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .geometry import Polygon, area, intersection_area, polygon_iou


class ThresholdMismatchError(ValueError):
    """Raised when aggregating reports with different threshold lists."""


@dataclass(frozen=True)
class MatchConfig:
    iou_thresholds: tuple[float, ...] = (0.5, 0.75)
    ignore_overlap: float = 0.5

    def __post_init__(self) -> None:
        ts = tuple(float(t) for t in self.iou_thresholds)
        if not ts:
            raise ValueError("at least one IoU threshold required")
        for t in ts:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"threshold {t} outside (0, 1]")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("thresholds must be strictly increasing")
        object.__setattr__(self, "iou_thresholds", ts)


@dataclass(frozen=True)
class ThresholdMetrics:
    """Counts and derived rates at one IoU threshold."""

    threshold: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_measure: float
    matches: tuple[tuple[int, int, float], ...]


@dataclass(frozen=True)
class EvalReport:
    per_threshold: tuple[ThresholdMetrics, ...]

    @property
    def thresholds(self) -> tuple[float, ...]:
        return tuple(m.threshold for m in self.per_threshold)


def _rates(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    # 0/0 counts as perfect: an empty scene with no detections is correct.
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def _metrics(
    threshold: float,
    matches: Sequence[tuple[int, int, float]],
    n_det: int,
    n_gt: int,
) -> ThresholdMetrics:
    kept = tuple(m for m in matches if m[2] >= threshold)
    tp = len(kept)
    p, r, f = _rates(tp, n_det - tp, n_gt - tp)
    return ThresholdMetrics(
        threshold=threshold,
        tp=tp,
        fp=n_det - tp,
        fn=n_gt - tp,
        precision=p,
        recall=r,
        f_measure=f,
        matches=kept,
    )


def greedy_match(
    det_polys: Sequence[Polygon], gt_polys: Sequence[Polygon]
) -> list[tuple[int, int, float]]:
    """One-to-one matching by descending IoU; ties break on the lower
    detection index, then the lower ground-truth index."""
    pairs = []
    for i, d in enumerate(det_polys):
        for j, g in enumerate(gt_polys):
            iou = polygon_iou(d, g)
            if iou > 0.0:
                pairs.append((i, j, iou))
    pairs.sort(key=lambda m: (-m[2], m[0], m[1]))
    det_used = [False] * len(det_polys)
    gt_used = [False] * len(gt_polys)
    matches = []
    for i, j, iou in pairs:
        if not det_used[i] and not gt_used[j]:
            det_used[i] = True
            gt_used[j] = True
            matches.append((i, j, iou))
    return matches


def match_detections(
    dets: Sequence,
    gts: Sequence[Polygon],
    ignores: Sequence[Polygon],
    cfg: MatchConfig = MatchConfig(),
) -> EvalReport:
    """Score one image's detections against its ground truth.

    `dets` may hold Detection objects or bare Polygons. A detection is
    discarded when its overlap with any ignore region exceeds
    `ignore_overlap` times its own area.
    """
    det_polys = [d.contour if hasattr(d, "contour") else d for d in dets]
    kept = []
    for poly in det_polys:
        a = area(poly)
        if any(intersection_area(poly, ig) > cfg.ignore_overlap * a for ig in ignores):
            continue
        kept.append(poly)
    matches = greedy_match(kept, gts)
    per = tuple(
        _metrics(t, matches, len(kept), len(gts)) for t in cfg.iou_thresholds
    )
    return EvalReport(per)


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """Dataset-level report from per-image reports by summing counts."""
    if not reports:
        raise ValueError("no reports to aggregate")
    thresholds = reports[0].thresholds
    for rep in reports[1:]:
        if rep.thresholds != thresholds:
            raise ThresholdMismatchError(
                f"threshold lists differ: {rep.thresholds} vs {thresholds}"
            )
    per = []
    for k, t in enumerate(thresholds):
        tp = sum(rep.per_threshold[k].tp for rep in reports)
        fp = sum(rep.per_threshold[k].fp for rep in reports)
        fn = sum(rep.per_threshold[k].fn for rep in reports)
        p, r, f = _rates(tp, fp, fn)
        per.append(
            ThresholdMetrics(
                threshold=t,
                tp=tp,
                fp=fp,
                fn=fn,
                precision=p,
                recall=r,
                f_measure=f,
                matches=(),
            )
        )
    return EvalReport(tuple(per))
