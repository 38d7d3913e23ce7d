"""Supervision-map generation for shrink-mask text detection.

Produces four aligned grids per annotated scene: the shrink mask (text
polygons moved inward by their size-adaptive offset), the offset map
(per-pixel distance to the owning text contour), the window-coverage map
(fraction of a sliding square window covered by shrink masks), and the
ignore mask for do-not-care regions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (
    EmptyResultError,
    Point2,
    Polygon,
    ShrinkParams,
    offset_polygon,
    shrink_offset,
)
from .raster import BitMask, FloatMap, distance_transform, rasterize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneAnnotation:
    """One image worth of polygon annotations.

    `texts` are real instances; `ignores` are do-not-care regions excluded
    from supervision and scoring.
    """

    width: int
    height: int
    texts: tuple[Polygon, ...] = ()
    ignores: tuple[Polygon, ...] = ()

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size {self.width}x{self.height} must be positive")
        object.__setattr__(self, "texts", tuple(self.texts))
        object.__setattr__(self, "ignores", tuple(self.ignores))
        for poly in self.texts + self.ignores:
            if not isinstance(poly, Polygon):
                raise TypeError(f"expected Polygon, got {type(poly).__name__}")


@dataclass(frozen=True)
class LabelMaps:
    """The four aligned supervision grids for one scene."""

    shrink: BitMask
    offset: FloatMap
    spw: FloatMap
    ignore: BitMask

    def __post_init__(self) -> None:
        ref = self.shrink
        for other in (self.offset, self.spw, self.ignore):
            if not ref.same_shape(other):
                raise ValueError("label maps must share width x height")


@dataclass(frozen=True)
class AnchorWindow:
    """Square scoring window centered on a pixel."""

    center: Point2
    size: int

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError(f"window size must be positive, got {self.size}")


def _window_edges(n: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Clipped [lo, hi) extents of a size-px window centered at each index."""
    idx = np.arange(n)
    lo = np.clip(idx - size // 2, 0, n)
    hi = np.clip(idx - size // 2 + size, 0, n)
    return lo, hi


def _window_sums(bits: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (window popcount, window pixel count) via an integral image."""
    h, w = bits.shape
    acc = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(bits, axis=0), axis=1, out=acc[1:, 1:])
    i0, i1 = _window_edges(h, size)
    j0, j1 = _window_edges(w, size)
    sums = (
        acc[np.ix_(i1, j1)]
        - acc[np.ix_(i0, j1)]
        - acc[np.ix_(i1, j0)]
        + acc[np.ix_(i0, j0)]
    )
    counts = (i1 - i0)[:, None] * (j1 - j0)[None, :]
    return sums, counts


def _union_raster(polys: Sequence[Polygon], width: int, height: int) -> np.ndarray:
    bits = np.zeros((height, width), dtype=bool)
    for poly in polys:
        bits |= rasterize(poly, width, height).bits
    return bits


def _contour_distance(text_bits: np.ndarray) -> np.ndarray:
    """Distance from each set pixel's center to the text contour.

    Computed on a 2-px padded bounding-box crop so the distance transform
    matches the full-grid result while staying cheap for small texts. The
    half-pixel correction converts nearest-unset-center distance into
    distance to the polygon boundary crossing between pixel centers.
    """
    out = np.zeros(text_bits.shape)
    rows, cols = np.nonzero(text_bits)
    if rows.size == 0:
        return out
    i0 = max(int(rows.min()) - 2, 0)
    i1 = min(int(rows.max()) + 3, text_bits.shape[0])
    j0 = max(int(cols.min()) - 2, 0)
    j1 = min(int(cols.max()) + 3, text_bits.shape[1])
    crop = text_bits[i0:i1, j0:j1]
    if crop.all():
        # Text covers the whole grid: fall back to image-border distance.
        h, w = text_bits.shape
        ii = np.arange(h)[:, None]
        jj = np.arange(w)[None, :]
        border = np.minimum(np.minimum(ii + 1, h - ii), np.minimum(jj + 1, w - jj))
        out[text_bits] = border[text_bits] - 0.5
        return out
    dist = distance_transform(BitMask.from_array(crop)).values
    out[i0:i1, j0:j1][crop] = dist[crop] - 0.5
    return out


def gen_shrink_mask(ann: SceneAnnotation, params: ShrinkParams) -> BitMask:
    """Union of every text polygon moved inward by its own shrink offset.

    Texts that vanish under shrinking are skipped and logged; they cannot
    be represented in the mask.
    """
    bits = np.zeros((ann.height, ann.width), dtype=bool)
    for k, text in enumerate(ann.texts):
        try:
            parts = offset_polygon(text, -shrink_offset(text, params))
        except EmptyResultError:
            logger.debug("text %d collapsed under shrinking; skipped", k)
            continue
        for part in parts:
            bits |= rasterize(part, ann.width, ann.height).bits
    return BitMask(ann.width, ann.height, bits)


def gen_offset_map(ann: SceneAnnotation) -> FloatMap:
    """Per-pixel distance to the nearest containing text's contour.

    Zero outside all texts; where texts overlap, the minimum over the
    covering instances is kept.
    """
    out = np.zeros((ann.height, ann.width))
    covered = np.zeros((ann.height, ann.width), dtype=bool)
    for text in ann.texts:
        bits = rasterize(text, ann.width, ann.height).bits
        dist = _contour_distance(bits)
        fresh = bits & ~covered
        out[fresh] = dist[fresh]
        both = bits & covered
        out[both] = np.minimum(out[both], dist[both])
        covered |= bits
    return FloatMap(ann.width, ann.height, out)


def gen_spw_map(ann: SceneAnnotation, shrink: BitMask, window: int) -> FloatMap:
    """Fraction of each centered window covered by shrink-mask pixels.

    Windows are clipped at image borders and the fraction is taken over the
    clipped area, so values stay in [0, 1] everywhere.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    if (shrink.width, shrink.height) != (ann.width, ann.height):
        raise ValueError("shrink mask does not match annotation size")
    sums, counts = _window_sums(shrink.bits, window)
    return FloatMap(ann.width, ann.height, sums / counts)


def gen_iou_map(ann: SceneAnnotation, window: int) -> FloatMap:
    """Window-vs-text overlap baseline: for each pixel, the best in-window
    text overlap divided by the window/text union area.

    The text maximizing the raw overlap is chosen first, then the ratio is
    formed against that text's full area; ties go to the earlier instance.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    _, counts = _window_sums(
        np.zeros((ann.height, ann.width), dtype=bool), window
    )
    if not ann.texts:
        return FloatMap.zeros(ann.width, ann.height)
    inters = []
    areas = []
    for text in ann.texts:
        bits = rasterize(text, ann.width, ann.height).bits
        inter, _ = _window_sums(bits, window)
        inters.append(inter)
        areas.append(int(bits.sum()))
    stack = np.stack(inters)
    best = np.argmax(stack, axis=0)
    inter = np.take_along_axis(stack, best[None], axis=0)[0]
    area = np.asarray(areas, dtype=np.int64)[best]
    union = counts + area - inter
    out = np.where(inter > 0, inter / np.where(union == 0, 1, union), 0.0)
    return FloatMap(ann.width, ann.height, out)


def gen_labels(
    ann: SceneAnnotation,
    params: ShrinkParams,
    window: int,
    spw_valid_region: str = "all",
) -> LabelMaps:
    """Bundle shrink, offset, window-coverage, and ignore grids for a scene.

    Texts whose shrink collapses are excluded from every map and logged.
    `spw_valid_region` ("all" or "shrink-only") selects which pixels the
    coverage map supervises later in the loss stack; the maps themselves
    are identical under either setting.
    """
    if spw_valid_region not in ("all", "shrink-only"):
        raise ValueError(f"unknown spw_valid_region {spw_valid_region!r}")
    kept = []
    skipped = 0
    for k, text in enumerate(ann.texts):
        try:
            offset_polygon(text, -shrink_offset(text, params))
        except EmptyResultError:
            skipped += 1
            logger.debug("text %d collapsed under shrinking; excluded from labels", k)
            continue
        kept.append(text)
    if skipped:
        logger.info("excluded %d text(s) that collapsed under shrinking", skipped)
    effective = SceneAnnotation(ann.width, ann.height, tuple(kept), ann.ignores)
    shrink = gen_shrink_mask(effective, params)
    offset = gen_offset_map(effective)
    spw = gen_spw_map(effective, shrink, window)
    ignore = BitMask(ann.width, ann.height, _union_raster(ann.ignores, ann.width, ann.height))
    return LabelMaps(shrink=shrink, offset=offset, spw=spw, ignore=ignore)
