"""Exact 2-D polygon primitives: area, perimeter, offsets, boolean areas.

Polygons are simple closed rings of pixel-unit points, normalized to
counter-clockwise orientation (positive shoelace area). Offsetting and
boolean operations are delegated to GEOS (via shapely) behind the public
contracts here; offsetting uses miter joins with miter limit 2.0, falling
back to bevel beyond the limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon

# Vertex-coincidence / orientation epsilon in pixel units.
EPS = 1e-9

# Offset join policy: miter with this limit, beveled beyond it.
MITER_LIMIT = 2.0

# When shrinking splits a polygon, parts below this area are dropped as
# degenerate slivers. A split-free result is returned whatever its size.
MIN_PART_AREA = 1.0


class GeometryError(ValueError):
    """Base class for polygon construction and operation failures."""


class InvalidPolygonError(GeometryError):
    """Raised when vertices do not form a valid simple polygon."""


class EmptyResultError(GeometryError):
    """Raised when inward offsetting collapses a polygon entirely."""


@dataclass(frozen=True)
class Point2:
    """A 2-D point in pixel units. Coordinates must be finite."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidPolygonError(f"non-finite coordinate ({self.x}, {self.y})")


@dataclass(frozen=True)
class ShrinkParams:
    """Shrinking coefficient for inward label offsets, 0 < delta_s < 1."""

    delta_s: float = 0.4

    def __post_init__(self) -> None:
        if not (0.0 < self.delta_s < 1.0):
            raise ValueError(f"delta_s must lie in (0, 1), got {self.delta_s}")


@dataclass(frozen=True)
class FixedExtendParams:
    """Extending coefficient for the fixed outward offset, delta_t > 0."""

    delta_t: float

    def __post_init__(self) -> None:
        if not (self.delta_t > 0.0 and math.isfinite(self.delta_t)):
            raise ValueError(f"delta_t must be positive and finite, got {self.delta_t}")


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(pts: np.ndarray) -> tuple[int, int] | None:
    """Return indices (i, j) of a pair of non-adjacent edges that intersect.

    Checks proper crossings, endpoint touches between non-adjacent edges,
    and collinear overlaps, all with tolerance EPS. Vectorized over edge
    pairs; None means the ring is simple.
    """
    n = len(pts)
    a = pts
    b = np.roll(pts, -1, axis=0)
    for i in range(n - 2):
        # Edges j > i+1, skipping the wrap-around neighbour of edge 0.
        j_lo = i + 2
        j_hi = n if i > 0 else n - 1
        if j_lo >= j_hi:
            continue
        p, r = a[i], b[i] - a[i]
        q = a[j_lo:j_hi]
        s = b[j_lo:j_hi] - q
        qp = q - p
        rxs = r[0] * s[:, 1] - r[1] * s[:, 0]
        qpxr = qp[:, 0] * r[1] - qp[:, 1] * r[0]
        qpxs = qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]
        scale = max(1.0, float(np.abs(r).max()))
        tol = EPS * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(rxs) > tol, qpxs / np.where(rxs == 0, 1, rxs), np.nan)
            u = np.where(np.abs(rxs) > tol, qpxr / np.where(rxs == 0, 1, rxs), np.nan)
        hit = (t > -EPS) & (t < 1 + EPS) & (u > -EPS) & (u < 1 + EPS)
        if hit.any():
            return i, j_lo + int(np.argmax(hit))
        # Collinear pairs: overlap iff projections onto r overlap.
        col = (np.abs(rxs) <= tol) & (np.abs(qpxr) <= tol)
        if col.any():
            rr = float(r @ r)
            t0 = (qp[col] @ r) / rr
            t1 = t0 + (s[col] @ r) / rr
            lo = np.minimum(t0, t1)
            hi = np.maximum(t0, t1)
            overlap = (hi > EPS) & (lo < 1 - EPS)
            if overlap.any():
                idx = np.flatnonzero(col)[np.argmax(overlap)]
                return i, j_lo + int(idx)
    return None


class Polygon:
    """A simple closed polygon, stored counter-clockwise.

    Validated on construction: at least three vertices, finite coordinates,
    no coincident consecutive vertices (within EPS), non-zero area, and no
    self-intersections. Instances are immutable.
    """

    __slots__ = ("_pts", "_shapely")

    def __init__(self, vertices: Iterable, *, _trusted: bool = False) -> None:
        pts = np.asarray(
            [(v.x, v.y) if isinstance(v, Point2) else (float(v[0]), float(v[1])) for v in vertices],
            dtype=np.float64,
        )
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidPolygonError("vertices must be 2-D points")
        if not np.isfinite(pts).all():
            raise InvalidPolygonError("non-finite vertex coordinate")
        # Drop an explicit closing vertex if present.
        if len(pts) > 1 and np.hypot(*(pts[0] - pts[-1])) <= EPS:
            pts = pts[:-1]
        if len(pts) < 3:
            raise InvalidPolygonError(f"need at least 3 vertices, got {len(pts)}")
        gaps = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
        if (gaps <= EPS).any():
            k = int(np.argmax(gaps <= EPS))
            raise InvalidPolygonError(f"coincident consecutive vertices at index {k}")
        area2 = _signed_area(pts)
        if abs(area2) <= EPS:
            raise InvalidPolygonError("degenerate polygon with zero area")
        if area2 < 0:
            pts = pts[::-1].copy()
        if not _trusted:
            bad = _segments_cross(pts)
            if bad is not None:
                i, j = bad
                raise InvalidPolygonError(
                    f"self-intersecting polygon: edge {i}-{(i + 1) % len(pts)} "
                    f"crosses edge {j}-{(j + 1) % len(pts)}"
                )
        pts.setflags(write=False)
        object.__setattr__(self, "_pts", pts)
        object.__setattr__(self, "_shapely", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polygon is immutable")

    @classmethod
    def _from_ring(cls, pts: np.ndarray) -> "Polygon":
        """Trusted constructor for rings produced by validated algorithms.

        Skips the O(n^2) simplicity check; crack-traced contours may touch
        themselves at lattice corners (8-connected pinch points), which the
        strict check would reject.
        """
        return cls(pts, _trusted=True)

    @property
    def points(self) -> tuple[Point2, ...]:
        return tuple(Point2(float(x), float(y)) for x, y in self._pts)

    @property
    def array(self) -> np.ndarray:
        """Read-only (n, 2) float64 vertex array, CCW, not closed."""
        return self._pts

    def __len__(self) -> int:
        return len(self._pts)

    def __repr__(self) -> str:
        return f"Polygon({len(self._pts)} vertices, area={area(self):.3f})"

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon._from_ring(self._pts + np.array([dx, dy]))

    def to_shapely(self) -> _ShapelyPolygon:
        cached = self._shapely
        if cached is None:
            cached = _ShapelyPolygon(self._pts)
            if not cached.is_valid:
                # Pinched crack rings: repair for boolean/offset use.
                cached = shapely.make_valid(cached)
            object.__setattr__(self, "_shapely", cached)
        return cached


def area(poly: Polygon) -> float:
    """Shoelace area in px^2, positive by CCW normalization."""
    return abs(_signed_area(poly.array))


def perimeter(poly: Polygon) -> float:
    """Sum of edge lengths including the closing edge, in px."""
    pts = poly.array
    return float(np.hypot(*(np.roll(pts, -1, axis=0) - pts).T).sum())


def shrink_offset(poly: Polygon, params: ShrinkParams) -> float:
    """Inward label offset o_s = (S/L) * (1 - delta_s^2); strictly positive."""
    return area(poly) / perimeter(poly) * (1.0 - params.delta_s**2)


def fixed_offset(poly: Polygon, params: FixedExtendParams) -> float:
    """Fixed outward offset o_f = (S/L) * delta_t from the polygon's own shape."""
    return area(poly) / perimeter(poly) * params.delta_t


def _extract_parts(geom) -> list[_ShapelyPolygon]:
    if geom.is_empty:
        return []
    if isinstance(geom, _ShapelyPolygon):
        return [geom]
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, _ShapelyPolygon)]


def offset_polygon(poly: Polygon, delta: float) -> list[Polygon]:
    """Offset every edge by |delta| along its normal: delta < 0 shrinks,
    delta > 0 expands. Miter joins (limit 2.0, beveled beyond).

    Shrinking may split the polygon; when it does, split parts below
    1 px^2 are dropped. Parts come back ordered by bounding box
    (min y, min x). Raises EmptyResultError when nothing survives, which
    callers treat as a too-small instance.
    """
    if not math.isfinite(delta):
        raise GeometryError("offset delta must be finite")
    if delta == 0.0:
        return [poly]
    buffered = poly.to_shapely().buffer(delta, join_style="mitre", mitre_limit=MITER_LIMIT)
    parts = _extract_parts(buffered)
    if delta < 0 and len(parts) > 1:
        parts = [p for p in parts if p.area >= MIN_PART_AREA]
    if not parts:
        raise EmptyResultError(f"polygon collapsed under offset {delta:.6g}")
    parts.sort(key=lambda p: (p.bounds[1], p.bounds[0]))
    return [_ring_polygon(p) for p in parts]


def _ring_polygon(part: _ShapelyPolygon) -> Polygon:
    """Exterior ring of a GEOS polygon as a trusted Polygon."""
    ring = np.asarray(part.exterior.coords)[:-1]
    keep = np.hypot(*(ring - np.roll(ring, 1, axis=0)).T) > EPS
    return Polygon._from_ring(ring[keep])


def clip_to_box(poly: Polygon, width: float, height: float) -> Polygon:
    """Intersect a polygon with the [0, width] x [0, height] rectangle.

    Returns the largest surviving piece; raises EmptyResultError when the
    polygon lies entirely outside the box.
    """
    clipped = poly.to_shapely().intersection(shapely.box(0.0, 0.0, width, height))
    parts = _extract_parts(clipped)
    if not parts:
        raise EmptyResultError("polygon lies outside the image rectangle")
    return _ring_polygon(max(parts, key=lambda p: p.area))


def intersection_area(a: Polygon, b: Polygon) -> float:
    """Area of the overlap region a and b share, in px^2."""
    return float(a.to_shapely().intersection(b.to_shapely()).area)


def union_area(a: Polygon, b: Polygon) -> float:
    """Area of the combined region covered by a or b, in px^2."""
    return float(a.to_shapely().union(b.to_shapely()).area)


def polygon_iou(a: Polygon, b: Polygon) -> float:
    """Intersection-over-union of two polygons, in [0, 1]."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (area(a) + area(b) - inter)
