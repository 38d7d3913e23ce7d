"""Polygon primitive tests: construction, measures, offsets, booleans."""

import numpy as np
import pytest
import scipy.ndimage as ndi

from conftest import sampled_polygon_area, sampled_region_areas, star_polygon
from shrinkmask import (
    EmptyResultError,
    FixedExtendParams,
    InvalidPolygonError,
    Point2,
    Polygon,
    ShrinkParams,
    area,
    fixed_offset,
    intersection_area,
    offset_polygon,
    perimeter,
    polygon_iou,
    shrink_offset,
    union_area,
)

UNIT_SQUARE = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])


def regular_ngon(n, radius, center=(0.0, 0.0), phase=0.0):
    ang = phase + 2.0 * np.pi * np.arange(n) / n
    return Polygon(
        np.column_stack(
            [center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)]
        )
    )


def test_point_rejects_non_finite():
    Point2(1.5, -2.0)
    for bad in (np.nan, np.inf, -np.inf):
        with pytest.raises(ValueError):
            Point2(bad, 0.0)
        with pytest.raises(ValueError):
            Point2(0.0, bad)


def test_polygon_needs_three_distinct_vertices():
    with pytest.raises(InvalidPolygonError):
        Polygon([(0, 0), (1, 0)])
    with pytest.raises(InvalidPolygonError):
        Polygon([(0, 0), (1, 0), (1, 0 + 1e-12), (0, 1)])


def test_polygon_rejects_self_intersection_with_edge_diagnostic():
    # A ribbon with zero signed area fails fast on the area check.
    with pytest.raises(InvalidPolygonError):
        Polygon([(0, 0), (2, 2), (2, 0), (0, 2)])
    # One with net area reaches the crossing check and names the edges.
    with pytest.raises(InvalidPolygonError) as err:
        Polygon([(0, 0), (4, 0), (5, 2), (2, -1), (0, 2)])
    msg = str(err.value)
    assert "edge" in msg, "diagnostic should name the crossing edge pair"


def test_polygon_normalized_to_ccw():
    cw = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    ring = cw.array
    e1, e2 = ring[1] - ring[0], ring[2] - ring[1]
    assert e1[0] * e2[1] - e1[1] * e2[0] > 0
    assert area(cw) == pytest.approx(1.0)


def test_polygon_drops_explicit_closing_vertex():
    poly = Polygon([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
    assert len(poly.array) == 4


def test_area_unit_square_and_triangle():
    assert area(UNIT_SQUARE) == pytest.approx(1.0)
    assert area(Polygon([(0, 0), (2, 0), (0, 2)])) == pytest.approx(2.0)


def test_area_matches_sampled_oracle_on_random_12gons():
    rng = np.random.default_rng(11)
    for _ in range(10):
        poly = star_polygon(rng, n_min=12, n_max=12, r_lo=6.0, r_hi=18.0)
        oracle = sampled_polygon_area(poly)
        assert abs(area(poly) - oracle) <= 0.01 * oracle


def test_perimeter_examples():
    assert perimeter(UNIT_SQUARE) == pytest.approx(4.0)
    assert perimeter(Polygon([(0, 0), (3, 0), (0, 4)])) == pytest.approx(12.0)


def test_shrink_offset_examples():
    p = ShrinkParams(delta_s=0.4)
    assert shrink_offset(UNIT_SQUARE, p) == pytest.approx(0.25 * 0.84)
    side10 = Polygon([(0, 0), (10, 0), (10, 10), (0, 10)])
    assert shrink_offset(side10, p) == pytest.approx(2.1)
    near_one = ShrinkParams(delta_s=0.999)
    assert shrink_offset(side10, near_one) < 0.006


def test_shrink_offset_scales_linearly():
    rng = np.random.default_rng(5)
    p = ShrinkParams(delta_s=0.4)
    for _ in range(50):
        poly = star_polygon(rng)
        k = float(rng.uniform(0.2, 8.0))
        scaled = Polygon(poly.array * k)
        a, b = shrink_offset(scaled, p), k * shrink_offset(poly, p)
        assert abs(a - b) <= 1e-9 * max(abs(a), abs(b))


def test_shrink_params_validation():
    with pytest.raises(ValueError):
        ShrinkParams(delta_s=0.0)
    with pytest.raises(ValueError):
        ShrinkParams(delta_s=1.0)


def test_fixed_offset_examples():
    p = FixedExtendParams(delta_t=1.5)
    assert fixed_offset(UNIT_SQUARE, p) == pytest.approx(0.375)
    small = Polygon([(0, 0), (0.58, 0), (0.58, 0.58), (0, 0.58)])
    assert fixed_offset(small, p) == pytest.approx(0.2175)


def test_fixed_params_require_positive_delta():
    with pytest.raises(ValueError):
        FixedExtendParams(delta_t=0.0)
    with pytest.raises(ValueError):
        FixedExtendParams(delta_t=-1.0)


def test_offset_square_inward():
    parts = offset_polygon(UNIT_SQUARE, -0.21)
    assert len(parts) == 1
    got = parts[0].array
    assert area(parts[0]) == pytest.approx(0.3364, abs=1e-9)
    lo, hi = got.min(axis=0), got.max(axis=0)
    assert np.allclose(lo, [0.21, 0.21]) and np.allclose(hi, [0.79, 0.79])


def test_offset_zero_is_identity():
    parts = offset_polygon(UNIT_SQUARE, 0.0)
    assert len(parts) == 1
    assert polygon_iou(parts[0], UNIT_SQUARE) == pytest.approx(1.0, abs=1e-9)


def test_offset_square_outward_keeps_right_angle_corners():
    parts = offset_polygon(UNIT_SQUARE, 0.5)
    assert len(parts) == 1
    assert area(parts[0]) == pytest.approx(4.0, abs=1e-6), "miter keeps 2x2 square"


def test_offset_collapse_raises():
    with pytest.raises(EmptyResultError):
        offset_polygon(UNIT_SQUARE, -0.6)


def u_shape(arm_w, bar_h, height, gap):
    w = 2 * arm_w + gap
    return Polygon(
        [
            (0, 0),
            (w, 0),
            (w, height),
            (w - arm_w, height),
            (w - arm_w, bar_h),
            (arm_w, bar_h),
            (arm_w, height),
            (0, height),
        ]
    )


def erosion_oracle(poly, d, res=0.05):
    """Part count and areas of an inward offset, from fine-raster erosion.

    The ring is shifted so unset pixels surround the shape on every side;
    otherwise edges on the grid border would never erode.
    """
    pad = 4
    ring = poly.array / res + pad
    w = int(np.ceil(ring[:, 0].max())) + pad
    h = int(np.ceil(ring[:, 1].max())) + pad
    gy, gx = np.mgrid[0:h, 0:w]
    pts = np.column_stack([gx.ravel() + 0.5, gy.ravel() + 0.5])
    from conftest import crossing_number_inside

    inside = crossing_number_inside(pts, ring).reshape(h, w)
    eroded = ndi.distance_transform_edt(inside) > d / res
    labeled, count = ndi.label(eroded, structure=np.ones((3, 3)))
    areas = sorted(
        float((labeled == c).sum() * res * res) for c in range(1, count + 1)
    )
    return count, areas


def test_offset_splits_u_shape_into_two_parts():
    poly = u_shape(arm_w=4.0, bar_h=1.5, height=12.0, gap=5.0)
    d = 1.0
    parts = offset_polygon(poly, -d)
    count, oracle_areas = erosion_oracle(poly, d)
    assert count == 2
    assert len(parts) == len(oracle_areas)
    for part, want in zip(sorted(area(p) for p in parts), oracle_areas):
        assert abs(part - want) <= 0.02 * want


def test_offset_split_parts_come_left_to_right():
    poly = u_shape(arm_w=4.0, bar_h=1.5, height=12.0, gap=5.0)
    parts = offset_polygon(poly, -1.0)
    assert len(parts) == 2
    assert parts[0].array[:, 0].max() < parts[1].array[:, 0].min()


def test_offset_drops_parts_below_one_square_pixel():
    # Asymmetric U: the wide arm survives a 0.5 px shrink with 6.6 square
    # pixels, the narrow arm keeps only 0.44 and must be discarded.
    poly = Polygon(
        [
            (0, 0),
            (10.2, 0),
            (10.2, 3.2),
            (9.0, 3.2),
            (9.0, 0.5),
            (4.0, 0.5),
            (4.0, 3.2),
            (0, 3.2),
        ]
    )
    parts = offset_polygon(poly, -0.5)
    assert len(parts) == 1
    assert parts[0].array[:, 0].max() < 4.0
    assert area(parts[0]) == pytest.approx(6.6, rel=1e-6)


def test_shrink_always_loses_area():
    rng = np.random.default_rng(6)
    for _ in range(40):
        poly = star_polygon(rng, r_lo=5.0, r_hi=15.0)
        d = float(rng.uniform(0.05, 1.0))
        try:
            parts = offset_polygon(poly, -d)
        except EmptyResultError:
            continue
        assert sum(area(p) for p in parts) < area(poly)


def test_convex_shrink_expand_roundtrip():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(3, 9))
        radius = float(rng.uniform(5.0, 20.0))
        poly = regular_ngon(n, radius, center=rng.uniform(-5, 5, 2), phase=float(rng.uniform(0, 7)))
        inradius = radius * np.cos(np.pi / n)
        d = 0.25 * inradius
        back = offset_polygon(offset_polygon(poly, -d)[0], d)[0]
        symdiff = union_area(poly, back) - intersection_area(poly, back)
        assert symdiff <= 0.02 * area(poly)


def convex_pentagon(rng, center):
    from shapely.geometry import MultiPoint

    while True:
        pts = rng.uniform(-8.0, 8.0, size=(5, 2)) + center
        hull = MultiPoint(pts).convex_hull
        if hull.geom_type == "Polygon" and len(hull.exterior.coords) - 1 == 5:
            return Polygon(np.asarray(hull.exterior.coords)[:-1])


def test_intersection_examples():
    shifted = Polygon(UNIT_SQUARE.array + np.array([0.5, 0.0]))
    assert intersection_area(UNIT_SQUARE, UNIT_SQUARE) == pytest.approx(1.0)
    assert intersection_area(UNIT_SQUARE, shifted) == pytest.approx(0.5)
    far = Polygon(UNIT_SQUARE.array + np.array([10.0, 0.0]))
    assert intersection_area(UNIT_SQUARE, far) == 0.0


def test_boolean_areas_match_sampled_oracle_on_pentagon_pairs():
    rng = np.random.default_rng(12)
    for _ in range(10):
        a = convex_pentagon(rng, center=np.zeros(2))
        b = convex_pentagon(rng, center=rng.uniform(-4.0, 4.0, 2))
        inter, union = sampled_region_areas(a, b)
        assert abs(intersection_area(a, b) - inter) <= 0.01 * max(union, 1.0)
        assert abs(union_area(a, b) - union) <= 0.01 * union


def test_union_examples_and_inclusion_exclusion():
    shifted = Polygon(UNIT_SQUARE.array + np.array([0.5, 0.0]))
    far = Polygon(UNIT_SQUARE.array + np.array([5.0, 0.0]))
    assert union_area(UNIT_SQUARE, UNIT_SQUARE) == pytest.approx(1.0)
    assert union_area(UNIT_SQUARE, far) == pytest.approx(2.0)
    assert union_area(UNIT_SQUARE, shifted) == pytest.approx(1.5)
    rng = np.random.default_rng(13)
    for _ in range(30):
        a = star_polygon(rng)
        b = star_polygon(rng, center=rng.uniform(-10, 10, 2))
        u = union_area(a, b)
        v = area(a) + area(b) - intersection_area(a, b)
        assert abs(u - v) <= 1e-6 * max(u, v)


def test_boolean_area_bounds():
    rng = np.random.default_rng(14)
    for _ in range(30):
        a = star_polygon(rng)
        b = star_polygon(rng, center=rng.uniform(-6, 6, 2))
        inter = intersection_area(a, b)
        union = union_area(a, b)
        assert inter <= min(area(a), area(b)) + 1e-9
        assert union >= max(area(a), area(b)) - 1e-9


def test_iou_examples():
    shifted = Polygon(UNIT_SQUARE.array + np.array([0.5, 0.0]))
    far = Polygon(UNIT_SQUARE.array + np.array([3.0, 3.0]))
    assert polygon_iou(UNIT_SQUARE, UNIT_SQUARE) == pytest.approx(1.0)
    assert polygon_iou(UNIT_SQUARE, far) == 0.0
    assert polygon_iou(UNIT_SQUARE, shifted) == pytest.approx(0.5 / 1.5)


def test_iou_symmetric_and_rigid_invariant():
    rng = np.random.default_rng(15)
    for _ in range(20):
        a = star_polygon(rng)
        b = star_polygon(rng, center=rng.uniform(-6, 6, 2))
        assert polygon_iou(a, b) == pytest.approx(polygon_iou(b, a), abs=1e-12)
        theta = float(rng.uniform(0, 2 * np.pi))
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        shift = rng.uniform(-20, 20, 2)
        a2 = Polygon(a.array @ rot.T + shift)
        b2 = Polygon(b.array @ rot.T + shift)
        assert polygon_iou(a2, b2) == pytest.approx(polygon_iou(a, b), abs=1e-9)
