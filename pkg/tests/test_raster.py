"""Grid primitive tests: rasterization, distances, labeling, tracing."""

import numpy as np
import pytest

from conftest import brute_distance_map, random_blob, raster_oracle, star_polygon
from shrinkmask import (
    BitMask,
    ComponentLabels,
    EmptyMaskError,
    FloatMap,
    Polygon,
    ShapeMismatchError,
    UnknownComponentError,
    area,
    connected_components,
    distance_transform,
    mask_mean_inside,
    perimeter,
    rasterize,
    trace_contour,
)


def blocks_mask(width, height, blocks):
    bits = np.zeros((height, width), dtype=bool)
    for r0, c0, r1, c1 in blocks:
        bits[r0:r1, c0:c1] = True
    return BitMask(width, height, bits)


def test_bitmask_validates_shape():
    with pytest.raises(ValueError):
        BitMask(4, 4, np.zeros((3, 4), dtype=bool))
    with pytest.raises(ValueError):
        BitMask(0, 4, np.zeros((4, 0), dtype=bool))


def test_floatmap_requires_finite_values():
    FloatMap(4, 4, np.zeros((4, 4)))
    bad = np.zeros((4, 4))
    bad[1, 2] = np.inf
    with pytest.raises(ValueError):
        FloatMap(4, 4, bad)


def test_grids_are_immutable():
    mask = BitMask.zeros(4, 4)
    with pytest.raises(ValueError):
        mask.bits[0, 0] = True
    fmap = FloatMap.zeros(4, 4)
    with pytest.raises(ValueError):
        fmap.values[0, 0] = 1.0


def test_rasterize_square_counts_pixel_centers():
    square = Polygon([(0, 0), (4, 0), (4, 4), (0, 4)])
    mask = rasterize(square, 8, 8)
    assert mask.popcount == 16
    assert mask.bits[:4, :4].all() and not mask.bits[4:, :].any()


def test_rasterize_outside_grid_is_empty():
    far = Polygon([(100, 100), (104, 100), (104, 104), (100, 104)])
    assert rasterize(far, 8, 8).popcount == 0


def test_rasterize_matches_membership_oracle():
    rng = np.random.default_rng(21)
    for _ in range(25):
        poly = star_polygon(rng, r_lo=3.0, r_hi=14.0, center=(16.0, 16.0))
        mask = rasterize(poly, 32, 32)
        assert (mask.bits == raster_oracle(poly, 32, 32)).all()


def test_rasterize_count_close_to_area():
    rng = np.random.default_rng(22)
    for _ in range(25):
        poly = star_polygon(rng, r_lo=3.0, r_hi=14.0, center=(20.0, 20.0))
        mask = rasterize(poly, 40, 40)
        assert abs(mask.popcount - area(poly)) <= perimeter(poly)


def test_rasterize_integer_translation_equivariance():
    rng = np.random.default_rng(23)
    for _ in range(15):
        poly = star_polygon(rng, r_lo=3.0, r_hi=8.0, center=(12.0, 12.0))
        base = rasterize(poly, 40, 40)
        dx, dy = int(rng.integers(0, 12)), int(rng.integers(0, 12))
        moved = rasterize(poly.translated(dx, dy), 40, 40)
        assert (np.roll(np.roll(base.bits, dy, axis=0), dx, axis=1) == moved.bits).all()


def test_distance_transform_trivial_cases():
    assert (distance_transform(BitMask.zeros(5, 5)).values == 0.0).all()
    bits = np.zeros((5, 5), dtype=bool)
    bits[2, 2] = True
    out = distance_transform(BitMask(5, 5, bits))
    assert out.values[2, 2] == pytest.approx(1.0)
    assert out.values[0, 0] == 0.0


def test_distance_transform_rejects_all_set():
    with pytest.raises(EmptyMaskError):
        distance_transform(BitMask(3, 3, np.ones((3, 3), dtype=bool)))


def test_distance_transform_matches_brute_force():
    rng = np.random.default_rng(24)
    for _ in range(20):
        bits = random_blob(rng, 32, 32)
        if bits.all() or not bits.any():
            continue
        got = distance_transform(BitMask(32, 32, bits)).values
        want = brute_distance_map(bits)
        assert np.abs(got - want).max() <= 1e-6


def test_distance_transform_lipschitz_and_boundary():
    rng = np.random.default_rng(25)
    for _ in range(10):
        bits = random_blob(rng, 24, 24)
        if bits.all() or not bits.any():
            continue
        d = distance_transform(BitMask(24, 24, bits)).values
        assert np.abs(np.diff(d, axis=0)).max() <= np.sqrt(2) + 1e-9
        assert np.abs(np.diff(d, axis=1)).max() <= np.sqrt(2) + 1e-9
        edge = bits & ~np.roll(bits, 1, axis=0)
        edge[0, :] = False
        assert (d[edge] <= 1.0 + 1e-9).all()


def test_components_trivial_counts():
    two = blocks_mask(8, 8, [(0, 0, 2, 2), (5, 5, 7, 7)])
    assert connected_components(two).count == 2
    assert connected_components(BitMask.zeros(6, 6)).count == 0


def test_components_connectivity_choice():
    bits = np.zeros((4, 4), dtype=bool)
    bits[1, 1] = bits[2, 2] = True
    mask = BitMask(4, 4, bits)
    assert connected_components(mask, connectivity=8).count == 1
    assert connected_components(mask, connectivity=4).count == 2
    with pytest.raises(ValueError):
        connected_components(mask, connectivity=6)


def test_components_numbered_by_first_encounter():
    rng = np.random.default_rng(26)
    for _ in range(20):
        bits = random_blob(rng, 30, 30)
        comps = connected_components(BitMask(30, 30, bits))
        flat = comps.labels.ravel()
        firsts = [int(np.argmax(flat == c)) for c in range(1, comps.count + 1)]
        assert firsts == sorted(firsts)
        counts = np.bincount(flat, minlength=comps.count + 1)
        assert counts[1:].sum() == bits.sum()
        assert (counts[1:] > 0).all()


def test_components_reconstruct_mask():
    rng = np.random.default_rng(27)
    bits = random_blob(rng, 20, 20)
    comps = connected_components(BitMask(20, 20, bits))
    rebuilt = np.zeros_like(bits)
    for c in range(1, comps.count + 1):
        rebuilt |= comps.labels == c
    assert (rebuilt == bits).all()


def test_trace_solid_block_is_square():
    mask = blocks_mask(6, 6, [(0, 0, 3, 3)])
    comps = connected_components(mask)
    poly = trace_contour(comps, 1)
    assert len(poly.array) == 4, "collinear crack corners must merge"
    assert area(poly) == pytest.approx(9.0)
    assert sorted(map(tuple, poly.array.tolist())) == [
        (0.0, 0.0),
        (0.0, 3.0),
        (3.0, 0.0),
        (3.0, 3.0),
    ]


def test_trace_single_pixel():
    bits = np.zeros((4, 4), dtype=bool)
    bits[2, 1] = True
    comps = connected_components(BitMask(4, 4, bits))
    poly = trace_contour(comps, 1)
    assert area(poly) == pytest.approx(1.0)
    assert sorted(map(tuple, poly.array.tolist())) == [
        (1.0, 2.0),
        (1.0, 3.0),
        (2.0, 2.0),
        (2.0, 3.0),
    ]


def test_trace_rejects_unknown_component():
    comps = connected_components(blocks_mask(4, 4, [(0, 0, 2, 2)]))
    for bad in (0, 2, -1):
        with pytest.raises(UnknownComponentError):
            trace_contour(comps, bad)


def test_trace_rasterize_roundtrip_on_random_blobs():
    from scipy.ndimage import binary_fill_holes

    rng = np.random.default_rng(28)
    done = 0
    while done < 200:
        h, w = (int(v) for v in rng.integers(6, 64, size=2))
        bits = random_blob(rng, h, w, density=float(rng.uniform(0.05, 0.3)))
        if not bits.any():
            continue
        comps = connected_components(BitMask(w, h, bits))
        for c in range(1, comps.count + 1):
            poly = trace_contour(comps, c)
            re = rasterize(poly, w, h)
            want = binary_fill_holes(comps.labels == c)
            assert (re.bits == want).all()
            done += 1


def test_trace_diagonal_pinch_keeps_both_lobes():
    bits = np.zeros((4, 4), dtype=bool)
    bits[0, 0] = bits[1, 1] = True
    comps = connected_components(BitMask(4, 4, bits))
    assert comps.count == 1
    poly = trace_contour(comps, 1)
    re = rasterize(poly, 4, 4)
    assert (re.bits == bits).all()
    assert area(poly) == pytest.approx(2.0)


def test_mask_mean_inside():
    bits = np.zeros((3, 3), dtype=bool)
    bits[0, 0] = bits[2, 2] = True
    mask = BitMask(3, 3, bits)
    const = FloatMap(3, 3, np.full((3, 3), 2.1))
    assert mask_mean_inside(const, mask) == pytest.approx(2.1)
    vals = np.zeros((3, 3))
    vals[0, 0], vals[2, 2] = 1.0, 3.0
    assert mask_mean_inside(FloatMap(3, 3, vals), mask) == pytest.approx(2.0)


def test_mask_mean_inside_matches_direct_sum():
    rng = np.random.default_rng(29)
    for _ in range(20):
        vals = rng.normal(size=(10, 10))
        bits = rng.random((10, 10)) < 0.4
        if not bits.any():
            continue
        got = mask_mean_inside(FloatMap(10, 10, vals), BitMask(10, 10, bits))
        want = vals[bits].sum() / bits.sum()
        assert abs(got - want) <= 1e-9


def test_mask_mean_inside_errors():
    with pytest.raises(EmptyMaskError):
        mask_mean_inside(FloatMap.zeros(3, 3), BitMask.zeros(3, 3))
    with pytest.raises(ShapeMismatchError):
        mask_mean_inside(FloatMap.zeros(3, 3), BitMask.zeros(4, 4))
