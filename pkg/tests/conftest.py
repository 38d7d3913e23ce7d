"""Shared oracles and generators for the test suite.

Everything here is deliberately independent of the library's own
algorithms: point membership uses the classic crossing-number test,
areas come from dense pixel-center sampling, and distances come from
direct minimization over pixel pairs. Slow and simple on purpose.
"""

import numpy as np
from scipy.spatial.distance import cdist

from shrinkmask import Polygon


def crossing_number_inside(pts: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd membership of query points in a closed ring.

    A horizontal ray is cast to the right of each point; an odd number of
    edge crossings means inside. Points on an edge may land on either
    side, which every caller tolerates.
    """
    pts = np.asarray(pts, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        spans = (y0 <= y) != (y1 <= y)
        if not spans.any():
            continue
        xc = x0 + (y[spans] - y0) / (y1 - y0) * (x1 - x0)
        hit = inside[spans].copy()
        hit ^= x[spans] < xc
        inside[spans] = hit
    return inside


def sampled_region_areas(a: Polygon, b: Polygon, grid: int = 512):
    """Intersection and union areas of two polygons from pixel-center
    sampling over their joint bounding box."""
    ra, rb = a.array, b.array
    lo = np.minimum(ra.min(axis=0), rb.min(axis=0)) - 0.5
    hi = np.maximum(ra.max(axis=0), rb.max(axis=0)) + 0.5
    xs = np.linspace(lo[0], hi[0], grid, endpoint=False) + (hi[0] - lo[0]) / grid / 2
    ys = np.linspace(lo[1], hi[1], grid, endpoint=False) + (hi[1] - lo[1]) / grid / 2
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    in_a = crossing_number_inside(pts, ra)
    in_b = crossing_number_inside(pts, rb)
    cell = (hi[0] - lo[0]) * (hi[1] - lo[1]) / grid / grid
    return float((in_a & in_b).sum() * cell), float((in_a | in_b).sum() * cell)


def sampled_polygon_area(poly: Polygon, grid: int = 512) -> float:
    """Area of one polygon from pixel-center sampling over its box."""
    r = poly.array
    lo = r.min(axis=0) - 0.5
    hi = r.max(axis=0) + 0.5
    xs = np.linspace(lo[0], hi[0], grid, endpoint=False) + (hi[0] - lo[0]) / grid / 2
    ys = np.linspace(lo[1], hi[1], grid, endpoint=False) + (hi[1] - lo[1]) / grid / 2
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    cell = (hi[0] - lo[0]) * (hi[1] - lo[1]) / grid / grid
    return float(crossing_number_inside(pts, r).sum() * cell)


def pixel_centers(width: int, height: int) -> np.ndarray:
    """Centers of all grid pixels as (x, y) rows in row-major order."""
    gy, gx = np.mgrid[0:height, 0:width]
    return np.column_stack([gx.ravel() + 0.5, gy.ravel() + 0.5])


def raster_oracle(poly: Polygon, width: int, height: int) -> np.ndarray:
    """Boolean grid of pixel centers inside the polygon, via the
    crossing-number test."""
    inside = crossing_number_inside(pixel_centers(width, height), poly.array)
    return inside.reshape(height, width)


def brute_distance_map(bits: np.ndarray) -> np.ndarray:
    """Distance from each set pixel to the nearest unset pixel center,
    by direct pairwise minimization. Zero on unset pixels."""
    out = np.zeros(bits.shape, dtype=np.float64)
    if not bits.any():
        return out
    set_rc = np.argwhere(bits)
    unset_rc = np.argwhere(~bits)
    if len(unset_rc) == 0:
        raise ValueError("no unset pixel to measure against")
    d = cdist(set_rc, unset_rc).min(axis=1)
    out[bits] = d
    return out


def star_polygon(rng, n_min=4, n_max=10, r_lo=4.0, r_hi=20.0, center=(0.0, 0.0)):
    """Random star-shaped simple polygon.

    Angles come from a jittered uniform grid, so every angular gap stays
    below pi. Each edge then lies inside the convex cone spanned by its
    two vertex rays, and those cones only meet along shared rays, which
    makes the polygon simple for any positive radii.
    """
    n = int(rng.integers(n_min, n_max + 1))
    ang = 2.0 * np.pi * (np.arange(n) + rng.uniform(0.15, 0.85, size=n)) / n
    rad = rng.uniform(r_lo, r_hi, size=n)
    pts = np.column_stack(
        [center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang)]
    )
    return Polygon(pts)


def random_blob(rng, height: int, width: int, density: float = 0.12) -> np.ndarray:
    """Random boolean mask with clustered set pixels."""
    from scipy.ndimage import binary_dilation

    seed = rng.random((height, width)) < density
    return binary_dilation(seed, iterations=2)


def central_difference_grad(fn, values: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Gradient of a scalar function of a map, one central difference
    per pixel."""
    grad = np.zeros_like(values, dtype=np.float64)
    it = np.nditer(values, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        up = values.copy()
        dn = values.copy()
        up[ij] += h
        dn[ij] -= h
        grad[ij] = (fn(up) - fn(dn)) / (2.0 * h)
    return grad
