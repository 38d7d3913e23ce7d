"""Deterministic synthetic scenes for end-to-end checks without a model.

Scenes hold axis-aligned rectangles, rotated rectangles, and curved bands
(14-vertex sine sweeps, seven points per side). Oracle predictions turn a
scene's ground-truth maps into idealized network outputs, optionally with
seeded Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import InvalidPolygonError, Polygon, ShrinkParams
from .labels import SceneAnnotation, gen_labels
from .raster import FloatMap

SHAPE_FAMILIES = ("rectangle", "rotated-rect", "curved-band")

MAX_ATTEMPTS = 1000


class PlacementFailureError(RuntimeError):
    """Raised when rejection sampling cannot place an instance."""


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    width: int = 320
    height: int = 320
    count_range: tuple[int, int] = (1, 3)
    size_range: tuple[float, float] = (40.0, 96.0)
    shapes: tuple[str, ...] = SHAPE_FAMILIES
    min_separation: float = 8.0
    ignore_prob: float = 0.0
    margin: float = 8.0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        lo, hi = self.count_range
        if not 0 <= lo <= hi:
            raise ValueError(f"bad count range {self.count_range}")
        slo, shi = self.size_range
        if not 0 < slo <= shi:
            raise ValueError(f"bad size range {self.size_range}")
        if not self.shapes:
            raise ValueError("at least one shape family required")
        for s in self.shapes:
            if s not in SHAPE_FAMILIES:
                raise ValueError(f"unknown shape family {s!r}")
        if self.min_separation < 0:
            raise ValueError("min_separation must be non-negative")
        if not 0.0 <= self.ignore_prob <= 1.0:
            raise ValueError("ignore_prob must lie in [0, 1]")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")


def _place(rng: np.random.Generator, verts: np.ndarray, cfg: SynthConfig) -> Polygon | None:
    """Translate centered vertices to a uniform in-bounds position."""
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    bw, bh = hi - lo
    avail_w = cfg.width - 2 * cfg.margin - bw
    avail_h = cfg.height - 2 * cfg.margin - bh
    if avail_w < 0 or avail_h < 0:
        return None
    x0 = cfg.margin + rng.uniform(0.0, avail_w) if avail_w > 0 else cfg.margin
    y0 = cfg.margin + rng.uniform(0.0, avail_h) if avail_h > 0 else cfg.margin
    try:
        return Polygon(verts - lo + (x0, y0))
    except InvalidPolygonError:
        return None


def _rect(rng: np.random.Generator, cfg: SynthConfig, rotated: bool) -> Polygon | None:
    short = rng.uniform(*cfg.size_range)
    long = short * rng.uniform(1.0, 3.0)
    verts = np.array(
        [(0.0, 0.0), (long, 0.0), (long, short), (0.0, short)], dtype=np.float64
    )
    if rotated:
        theta = rng.uniform(0.0, np.pi)
        c, s = np.cos(theta), np.sin(theta)
        verts = verts @ np.array([[c, s], [-s, c]])
    return _place(rng, verts, cfg)


def _curved_band(rng: np.random.Generator, cfg: SynthConfig) -> Polygon | None:
    """Constant-thickness band swept along a sine arc, 7 vertices per side."""
    thick = rng.uniform(*cfg.size_range)
    length = thick * rng.uniform(2.0, 3.0)
    amp = length * rng.uniform(0.06, 0.14)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    span = rng.uniform(0.6 * np.pi, 1.2 * np.pi)
    theta = rng.uniform(0.0, np.pi)

    t = np.linspace(0.0, 1.0, 7)
    center = np.column_stack([t * length, amp * np.sin(phase + span * t)])
    grad = np.gradient(center, axis=0)
    tang = grad / np.linalg.norm(grad, axis=1, keepdims=True)
    normal = np.column_stack([-tang[:, 1], tang[:, 0]])
    top = center + normal * (thick / 2.0)
    bottom = center - normal * (thick / 2.0)
    verts = np.vstack([top, bottom[::-1]])
    c, s = np.cos(theta), np.sin(theta)
    verts = verts @ np.array([[c, s], [-s, c]])
    return _place(rng, verts, cfg)


def _make_shape(rng: np.random.Generator, family: str, cfg: SynthConfig) -> Polygon | None:
    if family == "rectangle":
        return _rect(rng, cfg, rotated=False)
    if family == "rotated-rect":
        return _rect(rng, cfg, rotated=True)
    return _curved_band(rng, cfg)


def generate_scene(cfg: SynthConfig, index: int) -> SceneAnnotation:
    """Deterministic scene for (cfg.seed, index).

    Instances are rejection-sampled until they fit inside the margins and
    keep the configured separation from everything already placed; an
    instance that cannot be placed within 1000 attempts aborts the scene.
    """
    if index < 0:
        raise ValueError("scene index must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
    lo, hi = cfg.count_range
    count = int(rng.integers(lo, hi + 1))
    texts: list[Polygon] = []
    ignores: list[Polygon] = []
    placed: list = []
    for _ in range(count):
        for _attempt in range(MAX_ATTEMPTS):
            family = cfg.shapes[int(rng.integers(len(cfg.shapes)))]
            poly = _make_shape(rng, family, cfg)
            if poly is None:
                continue
            shape = poly.to_shapely()
            if all(shape.distance(p) >= cfg.min_separation for p in placed):
                break
        else:
            raise PlacementFailureError(
                f"no room for instance {len(placed)} after {MAX_ATTEMPTS} attempts"
            )
        placed.append(shape)
        if rng.random() < cfg.ignore_prob:
            ignores.append(poly)
        else:
            texts.append(poly)
    return SceneAnnotation(cfg.width, cfg.height, tuple(texts), tuple(ignores))


def oracle_predictions(
    ann: SceneAnnotation,
    params: ShrinkParams = ShrinkParams(),
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> tuple[FloatMap, FloatMap]:
    """Idealized network outputs for a scene.

    With sigma 0 these are exactly the ground-truth shrink mask (as 0/1
    probabilities) and offset map; otherwise seeded Gaussian noise is
    added, with probabilities clipped to [0, 1] and offsets kept >= 0.
    """
    if noise_sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    maps = gen_labels(ann, params, window=1)
    prob = maps.shrink.bits.astype(np.float64)
    offset = maps.offset.values.copy()
    if noise_sigma > 0:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
        prob = np.clip(prob + rng.normal(0.0, noise_sigma, prob.shape), 0.0, 1.0)
        offset = np.maximum(offset + rng.normal(0.0, noise_sigma, offset.shape), 0.0)
    return (
        FloatMap(ann.width, ann.height, prob),
        FloatMap(ann.width, ann.height, offset),
    )
