"""Loss stack with analytic gradients.

Dice overlap loss on the shrink mask (with hard-negative mining), a
symmetric log-ratio regression loss for the offset and window-coverage
maps, and their weighted combination. Every gradient is exact and meant
to survive central finite-difference checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .labels import LabelMaps
from .raster import BitMask, FloatMap, ShapeMismatchError

RATIO_EPS = 1e-3


class NonPositiveInputError(ValueError):
    """Raised when the ratio loss receives a non-positive operand."""


@dataclass(frozen=True)
class LossWeights:
    """Multipliers for the mask, offset, and coverage terms."""

    lambda1: float = 1.0
    lambda2: float = 0.25
    lambda3: float = 0.25

    def __post_init__(self) -> None:
        for name in ("lambda1", "lambda2", "lambda3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class OhemConfig:
    """Hard-negative mining: negatives kept per positive, with a floor."""

    negative_ratio: float = 3.0
    min_negatives: int = 256

    def __post_init__(self) -> None:
        if self.negative_ratio <= 0:
            raise ValueError("negative_ratio must be positive")
        if self.min_negatives < 0:
            raise ValueError("min_negatives must be non-negative")


@dataclass(frozen=True)
class LossReport:
    """Per-term values, their weighted total, and gradient maps."""

    l_sm: float
    l_oa: float
    l_spw: float
    total: float
    grad_sm: FloatMap
    grad_oa: FloatMap
    grad_spw: FloatMap


def _check_shapes(a, b) -> None:
    if not a.same_shape(b):
        raise ShapeMismatchError(
            f"{a.width}x{a.height} does not match {b.width}x{b.height}"
        )


def dice_loss(pred: FloatMap, gt: BitMask, valid: BitMask) -> tuple[float, FloatMap]:
    """Smoothed dice loss restricted to valid pixels.

    Returns 1 - (2*overlap + 1) / (pred_sum + gt_sum + 1) and its exact
    gradient with respect to pred (zero outside the valid set).
    """
    _check_shapes(pred, gt)
    _check_shapes(pred, valid)
    p = pred.values
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("pred values must lie in [0, 1]")
    v = valid.bits
    g = gt.bits & v
    pv = np.where(v, p, 0.0)
    inter = float((pv * g).sum())
    denom = float(pv.sum() + g.sum()) + 1.0
    loss = 1.0 - (2.0 * inter + 1.0) / denom
    grad = np.zeros_like(p)
    grad[v] = -(2.0 * g[v] * denom - (2.0 * inter + 1.0)) / (denom * denom)
    return loss, FloatMap(pred.width, pred.height, grad)


def ohem_select(
    pred: FloatMap, gt: BitMask, ignore: BitMask, cfg: OhemConfig
) -> BitMask:
    """Valid-pixel mask for mining: every non-ignored positive plus the
    highest-scoring negatives at the configured ratio.

    Ties between equal negative scores break toward the lower row-major
    index, so the selection is deterministic.
    """
    _check_shapes(pred, gt)
    _check_shapes(pred, ignore)
    pos = gt.bits & ~ignore.bits
    neg = ~gt.bits & ~ignore.bits
    n_pos = int(pos.sum())
    k = max(int(cfg.negative_ratio * n_pos), cfg.min_negatives)
    k = min(k, int(neg.sum()))
    valid = pos.copy()
    if k > 0:
        flat_idx = np.flatnonzero(neg.ravel())
        scores = pred.values.ravel()[flat_idx]
        order = np.argsort(-scores, kind="stable")[:k]
        sel = np.zeros(pred.width * pred.height, dtype=bool)
        sel[flat_idx[order]] = True
        valid |= sel.reshape(pred.height, pred.width)
    return BitMask(pred.width, pred.height, valid)


def ratio_loss(p: float, p_hat: float) -> tuple[float, float]:
    """Symmetric log-ratio loss log(max/min) and its derivative in p_hat.

    The derivative at exact equality is taken as 0, the symmetric
    subgradient choice.
    """
    if p <= 0 or p_hat <= 0:
        raise NonPositiveInputError(f"operands must be positive, got ({p}, {p_hat})")
    loss = abs(math.log(p) - math.log(p_hat))
    if p_hat > p:
        grad = 1.0 / p_hat
    elif p_hat < p:
        grad = -1.0 / p_hat
    else:
        grad = 0.0
    return loss, grad


def _ratio_map_loss(
    pred: FloatMap, gt: FloatMap, region: BitMask
) -> tuple[float, FloatMap]:
    """Mean pointwise log-ratio loss over a region, with both operands
    clamped to at least RATIO_EPS so zeros stay differentiable."""
    _check_shapes(pred, gt)
    _check_shapes(pred, region)
    r = region.bits
    n = int(r.sum())
    if n == 0:
        return 0.0, FloatMap.zeros(pred.width, pred.height)
    ph = np.maximum(pred.values[r], RATIO_EPS)
    pg = np.maximum(gt.values[r], RATIO_EPS)
    loss = float(np.abs(np.log(pg) - np.log(ph)).mean())
    local = np.where(ph > pg, 1.0 / ph, np.where(ph < pg, -1.0 / ph, 0.0))
    # Clamped predictions are flat in pred, so their gradient vanishes.
    local[pred.values[r] < RATIO_EPS] = 0.0
    grad = np.zeros_like(pred.values)
    grad[r] = local / n
    return loss, FloatMap(pred.width, pred.height, grad)


def offset_loss(
    pred: FloatMap, gt: FloatMap, region: BitMask
) -> tuple[float, FloatMap]:
    """Log-ratio regression of the offset map over in-text pixels."""
    return _ratio_map_loss(pred, gt, region)


def spw_loss(pred: FloatMap, gt: FloatMap, region: BitMask) -> tuple[float, FloatMap]:
    """Log-ratio regression of the window-coverage map."""
    return _ratio_map_loss(pred, gt, region)


def total_loss(
    shrink_pred: FloatMap,
    offset_pred: FloatMap,
    spw_pred: FloatMap,
    labels: LabelMaps,
    weights: LossWeights = LossWeights(),
    ohem: OhemConfig = OhemConfig(),
    spw_valid_region: str = "all",
) -> LossReport:
    """Weighted combination of the three losses.

    Hard-negative mining applies to the dice term only. The offset term is
    evaluated where the target offset is positive; the coverage term over
    all non-ignored pixels, or only shrink pixels when `spw_valid_region`
    is "shrink-only".
    """
    if spw_valid_region not in ("all", "shrink-only"):
        raise ValueError(f"unknown spw_valid_region {spw_valid_region!r}")
    valid = ohem_select(shrink_pred, labels.shrink, labels.ignore, ohem)
    l_sm, grad_sm = dice_loss(shrink_pred, labels.shrink, valid)

    not_ignored = ~labels.ignore.bits
    oa_region = BitMask.from_array((labels.offset.values > 0) & not_ignored)
    l_oa, grad_oa = offset_loss(offset_pred, labels.offset, oa_region)

    if spw_valid_region == "all":
        spw_region = BitMask.from_array(not_ignored)
    else:
        spw_region = BitMask.from_array(labels.shrink.bits & not_ignored)
    l_spw, grad_spw = spw_loss(spw_pred, labels.spw, spw_region)

    total = (
        weights.lambda1 * l_sm + weights.lambda2 * l_oa + weights.lambda3 * l_spw
    )
    return LossReport(
        l_sm=l_sm,
        l_oa=l_oa,
        l_spw=l_spw,
        total=total,
        grad_sm=grad_sm,
        grad_oa=grad_oa,
        grad_spw=grad_spw,
    )
