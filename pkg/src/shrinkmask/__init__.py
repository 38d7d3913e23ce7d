"""Shrink-mask scene-text detection: labels, losses, reconstruction, eval."""

from .geometry import (
    EPS,
    EmptyResultError,
    FixedExtendParams,
    GeometryError,
    InvalidPolygonError,
    Point2,
    Polygon,
    ShrinkParams,
    area,
    clip_to_box,
    fixed_offset,
    intersection_area,
    offset_polygon,
    perimeter,
    polygon_iou,
    shrink_offset,
    union_area,
)
from .labels import (
    AnchorWindow,
    LabelMaps,
    SceneAnnotation,
    gen_iou_map,
    gen_labels,
    gen_offset_map,
    gen_shrink_mask,
    gen_spw_map,
)
from .losses import (
    LossReport,
    LossWeights,
    NonPositiveInputError,
    OhemConfig,
    dice_loss,
    offset_loss,
    ohem_select,
    ratio_loss,
    spw_loss,
    total_loss,
)
from .metrics import (
    EvalReport,
    MatchConfig,
    ThresholdMetrics,
    ThresholdMismatchError,
    aggregate,
    match_detections,
)
from .postproc import (
    Detection,
    PostprocConfig,
    StudyReport,
    StudyRow,
    TimingBreakdown,
    perturb_mask,
    reconstruct,
    run_perturbation_study,
)
from .raster import (
    BitMask,
    ComponentLabels,
    EmptyMaskError,
    FloatMap,
    ShapeMismatchError,
    UnknownComponentError,
    connected_components,
    distance_transform,
    mask_mean_inside,
    rasterize,
    trace_contour,
)
from .synth import (
    PlacementFailureError,
    SynthConfig,
    generate_scene,
    oracle_predictions,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorWindow",
    "BitMask",
    "ComponentLabels",
    "Detection",
    "EPS",
    "EmptyMaskError",
    "EmptyResultError",
    "EvalReport",
    "FixedExtendParams",
    "FloatMap",
    "GeometryError",
    "InvalidPolygonError",
    "LabelMaps",
    "LossReport",
    "LossWeights",
    "MatchConfig",
    "NonPositiveInputError",
    "OhemConfig",
    "PlacementFailureError",
    "Point2",
    "Polygon",
    "PostprocConfig",
    "SceneAnnotation",
    "ShapeMismatchError",
    "ShrinkParams",
    "StudyReport",
    "StudyRow",
    "SynthConfig",
    "ThresholdMetrics",
    "ThresholdMismatchError",
    "TimingBreakdown",
    "UnknownComponentError",
    "aggregate",
    "area",
    "clip_to_box",
    "connected_components",
    "dice_loss",
    "distance_transform",
    "fixed_offset",
    "gen_iou_map",
    "gen_labels",
    "gen_offset_map",
    "gen_shrink_mask",
    "gen_spw_map",
    "generate_scene",
    "intersection_area",
    "mask_mean_inside",
    "match_detections",
    "offset_loss",
    "offset_polygon",
    "ohem_select",
    "oracle_predictions",
    "perimeter",
    "perturb_mask",
    "polygon_iou",
    "rasterize",
    "ratio_loss",
    "reconstruct",
    "run_perturbation_study",
    "shrink_offset",
    "spw_loss",
    "total_loss",
    "trace_contour",
    "union_area",
]
