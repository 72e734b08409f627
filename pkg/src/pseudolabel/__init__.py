"""Objectness-guided pseudo-label generation and evaluation for semantic segmentation."""

from .annotations import (
    BBox,
    BoxCollection,
    CamStack,
    ImageBoxes,
    dump_box_file,
    parse_box_file,
    read_cam_container,
    read_label_png,
    write_cam_container,
    write_label_png,
)
from .bias import BiasReport, bias_report, border_profile, error_heatmap
from .evaluation import (
    ConfusionMatrix,
    EvalReport,
    accumulate_confusion,
    iou_from_confusion,
    precision_recall,
    upper_bound_report,
)
from .fusion_box import BoxFusionParams, fuse_box, inner_box, order_boxes, overlap_ratio
from .fusion_cam import CamFusionParams, fuse_cam, threshold_cam_raw
from .raster import (
    IGNORE,
    LabelMap,
    ObjectnessMask,
    ProbRaster,
    binarize_objectness,
    validate_label_map,
)
from .synth import CorruptionParams, SceneBundle, SceneConfig, corrupt_objectness, synth_scene

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "BoxCollection",
    "CamStack",
    "ImageBoxes",
    "dump_box_file",
    "parse_box_file",
    "read_cam_container",
    "read_label_png",
    "write_cam_container",
    "write_label_png",
    "BiasReport",
    "bias_report",
    "border_profile",
    "error_heatmap",
    "ConfusionMatrix",
    "EvalReport",
    "accumulate_confusion",
    "iou_from_confusion",
    "precision_recall",
    "upper_bound_report",
    "BoxFusionParams",
    "fuse_box",
    "inner_box",
    "order_boxes",
    "overlap_ratio",
    "CamFusionParams",
    "fuse_cam",
    "threshold_cam_raw",
    "IGNORE",
    "LabelMap",
    "ObjectnessMask",
    "ProbRaster",
    "binarize_objectness",
    "validate_label_map",
    "CorruptionParams",
    "SceneBundle",
    "SceneConfig",
    "corrupt_objectness",
    "synth_scene",
]
