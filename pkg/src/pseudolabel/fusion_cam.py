"""Class-driven pseudo-labels: gate CAM argmax labels with an objectness prior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotations import CamStack
from .raster import LabelMap, ObjectnessMask, ShapeError

DEFAULT_DELTA = 0.01


@dataclass(frozen=True)
class CamFusionParams:
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")


def _argmax_labels(cam: CamStack, delta: float) -> np.ndarray:
    # np.argmax returns the first maximum; classes are ascending, so ties go to the smallest id
    idx = np.argmax(cam.scores, axis=0)
    best = np.take_along_axis(cam.scores, idx[None], axis=0)[0]
    lut = np.asarray(cam.classes, dtype=np.uint8)
    # compare in float64 so the threshold is the exact value the caller passed
    return np.where(best.astype(np.float64) > delta, lut[idx], 0).astype(np.uint8)


def fuse_cam(cam: CamStack, obj: ObjectnessMask, params: CamFusionParams = CamFusionParams()) -> LabelMap:
    """Label each object pixel with its strongest CAM class if that score beats ``delta``.

    Non-object pixels and pixels whose best score is ``<= delta`` become background.
    """
    if cam.shape != obj.shape:
        raise ShapeError("CAM stack vs objectness", cam.shape, obj.shape)
    labels = _argmax_labels(cam, params.delta)
    labels[~obj.data] = 0
    return LabelMap(labels)


def threshold_cam_raw(cam: CamStack, params: CamFusionParams = CamFusionParams()) -> LabelMap:
    """Baseline without an objectness prior: plain thresholded CAM argmax."""
    return LabelMap(_argmax_labels(cam, params.delta))
