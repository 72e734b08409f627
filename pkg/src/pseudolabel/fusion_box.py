"""Box-driven pseudo-labels.

Boxes are painted back to front (largest area first) so that smaller boxes
occlude larger ones. When the ignore strategy is on, any box other than the
largest whose overlap with the largest box exceeds ``alpha`` keeps its class
only on a concentric inner region; the rest of it is marked 255.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .annotations import BBox
from .raster import IGNORE, LabelMap, ObjectnessMask, ShapeError

DEFAULT_ALPHA = 0.3
DEFAULT_INNER_FRACTION = 0.6


@dataclass(frozen=True)
class BoxFusionParams:
    alpha: float = DEFAULT_ALPHA
    inner_fraction: float = DEFAULT_INNER_FRACTION
    ignore_enabled: bool = True
    use_objectness: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.inner_fraction <= 1.0:
            raise ValueError(f"inner_fraction must be in (0, 1], got {self.inner_fraction}")


def order_boxes(boxes: Sequence[BBox]) -> list[BBox]:
    """Painting order: area descending, stable. The first box is the largest."""
    return sorted(boxes, key=lambda b: -b.area)


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def inner_box(box: BBox, fraction: float) -> BBox:
    """Concentric box covering ``fraction`` of the area (each side scaled by sqrt)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    s = math.sqrt(fraction)
    w = max(1, _round_half_up(box.width * s))
    h = max(1, _round_half_up(box.height * s))
    x0 = box.xmin + (box.width - w) // 2
    y0 = box.ymin + (box.height - h) // 2
    return BBox(box.class_id, x0, y0, x0 + w, y0 + h)


def intersection_area(a: BBox, b: BBox) -> int:
    w = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    h = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    return max(w, 0) * max(h, 0)


def overlap_ratio(b0: BBox, bk: BBox) -> float:
    """Fraction of ``bk`` covered by ``b0``."""
    return intersection_area(b0, bk) / bk.area


def fuse_box(
    height: int,
    width: int,
    boxes: Sequence[BBox],
    obj: ObjectnessMask | None = None,
    params: BoxFusionParams = BoxFusionParams(),
) -> LabelMap:
    """Rasterize boxes into a label map, optionally gated by objectness.

    ``use_objectness=False`` fills boxes solidly; ``ignore_enabled=False``
    disables the 255 outer ring. Pixels outside every box are background.
    """
    if params.use_objectness:
        if obj is None:
            raise ValueError("use_objectness requires an objectness mask")
        if obj.shape != (height, width):
            raise ShapeError("objectness vs image", obj.shape, (height, width))
        objectness = obj.data
    else:
        objectness = None

    out = np.zeros((height, width), dtype=np.uint8)
    ordered = order_boxes(boxes)
    if not ordered:
        return LabelMap(out)
    largest = ordered[0]

    for k, box in enumerate(ordered):
        if box.xmax > width or box.ymax > height:
            raise ValueError(f"box {box} exceeds image {width}x{height}; clip it first")
        rows = slice(box.ymin, box.ymax)
        cols = slice(box.xmin, box.xmax)
        patch = np.full((box.height, box.width), box.class_id, dtype=np.uint8)
        if params.ignore_enabled and k > 0 and overlap_ratio(largest, box) > params.alpha:
            inner = inner_box(box, params.inner_fraction)
            ring = np.ones(patch.shape, dtype=bool)
            ring[inner.ymin - box.ymin : inner.ymax - box.ymin, inner.xmin - box.xmin : inner.xmax - box.xmin] = False
            patch[ring] = IGNORE
        if objectness is not None:
            patch[~objectness[rows, cols]] = 0
        out[rows, cols] = patch
    return LabelMap(out)
