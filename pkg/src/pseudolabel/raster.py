"""Core raster types shared across the package.

All rasters are 2D numpy arrays indexed ``(row, col)`` with the origin at the
top-left corner. Instances are read-only once constructed, so they can be
handed to worker processes or threads without copying.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IGNORE = 255
BACKGROUND = 0
DEFAULT_TAU = 128


class ShapeError(ValueError):
    """Two rasters that must share dimensions do not."""

    def __init__(self, what: str, shape_a: tuple[int, ...], shape_b: tuple[int, ...]):
        super().__init__(f"{what}: shape {tuple(shape_a)} does not match {tuple(shape_b)}")
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)


class LabelValueError(ValueError):
    """A label map holds a value outside ``[0, num_classes) ∪ {255}``."""

    def __init__(self, violation: "LabelViolation", name: str = "label map"):
        super().__init__(
            f"{name}: value {violation.value} at {violation.row, violation.col} "
            f"is not a class index or {IGNORE}"
        )
        self.violation = violation


def _frozen_2d(data, dtype) -> np.ndarray:
    arr = np.array(data, dtype=dtype, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"raster must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"raster must be at least 1x1, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class _Raster:
    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((type(self).__name__, self.data.shape, self.data.tobytes()))


@dataclass(frozen=True, eq=False)
class LabelMap(_Raster):
    """Per-pixel class indices (uint8); 0 is background, 255 is ignore."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_2d(self.data, np.uint8))


@dataclass(frozen=True, eq=False)
class ObjectnessMask(_Raster):
    """Per-pixel object (True) / background (False) prior."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_2d(self.data, bool))

    def to_label_data(self) -> np.ndarray:
        """Encode as 0/255 uint8, the on-disk convention for masks."""
        return np.where(self.data, 255, 0).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ProbRaster(_Raster):
    """Objectness scores quantized to uint8 (score * 255)."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_2d(self.data, np.uint8))


@dataclass(frozen=True)
class LabelViolation:
    row: int
    col: int
    value: int


def binarize_objectness(prob: ProbRaster, tau: int = DEFAULT_TAU) -> ObjectnessMask:
    """Object wherever ``prob >= tau`` (inclusive)."""
    if not 0 <= tau <= 255:
        raise ValueError(f"tau must be in [0, 255], got {tau}")
    return ObjectnessMask(prob.data >= tau)


def validate_label_map(label_map: LabelMap, num_classes: int) -> LabelViolation | None:
    """Return the first offending pixel in row-major order, or None if the map is legal."""
    if not 1 <= num_classes < IGNORE:
        raise ValueError(f"num_classes must be in [1, {IGNORE}), got {num_classes}")
    data = label_map.data
    bad = (data >= num_classes) & (data != IGNORE)
    if not bad.any():
        return None
    flat = int(np.flatnonzero(bad)[0])
    row, col = divmod(flat, label_map.width)
    return LabelViolation(row, col, int(data[row, col]))


def check_label_map(label_map: LabelMap, num_classes: int, name: str = "label map") -> None:
    """Raising variant of :func:`validate_label_map`."""
    violation = validate_label_map(label_map, num_classes)
    if violation is not None:
        raise LabelValueError(violation, name)


def require_same_shape(what: str, a, b) -> None:
    if tuple(a.shape) != tuple(b.shape):
        raise ShapeError(what, a.shape, b.shape)
