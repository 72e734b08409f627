"""Where do pseudo-labels go wrong? Spatial error statistics over a dataset.

Two views are computed from integer (errors, pixels) tallies:

* a resolution-independent ``grid x grid`` heatmap, each pixel binned to
  cell ``(i * G // H, j * G // W)``;
* a profile over normalized distance to the nearest image border, where
  ``d = min(i, j, H-1-i, W-1-j) / (min(H, W) // 2)`` clamped to [0, 1].

A pixel counts as an error when ``pred != gt``; pixels with gt == 255 are
skipped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .raster import IGNORE, LabelMap, require_same_shape


def border_distance(height: int, width: int) -> tuple[np.ndarray, int]:
    """Integer pixel distance to the nearest border, and the normalizer ``min(H, W) // 2``."""
    rows = np.arange(height)
    cols = np.arange(width)
    dr = np.minimum(rows, height - 1 - rows)
    dc = np.minimum(cols, width - 1 - cols)
    dist = np.minimum(dr[:, None], dc[None, :])
    return dist, min(height, width) // 2


def normalized_border_distance(height: int, width: int) -> np.ndarray:
    dist, half = border_distance(height, width)
    if half == 0:
        return np.zeros((height, width))
    return np.minimum(dist / half, 1.0)


def border_bins(height: int, width: int, bins: int) -> np.ndarray:
    """Bin index per pixel, ``min(bins - 1, floor(d * bins))``, computed exactly in integers."""
    dist, half = border_distance(height, width)
    if half == 0:
        return np.zeros((height, width), dtype=np.int64)
    return np.minimum(bins - 1, (np.minimum(dist, half) * bins) // half).astype(np.int64)


def _errors(pred: LabelMap, gt: LabelMap) -> tuple[np.ndarray, np.ndarray]:
    require_same_shape("prediction vs ground truth", pred, gt)
    valid = gt.data != IGNORE
    return (pred.data != gt.data) & valid, valid


@dataclass
class BiasAccumulator:
    grid_size: int = 8
    bins: int = 10
    grid_errors: np.ndarray = None
    grid_pixels: np.ndarray = None
    bin_errors: np.ndarray = None
    bin_pixels: np.ndarray = None

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        g, b = self.grid_size, self.bins
        if self.grid_errors is None:
            self.grid_errors = np.zeros((g, g), dtype=np.int64)
            self.grid_pixels = np.zeros((g, g), dtype=np.int64)
            self.bin_errors = np.zeros(b, dtype=np.int64)
            self.bin_pixels = np.zeros(b, dtype=np.int64)

    def add(self, pred: LabelMap, gt: LabelMap) -> None:
        err, valid = _errors(pred, gt)
        h, w = gt.shape
        g = self.grid_size
        cell = ((np.arange(h) * g // h)[:, None] * g + (np.arange(w) * g // w)[None, :]).ravel()
        e, v = err.ravel(), valid.ravel()
        self.grid_errors += np.bincount(cell[e], minlength=g * g).reshape(g, g)
        self.grid_pixels += np.bincount(cell[v], minlength=g * g).reshape(g, g)
        b = border_bins(h, w, self.bins).ravel()
        self.bin_errors += np.bincount(b[e], minlength=self.bins)
        self.bin_pixels += np.bincount(b[v], minlength=self.bins)

    def merge(self, other: "BiasAccumulator") -> None:
        self.grid_errors += other.grid_errors
        self.grid_pixels += other.grid_pixels
        self.bin_errors += other.bin_errors
        self.bin_pixels += other.bin_pixels

    def error_grid(self) -> np.ndarray:
        return _rates(self.grid_errors, self.grid_pixels)

    def border_profile(self) -> np.ndarray:
        return _rates(self.bin_errors, self.bin_pixels)

    def report(self) -> "BiasReport":
        profile = self.border_profile()
        return BiasReport(self.grid_size, self.error_grid(), self.bins, profile, bias_index(profile))


def _rates(errors: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    out = np.zeros(errors.shape, dtype=np.float64)
    np.divide(errors, pixels, out=out, where=pixels > 0)
    return out


def bias_index(profile: np.ndarray) -> float | None:
    """Outermost-bin error rate relative to the mean over all bins."""
    mean = float(np.mean(profile))
    if mean == 0.0:
        return None
    return float(profile[0]) / mean


@dataclass
class BiasReport:
    grid_size: int
    error_grid: np.ndarray
    border_bins: int
    border_profile: np.ndarray
    border_bias_index: float | None

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "error_grid": self.error_grid.tolist(),
            "border_bins": self.border_bins,
            "border_profile": self.border_profile.tolist(),
            "border_bias_index": self.border_bias_index,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def heatmap_data(self) -> np.ndarray:
        """Error grid as uint8 (rate * 255, rounded half up)."""
        return np.floor(self.error_grid * 255 + 0.5).astype(np.uint8)


def error_heatmap(pairs: Iterable[tuple[LabelMap, LabelMap]], grid_size: int) -> np.ndarray:
    acc = BiasAccumulator(grid_size=grid_size)
    for pred, gt in pairs:
        acc.add(pred, gt)
    return acc.error_grid()


def border_profile(pairs: Iterable[tuple[LabelMap, LabelMap]], bins: int) -> tuple[np.ndarray, float | None]:
    acc = BiasAccumulator(bins=bins)
    for pred, gt in pairs:
        acc.add(pred, gt)
    profile = acc.border_profile()
    return profile, bias_index(profile)


def bias_report(pairs: Iterable[tuple[LabelMap, LabelMap]], grid_size: int = 8, bins: int = 10) -> BiasReport:
    acc = BiasAccumulator(grid_size, bins)
    for pred, gt in pairs:
        acc.add(pred, gt)
    return acc.report()
