"""Seeded synthetic scenes with exactly known ground truth.

A scene is a handful of rectangles and ellipses on a background. From the
ground truth we derive a clean objectness mask, a corrupted one, per-class
CAM-like score maps and per-instance boxes. With every corruption knob at
zero the fusion rules must recover the ground truth exactly, which turns
them into checkable identities.

All randomness comes from SplitMix64 sub-streams (see docs/prng.md), so a
bundle is a pure function of ``(seed, config)``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .annotations import (
    BBox,
    BoxCollection,
    CamStack,
    ImageBoxes,
    dump_box_file,
    write_cam_container,
    write_label_png,
    write_png_array,
)
from .bias import normalized_border_distance
from .fusion_box import overlap_ratio
from .prng import SplitMix64, derive_seed
from .raster import LabelMap, ObjectnessMask

STREAM_SHAPES = 1
STREAM_CAM_NOISE = 2
STREAM_JITTER = 3
STREAM_OBJECTNESS = 4

SHAPE_KINDS = ("rect", "ellipse")
PLACEMENT_RESTARTS = 10


class SynthError(RuntimeError):
    def __init__(self, seed: int, message: str):
        super().__init__(f"seed {seed}: {message}")
        self.seed = seed


@dataclass(frozen=True)
class CorruptionParams:
    """Objectness corruption knobs.

    ``border_suppress`` swaps symmetric flips for object-to-background flips
    whose rate is scaled by ``max(0, 1 - d / border_band)``, ``d`` being the
    normalized border distance.
    """

    boundary_radius: int = 0
    flip_rate: float = 0.0
    drop_prob: float = 0.0
    border_suppress: bool = False
    border_band: float = 0.5

    def __post_init__(self):
        if self.boundary_radius < 0:
            raise ValueError("boundary_radius must be >= 0")
        for name in ("flip_rate", "drop_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0.0 < self.border_band <= 1.0:
            raise ValueError("border_band must be in (0, 1]")


@dataclass(frozen=True)
class SceneConfig:
    width: int = 64
    height: int = 64
    num_classes: int = 3  # foreground classes, labelled 1..num_classes
    num_shapes: int = 3
    shape_kinds: tuple[str, ...] = SHAPE_KINDS
    allow_overlap: bool = False
    min_extent: float = 0.15  # shape side as a fraction of the image side
    max_extent: float = 0.45
    min_overlap: float = 0.0  # >0: every later shape must overlap the first by more than this
    corruption: CorruptionParams = field(default_factory=CorruptionParams)
    cam_blur: int = 0
    cam_noise: float = 0.0
    cam_floor: float = 0.05
    box_jitter: int = 0
    max_retries: int = 1000

    def __post_init__(self):
        if isinstance(self.corruption, dict):
            object.__setattr__(self, "corruption", CorruptionParams(**self.corruption))
        object.__setattr__(self, "shape_kinds", tuple(self.shape_kinds))
        if self.width < 8 or self.height < 8:
            raise ValueError("scenes must be at least 8x8")
        if not 1 <= self.num_classes < 255:
            raise ValueError("num_classes must be in [1, 255)")
        if self.num_shapes < 1:
            raise ValueError("num_shapes must be >= 1")
        if not self.shape_kinds or any(k not in SHAPE_KINDS for k in self.shape_kinds):
            raise ValueError(f"shape_kinds must be drawn from {SHAPE_KINDS}")
        if not 0.0 < self.min_extent <= self.max_extent <= 1.0:
            raise ValueError("need 0 < min_extent <= max_extent <= 1")
        for name in ("min_overlap", "cam_noise", "cam_floor"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.min_overlap > 0 and not self.allow_overlap:
            raise ValueError("min_overlap requires allow_overlap")
        if self.cam_blur < 0 or self.box_jitter < 0 or self.max_retries < 1:
            raise ValueError("cam_blur, box_jitter must be >= 0 and max_retries >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["shape_kinds"] = list(self.shape_kinds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scene config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SceneBundle:
    seed: int
    gt: LabelMap
    objectness_clean: ObjectnessMask
    objectness_corrupted: ObjectnessMask
    cams: CamStack
    boxes: tuple[BBox, ...]
    tight_boxes: tuple[BBox, ...]

    def __eq__(self, other):
        if not isinstance(other, SceneBundle):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.gt == other.gt
            and self.objectness_clean == other.objectness_clean
            and self.objectness_corrupted == other.objectness_corrupted
            and self.cams == other.cams
            and self.boxes == other.boxes
            and self.tight_boxes == other.tight_boxes
        )


def _shape_mask(kind: str, w: int, h: int) -> np.ndarray:
    if kind == "rect":
        return np.ones((h, w), dtype=bool)
    # integer form of ((x - cx) / (w/2))^2 + ((y - cy) / (h/2))^2 <= 1 with cx = (w-1)/2
    ys = 2 * np.arange(h, dtype=np.int64) - (h - 1)
    xs = 2 * np.arange(w, dtype=np.int64) - (w - 1)
    return xs[None, :] ** 2 * h * h + ys[:, None] ** 2 * w * w <= w * w * h * h


def _extent_range(side: int, config: SceneConfig) -> tuple[int, int]:
    lo = min(side, max(2, int(config.min_extent * side)))
    hi = min(side, max(lo, int(config.max_extent * side)))
    return lo, hi


def _boxes_overlap(a: BBox, b: BBox) -> bool:
    return a.xmin < b.xmax and b.xmin < a.xmax and a.ymin < b.ymax and b.ymin < a.ymax


def _place_shapes(seed: int, config: SceneConfig) -> list[tuple[int, np.ndarray, BBox]]:
    """Draw shapes; returns (class, local mask, tight box) in placement order.

    When some shape cannot be placed within ``max_retries`` attempts, the whole
    scene is restarted on the same stream, up to ``PLACEMENT_RESTARTS`` times.
    """
    rng = SplitMix64(derive_seed(seed, STREAM_SHAPES))
    for _ in range(PLACEMENT_RESTARTS):
        placed = _try_place(rng, config)
        if len(placed) == config.num_shapes:
            return placed
    raise SynthError(
        seed, f"could not place shape {len(placed)} after {PLACEMENT_RESTARTS} restarts of {config.max_retries} attempts"
    )


def _try_place(rng: SplitMix64, config: SceneConfig) -> list[tuple[int, np.ndarray, BBox]]:
    W, H = config.width, config.height
    wlo, whi = _extent_range(W, config)
    hlo, hhi = _extent_range(H, config)
    placed: list[tuple[int, np.ndarray, BBox]] = []
    for _ in range(config.num_shapes):
        for _ in range(config.max_retries):
            kind = config.shape_kinds[rng.below(len(config.shape_kinds))]
            cls = rng.between(1, config.num_classes)
            w = rng.between(wlo, whi)
            h = rng.between(hlo, hhi)
            x0 = rng.below(W - w + 1)
            y0 = rng.below(H - h + 1)
            mask = _shape_mask(kind, w, h)
            rows = np.flatnonzero(mask.any(axis=1))
            cols = np.flatnonzero(mask.any(axis=0))
            box = BBox(cls, x0 + int(cols[0]), y0 + int(rows[0]), x0 + int(cols[-1]) + 1, y0 + int(rows[-1]) + 1)
            if not config.allow_overlap and any(_boxes_overlap(box, p[2]) for p in placed):
                continue
            if config.min_overlap > 0 and placed:
                first = placed[0][2]
                if box.area >= first.area or overlap_ratio(first, box) <= config.min_overlap:
                    continue
            full = np.zeros((H, W), dtype=bool)
            full[y0 : y0 + h, x0 : x0 + w] = mask
            placed.append((cls, full, box))
            break
        else:
            return placed
    return placed


def _synth_cams(gt: np.ndarray, seed: int, config: SceneConfig) -> CamStack:
    classes = [int(c) for c in np.unique(gt) if c != 0]
    stack = np.zeros((len(classes), *gt.shape), dtype=np.float64)
    for k, cls in enumerate(classes):
        region = gt == cls
        dist = ndimage.distance_transform_edt(region)
        score = config.cam_floor + (1.0 - config.cam_floor) * dist / dist.max()
        score[~region] = 0.0
        if config.cam_blur > 0:
            score = ndimage.uniform_filter(score, size=2 * config.cam_blur + 1, mode="constant", cval=0.0)
        stack[k] = score
    if config.cam_noise > 0:
        rng = SplitMix64(derive_seed(seed, STREAM_CAM_NOISE))
        stack += (2.0 * rng.uniform_block(stack.shape) - 1.0) * config.cam_noise
    return CamStack(tuple(classes), np.clip(stack, 0.0, 1.0).astype(np.float32))


def _jitter_boxes(tight: list[BBox], seed: int, config: SceneConfig) -> list[BBox]:
    j = config.box_jitter
    if j == 0:
        return list(tight)
    rng = SplitMix64(derive_seed(seed, STREAM_JITTER))
    W, H = config.width, config.height
    out = []
    for b in tight:
        dx0, dy0, dx1, dy1 = (rng.between(-j, j) for _ in range(4))
        xmin = min(max(b.xmin + dx0, 0), b.xmax - 1)
        ymin = min(max(b.ymin + dy0, 0), b.ymax - 1)
        xmax = min(max(b.xmax + dx1, xmin + 1), W)
        ymax = min(max(b.ymax + dy1, ymin + 1), H)
        out.append(BBox(b.class_id, xmin, ymin, xmax, ymax))
    return out


def _disk(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return r[None, :] ** 2 + r[:, None] ** 2 <= radius * radius


def corrupt_objectness(mask: ObjectnessMask, seed: int, params: CorruptionParams) -> ObjectnessMask:
    """Degrade an objectness mask; pure function of ``(mask, seed, params)``.

    Steps, each consuming the generator only when its knob is non-zero:
    whole connected components (4-connected) are dropped with ``drop_prob``;
    the mask is dilated or eroded by a radius drawn from ``[0, boundary_radius]``;
    then pixels are flipped at ``flip_rate`` (see :class:`CorruptionParams`
    for the border-suppress variant).
    """
    rng = SplitMix64(seed)
    data = mask.data.copy()
    if params.drop_prob > 0:
        labels, n = ndimage.label(data)
        for comp in range(1, n + 1):
            if rng.uniform() < params.drop_prob:
                data[labels == comp] = False
    if params.boundary_radius > 0:
        radius = rng.between(0, params.boundary_radius)
        dilate = rng.below(2) == 0
        if radius > 0:
            footprint = _disk(radius)
            if dilate:
                data = ndimage.binary_dilation(data, structure=footprint)
            else:
                # outside the image counts as object so edge-touching objects are not eaten from the frame
                data = ndimage.binary_erosion(data, structure=footprint, border_value=1)
    if params.flip_rate > 0:
        u = rng.uniform_block(data.shape)
        if params.border_suppress:
            d = normalized_border_distance(*data.shape)
            scale = np.maximum(0.0, 1.0 - d / params.border_band)
            data &= ~(u < params.flip_rate * scale)
        else:
            data ^= u < params.flip_rate
    return ObjectnessMask(data)


def synth_scene(seed: int, config: SceneConfig = SceneConfig()) -> SceneBundle:
    """Generate one scene. Later shapes are drawn on top of earlier ones."""
    placed = _place_shapes(seed, config)
    gt = np.zeros((config.height, config.width), dtype=np.uint8)
    for cls, full, _ in placed:
        gt[full] = cls
    tight = [box for _, _, box in placed]
    clean = ObjectnessMask(gt > 0)
    corrupted = corrupt_objectness(clean, derive_seed(seed, STREAM_OBJECTNESS), config.corruption)
    return SceneBundle(
        seed=seed,
        gt=LabelMap(gt),
        objectness_clean=clean,
        objectness_corrupted=corrupted,
        cams=_synth_cams(gt, seed, config),
        boxes=tuple(_jitter_boxes(tight, seed, config)),
        tight_boxes=tuple(tight),
    )


def scene_id(seed: int) -> str:
    return f"scene_{seed:020d}"


# per-image directory layout under a dataset root
LAYOUT = {
    "labels": ("labels", ".png"),
    "objectness": ("objectness", ".png"),
    "objectness_clean": ("objectness_clean", ".png"),
    "cams": ("cams", ".cams"),
}


def bundle_files(bundle: SceneBundle) -> dict[str, bytes]:
    """Encoded per-image artifacts, keyed like :data:`LAYOUT`."""
    return {
        "labels": write_label_png(bundle.gt),
        "objectness": write_png_array(bundle.objectness_corrupted.to_label_data()),
        "objectness_clean": write_png_array(bundle.objectness_clean.to_label_data()),
        "cams": write_cam_container(bundle.cams),
    }


def write_bundle(bundle: SceneBundle, out_dir: Path, image_id: str) -> None:
    for key, payload in bundle_files(bundle).items():
        sub, ext = LAYOUT[key]
        (Path(out_dir) / sub / f"{image_id}{ext}").write_bytes(payload)


def write_dataset_index(
    out_dir: Path, entries: list[tuple[str, tuple[BBox, ...]]], config: SceneConfig, seed: int
) -> None:
    """Write boxes.json and manifest.json for already-written bundles given as (id, boxes)."""
    out_dir = Path(out_dir)
    collection = BoxCollection(
        tuple(ImageBoxes(image_id, config.width, config.height, tuple(boxes)) for image_id, boxes in entries)
    )
    (out_dir / "boxes.json").write_bytes(dump_box_file(collection))
    manifest = {
        "seed": seed,
        "count": len(entries),
        "config": config.to_dict(),
        "boxes": "boxes.json",
        "images": [
            {"id": image_id, **{key: f"{sub}/{image_id}{ext}" for key, (sub, ext) in LAYOUT.items()}}
            for image_id, _ in entries
        ],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def make_dirs(out_dir: Path) -> None:
    for sub, _ in LAYOUT.values():
        (Path(out_dir) / sub).mkdir(parents=True, exist_ok=True)
