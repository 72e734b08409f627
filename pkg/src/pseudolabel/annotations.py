"""Readers and writers for the on-disk dataset artifacts.

Three formats are handled here:

* label / objectness rasters as 8-bit grayscale or palette PNGs, where the
  stored index *is* the value (palettes are never resolved to colors);
* box annotations as a single JSON document::

    {"images": [{"id": str, "width": int, "height": int,
                 "boxes": [{"class": int, "xmin": int, "ymin": int,
                            "xmax": int, "ymax": int}]}]}

  with half-open pixel coordinates;
* CAM score stacks in the little-endian ``CAMS`` container::

    magic "CAMS" | version u8 = 1 | 3 zero pad bytes | H u32 | W u32 | K u32
    | K x u16 class ids (strictly ascending) | K x H x W f32 scores

All parsers raise a subclass of :class:`FormatError` on bad input and never
anything else.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .raster import IGNORE, LabelMap


class FormatError(ValueError):
    """Malformed or unsupported input file."""


class BoxParseError(FormatError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BoxValidationError(FormatError):
    def __init__(self, message: str, image_id: str | None = None, box_index: int | None = None):
        where = ""
        if image_id is not None:
            where = f"image {image_id!r}"
            if box_index is not None:
                where += f", box {box_index}"
            where += ": "
        super().__init__(where + message)
        self.image_id = image_id
        self.box_index = box_index


class PngFormatError(FormatError):
    pass


class CamFormatError(FormatError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# --------------------------------------------------------------------- boxes


@dataclass(frozen=True)
class BBox:
    """Class-tagged axis-aligned box, ``[xmin, xmax) x [ymin, ymax)``."""

    class_id: int
    xmin: int
    ymin: int
    xmax: int
    ymax: int

    def __post_init__(self):
        if not 1 <= self.class_id < IGNORE:
            raise ValueError(f"class_id must be in [1, {IGNORE}), got {self.class_id}")
        if self.xmin < 0 or self.ymin < 0:
            raise ValueError(f"negative box corner ({self.xmin}, {self.ymin})")
        if self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise ValueError(f"degenerate box {self.xmin, self.ymin, self.xmax, self.ymax}")

    @property
    def width(self) -> int:
        return self.xmax - self.xmin

    @property
    def height(self) -> int:
        return self.ymax - self.ymin

    @property
    def area(self) -> int:
        return self.width * self.height

    def clip(self, width: int, height: int) -> "BBox | None":
        """Clip to ``[0, width) x [0, height)``; None when nothing is left."""
        return clip_box(self.class_id, self.xmin, self.ymin, self.xmax, self.ymax, width, height)


def clip_box(class_id, xmin, ymin, xmax, ymax, width, height) -> BBox | None:
    x0, y0 = max(xmin, 0), max(ymin, 0)
    x1, y1 = min(xmax, width), min(ymax, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return BBox(class_id, x0, y0, x1, y1)


@dataclass(frozen=True)
class ImageBoxes:
    image_id: str
    width: int
    height: int
    boxes: tuple[BBox, ...] = ()


@dataclass(frozen=True)
class BoxCollection:
    images: tuple[ImageBoxes, ...] = ()
    # boxes that fell entirely outside their image and were discarded
    dropped: int = field(default=0, compare=False)

    def by_id(self) -> dict[str, ImageBoxes]:
        return {im.image_id: im for im in self.images}


def _require_int(obj: dict, key: str, image_id, box_index=None) -> int:
    if key not in obj:
        raise BoxValidationError(f"missing field {key!r}", image_id, box_index)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise BoxValidationError(f"field {key!r} must be an integer", image_id, box_index)
    return value


def parse_box_file(data: bytes) -> BoxCollection:
    """Parse a box JSON document, clipping boxes to their image.

    Boxes entirely outside the image are dropped and counted in
    ``BoxCollection.dropped``; boxes with ``xmax <= xmin`` or ``ymax <= ymin``
    are rejected.
    """
    try:
        text = bytes(data).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BoxParseError("invalid UTF-8", exc.start) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise BoxParseError(f"malformed JSON: {exc.msg}", offset) from None
    except (RecursionError, ValueError) as exc:
        raise BoxParseError(f"unparseable JSON: {exc}", 0) from None

    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise BoxValidationError('top level must be an object with an "images" list')

    images = []
    seen = set()
    dropped = 0
    for n, entry in enumerate(doc["images"]):
        if not isinstance(entry, dict):
            raise BoxValidationError(f"images[{n}] must be an object")
        image_id = entry.get("id")
        if not isinstance(image_id, str):
            raise BoxValidationError(f'images[{n}] needs a string "id"')
        if image_id in seen:
            raise BoxValidationError("duplicate image id", image_id)
        seen.add(image_id)
        width = _require_int(entry, "width", image_id)
        height = _require_int(entry, "height", image_id)
        if width < 1 or height < 1:
            raise BoxValidationError(f"image size {width}x{height} must be positive", image_id)
        raw_boxes = entry.get("boxes", [])
        if not isinstance(raw_boxes, list):
            raise BoxValidationError('"boxes" must be a list', image_id)

        boxes = []
        for k, raw in enumerate(raw_boxes):
            if not isinstance(raw, dict):
                raise BoxValidationError("box must be an object", image_id, k)
            cls = _require_int(raw, "class", image_id, k)
            xmin, ymin, xmax, ymax = (_require_int(raw, key, image_id, k) for key in ("xmin", "ymin", "xmax", "ymax"))
            if not 1 <= cls < IGNORE:
                raise BoxValidationError(f"class {cls} outside [1, {IGNORE})", image_id, k)
            if xmax <= xmin or ymax <= ymin:
                raise BoxValidationError(f"degenerate box ({xmin}, {ymin}, {xmax}, {ymax})", image_id, k)
            clipped = clip_box(cls, xmin, ymin, xmax, ymax, width, height)
            if clipped is None:
                dropped += 1
            else:
                boxes.append(clipped)
        images.append(ImageBoxes(image_id, width, height, tuple(boxes)))
    return BoxCollection(tuple(images), dropped)


def dump_box_file(collection: BoxCollection) -> bytes:
    doc = {
        "images": [
            {
                "id": im.image_id,
                "width": im.width,
                "height": im.height,
                "boxes": [
                    {"class": b.class_id, "xmin": b.xmin, "ymin": b.ymin, "xmax": b.xmax, "ymax": b.ymax}
                    for b in im.boxes
                ],
            }
            for im in collection.images
        ]
    }
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


# ----------------------------------------------------------------------- PNG


def read_png_array(data: bytes) -> np.ndarray:
    """Decode an 8-bit grayscale or palette PNG to its raw uint8 indices."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format != "PNG":
                raise PngFormatError(f"not a PNG (detected {im.format})")
            if im.mode not in ("L", "P"):
                raise PngFormatError(f"unsupported PNG mode {im.mode!r}; need 8-bit grayscale or palette")
            # P images keep their indices; the palette is never applied
            arr = np.asarray(im)
    except (UnidentifiedImageError, Image.DecompressionBombError, OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, PngFormatError):
            raise
        raise PngFormatError(f"cannot decode PNG: {exc}") from None
    if arr.dtype != np.uint8 or arr.ndim != 2:
        raise PngFormatError(f"unsupported pixel layout {arr.dtype} {arr.shape}")
    return arr


def write_png_array(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


def read_label_png(data: bytes) -> LabelMap:
    return LabelMap(read_png_array(data))


def write_label_png(label_map: LabelMap) -> bytes:
    return write_png_array(label_map.data)


# ---------------------------------------------------------------------- CAMS

CAMS_MAGIC = b"CAMS"
CAMS_VERSION = 1
_HEADER = struct.Struct("<4sB3sIII")


@dataclass(frozen=True, eq=False)
class CamStack:
    """Per-class score maps; ``scores[k]`` belongs to ``classes[k]``."""

    classes: tuple[int, ...]
    scores: np.ndarray

    def __post_init__(self):
        classes = tuple(int(c) for c in self.classes)
        scores = np.array(self.scores, dtype=np.float32, copy=True)
        if not classes:
            raise ValueError("CamStack needs at least one class")
        if any(b <= a for a, b in zip(classes, classes[1:])):
            raise ValueError(f"class ids must be strictly ascending, got {classes}")
        if classes[0] < 1 or classes[-1] >= IGNORE:
            raise ValueError(f"class ids must lie in [1, {IGNORE}), got {classes}")
        if scores.ndim != 3 or scores.shape[0] != len(classes) or 0 in scores.shape:
            raise ValueError(f"scores shape {scores.shape} does not fit {len(classes)} classes")
        if np.isnan(scores).any() or (scores < 0).any() or (scores > 1).any():
            raise ValueError("scores must lie in [0, 1]")
        scores.setflags(write=False)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "scores", scores)

    @property
    def height(self) -> int:
        return self.scores.shape[1]

    @property
    def width(self) -> int:
        return self.scores.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape[1:]

    def __eq__(self, other):
        if not isinstance(other, CamStack):
            return NotImplemented
        return self.classes == other.classes and np.array_equal(self.scores, other.scores)

    def __hash__(self):
        return hash((self.classes, self.scores.tobytes()))


def write_cam_container(stack: CamStack) -> bytes:
    k = len(stack.classes)
    header = _HEADER.pack(CAMS_MAGIC, CAMS_VERSION, b"\0\0\0", stack.height, stack.width, k)
    ids = struct.pack(f"<{k}H", *stack.classes)
    return header + ids + stack.scores.astype("<f4").tobytes()


def read_cam_container(data: bytes) -> CamStack:
    data = bytes(data)
    if len(data) < 4 or data[:4] != CAMS_MAGIC:
        raise CamFormatError("magic", f"expected {CAMS_MAGIC!r}, got {data[:4]!r}")
    if len(data) < _HEADER.size:
        raise CamFormatError("header", f"truncated: {len(data)} of {_HEADER.size} bytes")
    _, version, pad, h, w, k = _HEADER.unpack_from(data)
    if version != CAMS_VERSION:
        raise CamFormatError("version", f"unsupported version {version}")
    if pad != b"\0\0\0":
        raise CamFormatError("pad", "padding bytes must be zero")
    if h < 1 or w < 1:
        raise CamFormatError("dims", f"H and W must be positive, got {h}x{w}")
    if k < 1:
        raise CamFormatError("K", "at least one class required")

    ids_end = _HEADER.size + 2 * k
    if len(data) < ids_end:
        raise CamFormatError("class_ids", f"truncated: need {2 * k} bytes")
    classes = struct.unpack_from(f"<{k}H", data, _HEADER.size)
    if any(b <= a for a, b in zip(classes, classes[1:])):
        raise CamFormatError("class_ids", f"not strictly ascending: {classes}")
    if classes[0] < 1 or classes[-1] >= IGNORE:
        raise CamFormatError("class_ids", f"ids must lie in [1, {IGNORE})")

    n = k * h * w
    expected = ids_end + 4 * n
    if len(data) < expected:
        have = (len(data) - ids_end) // 4
        raise CamFormatError("scores", f"truncated: {have} of {n} floats present")
    if len(data) > expected:
        raise CamFormatError("scores", f"{len(data) - expected} trailing bytes")
    scores = np.frombuffer(data, dtype="<f4", count=n, offset=ids_end).reshape(k, h, w)
    if np.isnan(scores).any():
        raise CamFormatError("scores", "NaN score")
    if (scores < 0).any() or (scores > 1).any():
        raise CamFormatError("scores", "score outside [0, 1]")
    return CamStack(classes, scores)
