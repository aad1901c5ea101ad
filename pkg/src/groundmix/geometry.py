"""
Box geometry on the structured coordinate grid.

Two box flavours are used throughout the package:

- ``PixelBox``: float xyxy coordinates in source-image pixels.
- ``Box``: integer xyxy coordinates on the half-open ``[0, 1000)`` grid that
  models read and write.

Pixel boxes are turned into grid boxes by ``normalize_box`` (whole image) or
``remap_box`` (crop-local frame).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Real
from typing import NamedTuple, Sequence

GRID_SIZE = 1000
GRID_MAX = GRID_SIZE - 1


class GeometryError(ValueError):
    """Raised on invalid geometric input."""


class DegenerateBoxError(GeometryError):
    """Box has zero (or negative) extent, possibly only after rounding."""


class VisibilityError(GeometryError):
    """Target box is not fully contained in a crop region."""


class Box(NamedTuple):
    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height


class PixelBox(NamedTuple):
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def translate(self, dx: float, dy: float) -> "PixelBox":
        return PixelBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)


class ImageDims(NamedTuple):
    width: int
    height: int


@dataclass(frozen=True)
class CropRegion:
    """Axis-aligned integer crop ``[x, x + width) x [y, y + height)`` of a parent image."""

    x: int
    y: int
    width: int
    height: int
    parent: ImageDims

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"crop must be at least 1x1, got {self.width}x{self.height}")
        if (
            self.x < 0
            or self.y < 0
            or self.x + self.width > self.parent.width
            or self.y + self.height > self.parent.height
        ):
            raise GeometryError(f"crop {self} exceeds parent image {tuple(self.parent)}")

    @property
    def dims(self) -> ImageDims:
        return ImageDims(self.width, self.height)

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, box: PixelBox) -> bool:
        return (
            box.x1 >= self.x
            and box.y1 >= self.y
            and box.x2 <= self.x + self.width
            and box.y2 <= self.y + self.height
        )

    def to_list(self) -> list[int]:
        return [self.x, self.y, self.width, self.height]


class BoxVerdict(NamedTuple):
    valid: bool
    reasons: tuple[str, ...]

    @property
    def reason(self) -> str | None:
        return self.reasons[0] if self.reasons else None


# reason strings returned by validate_box
WRONG_LENGTH = "wrong-length"
NON_NUMERIC = "non-numeric"
NON_INTEGRAL = "non-integral"
OUT_OF_RANGE = "out-of-range"
DEGENERATE = "degenerate"


def _is_number(v) -> bool:
    return isinstance(v, Real) and not isinstance(v, bool)


def validate_box(values: Sequence) -> BoxVerdict:
    """Check a candidate grid box.

    Accepts iff there are four integral values, all in ``[0, 1000)``, with
    ``x2 > x1`` and ``y2 > y1``. Every failing check is reported, in the order
    numeric/integral, range, extent.
    """
    try:
        values = list(values)
    except TypeError:
        return BoxVerdict(False, (WRONG_LENGTH,))
    if len(values) != 4:
        return BoxVerdict(False, (WRONG_LENGTH,))
    if not all(_is_number(v) for v in values):
        return BoxVerdict(False, (NON_NUMERIC,))
    if not all(isinstance(v, Integral) or math.isfinite(v) for v in values):
        return BoxVerdict(False, (NON_NUMERIC,))

    reasons = []
    if not all(isinstance(v, Integral) or float(v).is_integer() for v in values):
        reasons.append(NON_INTEGRAL)
    if not all(0 <= v < GRID_SIZE for v in values):
        reasons.append(OUT_OF_RANGE)
    x1, y1, x2, y2 = values
    if not (x2 > x1 and y2 > y1):
        reasons.append(DEGENERATE)
    return BoxVerdict(not reasons, tuple(reasons))


def as_box(values: Sequence) -> Box:
    """Coerce validated values into a ``Box``; raises on any failure."""
    verdict = validate_box(values)
    if not verdict.valid:
        raise GeometryError(f"invalid box {list(values)!r}: {', '.join(verdict.reasons)}")
    return Box(*(int(v) for v in values))


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, treating coordinates as continuous extents."""
    for box in (a, b):
        if not (box[2] > box[0] and box[3] > box[1]):
            raise DegenerateBoxError(f"degenerate box {tuple(box)}")
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def _round_half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


def _scale(coord: float, extent: int) -> int:
    q = _round_half_up(Fraction(coord) * GRID_SIZE / extent)
    return min(q, GRID_MAX)


def normalize_box(box: PixelBox, dims: ImageDims) -> Box:
    """Scale a pixel box onto the grid of an image of size ``dims``.

    Each coordinate is scaled by ``1000 / extent``, rounded half-up and clamped
    to 999. Rounding is exact (rational arithmetic), so results do not depend on
    float representation of the inputs.
    """
    width, height = dims
    if width < 1 or height < 1:
        raise GeometryError(f"invalid image dims {tuple(dims)}")
    x1, y1, x2, y2 = box
    if not all(math.isfinite(v) for v in box):
        raise GeometryError(f"non-finite pixel box {tuple(box)}")
    if not (x2 > x1 and y2 > y1):
        raise DegenerateBoxError(f"degenerate pixel box {tuple(box)}")
    if x1 < 0 or y1 < 0 or x2 > width or y2 > height:
        raise GeometryError(f"pixel box {tuple(box)} outside image {width}x{height}")

    out = Box(_scale(x1, width), _scale(y1, height), _scale(x2, width), _scale(y2, height))
    if not (out.x2 > out.x1 and out.y2 > out.y1):
        raise DegenerateBoxError(f"pixel box {tuple(box)} collapses to {tuple(out)} on the grid")
    return out


def remap_box(box: PixelBox, crop: CropRegion) -> Box:
    """Express a source pixel box on the grid of a crop's local frame."""
    if not crop.contains(box):
        raise VisibilityError(f"box {tuple(box)} not fully inside crop {crop.to_list()}")
    return normalize_box(box.translate(-crop.x, -crop.y), crop.dims)


def denormalize_box(box: Box, dims: ImageDims) -> PixelBox:
    """Approximate inverse of ``normalize_box`` (exact up to grid quantization)."""
    sx = dims.width / GRID_SIZE
    sy = dims.height / GRID_SIZE
    return PixelBox(box.x1 * sx, box.y1 * sy, box.x2 * sx, box.y2 * sy)


def unmap_box(box: Box, crop: CropRegion) -> PixelBox:
    """Map a crop-local grid box back into parent-image pixels."""
    return denormalize_box(box, crop.dims).translate(crop.x, crop.y)
