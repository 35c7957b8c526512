"""Geometry primitives and shared domain types.

Coordinates are integer pixels in screen space: x grows right, y grows
down, and a box's (x, y) is its top-left corner.  Intersections, unions
and areas are exact integer arithmetic; only final ratios are floats.
Degenerate boxes (zero width or height) are rejected at construction so
downstream code never has to guard against them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyInput, ValidationError


class ElementClass(str, Enum):
    TEXT = "Text"
    ICON = "Icon"
    IMAGE = "Image"
    BUTTON = "Button"
    CONTAINER = "Container"
    OTHER = "Other"


# only these element classes carry a text payload
_TEXTUAL = frozenset({ElementClass.TEXT, ElementClass.BUTTON})


class BlockKind(str, Enum):
    PROPOSED = "Proposed"
    REFINED = "Refined"
    GROUND_TRUTH = "GroundTruth"
    GENERATED = "Generated"


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError(f"bbox field {name!r} must be an int, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(
                f"degenerate bbox: {self.w}x{self.h} at ({self.x}, {self.y})"
            )
        if self.x < 0 or self.y < 0:
            raise ValidationError(f"bbox origin must be non-negative, got ({self.x}, {self.y})")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)

    @staticmethod
    def from_tuple(t: Sequence[int]) -> "BoundingBox":
        if len(t) != 4:
            raise ValidationError(f"bbox needs 4 values, got {len(t)}")
        return BoundingBox(int(t[0]), int(t[1]), int(t[2]), int(t[3]))


def intersection_area(a: BoundingBox, b: BoundingBox) -> int:
    """Exact area of the overlap between two boxes, 0 when disjoint."""
    iw = min(a.right, b.right) - max(a.x, b.x)
    ih = min(a.bottom, b.bottom) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0
    return iw * ih


def overlap_ratio(a: BoundingBox, b: BoundingBox) -> float:
    """Fraction of a's area covered by b.  Asymmetric by design."""
    return intersection_area(a, b) / a.area


def contains(outer: BoundingBox, inner: BoundingBox) -> bool:
    """Boundary-inclusive containment: a box contains itself."""
    return (
        inner.x >= outer.x
        and inner.y >= outer.y
        and inner.right <= outer.right
        and inner.bottom <= outer.bottom
    )


def union_bbox(boxes: Iterable[BoundingBox]) -> BoundingBox:
    """Smallest box covering every input box.

    Raises EmptyInput on an empty iterable: there is no sensible neutral
    element in pixel space.
    """
    boxes = list(boxes)
    if not boxes:
        raise EmptyInput("union_bbox of no boxes")
    x1 = min(b.x for b in boxes)
    y1 = min(b.y for b in boxes)
    x2 = max(b.right for b in boxes)
    y2 = max(b.bottom for b in boxes)
    return BoundingBox(x1, y1, x2 - x1, y2 - y1)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    inter = intersection_area(a, b)
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class UIElement:
    id: str
    bbox: BoundingBox
    elem_class: ElementClass = ElementClass.OTHER
    text: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("element id must be non-empty")
        if self.text is not None and self.elem_class not in _TEXTUAL:
            raise ValidationError(
                f"element {self.id!r}: text payload not allowed on class {self.elem_class.value}"
            )

    @property
    def has_text(self) -> bool:
        return self.text is not None and self.text != ""


@dataclass(frozen=True)
class UIBlock:
    id: str
    page_id: str
    bbox: BoundingBox
    label: str = ""
    kind: BlockKind = BlockKind.PROPOSED

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("block id must be non-empty")


@dataclass
class Page:
    id: str
    width: int
    height: int
    elements: list[UIElement] = field(default_factory=list)
    screenshot: Path | None = None

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"page {self.id!r}: non-positive dimensions")

    @property
    def bbox(self) -> BoundingBox:
        return BoundingBox(0, 0, self.width, self.height)

    @property
    def diagonal(self) -> float:
        return float(self.width**2 + self.height**2) ** 0.5


@dataclass
class Project:
    root: Path
    pages: list[Page] = field(default_factory=list)


def canonical_key(item: UIElement | UIBlock) -> tuple[int, int, str]:
    """Reading-order sort key: top to bottom, left to right, id as tiebreak."""
    return (item.bbox.y, item.bbox.x, item.id)


def canonical_sort(items: Iterable[UIElement]) -> list[UIElement]:
    return sorted(items, key=canonical_key)
