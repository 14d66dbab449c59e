"""Canonical layout data model, geometry utilities, and annotation IO.

A layout is a variable-length set of categorized bounding boxes over a pixel
canvas. Box coordinates are stored normalized: center position and size as
fractions of canvas width/height, each in [0, 1]. Category 0 is a reserved
padding marker used by the fixed-length set-prediction models and never
appears in annotation files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NUM_CATEGORIES = 5


class LayoutError(ValueError):
    """Invalid layout construction or operation."""


class AnnotationError(ValueError):
    """Malformed annotation file content."""


class Category(IntEnum):
    NON_OBJECT = 0
    LOGO = 1
    TEXT = 2
    UNDERLAY = 3
    EMBELLISHMENT = 4


REAL_CATEGORIES = (Category.LOGO, Category.TEXT, Category.UNDERLAY, Category.EMBELLISHMENT)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: center (cx, cy) and size (w, h), all in [0, 1]."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise LayoutError(f"box component {name}={v} outside [0, 1]")

    @property
    def x0(self) -> float:
        return self.cx - self.w / 2

    @property
    def x1(self) -> float:
        return self.cx + self.w / 2

    @property
    def y0(self) -> float:
        return self.cy - self.h / 2

    @property
    def y1(self) -> float:
        return self.cy + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)

    def to_pixels(self, canvas_w: int, canvas_h: int) -> tuple[float, float, float, float]:
        """Denormalize back to pixel units (cx, cy, w, h)."""
        return (self.cx * canvas_w, self.cy * canvas_h, self.w * canvas_w, self.h * canvas_h)


ZERO_BOX = BBox(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Element:
    """One categorized box. Padding elements carry an all-zero box."""

    category: Category
    box: BBox

    def __post_init__(self) -> None:
        if self.category == Category.NON_OBJECT:
            if self.box.as_tuple() != (0.0, 0.0, 0.0, 0.0):
                raise LayoutError("padding elements must have an all-zero box")
        elif self.box.w <= 0.0 or self.box.h <= 0.0:
            raise LayoutError(f"zero-area box is not legal for category {self.category.name}")

    @property
    def is_real(self) -> bool:
        return self.category != Category.NON_OBJECT


@dataclass(frozen=True)
class Layout:
    """Ordered collection of elements on a canvas_w x canvas_h pixel canvas.

    Order is only a stable serialization order; layouts are semantically sets.
    """

    elements: tuple[Element, ...]
    canvas_w: int
    canvas_h: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.canvas_w <= 0 or self.canvas_h <= 0:
            raise LayoutError("canvas size must be positive")

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def real_elements(self) -> tuple[Element, ...]:
        return tuple(e for e in self.elements if e.is_real)

    def by_category(self, *categories: Category) -> tuple[Element, ...]:
        return tuple(e for e in self.elements if e.category in categories)


def normalize_box(
    px_box: tuple[float, float, float, float], canvas_w: int, canvas_h: int
) -> BBox:
    """Convert a pixel-space (cx, cy, w, h) box to normalized fractions.

    Components are divided by the matching canvas extent and clamped into
    [0, 1]; real annotations occasionally overflow the canvas slightly.
    """
    if canvas_w <= 0 or canvas_h <= 0:
        raise LayoutError(f"canvas size must be positive, got {canvas_w}x{canvas_h}")
    cx, cy, w, h = px_box
    clamp = lambda v: min(1.0, max(0.0, v))
    return BBox(clamp(cx / canvas_w), clamp(cy / canvas_h), clamp(w / canvas_w), clamp(h / canvas_h))


def pad(layout: Layout, n_max: int) -> Layout:
    """Append padding elements up to length n_max; original order preserved."""
    if layout.n > n_max:
        raise LayoutError(f"layout has {layout.n} elements, exceeds capacity {n_max}")
    padding = tuple(
        Element(Category.NON_OBJECT, ZERO_BOX) for _ in range(n_max - layout.n)
    )
    return Layout(layout.elements + padding, layout.canvas_w, layout.canvas_h)


def unpad(layout: Layout) -> Layout:
    """Drop every padding element (wherever it appears), keeping order."""
    return Layout(layout.real_elements, layout.canvas_w, layout.canvas_h)


def encode_onehot(category: Category, k: int = NUM_CATEGORIES) -> np.ndarray:
    """One-hot encode a category index into a length-k float vector."""
    idx = int(category)
    if idx >= k:
        raise LayoutError(f"category index {idx} out of range for k={k}")
    vec = np.zeros(k, dtype=np.float64)
    vec[idx] = 1.0
    return vec


def rect_intersection_area(a: BBox, b: BBox) -> float:
    """Area of the axis-aligned intersection, in normalized units."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def _round_half_up(v: np.ndarray | float) -> np.ndarray | int:
    return np.floor(np.asarray(v) + 0.5).astype(np.int64)


def box_pixel_bounds(box: BBox, w: int, h: int) -> tuple[int, int, int, int]:
    """Pixel-index bounds (x0, x1, y0, y1) of a box, round-half-up at edges."""
    x0 = int(_round_half_up(box.x0 * w))
    x1 = int(_round_half_up(box.x1 * w))
    y0 = int(_round_half_up(box.y0 * h))
    y1 = int(_round_half_up(box.y1 * h))
    return (max(0, x0), min(w, x1), max(0, y0), min(h, y1))


def rasterize(
    layout: Layout,
    w: int,
    h: int,
    categories: Iterable[Category] | None = None,
) -> np.ndarray:
    """Binary (h, w) mask of pixels covered by at least one matching element.

    ``categories=None`` selects every real category; padding elements never
    cover pixels. Box edges are converted with round-half-up.
    """
    if w <= 0 or h <= 0:
        raise LayoutError("raster size must be positive")
    allowed = set(REAL_CATEGORIES) if categories is None else set(categories)
    allowed.discard(Category.NON_OBJECT)
    mask = np.zeros((h, w), dtype=bool)
    for el in layout.elements:
        if el.category not in allowed:
            continue
        x0, x1, y0, y1 = box_pixel_bounds(el.box, w, h)
        if x1 > x0 and y1 > y0:
            mask[y0:y1, x0:x1] = True
    return mask


@dataclass(frozen=True)
class AnnotationRecord:
    """One serialized (image, layout) pair."""

    image_path: str
    canvas_w: int
    canvas_h: int
    elements: tuple[Element, ...]

    def to_layout(self) -> Layout:
        return Layout(self.elements, self.canvas_w, self.canvas_h)

    @classmethod
    def from_layout(cls, image_path: str, layout: Layout) -> "AnnotationRecord":
        return cls(image_path, layout.canvas_w, layout.canvas_h, layout.real_elements)


def _record_to_json(record: AnnotationRecord) -> str:
    payload = {
        "image_path": record.image_path,
        "width": record.canvas_w,
        "height": record.canvas_h,
        "elements": [
            {"category": int(e.category), "box": list(e.box.as_tuple())}
            for e in record.elements
        ],
    }
    return json.dumps(payload, separators=(",", ":"))


def _record_from_obj(obj: dict) -> AnnotationRecord:
    try:
        image_path = obj["image_path"]
        width = int(obj["width"])
        height = int(obj["height"])
        raw_elements = obj["elements"]
    except (KeyError, TypeError) as exc:
        raise AnnotationError(f"missing or malformed field: {exc}") from exc
    elements = []
    for raw in raw_elements:
        cat_int = int(raw["category"])
        if cat_int not in (1, 2, 3, 4):
            raise AnnotationError(f"unknown category {cat_int} (files use 1..4)")
        box_vals = raw["box"]
        if len(box_vals) != 4:
            raise AnnotationError(f"box must have 4 components, got {len(box_vals)}")
        try:
            box = BBox(*[float(v) for v in box_vals])
            elements.append(Element(Category(cat_int), box))
        except LayoutError as exc:
            raise AnnotationError(str(exc)) from exc
    return AnnotationRecord(str(image_path), width, height, tuple(elements))


def parse_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Read a JSON-lines annotation file; errors carry a 1-based line number."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(_record_from_obj(obj))
            except (json.JSONDecodeError, AnnotationError, ValueError, TypeError) as exc:
                raise AnnotationError(f"{path}:{lineno}: {exc}") from exc
    return records


def serialize_annotations(records: Sequence[AnnotationRecord], path: str | Path) -> None:
    """Write records as JSON lines, one record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(_record_to_json(record) + "\n")


def same_elements(a: Layout, b: Layout, tol: float = 0.0) -> bool:
    """Order-insensitive element-set comparison with a coordinate tolerance."""
    ea = sorted(a.real_elements, key=lambda e: (int(e.category),) + e.box.as_tuple())
    eb = sorted(b.real_elements, key=lambda e: (int(e.category),) + e.box.as_tuple())
    if len(ea) != len(eb):
        return False
    for x, y in zip(ea, eb):
        if x.category != y.category:
            return False
        if any(abs(p - q) > tol for p, q in zip(x.box.as_tuple(), y.box.as_tuple())):
            return False
    return True
