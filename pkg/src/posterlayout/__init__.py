"""Composition-aware poster layout generation, metrics, and synthetic data."""

from .core import (
    AnnotationError,
    AnnotationRecord,
    BBox,
    Category,
    Element,
    Layout,
    LayoutError,
    encode_onehot,
    normalize_box,
    pad,
    parse_annotations,
    rasterize,
    rect_intersection_area,
    serialize_annotations,
    unpad,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "AnnotationRecord",
    "BBox",
    "Category",
    "Element",
    "Layout",
    "LayoutError",
    "encode_onehot",
    "normalize_box",
    "pad",
    "parse_annotations",
    "rasterize",
    "rect_intersection_area",
    "serialize_annotations",
    "unpad",
    "__version__",
]
