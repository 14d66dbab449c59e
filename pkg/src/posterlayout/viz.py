"""Render layout boxes over canvases for visual inspection.

Categories use a fixed palette so renders are comparable across runs:
logo red, text blue, underlay green, embellishment yellow.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import Category, Layout, box_pixel_bounds
from .imaging import save_image

PALETTE: dict[Category, tuple[float, float, float]] = {
    Category.LOGO: (0xE7 / 255, 0x4C / 255, 0x3C / 255),
    Category.TEXT: (0x34 / 255, 0x98 / 255, 0xDB / 255),
    Category.UNDERLAY: (0x2E / 255, 0xCC / 255, 0x71 / 255),
    Category.EMBELLISHMENT: (0xF1 / 255, 0xC4 / 255, 0x0F / 255),
}

FILL_ALPHA = 0.25


def _blend(image: np.ndarray, ys: slice, xs: slice, color: np.ndarray, alpha: float):
    region = image[ys, xs]
    image[ys, xs] = (1 - alpha) * region + alpha * color


def render_layout(image: np.ndarray, layout: Layout,
                  outline_px: int | None = None) -> np.ndarray:
    """Overlay translucent fills and solid outlines for each real element.

    Underlays are drawn first so logos/texts stay visible on top of them.
    """
    h, w = image.shape[:2]
    if image.ndim == 2:
        image = np.stack([image] * 3, axis=-1)
    out = image.astype(np.float32).copy()
    if outline_px is None:
        outline_px = max(1, round(min(w, h) / 100))
    order = sorted(
        layout.real_elements,
        key=lambda e: 0 if e.category == Category.UNDERLAY else 1,
    )
    for el in order:
        color = np.asarray(PALETTE[el.category], dtype=np.float32)
        x0, x1, y0, y1 = box_pixel_bounds(el.box, w, h)
        if x1 <= x0 or y1 <= y0:
            continue
        _blend(out, slice(y0, y1), slice(x0, x1), color, FILL_ALPHA)
        t = min(outline_px, x1 - x0, y1 - y0)
        _blend(out, slice(y0, y0 + t), slice(x0, x1), color, 1.0)
        _blend(out, slice(y1 - t, y1), slice(x0, x1), color, 1.0)
        _blend(out, slice(y0, y1), slice(x0, x0 + t), color, 1.0)
        _blend(out, slice(y0, y1), slice(x1 - t, x1), color, 1.0)
    return np.clip(out, 0.0, 1.0)


def save_render(path: str | Path, image: np.ndarray, layout: Layout) -> Path:
    path = Path(path)
    save_image(path, render_layout(image, layout))
    return path
