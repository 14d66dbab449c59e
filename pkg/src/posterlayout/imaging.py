"""Shared image helpers: IO, color, gradients, blur, resize, morphology.

Images are float32 arrays in [0, 1]: RGB as (H, W, 3), single-channel maps
as (H, W).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def load_image(path: str | Path) -> np.ndarray:
    """Load a PNG/JPEG as float32 RGB (H, W, 3) in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return arr


def decode_image(data: bytes) -> np.ndarray:
    """Decode PNG/JPEG bytes the same way load_image reads files."""
    import io

    with Image.open(io.BytesIO(data)) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return arr


def load_gray(path: str | Path) -> np.ndarray:
    """Load a single-channel image as float32 (H, W) in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    return arr


def save_image(path: str | Path, arr: np.ndarray) -> None:
    """Save a float [0, 1] array ((H, W) or (H, W, 3)) as an 8-bit image."""
    data = np.clip(np.asarray(arr), 0.0, 1.0)
    img = Image.fromarray((data * 255.0 + 0.5).astype(np.uint8))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    img.save(path)


def to_gray(rgb: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an (H, W, 3) image."""
    return rgb @ LUMA_WEIGHTS


def sobel_magnitude(gray: np.ndarray) -> np.ndarray:
    """Per-pixel root-sum-square of 3x3 Sobel x/y responses."""
    gx = ndimage.sobel(gray.astype(np.float64), axis=1, mode="reflect")
    gy = ndimage.sobel(gray.astype(np.float64), axis=0, mode="reflect")
    return np.sqrt(gx * gx + gy * gy)


def gaussian_blur(img: np.ndarray, sigma: float, ksize: int = 5) -> np.ndarray:
    """Separable Gaussian blur with an explicit (ksize x ksize) kernel."""
    radius = ksize // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    out = img.astype(np.float64)
    axes = (0, 1)
    for axis in axes:
        out = ndimage.convolve1d(out, kernel, axis=axis, mode="nearest")
    return out.astype(np.float32)


def resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of an (H, W) or (H, W, 3) float array."""
    img = Image.fromarray((np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8))
    resized = img.resize((out_w, out_h), Image.BILINEAR)
    return np.asarray(resized, dtype=np.float32) / 255.0


def resize_float(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize without 8-bit quantization, via ndimage.zoom."""
    zoom = (out_h / arr.shape[0], out_w / arr.shape[1]) + (1,) * (arr.ndim - 2)
    out = ndimage.zoom(arr.astype(np.float64), zoom, order=1, mode="nearest", grid_mode=True)
    return out.astype(np.float32)


def binary_open_dilate(mask: np.ndarray, size: int = 3) -> np.ndarray:
    """Morphological opening then dilation with a square structuring element."""
    struct = np.ones((size, size), dtype=bool)
    opened = ndimage.binary_opening(mask, structure=struct)
    return ndimage.binary_dilation(opened, structure=struct)


def grey_dilate(arr: np.ndarray, size: int = 3) -> np.ndarray:
    """Grayscale dilation (local max) with a square window."""
    return ndimage.grey_dilation(arr, size=(size, size), mode="nearest")


def integral_image(arr: np.ndarray) -> np.ndarray:
    """Summed-area table with a zero border row/column."""
    out = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(arr, axis=0), axis=1, out=out[1:, 1:])
    return out


def box_sum(integral: np.ndarray, y0: int, y1: int, x0: int, x1: int) -> float:
    """Sum of the source array over rows [y0, y1) and columns [x0, x1)."""
    return float(
        integral[y1, x1] - integral[y0, x1] - integral[y1, x0] + integral[y0, x0]
    )
