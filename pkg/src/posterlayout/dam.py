"""Domain alignment: map posters and clean canvases into a shared 4-channel input.

Training posters carry rendered graphics that clean test canvases lack.  The
pipeline removes that mismatch: graphic regions are masked out and inpainted,
a saliency map is added as a fourth channel, and both paths get the same blur
and morphology so the two distributions end up close.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np
from scipy import ndimage

from .core import Layout, rasterize
from .imaging import (
    binary_open_dilate,
    gaussian_blur,
    grey_dilate,
    load_gray,
    load_image,
    resize_float,
    to_gray,
)

MASK_FILL = 0.5


class InpaintBackend(Protocol):
    def __call__(self, image: np.ndarray, mask: np.ndarray) -> np.ndarray: ...


class SaliencyBackend(Protocol):
    def __call__(self, image: np.ndarray) -> np.ndarray: ...


class InpaintError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiffusionInpainter:
    """Fill holes by repeated 4-neighbor averaging until the fill settles.

    Converges to the harmonic interpolant of the surrounding pixels, which is
    exactly right for smooth backgrounds and acceptable everywhere else.
    """

    tol: float = 1e-4
    max_iters: int = 500

    def __call__(self, image: np.ndarray, mask: np.ndarray) -> np.ndarray:
        hole = np.asarray(mask, dtype=bool)
        if hole.shape != image.shape[:2]:
            raise InpaintError(f"mask shape {hole.shape} vs image {image.shape[:2]}")
        if not hole.any():
            return image.copy()
        flat = image.ndim == 2
        work = image.astype(np.float64, copy=True)
        if flat:
            work = work[:, :, None]
        for _ in range(self.max_iters):
            padded = np.pad(work, ((1, 1), (1, 1), (0, 0)), mode="edge")
            avg = (
                padded[:-2, 1:-1]
                + padded[2:, 1:-1]
                + padded[1:-1, :-2]
                + padded[1:-1, 2:]
            ) / 4.0
            delta = float(np.abs(avg[hole] - work[hole]).max())
            work[hole] = avg[hole]
            if delta < self.tol:
                break
        # write only hole pixels so everything else stays bit-identical
        out = image.copy()
        if flat:
            out[hole] = work[:, :, 0][hole].astype(image.dtype)
        else:
            out[hole] = work[hole].astype(image.dtype)
        return out


@dataclass(frozen=True)
class SpectralResidualSaliency:
    """Spectral residual saliency: what sticks out of the log-amplitude spectrum.

    Runs at a small working width, where the method was designed to operate,
    then upsamples back to the input size and min-max normalizes.
    """

    work_width: int = 64
    residual_filter: int = 3
    smooth_sigma: float = 2.5
    smooth_ksize: int = 9

    def __call__(self, image: np.ndarray) -> np.ndarray:
        gray = to_gray(image) if image.ndim == 3 else image
        h, w = gray.shape
        if float(gray.max()) - float(gray.min()) < 1e-9:
            return np.zeros((h, w), dtype=np.float32)
        small_h = max(8, int(round(h * self.work_width / w)))
        small = resize_float(gray, small_h, self.work_width)

        spectrum = np.fft.fft2(small)
        # log1p keeps near-null bins bounded; with a bare log they explode
        # after exp() and bury the object under interference fringes
        log_amp = np.log1p(np.abs(spectrum))
        phase = np.angle(spectrum)
        residual = log_amp - ndimage.uniform_filter(log_amp, size=self.residual_filter, mode="nearest")
        sal = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
        sal = gaussian_blur(sal.astype(np.float32), self.smooth_sigma, self.smooth_ksize)

        sal = resize_float(sal, h, w)
        lo, hi = float(sal.min()), float(sal.max())
        if hi - lo < 1e-12:
            return np.zeros((h, w), dtype=np.float32)
        return ((sal - lo) / (hi - lo)).astype(np.float32)


@dataclass(frozen=True)
class PostParams:
    """Shared post-filtering knobs for both pipeline paths."""

    blur_sigma: float = 1.5
    blur_ksize: int = 5
    sal_threshold: float = 0.5
    morph_size: int = 3


@dataclass(frozen=True)
class DamBackends:
    inpainter: InpaintBackend = field(default_factory=DiffusionInpainter)
    saliency: SaliencyBackend = field(default_factory=SpectralResidualSaliency)


@dataclass(frozen=True)
class DamOutput:
    """Aligned model input: 3 processed RGB channels plus 1 saliency channel."""

    data: np.ndarray  # (4, H, W) float32

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != 4:
            raise ValueError(f"expected (4, H, W), got {self.data.shape}")

    @property
    def rgb(self) -> np.ndarray:
        return self.data[:3]

    @property
    def saliency(self) -> np.ndarray:
        return self.data[3]

    @property
    def size(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


def mask_poster(poster: np.ndarray, layout: Layout) -> tuple[np.ndarray, np.ndarray]:
    """Gray out every pixel covered by a real element; also return that mask."""
    h, w = poster.shape[:2]
    mask = rasterize(layout, w, h)
    masked = poster.copy()
    masked[mask] = MASK_FILL
    return masked, mask


def inpaint(
    masked: np.ndarray, mask: np.ndarray, backend: Optional[InpaintBackend] = None
) -> np.ndarray:
    backend = backend or DiffusionInpainter()
    return backend(masked, mask)


def detect_saliency(image: np.ndarray, backend: Optional[SaliencyBackend] = None) -> np.ndarray:
    backend = backend or SpectralResidualSaliency()
    return backend(image)


def postprocess(
    inp: np.ndarray, sal: np.ndarray, params: PostParams = PostParams()
) -> tuple[np.ndarray, np.ndarray]:
    """Blur the RGB image; clean the saliency map with opening then dilation.

    The morphology runs on the thresholded support, but output values stay
    continuous (grey dilation restricted to that support) so magnitude
    information survives for downstream consumers.
    """
    blurred = gaussian_blur(inp, params.blur_sigma, params.blur_ksize)
    support = binary_open_dilate(sal >= params.sal_threshold, params.morph_size)
    morphed = np.where(support, grey_dilate(sal, params.morph_size), 0.0).astype(np.float32)
    return blurred, morphed


def _sidecar(image_path: Optional[Path], kind: str) -> Optional[Path]:
    if image_path is None:
        return None
    p = Path(image_path)
    candidate = p.parent / f"{p.stem}.{kind}.png"
    return candidate if candidate.is_file() else None


def _pack(rgb: np.ndarray, sal: np.ndarray) -> DamOutput:
    if rgb.ndim == 2:
        rgb = np.stack([rgb] * 3, axis=-1)
    data = np.concatenate([rgb.transpose(2, 0, 1), sal[None]], axis=0)
    return DamOutput(np.ascontiguousarray(data, dtype=np.float32))


def align_train(
    poster: np.ndarray,
    layout: Layout,
    backends: Optional[DamBackends] = None,
    params: PostParams = PostParams(),
    image_path: Optional[Path] = None,
) -> DamOutput:
    """Poster path: mask graphics, inpaint, detect saliency, post-filter, pack.

    Sidecar files `<stem>.inp.png` / `<stem>.sal.png` next to image_path take
    priority over the corresponding backend when present.
    """
    backends = backends or DamBackends()
    inp_side = _sidecar(image_path, "inp")
    if inp_side is not None:
        inped = load_image(inp_side)
    else:
        masked, mask = mask_poster(poster, layout)
        inped = inpaint(masked, mask, backends.inpainter)
    sal_side = _sidecar(image_path, "sal")
    sal = load_gray(sal_side) if sal_side is not None else detect_saliency(inped, backends.saliency)
    blurred, morphed = postprocess(inped, sal, params)
    return _pack(blurred, morphed)


def align_test(
    image: np.ndarray,
    backends: Optional[DamBackends] = None,
    params: PostParams = PostParams(),
    image_path: Optional[Path] = None,
) -> DamOutput:
    """Clean-canvas path: no graphics to remove, so saliency runs directly."""
    backends = backends or DamBackends()
    sal_side = _sidecar(image_path, "sal")
    sal = load_gray(sal_side) if sal_side is not None else detect_saliency(image, backends.saliency)
    blurred, morphed = postprocess(image, sal, params)
    return _pack(blurred, morphed)


def cache_root(default: Path) -> Path:
    """Directory for derived backend artifacts, overridable via CGL_CACHE."""
    env = os.environ.get("CGL_CACHE")
    return Path(env) if env else default
