"""Layout evaluation: three composition-aware and four graphic measures.

Per-layout values return None when a layout is out of scope for a measure
(no text without a panel, no panels, fewer than two eligible elements); the
corpus report averages the rest and counts the skips, so empty layouts cannot
win by vacuity. Geometry is computed on normalized rectangle arithmetic;
pixel work (gradients, attention sums, feature distances) uses the image's
own grid.
"""

from __future__ import annotations

import csv
import json
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
import torch

from .core import (
    Category,
    Element,
    Layout,
    parse_annotations,
    rasterize,
    rect_intersection_area,
)
from .dam import SpectralResidualSaliency
from .imaging import load_gray, load_image, sobel_magnitude, to_gray

MASK_GRAY = 0.5
LOGITS_SUFFIX = ".logits.bin"
MASKED_LOGITS_SUFFIX = ".masked.logits.bin"

CONVENTIONS = {
    "r_com": "mean Sobel magnitude under text elements that touch no underlay",
    "r_sub": "attention mass under the union of real elements / total mass",
    "r_shm": "L2 logit distance, layout union masked to 0.5 gray",
    "r_ove": "mean over ordered logo/text pairs of intersection / first area",
    "r_ali": "per element: min gap over others and six edge/center axes; "
             "score -ln(1-gap), averaged",
    "r_und": "per underlay: max intersection/element-area over real "
             "non-underlay elements, averaged",
}


class MetricError(ValueError):
    """Raised for malformed metric inputs (size mismatches, empty corpora)."""


class FeatureExtractor(Protocol):
    def __call__(self, image: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class MetricFlags:
    normalize_sub: bool = True
    ove_iou: bool = False


@dataclass
class MetricCount:
    evaluated: int = 0
    skipped: int = 0


@dataclass
class MetricReport:
    r_occ: float
    r_com: Optional[float]
    r_sub: Optional[float]
    r_shm: Optional[float]
    r_ove: Optional[float]
    r_ali: Optional[float]
    r_und: Optional[float]
    counts: dict[str, MetricCount] = field(default_factory=dict)
    n_layouts: int = 0
    conventions: dict[str, str] = field(default_factory=lambda: dict(CONVENTIONS))

    def to_dict(self) -> dict:
        return {
            "n_layouts": self.n_layouts,
            "r_occ": self.r_occ,
            "r_com": self.r_com,
            "r_sub": self.r_sub,
            "r_shm": self.r_shm,
            "r_ove": self.r_ove,
            "r_ali": self.r_ali,
            "r_und": self.r_und,
            "counts": {
                name: {"evaluated": c.evaluated, "skipped": c.skipped}
                for name, c in self.counts.items()
            },
            "conventions": self.conventions,
        }


def r_occ(layouts: Sequence[Layout]) -> float:
    """Percentage of layouts holding at least one real element."""
    if not layouts:
        raise MetricError("r_occ needs at least one layout")
    return 100.0 * sum(1 for lay in layouts if lay.n >= 1) / len(layouts)


def _subset_mask(layout: Layout, elements: Sequence[Element], h: int, w: int) -> np.ndarray:
    return rasterize(Layout(tuple(elements), layout.canvas_w, layout.canvas_h), w, h)


def text_only_elements(layout: Layout) -> list[Element]:
    """Text elements that intersect no underlay in the same layout."""
    underlays = layout.by_category(Category.UNDERLAY)
    out = []
    for el in layout.by_category(Category.TEXT):
        if all(rect_intersection_area(el.box, u.box) == 0.0 for u in underlays):
            out.append(el)
    return out


def r_com(image: np.ndarray, layout: Layout) -> Optional[float]:
    """Mean gradient magnitude under text that has no underlay behind it."""
    h, w = image.shape[:2]
    if (layout.canvas_w, layout.canvas_h) != (w, h):
        raise MetricError(
            f"image {w}x{h} does not match layout canvas "
            f"{layout.canvas_w}x{layout.canvas_h}"
        )
    texts = text_only_elements(layout)
    if not texts:
        return None
    mask = _subset_mask(layout, texts, h, w)
    if not mask.any():
        return None
    grad = sobel_magnitude(to_gray(image))
    return float(grad[mask].mean())


def r_sub(attention: np.ndarray, layout: Layout,
          flags: MetricFlags = MetricFlags()) -> Optional[float]:
    """Attention mass captured by the layout's union of real elements."""
    h, w = attention.shape[:2]
    if (layout.canvas_w, layout.canvas_h) != (w, h):
        raise MetricError("attention map does not match layout canvas")
    total = float(attention.sum())
    if total <= 0.0:
        warnings.warn("all-zero attention map; layout skipped for r_sub")
        return None
    if layout.n == 0:
        return 0.0
    mask = rasterize(layout, w, h)
    covered = float(attention[mask].sum())
    return covered / total if flags.normalize_sub else covered


def masked_with_gray(image: np.ndarray, layout: Layout) -> np.ndarray:
    h, w = image.shape[:2]
    mask = rasterize(layout, w, h)
    out = image.copy()
    out[mask] = MASK_GRAY
    return out


def r_shm(salient_image: np.ndarray, layout: Layout,
          extractor: FeatureExtractor,
          precomputed: Optional[tuple[np.ndarray, np.ndarray]] = None) -> float:
    """Feature distance between the salient image and its layout-masked copy."""
    if precomputed is not None:
        v1, v2 = precomputed
    else:
        v1 = extractor(salient_image)
        v2 = extractor(masked_with_gray(salient_image, layout))
    return float(np.linalg.norm(np.asarray(v1, float) - np.asarray(v2, float)))


def _eligible(layout: Layout) -> list[Element]:
    els = layout.by_category(Category.LOGO, Category.TEXT)
    return [e for e in els if e.box.area > 0.0]


def r_ove(layout: Layout, flags: MetricFlags = MetricFlags()) -> Optional[float]:
    """Mean pairwise overlap among logos and texts."""
    els = _eligible(layout)
    if len(els) < 2:
        return None
    terms = []
    for i, a in enumerate(els):
        for j, b in enumerate(els):
            if i == j:
                continue
            inter = rect_intersection_area(a.box, b.box)
            if flags.ove_iou:
                union = a.box.area + b.box.area - inter
                terms.append(inter / union if union > 0 else 0.0)
            else:
                terms.append(inter / a.box.area)
    return float(np.mean(terms))


def _axis_coords(el: Element) -> tuple[float, float, float, float, float, float]:
    b = el.box
    return (b.x0, b.cx, b.x1, b.y0, b.cy, b.y1)


def r_ali(layout: Layout) -> Optional[float]:
    """Alignment score: tight edge/center agreement scores near zero."""
    els = _eligible(layout)
    if len(els) < 2:
        return None
    coords = [_axis_coords(e) for e in els]
    scores = []
    for i, ci in enumerate(coords):
        gap = min(
            abs(ci[axis] - cj[axis])
            for j, cj in enumerate(coords)
            if j != i
            for axis in range(6)
        )
        gap = min(max(gap, 0.0), 1.0 - 1e-8)
        scores.append(-math.log(1.0 - gap))
    return float(np.mean(scores))


def r_und(layout: Layout) -> Optional[float]:
    """How fully underlays wrap the elements they intersect."""
    underlays = layout.by_category(Category.UNDERLAY)
    if not underlays:
        return None
    others = [
        e for e in layout.real_elements
        if e.category != Category.UNDERLAY and e.box.area > 0.0
    ]
    values = []
    for u in underlays:
        ratios = [
            rect_intersection_area(u.box, e.box) / e.box.area
            for e in others
            if rect_intersection_area(u.box, e.box) > 0.0
        ]
        values.append(max(ratios) if ratios else 0.0)
    return float(np.mean(values))


class RandomFeatureExtractor:
    """Fixed-seed random-projection CNN; relative distances stay meaningful."""

    def __init__(self, seed: int = 0, out_dim: int = 64):
        self.seed = seed
        self.out_dim = out_dim
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.net = torch.nn.Sequential(
                torch.nn.Conv2d(3, 8, 3, stride=2, padding=1),
                torch.nn.ReLU(),
                torch.nn.Conv2d(8, 16, 3, stride=2, padding=1),
                torch.nn.ReLU(),
                torch.nn.Conv2d(16, out_dim // 4, 3, stride=2, padding=1),
                torch.nn.ReLU(),
                torch.nn.AdaptiveAvgPool2d(2),
            )
        self.net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)

    def __call__(self, image: np.ndarray) -> np.ndarray:
        arr = np.asarray(image, dtype=np.float32)
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        x = torch.from_numpy(arr).permute(2, 0, 1)[None]
        with torch.no_grad():
            feats = self.net(x)
        return feats.flatten().numpy()


class BackboneExtractor:
    """Pools the trained generator backbone's deepest features into a vector."""

    def __init__(self, generator):
        self.backbone = generator.backbone
        self.backbone.eval()

    def __call__(self, image: np.ndarray) -> np.ndarray:
        arr = np.asarray(image, dtype=np.float32)
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        rgb = torch.from_numpy(arr).permute(2, 0, 1)
        x = torch.cat([rgb, torch.zeros_like(rgb[:1])], dim=0)[None]
        with torch.no_grad():
            _, f5 = self.backbone(x)
        return f5.mean(dim=(2, 3)).flatten().numpy()


def write_logits(path: str | Path, values: np.ndarray) -> Path:
    """Flat little-endian binary: uint32 count, then that many float32s."""
    path = Path(path)
    flat = np.asarray(values, dtype="<f4").ravel()
    path.write_bytes(struct.pack("<I", flat.size) + flat.tobytes())
    return path


def read_logits(path: str | Path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 4:
        raise MetricError(f"logits file too short: {path}")
    (n,) = struct.unpack("<I", blob[:4])
    if len(blob) != 4 + 4 * n:
        raise MetricError(
            f"logits file {path} declares {n} values but holds "
            f"{(len(blob) - 4) // 4}"
        )
    return np.frombuffer(blob[4:], dtype="<f4").astype(np.float32)


def salient_image(image: np.ndarray, attention: np.ndarray) -> np.ndarray:
    return image * attention[..., None]


def evaluate_corpus(
    images: Sequence[np.ndarray],
    attentions: Sequence[np.ndarray],
    layouts: Sequence[Layout],
    extractor: Optional[FeatureExtractor] = None,
    flags: MetricFlags = MetricFlags(),
    logit_pairs: Optional[Sequence[Optional[tuple[np.ndarray, np.ndarray]]]] = None,
) -> MetricReport:
    """Average per-layout metrics over a corpus, counting skips per measure."""
    if not (len(images) == len(attentions) == len(layouts)):
        raise MetricError(
            f"corpus lists disagree: {len(images)} images, "
            f"{len(attentions)} attention maps, {len(layouts)} layouts"
        )
    if logit_pairs is not None and len(logit_pairs) != len(layouts):
        raise MetricError("logit pair list length mismatch")
    if not layouts:
        raise MetricError("empty corpus")
    extractor = extractor or RandomFeatureExtractor()

    per_metric: dict[str, list[float]] = {name: [] for name in CONVENTIONS}
    counts = {name: MetricCount() for name in CONVENTIONS}

    def record(name: str, value: Optional[float]):
        if value is None:
            counts[name].skipped += 1
        else:
            counts[name].evaluated += 1
            per_metric[name].append(value)

    for i, (image, attention, layout) in enumerate(zip(images, attentions, layouts)):
        record("r_com", r_com(image, layout))
        record("r_sub", r_sub(attention, layout, flags))
        pre = logit_pairs[i] if logit_pairs is not None else None
        record("r_shm", r_shm(salient_image(image, attention), layout, extractor, pre))
        record("r_ove", r_ove(layout, flags))
        record("r_ali", r_ali(layout))
        record("r_und", r_und(layout))

    def mean_of(name: str) -> Optional[float]:
        vals = per_metric[name]
        return float(np.mean(vals)) if vals else None

    return MetricReport(
        r_occ=r_occ(layouts),
        r_com=mean_of("r_com"),
        r_sub=mean_of("r_sub"),
        r_shm=mean_of("r_shm"),
        r_ove=mean_of("r_ove"),
        r_ali=mean_of("r_ali"),
        r_und=mean_of("r_und"),
        counts=counts,
        n_layouts=len(layouts),
    )


def _attention_for(image_path: Path, image: np.ndarray,
                   saliency: SpectralResidualSaliency,
                   attention_dir: Optional[Path] = None) -> np.ndarray:
    stem = image_path.name
    for suffix in (".png", ".jpg", ".jpeg"):
        if stem.lower().endswith(suffix):
            stem = stem[: -len(suffix)]
            break
    sidecar = (attention_dir or image_path.parent) / f"{stem}.attn.png"
    if sidecar.is_file():
        attn = load_gray(sidecar)
        if attn.shape != image.shape[:2]:
            raise MetricError(
                f"attention sidecar {sidecar} is {attn.shape}, image is "
                f"{image.shape[:2]}"
            )
        return attn
    return saliency(image)


def _logits_for(image_path: Path) -> Optional[tuple[np.ndarray, np.ndarray]]:
    stem = image_path.with_suffix("")
    plain = Path(str(stem) + LOGITS_SUFFIX)
    masked = Path(str(stem) + MASKED_LOGITS_SUFFIX)
    if plain.is_file() and masked.is_file():
        return read_logits(plain), read_logits(masked)
    return None


def evaluate(
    annotations_path: str | Path,
    image_dir: str | Path,
    extractor: Optional[FeatureExtractor] = None,
    flags: MetricFlags = MetricFlags(),
    attention_dir: Optional[str | Path] = None,
) -> MetricReport:
    """Evaluate a JSONL of layouts against the images they annotate.

    `<stem>.attn.png` beside an image (or under attention_dir) supplies its
    attention map (otherwise a saliency proxy is computed); `<stem>.logits.bin`
    plus `<stem>.masked.logits.bin` supply externally computed feature vectors.
    """
    image_dir = Path(image_dir)
    attention_dir = Path(attention_dir) if attention_dir is not None else None
    records = parse_annotations(annotations_path)
    if not records:
        raise MetricError(f"no layouts in {annotations_path}")
    saliency = SpectralResidualSaliency()
    images, attentions, layouts, logit_pairs = [], [], [], []
    for rec in records:
        path = image_dir / rec.image_path
        try:
            image = load_image(path)
        except (OSError, ValueError) as exc:
            raise MetricError(f"cannot read image {path}: {exc}") from exc
        if image.shape[:2] != (rec.canvas_h, rec.canvas_w):
            raise MetricError(
                f"{path}: image is {image.shape[1]}x{image.shape[0]}, "
                f"annotation says {rec.canvas_w}x{rec.canvas_h}"
            )
        images.append(image)
        attentions.append(_attention_for(path, image, saliency, attention_dir))
        layouts.append(rec.to_layout())
        logit_pairs.append(_logits_for(path))
    return evaluate_corpus(images, attentions, layouts, extractor, flags, logit_pairs)


def write_report(report: MetricReport, json_path: Optional[Path] = None,
                 csv_path: Optional[Path] = None) -> None:
    if json_path is not None:
        Path(json_path).write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value", "evaluated", "skipped"])
            writer.writerow(["r_occ", f"{report.r_occ:.6f}", report.n_layouts, 0])
            for name in ("r_com", "r_sub", "r_shm", "r_ove", "r_ali", "r_und"):
                value = getattr(report, name)
                count = report.counts[name]
                writer.writerow([
                    name,
                    "" if value is None else f"{value:.6f}",
                    count.evaluated,
                    count.skipped,
                ])
