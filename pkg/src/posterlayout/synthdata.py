"""Procedural poster corpus: scenes, rule-based layouts, rendered posters.

Each record is a quadruple (clean canvas, ground-truth saliency, designer-rule
layout, rendered poster).  The rules deliberately encode the same aesthetics
the evaluation measures: text on flat regions, nothing on the subject,
underlays wherever the background is busy.  That makes "learned model
approaches the rule oracle and beats random placement" a meaningful yardstick
without any real-world data.
"""

from __future__ import annotations

import json
from pathlib import Path
from dataclasses import dataclass

import numpy as np

from .core import (
    AnnotationRecord,
    BBox,
    Category,
    Element,
    Layout,
    rect_intersection_area,
    serialize_annotations,
)
from .imaging import (
    box_sum,
    gaussian_blur,
    integral_image,
    save_image,
    sobel_magnitude,
    to_gray,
)

DATASET_VERSION = 1

FLAT_GRAD_THRESH = 0.12
UNDERLAY_GRAD_THRESH = 0.045
UNDERLAY_PAD = 0.018
PLACEMENT_GAP = 0.012
TOP_BAND = 0.16


@dataclass(frozen=True)
class Scene:
    """A clean canvas plus the ground truth a designer would reason from."""

    clean: np.ndarray  # (H, W, 3) float32
    subject_box: BBox
    flat: np.ndarray  # (H, W) bool, low-gradient pixels outside the subject
    saliency: np.ndarray  # (H, W) float32

    @property
    def canvas(self) -> tuple[int, int]:
        return self.clean.shape[1], self.clean.shape[0]


def _linear_gradient(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    c0 = rng.uniform(0.25, 0.9, size=3)
    c1 = np.clip(c0 + rng.uniform(-0.45, 0.45, size=3), 0.05, 0.98)
    theta = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:h, 0:w]
    t = (np.cos(theta) * xx / max(w - 1, 1)) + (np.sin(theta) * yy / max(h - 1, 1))
    t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
    return (c0[None, None] + t[:, :, None] * (c1 - c0)[None, None]).astype(np.float32)


def _stripe_texture(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """High-contrast periodic texture; period stays >= 6 px so blur can't erase it."""
    period = int(rng.integers(6, 13))
    a = rng.uniform(0.0, 0.35, size=3)
    b = rng.uniform(0.6, 1.0, size=3)
    yy, xx = np.mgrid[0:h, 0:w]
    kind = rng.integers(0, 3)
    if kind == 0:
        phase = (xx // (period // 2 + 1)) % 2
    elif kind == 1:
        phase = (yy // (period // 2 + 1)) % 2
    else:
        phase = ((xx // (period // 2 + 1)) + (yy // (period // 2 + 1))) % 2
    tex = np.where(phase[:, :, None] == 0, a[None, None], b[None, None])
    return tex.astype(np.float32)


def _shape_mask(h: int, w: int, box: BBox, kind: str) -> np.ndarray:
    x0, x1 = box.x0 * w, box.x1 * w
    y0, y1 = box.y0 * h, box.y1 * h
    yy, xx = np.mgrid[0:h, 0:w]
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    rx, ry = max((x1 - x0) / 2, 1), max((y1 - y0) / 2, 1)
    if kind == "ellipse":
        return ((xx + 0.5 - cx) / rx) ** 2 + ((yy + 0.5 - cy) / ry) ** 2 <= 1.0
    inside = (xx + 0.5 >= x0) & (xx + 0.5 <= x1) & (yy + 0.5 >= y0) & (yy + 0.5 <= y1)
    r = 0.25 * min(rx, ry)
    dx = np.maximum(np.abs(xx + 0.5 - cx) - (rx - r), 0)
    dy = np.maximum(np.abs(yy + 0.5 - cy) - (ry - r), 0)
    return inside & (dx * dx + dy * dy <= r * r)


def gen_scene(seed: int, canvas_w: int = 240, canvas_h: int = 350) -> Scene:
    """Deterministic scene: gradient background, textured subject, optional clutter."""
    rng = np.random.default_rng([int(seed), 0])
    h, w = canvas_h, canvas_w
    clean = _linear_gradient(h, w, rng)
    noise_sigma = rng.uniform(0.004, 0.007)

    # half the scenes get a soft wave pattern: busy enough that text there
    # warrants an underlay, calm enough to stay under the flat threshold
    if rng.random() < 0.5:
        amp = rng.uniform(0.04, 0.055)
        lam = rng.uniform(18, 26)
        theta_w = rng.uniform(0, np.pi)
        phase = rng.uniform(0, 2 * np.pi)
        yy, xx = np.mgrid[0:h, 0:w]
        wave = amp * np.sin(2 * np.pi * (np.cos(theta_w) * xx + np.sin(theta_w) * yy) / lam + phase)
        clean = np.clip(clean + wave[:, :, None], 0.02, 0.98).astype(np.float32)

    # subject: textured ellipse or rounded rectangle, biased below center
    sw = rng.uniform(0.32, 0.62)
    sh = rng.uniform(0.28, 0.55)
    cx = rng.uniform(sw / 2 + 0.03, 1 - sw / 2 - 0.03)
    cy = rng.uniform(max(sh / 2 + 0.03, 0.38), min(1 - sh / 2 - 0.03, 0.78))
    subject_box = BBox(cx, cy, sw, sh)
    kind = "ellipse" if rng.random() < 0.5 else "round_rect"
    subject_mask = _shape_mask(h, w, subject_box, kind)
    tex = _stripe_texture(h, w, rng)
    clean = np.where(subject_mask[:, :, None], tex, clean)

    # clutter: busy patches a designer would route text around
    n_clutter = int(rng.integers(0, 4))
    subj_infl = _inflate(subject_box, 0.03)
    for _ in range(n_clutter):
        for _attempt in range(30):
            pw = rng.uniform(0.08, 0.2)
            ph = rng.uniform(0.06, 0.16)
            px = rng.uniform(pw / 2 + 0.01, 1 - pw / 2 - 0.01)
            py = rng.uniform(ph / 2 + 0.01, 1 - ph / 2 - 0.01)
            patch = BBox(px, py, pw, ph)
            if rect_intersection_area(patch, subj_infl) == 0.0:
                ptex = _stripe_texture(h, w, rng)
                pmask = _shape_mask(h, w, patch, "round_rect")
                clean = np.where(pmask[:, :, None], ptex, clean)
                break

    clean = np.clip(clean + rng.normal(0, noise_sigma, clean.shape), 0, 1).astype(np.float32)

    sal = gaussian_blur(subject_mask.astype(np.float32), sigma=max(2.0, 0.015 * w), ksize=9)
    peak = float(sal.max())
    if peak > 0:
        sal = (sal / peak).astype(np.float32)

    grad = sobel_magnitude(to_gray(clean))
    flat = grad < FLAT_GRAD_THRESH
    sx0, sx1, sy0, sy1 = _pixel_bounds(subj_infl, w, h)
    flat[sy0:sy1, sx0:sx1] = False

    area = subject_box.area
    assert 0.05 <= area <= 0.5, f"subject bbox area {area:.3f} out of range"
    return Scene(clean=clean, subject_box=subject_box, flat=flat, saliency=sal)


def _inflate(box: BBox, pad: float) -> BBox:
    x0 = max(0.0, box.x0 - pad)
    y0 = max(0.0, box.y0 - pad)
    x1 = min(1.0, box.x1 + pad)
    y1 = min(1.0, box.y1 + pad)
    return BBox((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)


def _pixel_bounds(box: BBox, w: int, h: int) -> tuple[int, int, int, int]:
    x0 = max(0, int(np.floor(box.x0 * w)))
    x1 = min(w, int(np.ceil(box.x1 * w)))
    y0 = max(0, int(np.floor(box.y0 * h)))
    y1 = min(h, int(np.ceil(box.y1 * h)))
    return x0, x1, y0, y1


def _region_mean(integral: np.ndarray, box: BBox, w: int, h: int) -> float:
    x0, x1, y0, y1 = _pixel_bounds(box, w, h)
    n = max((x1 - x0) * (y1 - y0), 1)
    return box_sum(integral, y0, y1, x0, x1) / n


def gen_layout(scene: Scene, rng: np.random.Generator, max_attempts: int = 200) -> Layout:
    """Rule-based designer stand-in.

    One logo in the top band, 2-4 texts on the flattest free rectangles, an
    underlay under any text sitting on busy background, up to two small
    embellishments in quiet corners.  Gives up on an element rather than
    forcing an infeasible placement.
    """
    w, h = scene.canvas
    flat_int = integral_image(scene.flat.astype(np.float64))
    grad_int = integral_image(sobel_magnitude(to_gray(scene.clean)))
    sal_int = integral_image(scene.saliency.astype(np.float64))
    keep_out = _inflate(scene.subject_box, UNDERLAY_PAD + PLACEMENT_GAP)

    placed: list[Element] = []

    def clashes(box: BBox) -> bool:
        if rect_intersection_area(box, keep_out) > 0:
            return True
        gapped = _inflate(box, PLACEMENT_GAP)
        return any(rect_intersection_area(gapped, e.box) > 0 for e in placed)

    # logo
    for _ in range(max_attempts):
        bw = rng.uniform(0.16, 0.3)
        bh = rng.uniform(0.05, 0.09)
        cx = rng.uniform(bw / 2 + 0.02, 1 - bw / 2 - 0.02)
        cy = rng.uniform(bh / 2 + 0.015, TOP_BAND - bh / 2)
        box = BBox(cx, cy, bw, bh)
        if not clashes(box):
            placed.append(Element(Category.LOGO, box))
            break

    # texts: best flat coverage among sampled candidates, greedy per slot
    texts: list[Element] = []
    n_text = int(rng.integers(2, 5))
    for _ in range(n_text):
        best: BBox | None = None
        best_cover = 0.0
        for _ in range(max_attempts // 4):
            bw = rng.uniform(0.22, 0.5)
            bh = rng.uniform(0.05, 0.1)
            cx = rng.uniform(bw / 2 + 0.02, 1 - bw / 2 - 0.02)
            cy = rng.uniform(TOP_BAND + bh / 2, 1 - bh / 2 - 0.02)
            box = BBox(cx, cy, bw, bh)
            if clashes(box):
                continue
            cover = _region_mean(flat_int, box, w, h)
            if cover > best_cover:
                best, best_cover = box, cover
        if best is None:
            continue
        el = Element(Category.TEXT, best)
        placed.append(el)
        texts.append(el)

    # underlays: busy background under a text earns it a backing panel
    underlays: list[Element] = []
    for te in texts:
        if _region_mean(grad_int, te.box, w, h) <= UNDERLAY_GRAD_THRESH:
            continue
        panel = _inflate(te.box, UNDERLAY_PAD)
        gapped = _inflate(panel, PLACEMENT_GAP)
        blocked = rect_intersection_area(panel, keep_out) > 0 or any(
            e is not te and rect_intersection_area(gapped, e.box) > 0 for e in placed
        )
        if not blocked:
            ue = Element(Category.UNDERLAY, panel)
            placed.append(ue)
            underlays.append(ue)

    # embellishments: small marks in the two quietest corners
    corners = [
        BBox(0.11, 0.11, 0.22, 0.22),
        BBox(0.89, 0.11, 0.22, 0.22),
        BBox(0.11, 0.89, 0.22, 0.22),
        BBox(0.89, 0.89, 0.22, 0.22),
    ]
    corners.sort(key=lambda c: _region_mean(sal_int, c, w, h))
    n_emb = int(rng.integers(0, 3))
    for corner, _ in zip(corners, range(n_emb)):
        for _ in range(max_attempts // 4):
            bw = rng.uniform(0.04, 0.09)
            bh = rng.uniform(0.04, 0.09)
            cx = np.clip(corner.cx + rng.uniform(-0.06, 0.06), bw / 2 + 0.01, 1 - bw / 2 - 0.01)
            cy = np.clip(corner.cy + rng.uniform(-0.06, 0.06), bh / 2 + 0.01, 1 - bh / 2 - 0.01)
            box = BBox(float(cx), float(cy), bw, bh)
            if not clashes(box):
                placed.append(Element(Category.EMBELLISHMENT, box))
                break

    return Layout(tuple(placed), w, h)


def _fill_color(local_mean_luma: float, rng: np.random.Generator) -> np.ndarray:
    """Color guaranteed to contrast with the region it covers."""
    if local_mean_luma > 0.5:
        c = rng.uniform(0.0, 0.25, size=3)
    else:
        c = rng.uniform(0.72, 1.0, size=3)
    return c.astype(np.float32)


def render_poster(scene: Scene, layout: Layout, rng: np.random.Generator) -> np.ndarray:
    """Draw the layout onto the clean canvas; pixels outside boxes stay put."""
    w, h = scene.canvas
    poster = scene.clean.copy()
    luma = to_gray(scene.clean)
    luma_int = integral_image(luma)

    def region(box: BBox) -> tuple[int, int, int, int]:
        return _pixel_bounds(box, w, h)

    order = {Category.UNDERLAY: 0, Category.TEXT: 1, Category.LOGO: 2, Category.EMBELLISHMENT: 3}
    for el in sorted(layout.real_elements, key=lambda e: order[e.category]):
        x0, x1, y0, y1 = region(el.box)
        if x1 <= x0 or y1 <= y0:
            continue
        color = _fill_color(_region_mean(luma_int, el.box, w, h), rng)
        if el.category == Category.UNDERLAY:
            mask = _shape_mask(h, w, el.box, "round_rect")
            poster = np.where(mask[:, :, None], color[None, None], poster)
        elif el.category == Category.TEXT:
            # ragged horizontal bars standing in for lines of type
            line_h = max(2, (y1 - y0) // 4)
            y = y0
            while y + line_h // 2 <= y1:
                bar_end = x0 + int((x1 - x0) * rng.uniform(0.6, 1.0))
                poster[y : min(y + max(1, line_h // 2), y1), x0:bar_end] = color
                y += line_h
        elif el.category == Category.LOGO:
            yy, xx = np.mgrid[y0:y1, x0:x1]
            cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
            r_out = min(x1 - x0, y1 - y0) / 2
            r_in = 0.55 * r_out
            d2 = (xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2
            ring = (d2 <= r_out * r_out) & (d2 >= r_in * r_in)
            sub = poster[y0:y1, x0:x1]
            sub[ring] = color
            # a bar beside the ring reads as the brand name
            bar_y0 = int(cy - max(1, (y1 - y0) // 6))
            bar_y1 = int(cy + max(1, (y1 - y0) // 6))
            bar_x0 = min(x1 - 1, int(cx + r_out) + 2)
            poster[bar_y0:bar_y1, bar_x0:x1] = color
        else:  # embellishment: star specks
            for _ in range(6):
                px = int(rng.integers(x0, max(x0 + 1, x1)))
                py = int(rng.integers(y0, max(y0 + 1, y1)))
                poster[py, px] = color
                if px + 1 < x1:
                    poster[py, px + 1] = color
                if py + 1 < y1:
                    poster[py + 1, px] = color
    return poster


def build_dataset(
    n: int,
    out_dir: str | Path,
    seed: int,
    canvas_w: int = 240,
    canvas_h: int = 350,
) -> dict:
    """Write n records plus annotations and a manifest; pure function of (n, seed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records = []
    annotations = []
    for i in range(n):
        scene = gen_scene_indexed(seed, i, canvas_w, canvas_h)
        rng = np.random.default_rng([int(seed), i, 1])
        layout = gen_layout(scene, rng)
        poster = render_poster(scene, layout, rng)

        clean_name = f"clean_{i:05d}.png"
        poster_name = f"poster_{i:05d}.png"
        attn_name = f"clean_{i:05d}.attn.png"
        save_image(out / clean_name, scene.clean)
        save_image(out / poster_name, poster)
        save_image(out / attn_name, scene.saliency)

        annotations.append(AnnotationRecord.from_layout(poster_name, layout))
        records.append(
            {
                "clean": clean_name,
                "poster": poster_name,
                "attention": attn_name,
                "subject_box": list(scene.subject_box.as_tuple()),
            }
        )

    serialize_annotations(annotations, out / "annotations.jsonl")
    manifest = {
        "version": DATASET_VERSION,
        "seed": int(seed),
        "n": int(n),
        "canvas_w": int(canvas_w),
        "canvas_h": int(canvas_h),
        "records": records,
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return manifest


def gen_scene_indexed(seed: int, index: int, canvas_w: int, canvas_h: int) -> Scene:
    """Scene for record `index` of a dataset seeded with `seed`."""
    mixed = int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])
    return gen_scene(mixed, canvas_w, canvas_h)
