"""Score layouts with the seven evaluation metrics.

The metrics grade a corpus of layouts against its images: how often the
model commits to a layout at all (occupancy), whether text sits on calm
regions (readability), how much of the subject gets covered (two subject
metrics), overlap between foreground elements, alignment of edges, and
whether underlays actually back other elements.

Here we score the ground-truth designer layouts of a small synthetic
corpus, then score a deliberately bad corpus (same boxes shuffled to
random positions) and compare.

Run from the repository root:

    python3 demos/04_metrics.py
"""

from pathlib import Path

import numpy as np

from posterlayout.core import (
    AnnotationRecord,
    BBox,
    Element,
    Layout,
    parse_annotations,
    serialize_annotations,
)
from posterlayout.metrics import evaluate
from posterlayout.synthdata import build_dataset

OUT = Path(__file__).parent / "out" / "metrics"


def scramble(layout: Layout, rng: np.random.Generator) -> Layout:
    """Same elements, uniformly random positions: the straw man."""
    moved = []
    for e in layout.real_elements:
        w, h = e.box.w, e.box.h
        moved.append(Element(e.category, BBox(
            float(rng.uniform(w / 2, 1 - w / 2)) if w < 1 else 0.5,
            float(rng.uniform(h / 2, 1 - h / 2)) if h < 1 else 0.5,
            w, h)))
    return Layout(tuple(moved), layout.canvas_w, layout.canvas_h)


def main() -> None:
    data = OUT / "data"
    build_dataset(24, data, seed=9, canvas_w=96, canvas_h=140)

    records = parse_annotations(data / "annotations.jsonl")
    # Designer layouts, scored against the clean canvases (which carry
    # ground-truth saliency sidecars for the subject metrics).
    designed = [
        AnnotationRecord.from_layout(r.image_path.replace("poster_", "clean_"), r.to_layout())
        for r in records
    ]
    serialize_annotations(designed, OUT / "designed.jsonl")

    rng = np.random.default_rng(1234)
    scrambled = [
        AnnotationRecord.from_layout(r.image_path, scramble(r.to_layout(), rng))
        for r in designed
    ]
    serialize_annotations(scrambled, OUT / "scrambled.jsonl")

    good = evaluate(OUT / "designed.jsonl", data)
    bad = evaluate(OUT / "scrambled.jsonl", data)

    print(f"{'metric':<10} {'designed':>10} {'scrambled':>10}   better is")
    rows = [
        ("r_occ", good.r_occ, bad.r_occ, "higher"),
        ("r_com", good.r_com, bad.r_com, "lower"),
        ("r_sub", good.r_sub, bad.r_sub, "lower"),
        ("r_shm", good.r_shm, bad.r_shm, "lower"),
        ("r_ove", good.r_ove, bad.r_ove, "lower"),
        ("r_ali", good.r_ali, bad.r_ali, "lower"),
        ("r_und", good.r_und, bad.r_und, "higher"),
    ]
    for name, g, b, better in rows:
        gs = "—" if g is None else f"{g:10.4f}"
        bs = "—" if b is None else f"{b:10.4f}"
        print(f"{name:<10} {gs:>10} {bs:>10}   {better}")


if __name__ == "__main__":
    main()
