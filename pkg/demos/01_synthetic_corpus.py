"""Build a tiny synthetic poster corpus and look inside it.

Each record of the corpus is a quadruple: a clean background canvas, a
ground-truth saliency map marking the subject, a designer-rule layout of
categorized boxes, and the rendered poster (the layout drawn onto the
canvas). Everything derives from one seed, and record i is the same no
matter how many records surround it.

Run from the repository root:

    python3 demos/01_synthetic_corpus.py
"""

from pathlib import Path

import numpy as np

from posterlayout.core import parse_annotations
from posterlayout.imaging import load_image, save_image
from posterlayout.synthdata import build_dataset
from posterlayout.viz import render_layout

OUT = Path(__file__).parent / "out" / "corpus"


def main() -> None:
    manifest = build_dataset(8, OUT, seed=42, canvas_w=120, canvas_h=176)
    print(f"built {manifest['n']} records at {manifest['canvas_w']}x{manifest['canvas_h']}")

    records = parse_annotations(OUT / "annotations.jsonl")
    counts = [len(r.to_layout().real_elements) for r in records]
    print(f"elements per poster: min {min(counts)}, max {max(counts)}")

    # Overlay the ground-truth boxes on the first clean canvas so the
    # category color code is visible (red logo, blue text, green underlay,
    # yellow embellishment).
    first = records[0]
    clean = load_image(OUT / first.image_path.replace("poster_", "clean_"))
    overlay = render_layout(clean, first.to_layout())
    save_image(OUT / "demo_layout_overlay.png", overlay)

    saliency = load_image(OUT / first.image_path.replace("poster_", "clean_").replace(".png", ".attn.png"))
    print(f"subject covers {float(np.mean(saliency > 0.5)):.1%} of the canvas")
    print(f"wrote {OUT / 'demo_layout_overlay.png'}")


if __name__ == "__main__":
    main()
