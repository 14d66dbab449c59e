"""Train a miniature model end to end, then generate layouts.

This runs the whole loop at toy scale in about a minute: synthesize a
corpus, train the GAN briefly, then ask the generator for layouts on a
held-out clean canvas — once unconstrained and once with a text box pinned
near the top. The toy model produces rough layouts; the point here is the
mechanics, not quality (see the `desk` preset for a real run).

Run from the repository root:

    python3 demos/03_train_and_generate.py
"""

from pathlib import Path

import numpy as np
import torch

from posterlayout.core import BBox, Category, Element, Layout
from posterlayout.discriminator import DiscConfig, Discriminator
from posterlayout.generator import GenConfig, Generator, generate
from posterlayout.imaging import load_image, save_image
from posterlayout.synthdata import build_dataset
from posterlayout.training import PosterDataset, TrainConfig, train
from posterlayout.viz import render_layout

OUT = Path(__file__).parent / "out" / "train"

MODEL = dict(d=32, enc_layers=1, dec_layers=2, n_max=12, heads=2,
             ffn_dim=64, dropout=0.0, backbone="mini")


def main() -> None:
    data = OUT / "data"
    build_dataset(32, data, seed=5, canvas_w=64, canvas_h=88)

    torch.manual_seed(0)
    gen = Generator(GenConfig(**MODEL))
    disc = Discriminator(DiscConfig(**MODEL))
    cfg = TrainConfig(epochs=4, batch=8, n_max=12, warmup_epochs=2,
                      decay_epoch=3, checkpoint_every=4, seed=5)
    history = train(PosterDataset(data), gen, disc, cfg, OUT / "run", progress=True)
    print(f"reconstruction loss: {history[0].l_rec:.3f} -> {history[-1].l_rec:.3f}")

    canvas = load_image(data / "clean_00000.png")

    # Unconstrained: the model places whatever it believes in. A barely
    # trained model is timid, so use a low confidence threshold.
    free = generate(gen, canvas, threshold=0.05)
    print(f"unconstrained: {len(free.real_elements)} elements")
    save_image(OUT / "generated_free.png", render_layout(canvas, free))

    # Constrained: pin a text box near the top and let the decoder build
    # around it. Constraints steer slots; they are suggestions, not locks.
    want = Layout((Element(Category.TEXT, BBox(0.5, 0.2, 0.7, 0.15)),), 64, 88)
    steered = generate(gen, canvas, constraint=want, threshold=0.05)
    print(f"constrained  : {len(steered.real_elements)} elements, "
          f"text present: {any(e.category == Category.TEXT for e in steered.real_elements)}")
    save_image(OUT / "generated_steered.png", render_layout(canvas, steered))
    print(f"wrote overlays under {OUT}")


if __name__ == "__main__":
    main()
