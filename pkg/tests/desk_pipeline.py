"""Desk-scale artifact builder: corpus, trained model, held-out predictions.

Everything lands in one cache directory (CGL_CACHE overrides the default
under ~/.cache) so the slow pieces run once and the acceptance suite stays
re-runnable. Run directly to prebuild:

    python3 tests/desk_pipeline.py
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from posterlayout.checkpoint import load_generator
from posterlayout.core import (
    AnnotationRecord,
    BBox,
    Category,
    Element,
    Layout,
    parse_annotations,
    rasterize,
    serialize_annotations,
)
from posterlayout.dam import align_test, cache_root
from posterlayout.discriminator import Discriminator
from posterlayout.generator import Generator, generate as run_generate
from posterlayout.imaging import load_image
from posterlayout.synthdata import build_dataset
from posterlayout.training import PosterDataset, desk_preset
from posterlayout.training import train as run_train

TRAIN_N, EVAL_N = 2000, 200
TRAIN_SEED, EVAL_SEED, BASELINE_SEED = 17, 18, 77
CANVAS_W, CANVAS_H = 120, 176
THRESHOLD = 0.5


def desk_dir() -> Path:
    return cache_root(Path.home() / ".cache" / "posterlayout") / "desk_v1"


def _dataset_ready(root: Path, n: int) -> bool:
    manifest = root / "manifest.json"
    if not manifest.is_file():
        return False
    try:
        meta = json.loads(manifest.read_text())
    except json.JSONDecodeError:
        return False
    return meta.get("n") == n and (root / "annotations.jsonl").is_file()


def ensure_datasets(base: Path) -> tuple[Path, Path]:
    train_dir = base / "data_train"
    eval_dir = base / "data_eval"
    if not _dataset_ready(train_dir, TRAIN_N):
        print(f"building training corpus ({TRAIN_N} posters)...", flush=True)
        build_dataset(TRAIN_N, train_dir, seed=TRAIN_SEED,
                      canvas_w=CANVAS_W, canvas_h=CANVAS_H)
    if not _dataset_ready(eval_dir, EVAL_N):
        print(f"building held-out corpus ({EVAL_N} scenes)...", flush=True)
        build_dataset(EVAL_N, eval_dir, seed=EVAL_SEED,
                      canvas_w=CANVAS_W, canvas_h=CANVAS_H)
    return train_dir, eval_dir


def ensure_model(base: Path, train_dir: Path) -> Path:
    from posterlayout.checkpoint import load_pair, read_header

    run_dir = base / "run"
    ckpt = run_dir / "model.ckpt"
    train_cfg, gen_cfg, disc_cfg = desk_preset()
    start_epoch = 0
    if ckpt.is_file():
        done_epoch = read_header(ckpt).get("epoch", -1)
        if done_epoch >= train_cfg.epochs - 1:
            return ckpt
        gen, disc, _ = load_pair(ckpt)
        start_epoch = done_epoch + 1
        print(f"resuming desk training at epoch {start_epoch}", flush=True)
    else:
        gen = Generator(gen_cfg)
        disc = Discriminator(disc_cfg)
        print(f"training desk model: {train_cfg.epochs} epochs on {TRAIN_N} posters",
              flush=True)
    dataset = PosterDataset(train_dir)
    t0 = time.time()
    run_train(dataset, gen, disc, train_cfg, run_dir, progress=True,
              start_epoch=start_epoch)
    print(f"training took {(time.time() - t0) / 60:.1f} min", flush=True)
    return ckpt


def _uniform_random_counterpart(layout: Layout, rng: np.random.Generator) -> Layout:
    """Same categories and sizes, positions drawn uniformly over the canvas."""
    elements = []
    for e in layout.real_elements:
        w, h = e.box.w, e.box.h
        lo_x, hi_x = w / 2, 1 - w / 2
        lo_y, hi_y = h / 2, 1 - h / 2
        cx = float(rng.uniform(lo_x, hi_x)) if hi_x > lo_x else 0.5
        cy = float(rng.uniform(lo_y, hi_y)) if hi_y > lo_y else 0.5
        elements.append(Element(e.category, BBox(cx, cy, w, h)))
    return Layout(tuple(elements), layout.canvas_w, layout.canvas_h)


def ensure_predictions(base: Path, eval_dir: Path, ckpt: Path) -> tuple[Path, Path]:
    pred_path = base / "predictions.jsonl"
    baseline_path = base / "baseline.jsonl"
    meta_path = base / "predictions_meta.json"
    if meta_path.is_file() and pred_path.is_file() and baseline_path.is_file():
        return pred_path, baseline_path
    print(f"generating layouts for {EVAL_N} held-out canvases...", flush=True)
    gen = load_generator(ckpt)
    preds, bases = [], []
    t0 = time.time()
    for i in range(EVAL_N):
        name = f"clean_{i:05d}.png"
        image = load_image(eval_dir / name)
        layout = run_generate(gen, image, threshold=THRESHOLD)
        preds.append(AnnotationRecord.from_layout(name, layout))
        rng = np.random.default_rng([BASELINE_SEED, i])
        bases.append(
            AnnotationRecord.from_layout(name, _uniform_random_counterpart(layout, rng))
        )
    serialize_annotations(preds, pred_path)
    serialize_annotations(bases, baseline_path)
    meta_path.write_text(json.dumps({
        "eval_n": EVAL_N, "threshold": THRESHOLD, "baseline_seed": BASELINE_SEED,
        "seconds": round(time.time() - t0, 1),
    }))
    return pred_path, baseline_path


def subject_boxes(eval_dir: Path) -> list[BBox]:
    manifest = json.loads((eval_dir / "manifest.json").read_text())
    return [BBox(*rec["subject_box"]) for rec in manifest["records"]]


def subject_occlusion(layout: Layout, subject: BBox) -> float:
    """Fraction of the subject box covered by non-underlay elements."""
    w, h = layout.canvas_w, layout.canvas_h
    cats = [c for c in (Category.LOGO, Category.TEXT, Category.EMBELLISHMENT)]
    mask = rasterize(layout, w, h, cats)
    subject_mask = rasterize(
        Layout((Element(Category.TEXT, subject),), w, h), w, h
    )
    denom = subject_mask.sum()
    if denom == 0:
        return 0.0
    return float((mask & subject_mask).sum() / denom)


def mean_subject_occlusion(records: list[AnnotationRecord],
                           subjects: list[BBox]) -> float:
    values = [
        subject_occlusion(rec.to_layout(), subject)
        for rec, subject in zip(records, subjects)
    ]
    return float(np.mean(values))


def ensure_all() -> dict:
    base = desk_dir()
    base.mkdir(parents=True, exist_ok=True)
    train_dir, eval_dir = ensure_datasets(base)
    ckpt = ensure_model(base, train_dir)
    pred_path, baseline_path = ensure_predictions(base, eval_dir, ckpt)
    return {
        "base": base,
        "train_dir": train_dir,
        "eval_dir": eval_dir,
        "ckpt": ckpt,
        "predictions": pred_path,
        "baseline": baseline_path,
    }


if __name__ == "__main__":
    t0 = time.time()
    paths = ensure_all()
    n_pred = len(parse_annotations(paths["predictions"]))
    print(f"ready in {(time.time() - t0) / 60:.1f} min: "
          f"{paths['ckpt']} + {n_pred} held-out predictions")
