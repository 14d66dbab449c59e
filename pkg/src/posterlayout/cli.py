"""Command-line entry point covering the full pipeline.

Exit codes: 0 success, 2 validation failure (bad flags or malformed inputs),
1 runtime failure. `--json` switches stdout to machine-readable JSON.
"""

from __future__ import annotations

import dataclasses
import functools
import json
from pathlib import Path

import click
import numpy as np

from .checkpoint import CheckpointError, load_generator, load_pair
from .core import (
    AnnotationError,
    AnnotationRecord,
    BBox,
    Category,
    Element,
    Layout,
    LayoutError,
    parse_annotations,
    serialize_annotations,
)
from .imaging import load_image
from .metrics import (
    BackboneExtractor,
    MetricError,
    MetricFlags,
    RandomFeatureExtractor,
    evaluate,
    write_report,
)

CANVAS_PRESETS = {"desk": (120, 176), "full": (240, 350)}

VALIDATION_ERRORS = (
    AnnotationError,
    LayoutError,
    MetricError,
    CheckpointError,
    ValueError,
    FileNotFoundError,
    json.JSONDecodeError,
)


class ValidationFailure(click.ClickException):
    exit_code = 2


class RuntimeFailure(click.ClickException):
    exit_code = 1


def pipeline_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except VALIDATION_ERRORS as exc:
            raise ValidationFailure(str(exc)) from exc
        except Exception as exc:  # noqa: BLE001 - boundary translation to exit code 1
            raise RuntimeFailure(f"{type(exc).__name__}: {exc}") from exc

    return wrapper


def emit(as_json: bool, payload: dict, human: str) -> None:
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(human)


CATEGORY_NAMES = {
    "logo": Category.LOGO,
    "text": Category.TEXT,
    "underlay": Category.UNDERLAY,
    "embellishment": Category.EMBELLISHMENT,
}


def parse_category(value) -> Category:
    if isinstance(value, str):
        key = value.strip().lower()
        if key in CATEGORY_NAMES:
            return CATEGORY_NAMES[key]
        raise ValidationFailure(f"unknown category name {value!r}")
    cat = int(value)
    if cat not in (1, 2, 3, 4):
        raise ValidationFailure(f"category index {cat} outside 1..4")
    return Category(cat)


def parse_constraint_file(path: Path, canvas_w: int, canvas_h: int) -> Layout:
    """Constraint JSON: {"elements": [{"category": 2|"text", "box": [cx,cy,w,h]}]}."""
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict) or "elements" not in obj:
        raise ValidationFailure(f"{path}: constraint file needs an 'elements' list")
    elements = []
    for raw in obj["elements"]:
        cat = parse_category(raw["category"])
        box_vals = raw["box"]
        if not isinstance(box_vals, (list, tuple)) or len(box_vals) != 4:
            raise ValidationFailure(f"{path}: box must have 4 components")
        elements.append(Element(cat, BBox(*[float(v) for v in box_vals])))
    return Layout(tuple(elements), canvas_w, canvas_h)


@click.group()
def main() -> None:
    """Poster layout pipeline: synthesize data, train, generate, evaluate."""


@main.command()
@click.option("--n", type=int, required=True, help="Number of poster/clean pairs.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--preset", type=click.Choice(sorted(CANVAS_PRESETS)), default="full",
              show_default=True, help="Canvas size bundle.")
@click.option("--canvas-w", type=int, default=None, help="Override canvas width.")
@click.option("--canvas-h", type=int, default=None, help="Override canvas height.")
@click.option("--json", "as_json", is_flag=True)
@pipeline_errors
def synth(n, out, seed, preset, canvas_w, canvas_h, as_json):
    """Write a procedural poster corpus with annotations and a manifest."""
    from .synthdata import build_dataset

    if n < 1:
        raise ValidationFailure("--n must be >= 1")
    w, h = CANVAS_PRESETS[preset]
    w = canvas_w or w
    h = canvas_h or h
    manifest = build_dataset(n, out, seed=seed, canvas_w=w, canvas_h=h)
    payload = {k: manifest[k] for k in ("version", "seed", "n", "canvas_w", "canvas_h")}
    payload["out"] = str(out)
    emit(as_json, payload, f"wrote {n} poster/clean pairs ({w}x{h}) to {out}")


def _apply_overrides(cfg, overrides: dict, label: str):
    valid = {f.name for f in dataclasses.fields(cfg)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValidationFailure(f"unknown {label} config keys: {sorted(unknown)}")
    return dataclasses.replace(cfg, **overrides)


@main.command()
@click.option("--data", type=click.Path(exists=True, file_okay=False, path_type=Path),
              required=True, help="Dataset directory holding annotations.jsonl.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="JSON overrides: {train: {}, generator: {}, discriminator: {}}.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--preset", type=click.Choice(["desk", "full"]), default="desk",
              show_default=True)
@click.option("--resume", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Checkpoint to continue from (configs come from it).")
@click.option("--seed", type=int, default=None, help="Override the preset seed.")
@click.option("--progress", is_flag=True, help="Print one line per epoch.")
@click.option("--json", "as_json", is_flag=True)
@pipeline_errors
def train(data, config, out, preset, resume, seed, progress, as_json):
    """Train the layout generator and discriminator on a poster corpus."""
    from .discriminator import Discriminator
    from .generator import Generator
    from .training import PosterDataset, TrainConfig, desk_preset, full_preset
    from .training import train as run_train

    overrides = {"train": {}, "generator": {}, "discriminator": {}}
    if config is not None:
        loaded = json.loads(config.read_text())
        unknown = set(loaded) - set(overrides)
        if unknown:
            raise ValidationFailure(f"unknown config sections: {sorted(unknown)}")
        overrides.update({k: dict(v) for k, v in loaded.items()})

    start_epoch = 0
    if resume is not None:
        if overrides["generator"] or overrides["discriminator"]:
            raise ValidationFailure(
                "--resume takes model shapes from the checkpoint; only the "
                "'train' config section may be overridden"
            )
        gen, disc, header = load_pair(resume)
        train_cfg = TrainConfig.from_dict(header["train_config"])
        train_cfg = _apply_overrides(train_cfg, overrides["train"], "train")
        start_epoch = int(header.get("epoch", -1)) + 1
    else:
        train_cfg, gen_cfg, disc_cfg = desk_preset() if preset == "desk" else full_preset()
        train_cfg = _apply_overrides(train_cfg, overrides["train"], "train")
        gen_cfg = _apply_overrides(gen_cfg, overrides["generator"], "generator")
        disc_cfg = _apply_overrides(disc_cfg, overrides["discriminator"], "discriminator")
        gen = Generator(gen_cfg)
        disc = Discriminator(disc_cfg)
    if seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=seed)

    dataset = PosterDataset(data)
    history = run_train(dataset, gen, disc, train_cfg, out, progress=progress,
                        start_epoch=start_epoch)
    if not history:
        raise ValidationFailure(
            f"nothing to train: start epoch {start_epoch} >= {train_cfg.epochs} epochs"
        )
    last = history[-1]
    payload = {
        "checkpoint": str(Path(out) / "model.ckpt"),
        "epochs_run": len(history),
        "final_epoch": last.epoch,
        "l_rec": last.l_rec,
        "l_d": last.l_d,
        "l_g_adv": last.l_g_adv,
    }
    emit(as_json, payload,
         f"trained {len(history)} epochs -> {payload['checkpoint']} "
         f"(l_rec {last.l_rec:.4f}, l_d {last.l_d:.4f})")


@main.command()
@click.option("--image", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Clean canvas to lay out.")
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True)
@click.option("--constraints", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Optional constraint JSON file.")
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=None,
              help="Scatter constraints over random slots for variety.")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output annotation JSONL.")
@click.option("--json", "as_json", is_flag=True)
@pipeline_errors
def generate(image, weights, constraints, threshold, seed, out, as_json):
    """Produce a layout for one canvas and write it in annotation format."""
    from .generator import generate as run_generate

    if not 0.0 <= threshold <= 1.0:
        raise ValidationFailure("--threshold must lie in [0, 1]")
    gen = load_generator(weights)
    img = load_image(image)
    h, w = img.shape[:2]
    constraint = None
    if constraints is not None:
        constraint = parse_constraint_file(constraints, w, h)
    slot_rng = np.random.default_rng(seed) if seed is not None else None
    layout = run_generate(gen, img, constraint, threshold, slot_rng=slot_rng)
    record = AnnotationRecord.from_layout(image.name, layout)
    out.parent.mkdir(parents=True, exist_ok=True)
    serialize_annotations([record], out)
    payload = {
        "out": str(out),
        "image": image.name,
        "n_elements": layout.n,
        "categories": [int(e.category) for e in layout.elements],
    }
    emit(as_json, payload, f"{layout.n} elements for {image.name} -> {out}")


@main.command("evaluate")
@click.option("--layouts", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Annotation JSONL of layouts to score.")
@click.option("--images", type=click.Path(exists=True, file_okay=False, path_type=Path),
              required=True)
@click.option("--attention-dir", type=click.Path(exists=True, file_okay=False, path_type=Path),
              default=None, help="Directory of <stem>.attn.png maps (default: beside images).")
@click.option("--extractor", type=click.Choice(["random", "backbone"]), default="random",
              show_default=True, help="Feature extractor for the shape metric.")
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Checkpoint for --extractor backbone.")
@click.option("--raw-sub", is_flag=True, help="Report unnormalized attention mass.")
@click.option("--ove-iou", is_flag=True, help="Score overlap as symmetric IoU.")
@click.option("--report", type=click.Path(path_type=Path), default=None,
              help="Prefix: writes <prefix>.json and <prefix>.csv.")
@click.option("--json", "as_json", is_flag=True)
@pipeline_errors
def evaluate_cmd(layouts, images, attention_dir, extractor, weights, raw_sub, ove_iou,
                 report, as_json):
    """Score layouts with the seven corpus metrics."""
    if extractor == "backbone":
        if weights is None:
            raise ValidationFailure("--extractor backbone requires --weights")
        ext = BackboneExtractor(load_generator(weights))
    else:
        ext = RandomFeatureExtractor()
    flags = MetricFlags(normalize_sub=not raw_sub, ove_iou=ove_iou)
    result = evaluate(layouts, images, ext, flags, attention_dir)
    if report is not None:
        report.parent.mkdir(parents=True, exist_ok=True)
        write_report(result, report.with_suffix(".json"), report.with_suffix(".csv"))
    if as_json:
        click.echo(json.dumps(result.to_dict(), sort_keys=True))
    else:
        click.echo(f"{'metric':8s} {'value':>10s} {'evaluated':>9s} {'skipped':>7s}")
        click.echo(f"{'r_occ':8s} {result.r_occ:10.4f} {result.n_layouts:9d} {0:7d}")
        for name in ("r_com", "r_sub", "r_shm", "r_ove", "r_ali", "r_und"):
            value = getattr(result, name)
            count = result.counts[name]
            shown = f"{value:10.4f}" if value is not None else f"{'-':>10s}"
            click.echo(f"{name:8s} {shown} {count.evaluated:9d} {count.skipped:7d}")


@main.command()
@click.option("--image", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True)
@click.option("--layout", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Annotation JSONL; the record matching the image is drawn.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--json", "as_json", is_flag=True)
@pipeline_errors
def render(image, layout, out, as_json):
    """Draw category-colored boxes over a canvas."""
    from .viz import save_render

    img = load_image(image)
    records = parse_annotations(layout)
    if not records:
        raise ValidationFailure(f"no layouts in {layout}")
    matching = [r for r in records if r.image_path == image.name]
    rec = matching[0] if matching else records[0]
    h, w = img.shape[:2]
    if (rec.canvas_w, rec.canvas_h) != (w, h):
        raise ValidationFailure(
            f"layout canvas {rec.canvas_w}x{rec.canvas_h} does not match image {w}x{h}"
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    save_render(out, img, rec.to_layout())
    emit(as_json, {"out": str(out), "n_elements": len(rec.elements)},
         f"rendered {len(rec.elements)} elements -> {out}")


@main.command()
@click.option("--weights", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@pipeline_errors
def serve(weights, port, host):
    """Run the HTTP layout service."""
    import uvicorn

    from .service import create_app

    app = create_app(weights)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
