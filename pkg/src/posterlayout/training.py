"""Losses, schedules, constraint sampling, and the adversarial training loop.

Reconstruction runs through exact bipartite matching between prediction slots
and padded ground truth, so the model is free to emit elements in any order.
The assignment minimizes the reconstruction loss itself (weighted
cross-entropy plus box terms), which makes the matched loss provably minimal
over all slot assignments; the conventional linear-probability matching cost
is also provided (`matching_cost_matrix`) for parity with common set-
prediction practice. The adversarial part is a hinge GAN with a warm-up:
reconstruction alone first, then the discriminator's opinion is blended in
linearly.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, asdict, replace
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .assignment import MatchResult, match_bipartite
from .core import Category, Layout, pad
from .dam import align_train
from .discriminator import DiscConfig, Discriminator
from .generator import GenConfig, GenOutput, Generator
from .imaging import load_image

PROB_FLOOR = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch: int = 128
    lr_gen: float = 1e-4
    lr_disc: float = 1e-3
    lr_gen_backbone: float = 1e-5
    lr_disc_backbone: float = 1e-4
    decay_epoch: int = 200  # x0.1 on every rate from here on
    decay_factor: float = 0.1
    warmup_epochs: int = 50  # adversarial weight stays 0 until here
    rec_weight: float = 1.0
    lambda_cls: float = 1.0
    lambda_l1: float = 5.0
    lambda_giou: float = 2.0
    non_object_weight: float = 0.1
    use_giou: bool = True
    p_empty: float = 0.5
    p_keep: float = 0.3
    seed: int = 0
    n_max: int = 20
    checkpoint_every: int = 10

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for name in ("lr_gen", "lr_disc", "lr_gen_backbone", "lr_disc_backbone"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


def desk_preset(**overrides) -> tuple[TrainConfig, GenConfig, DiscConfig]:
    """Small-everything preset sized for a single-core run under two hours."""
    train = TrainConfig(
        epochs=60, batch=16, decay_epoch=40, warmup_epochs=10, seed=0, n_max=20
    )
    gen = GenConfig(d=128, enc_layers=2, dec_layers=2, n_max=20, heads=4,
                    ffn_dim=256, dropout=0.1, backbone="mini")
    disc = DiscConfig(d=128, enc_layers=2, dec_layers=2, n_max=20, heads=4,
                      ffn_dim=256, dropout=0.1, backbone="mini")
    return replace(train, **overrides), gen, disc


def full_preset(**overrides) -> tuple[TrainConfig, GenConfig, DiscConfig]:
    """Production-scale preset: 300 epochs, batch 128, d=256, deep backbones."""
    return replace(TrainConfig(), **overrides), GenConfig(), DiscConfig()


def giou(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Generalized IoU of (cx, cy, w, h) boxes; shapes broadcast."""
    ax0, ay0 = a[..., 0] - a[..., 2] / 2, a[..., 1] - a[..., 3] / 2
    ax1, ay1 = a[..., 0] + a[..., 2] / 2, a[..., 1] + a[..., 3] / 2
    bx0, by0 = b[..., 0] - b[..., 2] / 2, b[..., 1] - b[..., 3] / 2
    bx1, by1 = b[..., 0] + b[..., 2] / 2, b[..., 1] + b[..., 3] / 2
    inter = (torch.minimum(ax1, bx1) - torch.maximum(ax0, bx0)).clamp(min=0) * (
        torch.minimum(ay1, by1) - torch.maximum(ay0, by0)
    ).clamp(min=0)
    area_a = (ax1 - ax0).clamp(min=0) * (ay1 - ay0).clamp(min=0)
    area_b = (bx1 - bx0).clamp(min=0) * (by1 - by0).clamp(min=0)
    union = area_a + area_b - inter
    iou = inter / union.clamp(min=1e-9)
    hull = (torch.maximum(ax1, bx1) - torch.minimum(ax0, bx0)) * (
        torch.maximum(ay1, by1) - torch.minimum(ay0, by0)
    )
    return iou - (hull - union) / hull.clamp(min=1e-9)


def matching_cost_matrix(
    probs: torch.Tensor,
    boxes: torch.Tensor,
    gt_cats: torch.Tensor,
    gt_boxes: torch.Tensor,
    cfg: TrainConfig,
) -> np.ndarray:
    """(n_max, n_max) cost of assigning prediction slot i to GT slot j.

    cost = -lambda_cls * p_i(cat_j) + [cat_j real] * (lambda_l1 * |b_i - b_j|_1
           + lambda_giou * (1 - GIoU)); box terms skipped for NonObject targets.
    """
    with torch.no_grad():
        n = probs.shape[0]
        cls_cost = -cfg.lambda_cls * probs[:, gt_cats]  # (n, n)
        l1 = torch.cdist(boxes, gt_boxes, p=1)
        g = giou(boxes[:, None, :], gt_boxes[None, :, :])
        real = (gt_cats != int(Category.NON_OBJECT)).float()[None]
        box_cost = cfg.lambda_l1 * l1
        if cfg.use_giou:
            box_cost = box_cost + cfg.lambda_giou * (1.0 - g)
        cost = cls_cost + real * box_cost
        return cost.double().cpu().numpy()


def match_predictions(
    probs: torch.Tensor,
    boxes: torch.Tensor,
    gt_cats: torch.Tensor,
    gt_boxes: torch.Tensor,
    cfg: TrainConfig,
) -> MatchResult:
    """Assignment under the conventional linear-probability matching cost."""
    return match_bipartite(matching_cost_matrix(probs, boxes, gt_cats, gt_boxes, cfg))


def _loss_cost_matrix(
    probs: torch.Tensor,
    boxes: torch.Tensor,
    gt_cats: torch.Tensor,
    gt_boxes: torch.Tensor,
    cfg: TrainConfig,
    box_denom: int,
    batch: int,
) -> np.ndarray:
    """Per-pair reconstruction-loss contributions, so matching minimizes L_rec.

    Entry (i, j) is exactly slot i's addend to the loss when assigned target j:
    the weighted cross-entropy share (over n_max slots and the batch) plus the
    box terms normalized by the batch real-element count.
    """
    with torch.no_grad():
        n = probs.shape[0]
        p = probs[:, gt_cats].clamp(min=PROB_FLOOR)
        w = torch.where(
            gt_cats == int(Category.NON_OBJECT),
            probs.new_full((n,), cfg.non_object_weight),
            probs.new_ones(n),
        )[None]
        ce = -w * torch.log(p) / (n * batch)
        real = (gt_cats != int(Category.NON_OBJECT)).float()[None]
        box = cfg.lambda_l1 * torch.cdist(boxes, gt_boxes, p=1)
        if cfg.use_giou:
            box = box + cfg.lambda_giou * (1.0 - giou(boxes[:, None, :], gt_boxes[None, :, :]))
        return (ce + real * box / box_denom).double().cpu().numpy()


def assignment_loss_terms(
    probs: torch.Tensor,
    boxes: torch.Tensor,
    gt_cats: torch.Tensor,
    gt_boxes: torch.Tensor,
    perm: torch.Tensor,
    cfg: TrainConfig,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, int]:
    """Loss pieces for one item under a given slot->target assignment.

    Returns (mean weighted cross-entropy, box L1 sum, (1-GIoU) sum, real count).
    """
    n_max = probs.shape[0]
    tgt_cats = gt_cats[perm]
    tgt_boxes = gt_boxes[perm]
    p_at_tgt = probs.gather(1, tgt_cats[:, None]).squeeze(1).clamp(min=PROB_FLOOR)
    weights = torch.where(
        tgt_cats == int(Category.NON_OBJECT),
        probs.new_full((n_max,), cfg.non_object_weight),
        probs.new_ones(n_max),
    )
    ce = (-weights * torch.log(p_at_tgt)).mean()
    real = tgt_cats != int(Category.NON_OBJECT)
    n_real = int(real.sum())
    if n_real:
        pb, tb = boxes[real], tgt_boxes[real]
        l1 = (pb - tb).abs().sum()
        g = (1.0 - giou(pb, tb)).sum() if cfg.use_giou else probs.new_zeros(())
    else:
        l1 = probs.new_zeros(())
        g = probs.new_zeros(())
    return ce, l1, g, n_real


def reconstruction_loss(
    out: GenOutput,
    gt_cats: torch.Tensor,
    gt_boxes: torch.Tensor,
    cfg: TrainConfig,
) -> torch.Tensor:
    """Matched set-prediction loss over a batch.

    Per item: cross-entropy on categories with NonObject targets scaled by
    non_object_weight, averaged over slots; box L1 and GIoU terms over real
    targets, normalized by the batch real-element count.
    """
    b = out.probs.shape[0]
    ce_total = out.probs.new_zeros(())
    box_l1_total = out.probs.new_zeros(())
    giou_total = out.probs.new_zeros(())
    denom = max(int((gt_cats != int(Category.NON_OBJECT)).sum()), 1)
    for i in range(b):
        match = match_bipartite(_loss_cost_matrix(
            out.probs[i], out.boxes[i], gt_cats[i], gt_boxes[i], cfg, denom, b
        ))
        perm = torch.from_numpy(match.permutation).to(gt_cats.device)
        ce, l1, g, _ = assignment_loss_terms(
            out.probs[i], out.boxes[i], gt_cats[i], gt_boxes[i], perm, cfg
        )
        ce_total = ce_total + ce
        box_l1_total = box_l1_total + l1
        giou_total = giou_total + g
    loss = ce_total / b
    loss = loss + cfg.lambda_l1 * box_l1_total / denom
    if cfg.use_giou:
        loss = loss + cfg.lambda_giou * giou_total / denom
    return loss


def hinge_d(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    return (1.0 - real_scores).clamp(min=0).mean() + (1.0 + fake_scores).clamp(min=0).mean()


def hinge_g(fake_scores: torch.Tensor) -> torch.Tensor:
    return -fake_scores.mean()


def adv_weight(epoch: float, cfg: TrainConfig) -> float:
    """0 through the warm-up, then linear up to 1 at the final epoch."""
    if epoch < cfg.warmup_epochs:
        return 0.0
    span = max(cfg.epochs - 1 - cfg.warmup_epochs, 1)
    return min(1.0, max(0.0, (epoch - cfg.warmup_epochs) / span))


def total_generator_loss(
    l_rec: torch.Tensor, l_adv: torch.Tensor, epoch: int, cfg: TrainConfig
) -> torch.Tensor:
    return cfg.rec_weight * l_rec + adv_weight(epoch, cfg) * l_adv


def sample_constraints(gt: Layout, rng: np.random.Generator, cfg: TrainConfig) -> Layout:
    """Random partial layout: empty with p_empty, else per-element keep with p_keep."""
    if rng.random() < cfg.p_empty:
        return Layout((), gt.canvas_w, gt.canvas_h)
    kept = tuple(e for e in gt.real_elements if rng.random() < cfg.p_keep)
    return Layout(kept, gt.canvas_w, gt.canvas_h)


def scatter_to_slots(
    constraint: Layout, n_max: int, rng: np.random.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    """Place constraint elements at random distinct slots instead of the front.

    Query slots are position-encoded, so training on scattered slots keeps any
    slot permutation of the same constraint in-distribution; samplers can then
    vary slots at test time to get diverse proposals.
    """
    cats = torch.zeros(n_max, dtype=torch.long)
    boxes = torch.zeros(n_max, 4)
    els = constraint.real_elements
    if els:
        slots = rng.choice(n_max, size=len(els), replace=False)
        for slot, el in zip(slots, els):
            cats[slot] = int(el.category)
            boxes[slot] = torch.tensor(el.box.as_tuple())
    return cats, boxes


def layout_tensors(layout: Layout, n_max: int) -> tuple[torch.Tensor, torch.Tensor]:
    padded = pad(layout, n_max)
    cats = torch.tensor([int(e.category) for e in padded.elements], dtype=torch.long)
    boxes = torch.tensor([list(e.box.as_tuple()) for e in padded.elements], dtype=torch.float32)
    return cats, boxes


class PosterDataset:
    """(poster image, layout) pairs with DAM outputs precomputed once.

    The alignment stage is deterministic, so its result per poster is computed
    on first use and memory-mapped from a cache file next to the dataset.
    """

    def __init__(self, root: str | Path, annotations: str = "annotations.jsonl",
                 cache: Optional[Path] = None):
        from .core import parse_annotations
        from .dam import cache_root

        self.root = Path(root)
        self.records = parse_annotations(self.root / annotations)
        if not self.records:
            raise ValueError(f"no records in {self.root / annotations}")
        first = load_image(self.root / self.records[0].image_path)
        self.h, self.w = first.shape[:2]
        cache_dir = cache_root(self.root if cache is None else Path(cache))
        cache_dir.mkdir(parents=True, exist_ok=True)
        self.cache_path = cache_dir / f"dam_cache_{len(self.records)}_{self.h}x{self.w}.npy"
        self._aligned = self._build_cache()

    def _build_cache(self) -> np.memmap:
        shape = (len(self.records), 4, self.h, self.w)
        if self.cache_path.is_file():
            arr = np.memmap(self.cache_path, dtype=np.float16, mode="r", shape=shape)
            return arr
        arr = np.memmap(self.cache_path, dtype=np.float16, mode="w+", shape=shape)
        for i, rec in enumerate(self.records):
            poster = load_image(self.root / rec.image_path)
            aligned = align_train(poster, rec.to_layout(), image_path=self.root / rec.image_path)
            arr[i] = aligned.data.astype(np.float16)
        arr.flush()
        return np.memmap(self.cache_path, dtype=np.float16, mode="r", shape=shape)

    def __len__(self) -> int:
        return len(self.records)

    def aligned(self, i: int) -> np.ndarray:
        return np.asarray(self._aligned[i], dtype=np.float32)

    def layout(self, i: int) -> Layout:
        return self.records[i].to_layout()


@dataclass
class EpochStats:
    epoch: int
    l_rec: float
    l_d: float
    l_g_adv: float
    w_adv: float
    lr_gen: float
    lr_disc: float
    lr_gen_backbone: float
    lr_disc_backbone: float
    seconds: float


def _param_groups(model, backbone_lr: float, rest_lr: float):
    backbone_params = list(model.backbone.parameters())
    backbone_ids = {id(p) for p in backbone_params}
    rest = [p for p in model.parameters() if id(p) not in backbone_ids]
    return [
        {"params": backbone_params, "lr": backbone_lr},
        {"params": rest, "lr": rest_lr},
    ]


def train(
    dataset: PosterDataset,
    gen: Generator,
    disc: Discriminator,
    cfg: TrainConfig,
    out_dir: str | Path,
    log_every: int = 1,
    progress: bool = False,
    start_epoch: int = 0,
) -> list[EpochStats]:
    """Alternating D/G updates over the poster corpus; returns per-epoch stats.

    Deterministic for a fixed config: data order, constraint sampling, and
    slot scatter derive from (cfg.seed, epoch), and torch's global RNG is
    seeded, so two identical runs log identical losses. start_epoch > 0
    continues a loaded checkpoint with fresh optimizer state. NaN in any loss
    aborts with a diagnostic checkpoint.
    """
    from .checkpoint import save_checkpoint

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    n_max = cfg.n_max
    if gen.cfg.n_max != n_max or disc.cfg.n_max != n_max:
        raise ValueError("n_max mismatch between TrainConfig and model configs")

    opt_g = torch.optim.Adam(_param_groups(gen, cfg.lr_gen_backbone, cfg.lr_gen))
    opt_d = torch.optim.Adam(_param_groups(disc, cfg.lr_disc_backbone, cfg.lr_disc))
    base_lrs_g = [g["lr"] for g in opt_g.param_groups]
    base_lrs_d = [g["lr"] for g in opt_d.param_groups]

    log_path = out / "training_log.csv"
    log_file = open(log_path, "a", newline="")
    writer = csv.writer(log_file)
    if log_path.stat().st_size == 0:
        writer.writerow(["epoch", "l_rec", "l_d", "l_g_adv", "w_adv", "lr_gen",
                        "lr_disc", "lr_gen_backbone", "lr_disc_backbone", "seconds"])

    history: list[EpochStats] = []
    n = len(dataset)
    steps = max(1, n // cfg.batch)
    try:
        for epoch in range(start_epoch, cfg.epochs):
            t0 = time.time()
            rng = np.random.default_rng([cfg.seed, 0xC0DE, epoch])
            factor = cfg.decay_factor if epoch >= cfg.decay_epoch else 1.0
            for group, base in zip(opt_g.param_groups, base_lrs_g):
                group["lr"] = base * factor
            for group, base in zip(opt_d.param_groups, base_lrs_d):
                group["lr"] = base * factor
            w = adv_weight(epoch, cfg)
            order = rng.permutation(n)
            sums = {"rec": 0.0, "d": 0.0, "g": 0.0}

            gen.train()
            disc.train()
            for step in range(steps):
                idx = order[step * cfg.batch : (step + 1) * cfg.batch]
                x = torch.from_numpy(np.stack([dataset.aligned(i) for i in idx]))
                gt_cats, gt_boxes, cons_cats, cons_boxes = [], [], [], []
                for i in idx:
                    lay = dataset.layout(i)
                    gc, gb = layout_tensors(lay, n_max)
                    cc, cb = scatter_to_slots(sample_constraints(lay, rng, cfg), n_max, rng)
                    gt_cats.append(gc)
                    gt_boxes.append(gb)
                    cons_cats.append(cc)
                    cons_boxes.append(cb)
                gt_cats = torch.stack(gt_cats)
                gt_boxes = torch.stack(gt_boxes)
                cons_cats = torch.stack(cons_cats)
                cons_boxes = torch.stack(cons_boxes)

                def guard(*tensors):
                    if not all(torch.isfinite(t).all() for t in tensors):
                        save_checkpoint(out / "diagnostic_nan.ckpt", gen, disc, cfg, epoch)
                        raise FloatingPointError(
                            f"non-finite values at epoch {epoch} step {step}; "
                            f"diagnostic checkpoint written"
                        )

                # every score this step (generator's realness term plus both
                # discriminator branches) sees the same pre-update weights and
                # the same images, so the image encoding is computed once
                memory = disc.encode_image(x)

                # generator step: reconstruction always, realness term once the
                # warm-up ends
                out_g = gen(x, cons_cats, cons_boxes)
                guard(out_g.probs, out_g.boxes)
                l_rec = reconstruction_loss(out_g, gt_cats, gt_boxes, cfg)
                if w > 0:
                    tok = disc.prepare_layout_tokens(
                        out_g.probs, out_g.boxes, cons_cats, cons_boxes, predicted=True
                    )
                    l_adv = hinge_g(disc.score_tokens(memory, tok))
                else:
                    l_adv = torch.zeros(())
                loss = total_generator_loss(l_rec, l_adv, epoch, cfg)
                guard(loss)
                opt_g.zero_grad(set_to_none=True)
                opt_d.zero_grad(set_to_none=True)
                loss.backward(retain_graph=w > 0)
                opt_g.step()

                # discriminator step, reusing this batch's generator output
                tok_real = disc.prepare_layout_tokens(
                    gt_cats, gt_boxes, cons_cats, cons_boxes, predicted=False
                )
                tok_fake = disc.prepare_layout_tokens(
                    out_g.probs.detach(), out_g.boxes.detach(), cons_cats, cons_boxes,
                    predicted=True,
                )
                l_d = hinge_d(
                    disc.score_tokens(memory, tok_real), disc.score_tokens(memory, tok_fake)
                )
                guard(l_d)
                opt_d.zero_grad(set_to_none=True)
                l_d.backward()
                opt_d.step()

                sums["rec"] += float(l_rec.detach())
                sums["d"] += float(l_d.detach())
                sums["g"] += float(l_adv.detach())

            stats = EpochStats(
                epoch=epoch,
                l_rec=sums["rec"] / steps,
                l_d=sums["d"] / steps,
                l_g_adv=sums["g"] / steps,
                w_adv=w,
                lr_gen=opt_g.param_groups[1]["lr"],
                lr_disc=opt_d.param_groups[1]["lr"],
                lr_gen_backbone=opt_g.param_groups[0]["lr"],
                lr_disc_backbone=opt_d.param_groups[0]["lr"],
                seconds=time.time() - t0,
            )
            history.append(stats)
            if epoch % log_every == 0 or epoch == cfg.epochs - 1:
                writer.writerow([stats.epoch, f"{stats.l_rec:.6f}", f"{stats.l_d:.6f}",
                                 f"{stats.l_g_adv:.6f}", f"{stats.w_adv:.4f}",
                                 f"{stats.lr_gen:.2e}", f"{stats.lr_disc:.2e}",
                                 f"{stats.lr_gen_backbone:.2e}",
                                 f"{stats.lr_disc_backbone:.2e}", f"{stats.seconds:.1f}"])
                log_file.flush()
            if progress:
                print(f"epoch {epoch:3d}  rec {stats.l_rec:.4f}  d {stats.l_d:.4f} "
                      f"adv {stats.l_g_adv:.4f}  w {stats.w_adv:.2f}  {stats.seconds:.1f}s",
                      flush=True)
            if (epoch + 1) % cfg.checkpoint_every == 0 or epoch == cfg.epochs - 1:
                save_checkpoint(out / "model.ckpt", gen, disc, cfg, epoch)
    finally:
        log_file.close()
    return history
