"""Layout generator: multi-scale CNN features, transformer, shared heads.

The image (as a 4-channel aligned input) runs through a residual backbone;
features from the last two stages are fused, projected, and flattened into
tokens for a transformer encoder.  A decoder attends from constraint slots to
those tokens and two weight-shared linear heads emit a category distribution
and a box per slot.  Prediction is one shot over all slots, with a NonObject
category absorbing unused ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
import torch
from torch import nn

from .core import NUM_CATEGORIES, BBox, Category, Element, Layout, pad, unpad
from .dam import DamBackends, DamOutput, align_test

BACKBONE_PRESETS = {
    # name: (block kind, blocks per stage, stem width)
    "deep": ("bottleneck", (3, 4, 6, 3), 64),
    "shallow": ("basic", (2, 2, 2, 2), 64),
    "mini": ("basic", (1, 1, 1, 1), 16),
}


@dataclass(frozen=True)
class GenConfig:
    d: int = 256
    enc_layers: int = 6
    dec_layers: int = 6
    n_max: int = 20
    k: int = NUM_CATEGORIES
    heads: int = 8
    ffn_dim: int = 2048
    dropout: float = 0.1
    backbone: str = "deep"
    multiscale: bool = True
    d_prime: int = 0  # 0 = d // 2

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError("d must be divisible by heads")
        if self.d % 4 != 0:
            raise ValueError("d must be divisible by 4 for 2-D position encodings")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.backbone not in BACKBONE_PRESETS:
            raise ValueError(f"unknown backbone preset {self.backbone!r}")

    @property
    def dp(self) -> int:
        return self.d_prime or self.d // 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        return cls(**data)


class BasicBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.relu = nn.ReLU(inplace=True)
        self.down = None
        if stride != 1 or c_in != c_out:
            self.down = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride, bias=False), nn.BatchNorm2d(c_out)
            )

    def forward(self, x):
        identity = x if self.down is None else self.down(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class BottleneckBlock(nn.Module):
    expansion = 4

    def __init__(self, c_in: int, width: int, stride: int):
        super().__init__()
        c_out = width * self.expansion
        self.conv1 = nn.Conv2d(c_in, width, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(width)
        self.conv2 = nn.Conv2d(width, width, 3, stride, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(width)
        self.conv3 = nn.Conv2d(width, c_out, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(c_out)
        self.relu = nn.ReLU(inplace=True)
        self.down = None
        if stride != 1 or c_in != c_out:
            self.down = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride, bias=False), nn.BatchNorm2d(c_out)
            )

    def forward(self, x):
        identity = x if self.down is None else self.down(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return self.relu(out + identity)


class ResidualBackbone(nn.Module):
    """Residual net with a 4-channel stem; exposes the last two stage maps.

    Stage strides are 4/8/16/32; every downsampling layer uses the padding
    that makes spatial dims follow ceil division, so token counts downstream
    are exactly ceil(W/16) * ceil(H/16).
    """

    def __init__(self, preset: str = "deep", in_channels: int = 4):
        super().__init__()
        kind, blocks, stem = BACKBONE_PRESETS[preset]
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, stem, 7, 2, 3, bias=False),
            nn.BatchNorm2d(stem),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, 2, 1),
        )
        widths = [stem, stem * 2, stem * 4, stem * 8]
        strides = [1, 2, 2, 2]
        stages = []
        c_in = stem
        for w, s, n in zip(widths, strides, blocks):
            layers = []
            for i in range(n):
                if kind == "basic":
                    layers.append(BasicBlock(c_in, w, s if i == 0 else 1))
                    c_in = w
                else:
                    layers.append(BottleneckBlock(c_in, w, s if i == 0 else 1))
                    c_in = w * BottleneckBlock.expansion
            stages.append(nn.Sequential(*layers))
        self.stage1, self.stage2, self.stage3, self.stage4 = stages
        self.c4 = widths[2] * (BottleneckBlock.expansion if kind == "bottleneck" else 1)
        self.c5 = widths[3] * (BottleneckBlock.expansion if kind == "bottleneck" else 1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.shape[1] != self.stem[0].in_channels:
            raise ValueError(f"expected {self.stem[0].in_channels} input channels, got {x.shape[1]}")
        x = self.stem(x)
        x = self.stage1(x)
        x = self.stage2(x)
        f4 = self.stage3(x)
        f5 = self.stage4(f4)
        return f4, f5


class MultiScaleFusion(nn.Module):
    """Fuse stride-16 and stride-32 maps into one token sequence of dim d.

    fused = concat(up(conv11(F5)), conv33(up(conv11(F5)) + conv11(F4))),
    then a 1x1 projection to d.  With multiscale off only F5 is used, which
    drops the token count to the stride-32 grid.
    """

    def __init__(self, c4: int, c5: int, d: int, d_prime: int, multiscale: bool = True):
        super().__init__()
        self.multiscale = multiscale
        self.lat5 = nn.Conv2d(c5, d_prime, 1)
        if multiscale:
            self.lat4 = nn.Conv2d(c4, d_prime, 1)
            self.smooth = nn.Conv2d(d_prime, d_prime, 3, 1, 1)
            self.proj = nn.Conv2d(2 * d_prime, d, 1)
        else:
            self.proj = nn.Conv2d(d_prime, d, 1)

    def forward(self, f4: torch.Tensor, f5: torch.Tensor) -> tuple[torch.Tensor, tuple[int, int]]:
        if self.multiscale:
            p5 = self.lat5(f5)
            up5 = nn.functional.interpolate(
                p5, size=f4.shape[-2:], mode="bilinear", align_corners=False
            )
            fused = torch.cat([up5, self.smooth(up5 + self.lat4(f4))], dim=1)
        else:
            fused = self.lat5(f5)
        out = self.proj(fused)
        b, d, h, w = out.shape
        tokens = out.flatten(2).transpose(1, 2)  # (B, H*W, d), row-major
        return tokens, (h, w)


def sinusoidal_position_encoding_2d(h: int, w: int, d: int, device=None) -> torch.Tensor:
    """(h*w, d) fixed encoding; first half of channels encode y, second x."""
    if d % 4 != 0:
        raise ValueError("d must be divisible by 4")
    half = d // 2
    div = torch.exp(
        torch.arange(0, half, 2, dtype=torch.float32, device=device)
        * (-math.log(10000.0) / half)
    )
    ys = torch.arange(h, dtype=torch.float32, device=device)[:, None] * div[None]
    xs = torch.arange(w, dtype=torch.float32, device=device)[:, None] * div[None]
    pe = torch.zeros(h, w, d, device=device)
    pe[:, :, 0:half:2] = torch.sin(ys)[:, None, :].expand(h, w, half // 2)
    pe[:, :, 1:half:2] = torch.cos(ys)[:, None, :].expand(h, w, half // 2)
    pe[:, :, half::2] = torch.sin(xs)[None, :, :].expand(h, w, half // 2)
    pe[:, :, half + 1 :: 2] = torch.cos(xs)[None, :, :].expand(h, w, half // 2)
    return pe.reshape(h * w, d)


class ConstraintEmbedder(nn.Module):
    """Turn padded constraint slots into query tokens."""

    def __init__(self, d: int, n_max: int, k: int):
        super().__init__()
        self.cat_emb = nn.Embedding(k, d)
        self.box_proj = nn.Linear(4, d)
        self.slot_pos = nn.Embedding(n_max, d)
        self.n_max = n_max

    def forward(self, cats: torch.Tensor, boxes: torch.Tensor) -> torch.Tensor:
        if cats.shape[-1] != self.n_max:
            raise ValueError(f"expected {self.n_max} slots, got {cats.shape[-1]}")
        slots = torch.arange(self.n_max, device=cats.device)
        return self.cat_emb(cats) + self.box_proj(boxes) + self.slot_pos(slots)[None]


@dataclass
class GenOutput:
    """Per-slot predictions after activations."""

    probs: torch.Tensor  # (B, n_max, k), rows sum to 1
    boxes: torch.Tensor  # (B, n_max, 4), sigmoid range


class Generator(nn.Module):
    def __init__(self, cfg: GenConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = ResidualBackbone(cfg.backbone, in_channels=4)
        self.fusion = MultiScaleFusion(
            self.backbone.c4, self.backbone.c5, cfg.d, cfg.dp, cfg.multiscale
        )
        enc_layer = nn.TransformerEncoderLayer(
            cfg.d, cfg.heads, cfg.ffn_dim, cfg.dropout, batch_first=True
        )
        self.encoder = nn.TransformerEncoder(enc_layer, cfg.enc_layers)
        dec_layer = nn.TransformerDecoderLayer(
            cfg.d, cfg.heads, cfg.ffn_dim, cfg.dropout, batch_first=True
        )
        self.decoder = nn.TransformerDecoder(dec_layer, cfg.dec_layers)
        self.constraints = ConstraintEmbedder(cfg.d, cfg.n_max, cfg.k)
        self.class_head = nn.Linear(cfg.d, cfg.k)
        self.box_head = nn.Linear(cfg.d, 4)

    def image_tokens(self, x: torch.Tensor) -> torch.Tensor:
        f4, f5 = self.backbone(x)
        tokens, (h, w) = self.fusion(f4, f5)
        pos = sinusoidal_position_encoding_2d(h, w, self.cfg.d, device=tokens.device)
        return tokens + pos[None]

    def forward(self, x: torch.Tensor, cats: torch.Tensor, boxes: torch.Tensor) -> GenOutput:
        memory = self.encoder(self.image_tokens(x))
        queries = self.constraints(cats, boxes)
        feats = self.decoder(queries, memory)
        probs = torch.softmax(self.class_head(feats), dim=-1)
        pred_boxes = torch.sigmoid(self.box_head(feats))
        return GenOutput(probs=probs, boxes=pred_boxes)


def constraint_tensors(constraint: Optional[Layout], n_max: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Pad a (possibly None) constraint layout into (cats, boxes) tensors."""
    if constraint is None:
        cats = torch.zeros(1, n_max, dtype=torch.long)
        boxes = torch.zeros(1, n_max, 4)
        return cats, boxes
    padded = pad(constraint, n_max)
    cats = torch.tensor([[int(e.category) for e in padded.elements]], dtype=torch.long)
    boxes = torch.tensor(
        [[list(e.box.as_tuple()) for e in padded.elements]], dtype=torch.float32
    )
    return cats, boxes


def output_to_layout(
    probs: torch.Tensor,
    boxes: torch.Tensor,
    canvas_w: int,
    canvas_h: int,
    threshold: float = 0.5,
) -> Layout:
    """Argmax each slot, drop NonObject and low-confidence slots, unpad."""
    elements = []
    for p, b in zip(probs.detach().cpu().numpy(), boxes.detach().cpu().numpy()):
        cat = int(np.argmax(p))
        if cat == int(Category.NON_OBJECT):
            continue
        if float(p[cat]) < threshold:
            continue
        elements.append(
            Element(Category(cat), BBox(float(b[0]), float(b[1]), float(b[2]), float(b[3])))
        )
    lay = Layout(tuple(elements), canvas_w, canvas_h)
    return unpad(lay)


def generate(
    gen: Generator,
    image: np.ndarray,
    constraint: Optional[Layout] = None,
    threshold: float = 0.5,
    backends: Optional[DamBackends] = None,
    dam: Optional[DamOutput] = None,
    slot_rng: Optional[np.random.Generator] = None,
) -> Layout:
    """Full test-time path: align, forward in eval mode, filter slots.

    `dam` short-circuits the alignment step when the caller already has it.
    `slot_rng` scatters constraint elements over random token slots (the
    training-time placement), giving seed-driven output variety; without it
    constraints occupy the leading slots.
    """
    was_training = gen.training
    gen.eval()
    try:
        with torch.no_grad():
            aligned = dam if dam is not None else align_test(image, backends)
            x = torch.from_numpy(aligned.data[None])
            if slot_rng is not None and constraint is not None:
                from .training import scatter_to_slots

                cats, boxes = scatter_to_slots(constraint, gen.cfg.n_max, slot_rng)
                cats, boxes = cats[None], boxes[None]
            else:
                cats, boxes = constraint_tensors(constraint, gen.cfg.n_max)
            out = gen(x, cats, boxes)
            h, w = aligned.size
            return output_to_layout(out.probs[0], out.boxes[0], w, h, threshold)
    finally:
        if was_training:
            gen.train()
