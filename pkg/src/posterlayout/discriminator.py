"""Adversary judging whether an (image, constraint, layout) triple looks designed.

Structurally a smaller sibling of the generator: same backbone/fusion/encoder
stack over the aligned image, but the decoder queries are the constraint and
candidate layout packed into one sequence.  Candidate categories arrive as
probability rows and pass through a straight-through argmax so the judgment
is made on hard choices while gradients still reach the generator.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
from torch import nn

from .core import NUM_CATEGORIES
from .generator import (
    BACKBONE_PRESETS,
    MultiScaleFusion,
    ResidualBackbone,
    sinusoidal_position_encoding_2d,
)


@dataclass(frozen=True)
class DiscConfig:
    d: int = 256
    enc_layers: int = 4
    dec_layers: int = 4
    n_max: int = 20
    k: int = NUM_CATEGORIES
    heads: int = 8
    ffn_dim: int = 2048
    dropout: float = 0.1
    backbone: str = "shallow"
    multiscale: bool = True
    d_prime: int = 0

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError("d must be divisible by heads")
        if self.d % 4 != 0:
            raise ValueError("d must be divisible by 4")
        if self.backbone not in BACKBONE_PRESETS:
            raise ValueError(f"unknown backbone preset {self.backbone!r}")

    @property
    def dp(self) -> int:
        return self.d_prime or self.d // 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DiscConfig":
        return cls(**data)


def straight_through_argmax(probs: torch.Tensor) -> torch.Tensor:
    """Forward: one-hot at the argmax (ties -> lowest index). Backward: identity."""
    k = probs.shape[-1]
    idx = torch.arange(k, device=probs.device)
    is_max = probs == probs.amax(dim=-1, keepdim=True)
    first = torch.where(is_max, idx.expand_as(probs), k).min(dim=-1).values
    onehot = nn.functional.one_hot(first, k).to(probs.dtype)
    return onehot + probs - probs.detach()


class Discriminator(nn.Module):
    def __init__(self, cfg: DiscConfig):
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
        # shared across both sequence halves; the segment embedding tells them apart
        self.cat_proj = nn.Linear(cfg.k, cfg.d, bias=False)
        self.box_proj = nn.Linear(4, cfg.d)
        self.slot_pos = nn.Embedding(cfg.n_max, cfg.d)
        self.segment = nn.Embedding(2, cfg.d)
        self.fc = nn.Linear(cfg.d, 1)

    def prepare_layout_tokens(
        self,
        layout_cats: torch.Tensor,
        layout_boxes: torch.Tensor,
        cons_cats: torch.Tensor,
        cons_boxes: torch.Tensor,
        predicted: bool,
    ) -> torch.Tensor:
        """Pack constraint + candidate into a 2*n_max token sequence.

        `layout_cats` is (B, n, k) probability rows when predicted=True, else
        (B, n) integer labels.  Predicted rows go through the straight-through
        argmax; any slot that lands on NonObject has its box zeroed in the
        forward value, with no gradient path through the reset.
        """
        n = self.cfg.n_max
        if layout_boxes.shape[1] != n or cons_boxes.shape[1] != n:
            raise ValueError(f"expected {n} slots per half")
        if predicted:
            onehot = straight_through_argmax(layout_cats)
            real_mask = (1.0 - onehot[..., 0]).detach().unsqueeze(-1)
            boxes = layout_boxes * real_mask
        else:
            onehot = nn.functional.one_hot(layout_cats, self.cfg.k).to(self.cat_proj.weight.dtype)
            boxes = layout_boxes
        slots = torch.arange(n, device=layout_boxes.device)
        pos = self.slot_pos(slots)[None]
        cons_oh = nn.functional.one_hot(cons_cats, self.cfg.k).to(self.cat_proj.weight.dtype)
        cons_tok = self.cat_proj(cons_oh) + self.box_proj(cons_boxes) + pos + self.segment.weight[0]
        lay_tok = self.cat_proj(onehot) + self.box_proj(boxes) + pos + self.segment.weight[1]
        return torch.cat([cons_tok, lay_tok], dim=1)

    def encode_image(self, x: torch.Tensor) -> torch.Tensor:
        """Image memory for cross-attention; reusable across several scores."""
        f4, f5 = self.backbone(x)
        img_tokens, (h, w) = self.fusion(f4, f5)
        pos = sinusoidal_position_encoding_2d(h, w, self.cfg.d, device=img_tokens.device)
        return self.encoder(img_tokens + pos[None])

    def score_tokens(self, memory: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
        feats = self.decoder(tokens, memory)
        return self.fc(feats.mean(dim=1)).squeeze(-1)

    def score(self, x: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
        """Scalar realness logit per batch item."""
        return self.score_tokens(self.encode_image(x), tokens)

    def forward(
        self,
        x: torch.Tensor,
        layout_cats: torch.Tensor,
        layout_boxes: torch.Tensor,
        cons_cats: torch.Tensor,
        cons_boxes: torch.Tensor,
        predicted: bool,
    ) -> torch.Tensor:
        tokens = self.prepare_layout_tokens(
            layout_cats, layout_boxes, cons_cats, cons_boxes, predicted
        )
        return self.score(x, tokens)
