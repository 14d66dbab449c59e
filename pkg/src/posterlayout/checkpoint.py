"""Weight checkpoints: one .npz archive of named arrays plus a JSON header.

The header always carries a format version and the generator config; training
checkpoints add the discriminator and trainer configs so runs can resume.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .discriminator import DiscConfig, Discriminator
from .generator import GenConfig, Generator

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable, incomplete, or version-less checkpoint files."""


def _state_arrays(model: torch.nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {f"{prefix}.{k}": v.detach().cpu().numpy() for k, v in model.state_dict().items()}


def save_checkpoint(
    path: str | Path,
    gen: Generator,
    disc: Optional[Discriminator] = None,
    train_cfg=None,
    epoch: Optional[int] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "version": CHECKPOINT_VERSION,
        "gen_config": gen.cfg.to_dict(),
    }
    if disc is not None:
        header["disc_config"] = disc.cfg.to_dict()
    if train_cfg is not None:
        header["train_config"] = train_cfg.to_dict()
    if epoch is not None:
        header["epoch"] = epoch
    arrays = _state_arrays(gen, "gen")
    if disc is not None:
        arrays.update(_state_arrays(disc, "disc"))
    arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path.write_bytes(buf.getvalue())
    return path


def read_header(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path) as data:
            if "header" not in data:
                raise CheckpointError(f"no header in checkpoint: {path}")
            header = json.loads(bytes(data["header"]).decode())
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if "version" not in header:
        raise CheckpointError(f"checkpoint header lacks a version field: {path}")
    if header["version"] > CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {header['version']} is newer than supported "
            f"{CHECKPOINT_VERSION}: {path}"
        )
    return header


def _load_into(model: torch.nn.Module, data, prefix: str, path: Path) -> None:
    state = {}
    want = set(model.state_dict().keys())
    for key in data.files:
        if key.startswith(prefix + "."):
            state[key[len(prefix) + 1 :]] = torch.from_numpy(np.array(data[key]))
    missing = want - set(state.keys())
    if missing:
        raise CheckpointError(f"checkpoint {path} lacks arrays: {sorted(missing)[:5]} ...")
    model.load_state_dict(state)


def load_generator(path: str | Path) -> Generator:
    path = Path(path)
    header = read_header(path)
    gen = Generator(GenConfig.from_dict(header["gen_config"]))
    with np.load(path) as data:
        _load_into(gen, data, "gen", path)
    gen.eval()
    return gen


def load_pair(path: str | Path) -> tuple[Generator, Discriminator, dict]:
    path = Path(path)
    header = read_header(path)
    if "disc_config" not in header:
        raise CheckpointError(f"checkpoint has no discriminator: {path}")
    gen = Generator(GenConfig.from_dict(header["gen_config"]))
    disc = Discriminator(DiscConfig.from_dict(header["disc_config"]))
    with np.load(path) as data:
        _load_into(gen, data, "gen", path)
        _load_into(disc, data, "disc", path)
    return gen, disc, header
