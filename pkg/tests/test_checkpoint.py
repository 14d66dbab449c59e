"""Weight archive round trips and header validation."""

import json

import numpy as np
import pytest
import torch

from posterlayout.checkpoint import (
    CHECKPOINT_VERSION,
    CheckpointError,
    load_generator,
    load_pair,
    read_header,
    save_checkpoint,
)
from posterlayout.discriminator import DiscConfig, Discriminator
from posterlayout.generator import GenConfig, Generator
from posterlayout.training import TrainConfig

TINY = GenConfig(d=16, enc_layers=1, dec_layers=1, n_max=4, heads=2,
                 ffn_dim=32, dropout=0.0, backbone="mini")
TINY_D = DiscConfig(d=16, enc_layers=1, dec_layers=1, n_max=4, heads=2,
                    ffn_dim=32, dropout=0.0, backbone="mini")


def fresh_gen(seed=0):
    torch.manual_seed(seed)
    return Generator(TINY)


class TestRoundTrip:
    def test_generator_outputs_survive_reload(self, tmp_path):
        gen = fresh_gen()
        path = save_checkpoint(tmp_path / "g.ckpt", gen)
        loaded = load_generator(path)
        x = torch.rand(1, 4, 16, 16, generator=torch.Generator().manual_seed(1))
        cats = torch.zeros(1, 4, dtype=torch.long)
        boxes = torch.zeros(1, 4, 4)
        gen.eval()
        with torch.no_grad():
            a = gen(x, cats, boxes)
            b = loaded(x, cats, boxes)
        assert torch.equal(a.probs, b.probs) and torch.equal(a.boxes, b.boxes)

    def test_pair_round_trip_with_configs(self, tmp_path):
        gen = fresh_gen()
        torch.manual_seed(2)
        disc = Discriminator(TINY_D)
        cfg = TrainConfig(epochs=5, seed=7, n_max=4)
        path = save_checkpoint(tmp_path / "pair.ckpt", gen, disc, cfg, epoch=3)
        g2, d2, header = load_pair(path)
        assert header["epoch"] == 3
        assert TrainConfig.from_dict(header["train_config"]) == cfg
        assert g2.cfg == TINY and d2.cfg == TINY_D
        for (ka, va), (kb, vb) in zip(
            disc.state_dict().items(), d2.state_dict().items()
        ):
            assert ka == kb and torch.equal(va, vb)

    def test_header_carries_version_and_config(self, tmp_path):
        path = save_checkpoint(tmp_path / "g.ckpt", fresh_gen())
        header = read_header(path)
        assert header["version"] == CHECKPOINT_VERSION
        assert GenConfig.from_dict(header["gen_config"]) == TINY


class TestValidation:
    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            read_header(tmp_path / "nope.ckpt")

    def test_garbage_file(self, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not an archive at all")
        with pytest.raises(CheckpointError):
            read_header(bad)

    def test_versionless_header_rejected(self, tmp_path):
        path = save_checkpoint(tmp_path / "g.ckpt", fresh_gen())
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        header = json.loads(bytes(arrays["header"]).decode())
        del header["version"]
        arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
        np.savez(tmp_path / "nover.ckpt.npz", **arrays)
        (tmp_path / "nover.ckpt.npz").rename(tmp_path / "nover.ckpt")
        with pytest.raises(CheckpointError):
            read_header(tmp_path / "nover.ckpt")

    def test_future_version_rejected(self, tmp_path):
        path = save_checkpoint(tmp_path / "g.ckpt", fresh_gen())
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        header = json.loads(bytes(arrays["header"]).decode())
        header["version"] = CHECKPOINT_VERSION + 999
        arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
        np.savez(tmp_path / "future.ckpt.npz", **arrays)
        (tmp_path / "future.ckpt.npz").rename(tmp_path / "future.ckpt")
        with pytest.raises(CheckpointError):
            read_header(tmp_path / "future.ckpt")

    def test_generator_only_checkpoint_has_no_pair(self, tmp_path):
        path = save_checkpoint(tmp_path / "g.ckpt", fresh_gen())
        with pytest.raises(CheckpointError):
            load_pair(path)

    def test_missing_arrays_detected(self, tmp_path):
        path = save_checkpoint(tmp_path / "g.ckpt", fresh_gen())
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        victim = next(k for k in arrays if k.startswith("gen."))
        del arrays[victim]
        np.savez(tmp_path / "partial.ckpt.npz", **arrays)
        (tmp_path / "partial.ckpt.npz").rename(tmp_path / "partial.ckpt")
        with pytest.raises(CheckpointError):
            load_generator(tmp_path / "partial.ckpt")
