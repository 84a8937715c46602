"""Binary persistence: checkpoint and embedding file contracts."""

import numpy as np
import pytest

from embedlab.checkpoint import (
    CheckpointError,
    checkpoint_checksum,
    load_checkpoint,
    load_embeddings,
    save_checkpoint,
    save_embeddings,
)
from embedlab.config import run_config_from_dict
from embedlab.numerics import Tensor, seeded_rng


def _small_config():
    return run_config_from_dict(
        {
            "preset": "model2",
            "model": {"n_layers": 1, "hidden_dim": 8, "n_heads": 2, "ffn_dim": 16,
                      "vocab_size": 64, "max_seq_len": 8},
            "pooling": {"latent_count": 2, "inner_dim": 8, "pool_heads": 2,
                        "mlp_hidden": 4, "out_dim": 8},
        }
    )


def _tensors(seed=0):
    rng = seeded_rng(seed)
    return {
        "tok_emb": Tensor(rng.normal(size=(64, 8)).astype(np.float32).astype(np.float64)),
        "pool.q": Tensor(rng.normal(size=(2, 8)).astype(np.float32).astype(np.float64)),
        "scalar_bias": Tensor(np.float32(0.25).astype(np.float64)),
    }


def test_save_load_save_byte_identical(tmp_path):
    config = _small_config()
    tensors = _tensors()
    first = tmp_path / "a.ckpt"
    second = tmp_path / "b.ckpt"
    save_checkpoint(first, config, tensors)
    loaded_config, loaded_tensors = load_checkpoint(first)
    save_checkpoint(second, loaded_config, loaded_tensors)
    assert first.read_bytes() == second.read_bytes()


def test_checkpoint_roundtrip_values(tmp_path):
    config = _small_config()
    tensors = _tensors()
    path = tmp_path / "m.ckpt"
    checksum = save_checkpoint(path, config, tensors)
    loaded_config, loaded = load_checkpoint(path)
    assert loaded_config == config
    assert sorted(loaded) == sorted(tensors)
    for name in tensors:
        # f32 at rest: values that are f32-representable survive exactly
        assert np.array_equal(loaded[name].data, tensors[name].data)
        assert loaded[name].requires_grad
    assert checkpoint_checksum(path) == checksum


def test_same_inputs_same_checksum(tmp_path):
    config = _small_config()
    a = save_checkpoint(tmp_path / "a.ckpt", config, _tensors(seed=5))
    b = save_checkpoint(tmp_path / "b.ckpt", config, _tensors(seed=5))
    c = save_checkpoint(tmp_path / "c.ckpt", config, _tensors(seed=6))
    assert a == b
    assert a != c


def test_corruption_detected(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, _small_config(), _tensors())
    raw = bytearray(path.read_bytes())
    raw[50] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_bad_magic_and_version(tmp_path):
    path = tmp_path / "m.ckpt"
    path.write_bytes(b"WHAT" + b"\x00" * 60)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    # flip the version field and re-sign the payload
    import hashlib
    save_checkpoint(path, _small_config(), _tensors())
    raw = bytearray(path.read_bytes())[:-32]
    raw[4] = 99
    raw = bytes(raw)
    path.write_bytes(raw + hashlib.sha256(raw).digest())
    with pytest.raises(CheckpointError) as exc:
        load_checkpoint(path)
    assert "version" in str(exc.value)


def test_no_temp_files_left_behind(tmp_path):
    save_checkpoint(tmp_path / "m.ckpt", _small_config(), _tensors())
    assert sorted(p.name for p in tmp_path.iterdir()) == ["m.ckpt"]


def test_embeddings_roundtrip(tmp_path):
    rng = seeded_rng(1)
    ids = [f"doc{i}" for i in range(5)]
    vectors = rng.normal(size=(5, 3)).astype(np.float32).astype(np.float64)
    path = tmp_path / "e.emb"
    save_embeddings(path, ids, vectors)
    got_ids, got = load_embeddings(path)
    assert got_ids == ids
    assert np.array_equal(got, vectors)


def test_embeddings_empty_file(tmp_path):
    path = tmp_path / "empty.emb"
    save_embeddings(path, [], np.zeros((0, 4)))
    ids, vectors = load_embeddings(path)
    assert ids == []
    assert vectors.shape[0] == 0


def test_embeddings_validation(tmp_path):
    with pytest.raises(CheckpointError):
        save_embeddings(tmp_path / "x.emb", ["a"], np.zeros((2, 3)))
    big_ids = [f"id{i:06d}" for i in range(10000)]  # id table > u16 limit
    with pytest.raises(CheckpointError):
        save_embeddings(tmp_path / "y.emb", big_ids, np.zeros((10000, 1)))
    (tmp_path / "bad.emb").write_bytes(b"NOPE" + b"\x00" * 10)
    with pytest.raises(CheckpointError):
        load_embeddings(tmp_path / "bad.emb")
