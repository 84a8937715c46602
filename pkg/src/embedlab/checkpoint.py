"""Binary persistence: model checkpoints and embedding files.

Checkpoint layout (little-endian): magic "ELC1", u32 version, u32 header
length, UTF-8 JSON header (the RunConfig snapshot), u32 tensor count,
then per tensor u16 name length + name, u8 ndim, u32 dims, f32 payload,
and finally a sha256 digest of everything before it.

Embedding file layout: magic "EMB1", u32 count, u32 dim, count*dim f32
row-major values, then a u16-length-prefixed UTF-8 id table joined by
newlines.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .config import RunConfig, run_config_from_dict
from .numerics import Tensor

CKPT_MAGIC = b"ELC1"
CKPT_VERSION = 1
EMB_MAGIC = b"EMB1"


class CheckpointError(ValueError):
    """Corrupt, truncated, or incompatible checkpoint/embedding file."""


def _atomic_write(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path, config: RunConfig, tensors: dict[str, Tensor]) -> str:
    """Write the checkpoint; returns the hex content checksum."""
    buf = io.BytesIO()
    header = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    buf.write(CKPT_MAGIC)
    buf.write(struct.pack("<II", CKPT_VERSION, len(header)))
    buf.write(header)
    names = sorted(tensors)
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        # np.asarray keeps 0-d shapes (ascontiguousarray would promote to 1-d)
        data = np.asarray(tensors[name].data, dtype="<f4")
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", data.ndim))
        buf.write(struct.pack(f"<{data.ndim}I", *data.shape))
        buf.write(data.tobytes())
    digest = hashlib.sha256(buf.getvalue()).digest()
    buf.write(digest)
    _atomic_write(path, buf.getvalue())
    return digest.hex()


def load_checkpoint(path) -> tuple[RunConfig, dict[str, Tensor]]:
    raw = Path(path).read_bytes()
    if len(raw) < 44 or raw[:4] != CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    (n_tensors,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    tensors: dict[str, Tensor] = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        tensors[name] = Tensor(data.reshape(shape).astype(np.float64), requires_grad=True)
    return run_config_from_dict(_strip_header(header)), tensors


def _strip_header(header: dict) -> dict:
    # header is already a RunConfig snapshot; passed through strict parsing
    return header


def checkpoint_checksum(path) -> str:
    raw = Path(path).read_bytes()
    return raw[-32:].hex()


# ---------------------------------------------------------------------------
# embedding files
# ---------------------------------------------------------------------------


def save_embeddings(path, ids: list[str], vectors: np.ndarray) -> None:
    if len(ids) != len(vectors):
        raise CheckpointError(f"{len(ids)} ids but {len(vectors)} vectors")
    table = "\n".join(ids).encode("utf-8")
    if len(table) > 0xFFFF:
        raise CheckpointError("id table exceeds the u16 length prefix")
    dim = vectors.shape[1] if vectors.size else 0
    buf = io.BytesIO()
    buf.write(EMB_MAGIC)
    buf.write(struct.pack("<II", len(ids), dim))
    buf.write(np.ascontiguousarray(vectors, dtype="<f4").tobytes())
    buf.write(struct.pack("<H", len(table)))
    buf.write(table)
    _atomic_write(path, buf.getvalue())


def load_embeddings(path) -> tuple[list[str], np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != EMB_MAGIC:
        raise CheckpointError(f"{path}: not an embedding file")
    count, dim = struct.unpack_from("<II", raw, 4)
    offset = 12
    vectors = np.frombuffer(raw, dtype="<f4", count=count * dim, offset=offset)
    offset += 4 * count * dim
    (table_len,) = struct.unpack_from("<H", raw, offset)
    offset += 2
    table = raw[offset : offset + table_len].decode("utf-8")
    ids = table.split("\n") if table else []
    if len(ids) != count:
        raise CheckpointError(f"{path}: id table has {len(ids)} entries, expected {count}")
    return ids, vectors.reshape(count, dim).astype(np.float64)
