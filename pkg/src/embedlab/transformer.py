"""Micro decoder-style transformer with a switchable attention mask.

The backbone exposes the full stack of per-block hidden states so that
pooling strategies can consume any layer, and its self-attention mask can
be either causal (position i attends to positions <= i) or bidirectional
(every non-padding position attends to every non-padding position).
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    ShapeError,
    Tensor,
    gather_rows,
    gelu,
    layer_norm,
    matmul,
    seeded_rng,
    softmax,
    stack,
)

CAUSAL = "causal"
BIDIRECTIONAL = "bidirectional"

ATTENTION_MODES = (CAUSAL, BIDIRECTIONAL)

_WORD_RE = re.compile(r"[a-z0-9]+")
_MASK_NEG = -1e9


class ConfigError(ValueError):
    """Invalid model configuration."""


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 4
    hidden_dim: int = 64
    n_heads: int = 4
    ffn_dim: int = 256
    vocab_size: int = 8192
    max_seq_len: int = 64
    attention_mode: str = CAUSAL

    def __post_init__(self):
        if self.hidden_dim % self.n_heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by n_heads {self.n_heads}"
            )
        if self.attention_mode not in ATTENTION_MODES:
            raise ConfigError(f"unknown attention_mode {self.attention_mode!r}")
        for name in ("n_layers", "hidden_dim", "n_heads", "ffn_dim", "vocab_size", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def eos_id(self) -> int:
        return self.vocab_size - 1

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "hidden_dim": self.hidden_dim,
            "n_heads": self.n_heads,
            "ffn_dim": self.ffn_dim,
            "vocab_size": self.vocab_size,
            "max_seq_len": self.max_seq_len,
            "attention_mode": self.attention_mode,
        }


@dataclass
class TokenSequence:
    """Integer token ids ending in the reserved EOS id."""

    ids: list[int]

    @property
    def valid_len(self) -> int:
        return len(self.ids)


@dataclass
class HiddenStates:
    """Per-block hidden states for a batch.

    `layers` holds one [B, T, d] tensor per transformer block (the raw
    embedding-table output is not included). `valid_len[b]` counts real
    tokens including EOS; positions beyond it are padding.
    """

    layers: list[Tensor]
    valid_len: np.ndarray
    attention_mode: str
    attn_weights: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def values(self) -> np.ndarray:
        """Detached [B, l, T, d] view of the stack."""
        return np.stack([t.data for t in self.layers], axis=1)


def tokenize(text: str, config: ModelConfig) -> TokenSequence:
    """Lowercased word-level hashing tokenizer; always appends EOS.

    Content ids land in [0, vocab_size-2] via crc32; EOS is vocab_size-1.
    Input is truncated to max_seq_len-1 words before the EOS is appended.
    """
    words = _WORD_RE.findall(text.lower())[: config.max_seq_len - 1]
    ids = [zlib.crc32(w.encode("utf-8")) % (config.vocab_size - 1) for w in words]
    ids.append(config.eos_id)
    return TokenSequence(ids)


def init_params(config: ModelConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """Gaussian(0, 0.02) weights, zero biases, unit LayerNorm gains."""
    d, f = config.hidden_dim, config.ffn_dim

    def w(*shape):
        return Tensor(rng.normal(0.0, 0.02, size=shape), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape), requires_grad=True)

    params: dict[str, Tensor] = {
        "tok_emb": w(config.vocab_size, d),
        "pos_emb": w(config.max_seq_len, d),
    }
    for i in range(config.n_layers):
        p = f"block{i}."
        params[p + "ln1_g"] = ones(d)
        params[p + "ln1_b"] = zeros(d)
        params[p + "wq"] = w(d, d)
        params[p + "wk"] = w(d, d)
        params[p + "wv"] = w(d, d)
        params[p + "wo"] = w(d, d)
        params[p + "ln2_g"] = ones(d)
        params[p + "ln2_b"] = zeros(d)
        params[p + "w1"] = w(d, f)
        params[p + "b1"] = zeros(f)
        params[p + "w2"] = w(f, d)
        params[p + "b2"] = zeros(d)
    return params


def pad_batch(sequences: list[TokenSequence], config: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad to a common length; returns (ids [B, T], valid_len [B])."""
    valid_len = np.array([s.valid_len for s in sequences], dtype=np.int64)
    too_long = valid_len > config.max_seq_len
    if too_long.any():
        raise ShapeError(
            f"sequence length {valid_len.max()} exceeds max_seq_len {config.max_seq_len}"
        )
    t = int(valid_len.max())
    ids = np.full((len(sequences), t), config.eos_id, dtype=np.int64)
    for b, s in enumerate(sequences):
        ids[b, : s.valid_len] = s.ids
    return ids, valid_len


def _attention_bias(valid_len: np.ndarray, t: int, mode: str) -> np.ndarray:
    """[B, 1, T, T] additive bias: 0 where attendable, -1e9 elsewhere."""
    b = len(valid_len)
    key_ok = np.arange(t)[None, :] < valid_len[:, None]  # [B, T]
    allowed = np.broadcast_to(key_ok[:, None, :], (b, t, t)).copy()
    if mode == CAUSAL:
        allowed &= np.tril(np.ones((t, t), dtype=bool))[None, :, :]
    bias = np.where(allowed, 0.0, _MASK_NEG)
    return bias[:, None, :, :]


def forward(
    sequences: list[TokenSequence],
    config: ModelConfig,
    params: dict[str, Tensor],
    collect_attn: bool = False,
) -> HiddenStates:
    """Run the backbone; returns the stacked outputs of all blocks."""
    ids, valid_len = pad_batch(sequences, config)
    bsz, t = ids.shape
    d, h = config.hidden_dim, config.n_heads
    dh = d // h

    x = gather_rows(params["tok_emb"], ids)
    # learned absolute positions, gathered so the same op handles the slice
    pos_ids = np.broadcast_to(np.arange(t), (bsz, t))
    x = x + gather_rows(params["pos_emb"], pos_ids)

    bias = Tensor(_attention_bias(valid_len, t, config.attention_mode))
    scale = 1.0 / np.sqrt(dh)

    layers: list[Tensor] = []
    attn_weights: list[np.ndarray] = []
    for i in range(config.n_layers):
        p = f"block{i}."
        normed = layer_norm(x, params[p + "ln1_g"], params[p + "ln1_b"])
        q = matmul(normed, params[p + "wq"]).reshape(bsz, t, h, dh).transpose(0, 2, 1, 3)
        k = matmul(normed, params[p + "wk"]).reshape(bsz, t, h, dh).transpose(0, 2, 1, 3)
        v = matmul(normed, params[p + "wv"]).reshape(bsz, t, h, dh).transpose(0, 2, 1, 3)
        scores = matmul(q, k.transpose(0, 1, 3, 2)) * scale + bias
        attn = softmax(scores, axis=-1)
        if collect_attn:
            attn_weights.append(attn.data.copy())
        ctx = matmul(attn, v).transpose(0, 2, 1, 3).reshape(bsz, t, d)
        x = x + matmul(ctx, params[p + "wo"])

        normed2 = layer_norm(x, params[p + "ln2_g"], params[p + "ln2_b"])
        hid = gelu(matmul(normed2, params[p + "w1"]) + params[p + "b1"])
        x = x + matmul(hid, params[p + "w2"]) + params[p + "b2"]
        layers.append(x)

    return HiddenStates(
        layers=layers,
        valid_len=valid_len,
        attention_mode=config.attention_mode,
        attn_weights=attn_weights if collect_attn else None,
    )


def encode_texts(
    texts: list[str], config: ModelConfig, params: dict[str, Tensor], collect_attn: bool = False
) -> HiddenStates:
    """Tokenize and run forward in one call."""
    return forward([tokenize(t, config) for t in texts], config, params, collect_attn=collect_attn)
