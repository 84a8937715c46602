"""Pooling strategies: EOS-last, mean, and the trainable cross-attention heads.

The two trainable heads share one code path: a stack of summary vectors is
(optionally) offset by a per-layer weight matrix, projected to keys and
values, attended over by a fixed set of trainable latent queries, averaged
over the latents, and pushed through a two-layer GELU MLP. For the
last-layer variant the "stack" is the last block's token states and the
layer-weight matrix is unused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ShapeError, Tensor, gelu, matmul, select_positions, softmax, stack
from .transformer import (
    BIDIRECTIONAL,
    CAUSAL,
    ConfigError,
    HiddenStates,
    ModelConfig,
    TokenSequence,
    forward,
    tokenize,
)

EOS_LAST = "eos_last"
MEAN = "mean"
LAST_LAYER_TRAINABLE = "last_layer_trainable"
MULTI_LAYER_TRAINABLE = "multi_layer_trainable"

STRATEGIES = (EOS_LAST, MEAN, LAST_LAYER_TRAINABLE, MULTI_LAYER_TRAINABLE)

_MASK_NEG = -1e9


@dataclass(frozen=True)
class PoolerConfig:
    strategy: str = EOS_LAST
    latent_count: int = 64      # number of trainable latent queries
    inner_dim: int = 64         # key/value/query width of the cross-attention
    pool_heads: int = 4
    mlp_hidden: int = 128
    out_dim: int = 64

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown pooling strategy {self.strategy!r}")
        if self.inner_dim % self.pool_heads != 0:
            raise ConfigError(
                f"inner_dim {self.inner_dim} not divisible by pool_heads {self.pool_heads}"
            )

    @property
    def trainable(self) -> bool:
        return self.strategy in (LAST_LAYER_TRAINABLE, MULTI_LAYER_TRAINABLE)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "latent_count": self.latent_count,
            "inner_dim": self.inner_dim,
            "pool_heads": self.pool_heads,
            "mlp_hidden": self.mlp_hidden,
            "out_dim": self.out_dim,
        }


def validate_strategy(strategy: str, attention_mode: str) -> None:
    """EOS-last is only meaningful under causal attention."""
    if strategy == EOS_LAST and attention_mode == BIDIRECTIONAL:
        raise ConfigError("eos_last pooling is incompatible with bidirectional attention")


def init_pooler_params(
    model: ModelConfig, pool: PoolerConfig, rng: np.random.Generator
) -> dict[str, Tensor]:
    """Layer weights start at zero (unbiased mixture), queries Gaussian(0, 0.02),
    projections and MLP Xavier-scaled so the head's output is O(1) at init."""
    d, dp = model.hidden_dim, pool.inner_dim

    def xavier(fan_in, fan_out):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        return Tensor(rng.normal(0.0, std, size=(fan_in, fan_out)), requires_grad=True)

    return {
        "pool.layer_w": Tensor(np.zeros((model.n_layers, d)), requires_grad=True),
        "pool.wk": xavier(d, dp),
        "pool.wv": xavier(d, dp),
        "pool.q": Tensor(rng.normal(0.0, 0.02, size=(pool.latent_count, dp)), requires_grad=True),
        "pool.m1": xavier(dp, pool.mlp_hidden),
        "pool.b1": Tensor(np.zeros(pool.mlp_hidden), requires_grad=True),
        "pool.m2": xavier(pool.mlp_hidden, pool.out_dim),
        "pool.b2": Tensor(np.zeros(pool.out_dim), requires_grad=True),
    }


def pool_eos_last(hidden: HiddenStates) -> Tensor:
    """Last block's state at the last valid (EOS) position. Causal only."""
    if hidden.attention_mode != CAUSAL:
        raise ConfigError("eos_last pooling requires causal attention")
    return select_positions(hidden.layers[-1], hidden.valid_len - 1)


def pool_mean(hidden: HiddenStates) -> Tensor:
    """Mean of the last block's states over non-padding positions."""
    return _masked_mean(hidden.layers[-1], hidden.valid_len)


def _masked_mean(states: Tensor, valid_len: np.ndarray) -> Tensor:
    t = states.shape[1]
    mask = (np.arange(t)[None, :] < valid_len[:, None]).astype(np.float64)
    summed = (states * Tensor(mask[:, :, None])).sum(axis=1)
    return summed * Tensor(1.0 / valid_len.astype(np.float64)).reshape(-1, 1)


def summarize_layers(hidden: HiddenStates) -> Tensor:
    """One summary vector per layer: EOS state (causal) or token mean (bidirectional).

    Returns a [B, l, d] tensor.
    """
    if hidden.attention_mode == CAUSAL:
        rows = [select_positions(layer, hidden.valid_len - 1) for layer in hidden.layers]
    else:
        rows = [_masked_mean(layer, hidden.valid_len) for layer in hidden.layers]
    return stack(rows, axis=1)


def pool_trainable(
    inputs: Tensor,
    pooler: dict[str, Tensor],
    pool: PoolerConfig,
    multi_layer: bool,
    key_valid: np.ndarray | None = None,
) -> Tensor:
    """Latent-query cross-attention head over a [B, L, d] stack.

    `multi_layer` adds the trainable layer-weight matrix to the input rows
    (the stack axis is then the layer axis); otherwise the axis is the
    token axis and `key_valid` masks out padding keys.
    """
    bsz, length, d = inputs.shape
    dp, heads = pool.inner_dim, pool.pool_heads
    dh = dp // heads
    r = pool.latent_count

    h = inputs
    if multi_layer:
        if pooler["pool.layer_w"].shape != (length, d):
            raise ShapeError(
                f"layer weights {pooler['pool.layer_w'].shape} do not match stack {(length, d)}"
            )
        h = h + pooler["pool.layer_w"]

    k = matmul(h, pooler["pool.wk"]).reshape(bsz, length, heads, dh).transpose(0, 2, 1, 3)
    v = matmul(h, pooler["pool.wv"]).reshape(bsz, length, heads, dh).transpose(0, 2, 1, 3)
    q = pooler["pool.q"].reshape(r, heads, dh).transpose(1, 0, 2)  # [heads, r, dh]

    scores = matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(dh))  # [B, heads, r, L]
    if key_valid is not None:
        bias = np.where(key_valid, 0.0, _MASK_NEG)[:, None, None, :]
        scores = scores + Tensor(bias)
    attn = softmax(scores, axis=-1)
    ctx = matmul(attn, v).transpose(0, 2, 1, 3).reshape(bsz, r, dp)
    pooled = ctx.mean(axis=1)  # collapse the latent axis

    hid = gelu(matmul(pooled, pooler["pool.m1"]) + pooler["pool.b1"])
    return matmul(hid, pooler["pool.m2"]) + pooler["pool.b2"]


def l2_normalize(x: Tensor, eps: float = 1e-30) -> Tensor:
    # eps only guards the exactly-zero vector; it must stay far below any
    # realistic squared norm or output norms drift away from 1
    norm = ((x * x).sum(axis=-1, keepdims=True) + eps).power(-0.5)
    return x * norm


def embed_hidden(
    hidden: HiddenStates, pool: PoolerConfig, pooler: dict[str, Tensor] | None
) -> Tensor:
    """Apply the configured pooling strategy; output is L2-normalized [B, out_dim]."""
    validate_strategy(pool.strategy, hidden.attention_mode)
    if pool.strategy == EOS_LAST:
        emb = pool_eos_last(hidden)
    elif pool.strategy == MEAN:
        emb = pool_mean(hidden)
    elif pool.strategy == LAST_LAYER_TRAINABLE:
        t = hidden.layers[-1].shape[1]
        key_valid = np.arange(t)[None, :] < hidden.valid_len[:, None]
        emb = pool_trainable(
            hidden.layers[-1], pooler, pool, multi_layer=False, key_valid=key_valid
        )
    else:
        emb = pool_trainable(summarize_layers(hidden), pooler, pool, multi_layer=True)
    return l2_normalize(emb)


def embed_sequences(
    sequences: list[TokenSequence],
    model: ModelConfig,
    params: dict[str, Tensor],
    pool: PoolerConfig,
    pooler: dict[str, Tensor] | None,
) -> Tensor:
    return embed_hidden(forward(sequences, model, params), pool, pooler)


def encode(
    texts: list[str],
    model: ModelConfig,
    params: dict[str, Tensor],
    pool: PoolerConfig,
    pooler: dict[str, Tensor] | None,
    batch_size: int = 64,
) -> np.ndarray:
    """Encode texts to normalized embeddings, ready for cosine similarity."""
    validate_strategy(pool.strategy, model.attention_mode)
    out = []
    for start in range(0, len(texts), batch_size):
        chunk = texts[start : start + batch_size]
        seqs = [tokenize(t, model) for t in chunk]
        out.append(embed_sequences(seqs, model, params, pool, pooler).data)
    if not out:
        return np.zeros((0, pool.out_dim))
    return np.concatenate(out, axis=0)
