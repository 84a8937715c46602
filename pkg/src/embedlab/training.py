"""Contrastive fine-tuning of the backbone plus pooling head.

Each example carries an instruction-prefixed query, one positive passage
and one hard negative. Within a batch every query scores against all 2B
positives and negatives (in-batch negatives) under a temperature-scaled
InfoNCE loss; AdamW updates all trainable tensors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .numerics import NumericsError, Tensor, matmul, seeded_rng
from .pooling import PoolerConfig, embed_sequences
from .transformer import ConfigError, ModelConfig, tokenize


class DataError(ValueError):
    """Malformed or empty training data."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the diagnostic message."""


@dataclass(frozen=True)
class TrainingExample:
    instruction: str
    query: str
    positive: str
    hard_negative: str

    def __post_init__(self):
        for name in ("query", "positive", "hard_negative"):
            if not getattr(self, name):
                raise DataError(f"training example field {name!r} is empty")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    batch_size: int = 64
    max_steps: int = 200
    temperature: float = 0.05
    seed: int = 0
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 for in-batch negatives")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_steps": self.max_steps,
            "temperature": self.temperature,
            "seed": self.seed,
            "weight_decay": self.weight_decay,
        }


def format_query(instruction: str, query: str) -> str:
    """Instruction-prefixed query; an empty instruction leaves it untouched."""
    if not instruction:
        return query
    return f"Instruct: {instruction}\nQuery: {query}"


def load_examples(path) -> list[TrainingExample]:
    """JSON-lines with fields instruction, query, positive, negative."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                examples.append(
                    TrainingExample(
                        instruction=obj.get("instruction", ""),
                        query=obj["query"],
                        positive=obj["positive"],
                        hard_negative=obj["negative"],
                    )
                )
            except (json.JSONDecodeError, KeyError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not examples:
        raise DataError(f"{path}: no training examples")
    return examples


def info_nce_loss(
    query_embs: Tensor, candidate_embs: Tensor, positive_index: np.ndarray, temperature: float
) -> Tensor:
    """Mean cross-entropy of each query against its positive among all candidates.

    Embeddings must be L2-normalized so the dot products are cosines.
    """
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    logits = matmul(query_embs, candidate_embs.transpose()) * (1.0 / temperature)  # [B, C]
    # stable log-sum-exp: shift by a detached per-row max
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    lse = (logits - shift).exp().sum(axis=1, keepdims=True).log() + shift  # [B, 1]
    b = logits.shape[0]
    pick = np.zeros(logits.shape)
    pick[np.arange(b), positive_index] = 1.0
    pos_logit = (logits * Tensor(pick)).sum(axis=1, keepdims=True)
    return (lse - pos_logit).mean()


@dataclass
class AdamW:
    """Decoupled weight decay Adam over a named parameter dict."""

    params: dict[str, Tensor]
    learning_rate: float
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    _m: dict = field(default_factory=dict)
    _v: dict = field(default_factory=dict)

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            if not p.requires_grad or p.grad is None:
                continue
            m = self._m.setdefault(name, np.zeros_like(p.data))
            v = self._v.setdefault(name, np.zeros_like(p.data))
            m *= self.beta1
            m += (1 - self.beta1) * p.grad
            v *= self.beta2
            v += (1 - self.beta2) * p.grad ** 2
            m_hat = m / (1 - self.beta1 ** t)
            v_hat = v / (1 - self.beta2 ** t)
            p.data -= self.learning_rate * (
                m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data
            )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def grad_norms(params: dict[str, Tensor]) -> dict[str, float]:
    return {
        name: float(np.linalg.norm(p.grad))
        for name, p in params.items()
        if p.grad is not None
    }


def train(
    model: ModelConfig,
    params: dict[str, Tensor],
    pool: PoolerConfig,
    pooler: dict[str, Tensor] | None,
    examples: list[TrainingExample],
    config: TrainConfig,
    on_step=None,
) -> list[float]:
    """Run the contrastive loop; mutates params in place, returns the loss trace."""
    if not examples:
        raise DataError("no training examples")
    rng = seeded_rng(config.seed)
    trainable: dict[str, Tensor] = dict(params)
    if pool.trainable and pooler is not None:
        trainable.update(pooler)
    optim = AdamW(trainable, config.learning_rate, config.weight_decay)

    order = rng.permutation(len(examples))
    cursor = 0
    trace: list[float] = []
    for step in range(config.max_steps):
        batch = []
        while len(batch) < config.batch_size:
            if cursor >= len(order):
                order = rng.permutation(len(examples))
                cursor = 0
            batch.append(examples[order[cursor]])
            cursor += 1

        query_texts = [format_query(ex.instruction, ex.query) for ex in batch]
        cand_texts = [ex.positive for ex in batch] + [ex.hard_negative for ex in batch]
        query_seqs = [tokenize(t, model) for t in query_texts]
        cand_seqs = [tokenize(t, model) for t in cand_texts]

        q = embed_sequences(query_seqs, model, params, pool, pooler)
        c = embed_sequences(cand_seqs, model, params, pool, pooler)
        loss = info_nce_loss(q, c, np.arange(len(batch)), config.temperature)

        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDiverged(
                f"non-finite loss at step {step} (lr={config.learning_rate}); "
                f"gradient norms: {grad_norms(trainable)}"
            )
        optim.zero_grad()
        try:
            loss.backward()
        except NumericsError as exc:
            raise TrainingDiverged(f"numeric failure at step {step}: {exc}") from exc
        optim.step()
        trace.append(value)
        if on_step is not None:
            on_step(step, value)
    return trace
