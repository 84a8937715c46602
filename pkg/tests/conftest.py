"""Shared test helpers: finite-difference gradient checking and tiny configs."""

import numpy as np
import pytest

from embedlab.numerics import Tensor, seeded_rng
from embedlab.transformer import ModelConfig


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Scale-free distance between two gradient arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def grad_check(make_loss, arrays, h=1e-5, tol=1e-4):
    """Compare analytic gradients against central finite differences.

    `make_loss` maps a list of leaf Tensors to a scalar Tensor; `arrays`
    are the leaf values. Every element of every leaf is perturbed.
    """
    leaves = [Tensor(np.array(a, dtype=np.float64), requires_grad=True) for a in arrays]
    loss = make_loss(*leaves)
    loss.backward()
    for leaf in leaves:
        assert leaf.grad is not None, "leaf did not receive a gradient"
        fd = np.zeros_like(leaf.data)
        it = np.nditer(leaf.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = leaf.data[idx]
            leaf.data[idx] = orig + h
            up = make_loss(*leaves).item()
            leaf.data[idx] = orig - h
            down = make_loss(*leaves).item()
            leaf.data[idx] = orig
            fd[idx] = (up - down) / (2.0 * h)
        err = rel_error(fd, leaf.grad)
        assert err < tol, f"gradient mismatch: relative error {err:.3e}"


def random_weights(shape, seed):
    """Fixed random array used to reduce op outputs to a scalar loss."""
    return seeded_rng(seed).normal(size=shape)


@pytest.fixture
def tiny_model():
    """Smallest useful backbone; keeps forward/backward tests fast."""
    return ModelConfig(
        n_layers=2, hidden_dim=8, n_heads=2, ffn_dim=16, vocab_size=128, max_seq_len=16
    )
