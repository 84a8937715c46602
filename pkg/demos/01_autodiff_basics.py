"""The reverse-mode autodiff core that everything else is built on.

Builds a small computation with the Tensor class, backpropagates a scalar
loss, and checks one analytic gradient against central finite differences.
"""

import numpy as np

from embedlab.numerics import Tensor, matmul, seeded_rng, softmax

rng = seeded_rng(0)

# y = sum(softmax(x @ w) * t): a miniature "attention-like" graph
x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
w = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
t = Tensor(rng.normal(size=(3, 5)))

loss = (softmax(matmul(x, w)) * t).sum()
loss.backward()

print(f"loss            : {loss.item():.6f}")
print(f"dloss/dw[0, :3] : {w.grad[0, :3]}")

# central finite differences on one element of w
h = 1e-6
probe = w.data.copy()
probe[0, 0] += h
up = (softmax(matmul(Tensor(x.data), Tensor(probe))) * t).sum().item()
probe[0, 0] -= 2 * h
down = (softmax(matmul(Tensor(x.data), Tensor(probe))) * t).sum().item()
numeric = (up - down) / (2 * h)

print(f"analytic w[0,0] : {w.grad[0, 0]:+.10f}")
print(f"numeric  w[0,0] : {numeric:+.10f}")
assert abs(w.grad[0, 0] - numeric) < 1e-6
print("analytic gradient matches finite differences")
