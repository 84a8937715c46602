"""The benchmark metrics on hand-checkable inputs.

Walks through Spearman, NDCG@10, the softmax linear probe, and
k-means + V-measure on data small enough to verify by eye.
"""

import numpy as np

from embedlab.evaltasks import (
    RetrievalDataset,
    eval_classification,
    eval_clustering,
    eval_retrieval,
    eval_sts,
    majority_baseline,
    ndcg_at_k,
    spearman,
)

# --- Spearman: rank-based, so any monotone transform scores 1.0 -------------
x = [0.1, 0.4, 0.5, 0.9]
print(f"spearman(x, exp(x))  = {spearman(x, np.exp(x)):+.4f}")
print(f"spearman(x, -x)      = {spearman(x, [-v for v in x]):+.4f}")

# --- NDCG@10: one relevant document at rank 2 -> 1/log2(3) ------------------
print(f"ndcg rank-2 case     = {ndcg_at_k(['a', 'b', 'c'], {'b': 1}):.5f}"
      f"  (1/log2(3) = {1 / np.log2(3):.5f})")

# --- task runners on a lookup-table encoder ---------------------------------
rng = np.random.default_rng(0)
TABLE = {
    "red one": [1.0, 0.0], "red two": [0.9, 0.1], "red query": [0.95, 0.05],
    "blue one": [0.0, 1.0], "blue two": [0.1, 0.9], "blue query": [0.05, 0.95],
}
for i in range(10):  # jittered copies so the probe has a real train/test split
    TABLE[f"red {i}"] = [1.0, rng.uniform(0, 0.2)]
    TABLE[f"blue {i}"] = [rng.uniform(0, 0.2), 1.0]


def encode_fn(texts):
    embs = np.array([TABLE[t] for t in texts])
    return embs / np.linalg.norm(embs, axis=1, keepdims=True)


pairs = [("red one", "red two", 1.0), ("red one", "blue one", 0.0),
         ("blue one", "blue two", 1.0), ("red two", "blue two", 0.0)]
print(f"STS on separable toy = {eval_sts(encode_fn, pairs, 'toy', 'demo').score:.4f}")

data = RetrievalDataset(
    corpus={"d1": "red one", "d2": "red two", "d3": "blue one", "d4": "blue two"},
    queries={"q1": "red query", "q2": "blue query"},
    qrels={("q1", "d1"): 1, ("q1", "d2"): 1, ("q2", "d3"): 1, ("q2", "d4"): 1},
)
print(f"retrieval NDCG@10    = {eval_retrieval(encode_fn, data, 'toy', 'demo').score:.4f}")

texts = [f"red {i}" for i in range(10)] + [f"blue {i}" for i in range(10)]
labels = ["r"] * 10 + ["b"] * 10
probe = eval_classification(encode_fn, texts, labels, "toy", "demo").score
print(f"linear-probe acc     = {probe:.4f}  (majority baseline {majority_baseline(labels):.4f})")
print(f"clustering V-measure = {eval_clustering(encode_fn, texts, labels, 'toy', 'demo').score:.4f}")
