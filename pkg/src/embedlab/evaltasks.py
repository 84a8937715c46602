"""MTEB-style task harness: STS, retrieval, classification, clustering.

Each task is scored with its benchmark main metric: Spearman correlation
of cosine similarities, NDCG@10, accuracy of a frozen-embedding linear
probe, and V-measure of seeded k-means respectively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import v_measure_score

from .numerics import seeded_rng

TASK_STS = "STS"
TASK_RETRIEVAL = "Retrieval"
TASK_CLASSIFICATION = "Classification"
TASK_CLUSTERING = "Clustering"

TASK_METRICS = {
    TASK_STS: "SpearmanCosine",
    TASK_RETRIEVAL: "NDCG@10",
    TASK_CLASSIFICATION: "Accuracy",
    TASK_CLUSTERING: "VMeasure",
}


class DatasetError(ValueError):
    """Dataset violates a task precondition."""


@dataclass(frozen=True)
class EvalResult:
    model_id: str
    task: str
    dataset: str
    metric: str
    score: float | None  # None marks an undefined (collapsed) score

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(obj: dict) -> "EvalResult":
        return EvalResult(
            model_id=obj["model_id"],
            task=obj["task"],
            dataset=obj["dataset"],
            metric=obj["metric"],
            score=obj["score"],
        )


@dataclass
class RetrievalDataset:
    corpus: dict[str, str]
    queries: dict[str, str]
    qrels: dict[tuple[str, str], int]

    def __post_init__(self):
        for qid, did in self.qrels:
            if qid not in self.queries:
                raise DatasetError(f"qrels query id {qid!r} not in queries")
            if did not in self.corpus:
                raise DatasetError(f"qrels doc id {did!r} not in corpus")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float | None:
    """Spearman rank correlation (average ranks for ties).

    Returns None when either input is constant, where the coefficient is
    undefined; callers surface this as a missing value rather than 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise DatasetError(f"spearman needs two equal-length 1-d inputs, got {x.shape}, {y.shape}")
    rx, ry = average_ranks(x), average_ranks(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        return None
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


def ndcg_at_k(ranked_ids: list[str], relevance: dict[str, int], k: int = 10) -> float:
    """Graded NDCG with gain 2**rel - 1; 0.0 when nothing relevant exists."""
    if len(set(ranked_ids)) != len(ranked_ids):
        raise DatasetError("ranking contains duplicate ids")
    gains = sorted((r for r in relevance.values() if r > 0), reverse=True)
    if not gains:
        return 0.0
    ideal = sum((2 ** g - 1) / np.log2(i + 2) for i, g in enumerate(gains[:k]))
    dcg = sum(
        (2 ** relevance.get(doc_id, 0) - 1) / np.log2(i + 2)
        for i, doc_id in enumerate(ranked_ids[:k])
    )
    return float(dcg / ideal)


# ---------------------------------------------------------------------------
# task runners; `encode_fn` maps a list of texts to normalized embeddings
# ---------------------------------------------------------------------------


def eval_sts(encode_fn, pairs: list[tuple[str, str, float]], model_id: str, dataset: str) -> EvalResult:
    if len(pairs) < 2:
        raise DatasetError("STS needs at least two pairs")
    a = encode_fn([p[0] for p in pairs])
    b = encode_fn([p[1] for p in pairs])
    cosines = (a * b).sum(axis=1)
    gold = [p[2] for p in pairs]
    score = spearman(cosines, gold)
    return EvalResult(model_id, TASK_STS, dataset, TASK_METRICS[TASK_STS], score)


def eval_retrieval(encode_fn, data: RetrievalDataset, model_id: str, dataset: str) -> EvalResult:
    doc_ids = sorted(data.corpus)
    doc_embs = encode_fn([data.corpus[d] for d in doc_ids])
    qids = sorted(data.queries)
    q_embs = encode_fn([data.queries[q] for q in qids])
    per_query = []
    for qid, q_emb in zip(qids, q_embs):
        relevance = {d: g for (q, d), g in data.qrels.items() if q == qid and g > 0}
        if not relevance:
            continue  # queries with no relevant docs are excluded from the mean
        scores = doc_embs @ q_emb
        order = np.argsort(-scores, kind="stable")
        ranked = [doc_ids[i] for i in order]
        per_query.append(ndcg_at_k(ranked, relevance, k=10))
    score = float(np.mean(per_query)) if per_query else 0.0
    return EvalResult(model_id, TASK_RETRIEVAL, dataset, TASK_METRICS[TASK_RETRIEVAL], score)


def _softmax_probe(train_x, train_y, test_x, n_classes, seed, epochs=100, lr=0.5):
    """Full-batch gradient descent on softmax cross-entropy."""
    rng = seeded_rng(seed)
    d = train_x.shape[1]
    w = rng.normal(0.0, 0.01, size=(d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[train_y]
    for _ in range(epochs):
        logits = train_x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        grad = (probs - onehot) / len(train_y)
        w -= lr * train_x.T @ grad
        b -= lr * grad.sum(axis=0)
    return np.argmax(test_x @ w + b, axis=1)


def eval_classification(
    encode_fn,
    texts: list[str],
    labels: list[str],
    model_id: str,
    dataset: str,
    test_fraction: float = 0.3,
    seed: int = 0,
) -> EvalResult:
    """Linear probe on frozen embeddings; accuracy on a seeded held-out split."""
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DatasetError("classification needs at least two classes")
    class_idx = {c: i for i, c in enumerate(classes)}
    y = np.array([class_idx[l] for l in labels])
    rng = seeded_rng(seed)
    perm = rng.permutation(len(texts))
    n_test = max(1, int(len(texts) * test_fraction))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    for name, idx in (("train", train_idx), ("test", test_idx)):
        if len(set(y[idx])) < len(classes):
            raise DatasetError(f"class missing from {name} split")
    embs = encode_fn(texts)
    pred = _softmax_probe(embs[train_idx], y[train_idx], embs[test_idx], len(classes), seed)
    score = float((pred == y[test_idx]).mean())
    return EvalResult(model_id, TASK_CLASSIFICATION, dataset, TASK_METRICS[TASK_CLASSIFICATION], score)


def majority_baseline(labels: list[str]) -> float:
    """Majority-class accuracy, reported alongside probe accuracy for context."""
    values, counts = np.unique(labels, return_counts=True)
    return float(counts.max() / counts.sum())


def eval_clustering(
    encode_fn, texts: list[str], labels: list[str], model_id: str, dataset: str, seed: int = 0
) -> EvalResult:
    """Seeded k-means (k = #gold classes, 10 restarts) scored by V-measure."""
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DatasetError("clustering needs at least two gold classes")
    if len(texts) < len(classes):
        raise DatasetError("fewer points than clusters")
    embs = encode_fn(texts)
    km = KMeans(n_clusters=len(classes), n_init=10, random_state=seed)
    pred = km.fit_predict(embs)
    score = float(v_measure_score(labels, pred))
    return EvalResult(model_id, TASK_CLUSTERING, dataset, TASK_METRICS[TASK_CLUSTERING], score)


# ---------------------------------------------------------------------------
# dataset file loaders (JSON-lines, UTF-8)
# ---------------------------------------------------------------------------


def _iter_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON") from exc


def load_sts(path) -> list[tuple[str, str, float]]:
    pairs = []
    for obj in _iter_jsonl(path):
        pairs.append((obj["sentence1"], obj["sentence2"], float(obj["score"])))
    return pairs


def load_labeled(path) -> tuple[list[str], list[str]]:
    texts, labels = [], []
    for obj in _iter_jsonl(path):
        texts.append(obj["text"])
        labels.append(str(obj["label"]))
    return texts, labels


def load_retrieval(directory) -> RetrievalDataset:
    directory = Path(directory)
    corpus = {obj["id"]: obj["text"] for obj in _iter_jsonl(directory / "corpus.jsonl")}
    queries = {obj["id"]: obj["text"] for obj in _iter_jsonl(directory / "queries.jsonl")}
    qrels = {}
    with open(directory / "qrels.tsv", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DatasetError(f"{directory / 'qrels.tsv'}:{lineno}: expected 3 tab-separated fields")
            qrels[(parts[0], parts[1])] = int(parts[2])
    return RetrievalDataset(corpus, queries, qrels)
