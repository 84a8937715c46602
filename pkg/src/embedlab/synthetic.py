"""Synthetic desk-scale corpora: clustered pseudo-word text with paraphrase pairs.

Each topical cluster owns a private vocabulary split into a query side and
a document side with zero lexical overlap, so an untrained model sees no
surface signal while a contrastively trained one can tie the halves
together. The generator emits matching training, STS, retrieval,
classification, and clustering files, all deterministic per seed.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import seeded_rng

DEFAULT_INSTRUCTION = "Retrieve semantically similar text."

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "kl", "st"]
_NUCLEI = ["a", "e", "i", "o", "u", "ai", "ou", "ea"]
_CODAS = ["", "n", "r", "s", "t", "l", "m", "k"]

SENTENCE_LEN = 6
SIDE_SIZE = 12  # words per vocabulary side


class GenerationError(ValueError):
    pass


@dataclass
class ClusterVocab:
    query_side: list[str]
    doc_side: list[str]


def _make_word(rng: np.random.Generator) -> str:
    syllables = rng.integers(2, 4)
    return "".join(
        _ONSETS[rng.integers(len(_ONSETS))]
        + _NUCLEI[rng.integers(len(_NUCLEI))]
        + _CODAS[rng.integers(len(_CODAS))]
        for _ in range(syllables)
    )


def build_vocabularies(n_clusters: int, rng: np.random.Generator, vocab_size: int = 8192) -> list[ClusterVocab]:
    """Distinct pseudo-words whose hashed token ids never collide."""
    used_ids: set[int] = set()
    words: list[str] = []
    while len(words) < n_clusters * 2 * SIDE_SIZE:
        w = _make_word(rng)
        tid = zlib.crc32(w.encode()) % (vocab_size - 1)
        if tid in used_ids:
            continue
        used_ids.add(tid)
        words.append(w)
    vocabs = []
    for c in range(n_clusters):
        base = c * 2 * SIDE_SIZE
        vocabs.append(
            ClusterVocab(
                query_side=words[base : base + SIDE_SIZE],
                doc_side=words[base + SIDE_SIZE : base + 2 * SIDE_SIZE],
            )
        )
    return vocabs


def _sentence(side: list[str], rng: np.random.Generator, n_words: int = SENTENCE_LEN) -> str:
    picks = rng.choice(len(side), size=n_words, replace=False)
    return " ".join(side[i] for i in picks)


def _mixed_sentence(side_a: list[str], side_b: list[str], rng: np.random.Generator) -> str:
    half = SENTENCE_LEN // 2
    a = [side_a[i] for i in rng.choice(len(side_a), size=half, replace=False)]
    b = [side_b[i] for i in rng.choice(len(side_b), size=SENTENCE_LEN - half, replace=False)]
    return " ".join(a + b)


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def generate(
    out_dir,
    n_clusters: int = 8,
    size: int = 2000,
    seed: int = 0,
    n_sts_datasets: int = 5,
    sts_pairs_per_grade: int = 40,
    docs_per_cluster: int = 12,
    queries_per_cluster: int = 5,
    texts_per_cluster: int = 24,
) -> dict[str, list[Path]]:
    """Write the full synthetic suite under `out_dir`; returns written paths."""
    if n_clusters < 2:
        raise GenerationError("need at least 2 clusters")
    if size < n_clusters:
        raise GenerationError(f"size {size} smaller than cluster count {n_clusters}")

    rng = seeded_rng(seed)
    out_dir = Path(out_dir)
    vocabs = build_vocabularies(n_clusters, rng)
    written: dict[str, list[Path]] = {}

    # training quadruples: positive from the same cluster's doc side,
    # hard negative from the neighbouring cluster's doc side
    train_rows = []
    for i in range(size):
        c = int(rng.integers(n_clusters))
        neighbour = (c + 1) % n_clusters
        train_rows.append(
            {
                "instruction": DEFAULT_INSTRUCTION,
                "query": _sentence(vocabs[c].query_side, rng),
                "positive": _sentence(vocabs[c].doc_side, rng),
                "negative": _sentence(vocabs[neighbour].doc_side, rng),
            }
        )
    train_path = out_dir / "train.jsonl"
    _write_jsonl(train_path, train_rows)
    written["train"] = [train_path]

    # STS datasets: three gold grades spanning paraphrase / mixed / unrelated
    written["sts"] = []
    for ds in range(n_sts_datasets):
        rows = []
        for _ in range(sts_pairs_per_grade):
            c = int(rng.integers(n_clusters))
            other = (c + 1 + int(rng.integers(n_clusters - 1))) % n_clusters
            rows.append(
                {
                    "sentence1": _sentence(vocabs[c].query_side, rng),
                    "sentence2": _sentence(vocabs[c].doc_side, rng),
                    "score": 1.0,
                }
            )
            rows.append(
                {
                    "sentence1": _sentence(vocabs[c].query_side, rng),
                    "sentence2": _mixed_sentence(vocabs[c].doc_side, vocabs[other].doc_side, rng),
                    "score": 0.5,
                }
            )
            rows.append(
                {
                    "sentence1": _sentence(vocabs[c].query_side, rng),
                    "sentence2": _sentence(vocabs[other].doc_side, rng),
                    "score": 0.0,
                }
            )
        path = out_dir / "sts" / f"sts_{ds}.jsonl"
        _write_jsonl(path, rows)
        written["sts"].append(path)

    # retrieval: every document of the query's cluster is relevant
    corpus_rows, query_rows, qrel_lines = [], [], []
    for c in range(n_clusters):
        for i in range(docs_per_cluster):
            corpus_rows.append({"id": f"d{c}_{i}", "text": _sentence(vocabs[c].doc_side, rng)})
        for i in range(queries_per_cluster):
            qid = f"q{c}_{i}"
            query_rows.append({"id": qid, "text": _sentence(vocabs[c].query_side, rng)})
            for j in range(docs_per_cluster):
                qrel_lines.append(f"{qid}\td{c}_{j}\t1")
    retrieval_dir = out_dir / "retrieval"
    _write_jsonl(retrieval_dir / "corpus.jsonl", corpus_rows)
    _write_jsonl(retrieval_dir / "queries.jsonl", query_rows)
    retrieval_dir.mkdir(parents=True, exist_ok=True)
    (retrieval_dir / "qrels.tsv").write_text("\n".join(qrel_lines) + "\n", encoding="utf-8")
    written["retrieval"] = [retrieval_dir]

    # labeled texts for classification and clustering (separate draws)
    for task in ("classification", "clustering"):
        rows = []
        for c in range(n_clusters):
            for _ in range(texts_per_cluster // 2):
                rows.append({"text": _sentence(vocabs[c].query_side, rng), "label": f"c{c}"})
                rows.append({"text": _sentence(vocabs[c].doc_side, rng), "label": f"c{c}"})
        path = out_dir / task / f"{task}.jsonl"
        _write_jsonl(path, rows)
        written[task] = [path]

    return written
