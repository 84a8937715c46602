"""Synthetic corpus generator: determinism and construction invariants."""

import json

import pytest

from embedlab.synthetic import (
    DEFAULT_INSTRUCTION,
    GenerationError,
    SENTENCE_LEN,
    build_vocabularies,
    generate,
)
from embedlab.numerics import seeded_rng


def _read_jsonl(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    written = generate(out, n_clusters=4, size=40, seed=9)
    return out, written


def test_same_seed_identical_files(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    generate(a, n_clusters=3, size=20, seed=5)
    generate(b, n_clusters=3, size=20, seed=5)
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_different_seed_differs(tmp_path):
    generate(tmp_path / "a", n_clusters=3, size=20, seed=5)
    generate(tmp_path / "b", n_clusters=3, size=20, seed=6)
    assert (tmp_path / "a/train.jsonl").read_bytes() != (tmp_path / "b/train.jsonl").read_bytes()


def test_vocabulary_sides_are_disjoint_and_hash_unique():
    vocabs = build_vocabularies(6, seeded_rng(0))
    all_words = [w for v in vocabs for w in v.query_side + v.doc_side]
    assert len(set(all_words)) == len(all_words)
    for v in vocabs:
        assert not set(v.query_side) & set(v.doc_side)


def test_train_quadruples_respect_cluster_structure(suite):
    """Positives share the query's cluster vocabulary; negatives never do."""
    out, _ = suite
    vocabs = build_vocabularies(4, seeded_rng(9))  # same seed stream head
    word_cluster = {}
    for c, v in enumerate(vocabs):
        for w in v.query_side + v.doc_side:
            word_cluster[w] = c
    for row in _read_jsonl(out / "train.jsonl"):
        assert row["instruction"] == DEFAULT_INSTRUCTION
        q_clusters = {word_cluster[w] for w in row["query"].split()}
        p_clusters = {word_cluster[w] for w in row["positive"].split()}
        n_clusters_ = {word_cluster[w] for w in row["negative"].split()}
        assert len(q_clusters) == 1
        assert q_clusters == p_clusters
        assert not q_clusters & n_clusters_
        # zero lexical overlap between the query and its positive
        assert not set(row["query"].split()) & set(row["positive"].split())


def test_sts_grades_span_three_values(suite):
    out, written = suite
    assert len(written["sts"]) == 5
    for path in written["sts"]:
        grades = {row["score"] for row in _read_jsonl(path)}
        assert grades == {0.0, 0.5, 1.0}


def test_retrieval_files_consistent(suite):
    out, _ = suite
    corpus = {r["id"] for r in _read_jsonl(out / "retrieval/corpus.jsonl")}
    queries = {r["id"] for r in _read_jsonl(out / "retrieval/queries.jsonl")}
    lines = (out / "retrieval/qrels.tsv").read_text(encoding="utf-8").splitlines()
    for line in lines:
        qid, did, grade = line.split("\t")
        assert qid in queries
        assert did in corpus
        assert grade == "1"
    # every query has relevant documents
    assert {l.split("\t")[0] for l in lines} == queries


def test_labeled_files_cover_all_clusters(suite):
    out, _ = suite
    for task in ("classification", "clustering"):
        rows = _read_jsonl(out / task / f"{task}.jsonl")
        labels = {r["label"] for r in rows}
        assert labels == {f"c{i}" for i in range(4)}
        assert all(len(r["text"].split()) == SENTENCE_LEN for r in rows)


def test_generate_rejects_bad_sizes(tmp_path):
    with pytest.raises(GenerationError):
        generate(tmp_path, n_clusters=1, size=10)
    with pytest.raises(GenerationError):
        generate(tmp_path, n_clusters=8, size=4)
