"""Layer diagnostics: dump format, correlation matrices, per-layer scoring."""

import numpy as np
import pytest

from embedlab.analysis import (
    DumpError,
    HiddenStateDump,
    LayerCorrelationMatrix,
    argmax_layer,
    csv_to_matrix,
    dump_from_model,
    dump_item_texts,
    layer_correlation,
    load_dump,
    matrix_to_csv,
    matrix_to_svg,
    per_layer_eval,
    render_heatmap,
    save_dump,
)
from embedlab.evaltasks import RetrievalDataset, eval_sts, spearman
from embedlab.numerics import seeded_rng
from embedlab.transformer import init_params


def _dump(values, source="test"):
    return HiddenStateDump(values=np.asarray(values, dtype=np.float64), source=source)


# ---------------------------------------------------------------------------
# binary dump format
# ---------------------------------------------------------------------------


def test_dump_roundtrip(tmp_path):
    rng = seeded_rng(0)
    dump = _dump(rng.normal(size=(3, 4, 5)).astype(np.float32), source="model-x")
    path = tmp_path / "states.hsd"
    save_dump(dump, path)
    loaded = load_dump(path)
    assert loaded.source == "model-x"
    assert loaded.values.shape == (3, 4, 5)
    assert np.array_equal(loaded.values, dump.values.astype(np.float32).astype(np.float64))


def test_dump_bad_magic(tmp_path):
    path = tmp_path / "bad.hsd"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(DumpError):
        load_dump(path)


def test_dump_truncated_and_trailing(tmp_path):
    rng = seeded_rng(1)
    dump = _dump(rng.normal(size=(2, 2, 3)))
    path = tmp_path / "states.hsd"
    save_dump(dump, path)
    raw = path.read_bytes()
    (tmp_path / "short.hsd").write_bytes(raw[:-3])
    with pytest.raises(DumpError):
        load_dump(tmp_path / "short.hsd")
    (tmp_path / "long.hsd").write_bytes(raw + b"xx")
    with pytest.raises(DumpError):
        load_dump(tmp_path / "long.hsd")


def test_dump_from_model_shape_and_order(tiny_model):
    params = init_params(tiny_model, seeded_rng(2))
    texts = ["alpha beta", "gamma", "delta epsilon zeta"]
    dump = dump_from_model(texts, tiny_model, params, source="tiny")
    assert dump.values.shape == (tiny_model.n_layers, 3, tiny_model.hidden_dim)
    # each item's row must match the per-text summary, independent of batching
    solo = dump_from_model(["gamma"], tiny_model, params, source="tiny")
    assert np.abs(dump.values[:, 1] - solo.values[:, 0]).max() <= 1e-12


# ---------------------------------------------------------------------------
# layer correlation
# ---------------------------------------------------------------------------


def test_identical_layers_all_ones():
    rng = seeded_rng(3)
    layer = rng.normal(size=(1, 5, 8))
    dump = _dump(np.repeat(layer, 4, axis=0))
    matrix = layer_correlation(dump).values
    assert np.abs(matrix - 1.0).max() <= 1e-12


def test_monotone_transform_layer_correlates_fully():
    rng = seeded_rng(4)
    a = rng.normal(size=(2, 6))
    dump = _dump(np.stack([a, np.exp(a)], axis=0))
    matrix = layer_correlation(dump).values
    assert matrix[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_layer_correlation_matches_oracle():
    rng = seeded_rng(5)
    dump = _dump(rng.normal(size=(3, 2, 7)))
    matrix = layer_correlation(dump).values
    for a in range(3):
        for b in range(3):
            want = np.mean(
                [spearman(dump.values[a, i], dump.values[b, i]) for i in range(2)]
            )
            assert abs(matrix[a, b] - want) <= 1e-12


def test_layer_correlation_symmetry_and_diagonal():
    rng = seeded_rng(6)
    dump = _dump(rng.normal(size=(5, 3, 6)))
    matrix = layer_correlation(dump).values
    assert np.abs(matrix - matrix.T).max() <= 1e-12
    assert np.abs(np.diag(matrix) - 1.0).max() <= 1e-12


def test_layer_correlation_skips_constant_vectors():
    rng = seeded_rng(7)
    values = rng.normal(size=(2, 2, 5))
    values[1, 0, :] = 3.0  # constant vector: item 0 unusable for pairs with layer 1
    matrix = layer_correlation(_dump(values)).values
    want = spearman(values[0, 1], values[1, 1])  # only item 1 contributes
    assert matrix[0, 1] == pytest.approx(want, abs=1e-12)
    values[1, 1, :] = 3.0  # now no item is usable for the pair
    matrix = layer_correlation(_dump(values)).values
    assert np.isnan(matrix[0, 1]) and np.isnan(matrix[1, 0])
    assert np.isnan(matrix[1, 1])  # a constant layer cannot self-correlate


def test_layer_correlation_needs_dim_two():
    with pytest.raises(DumpError):
        layer_correlation(_dump(np.zeros((2, 2, 1))))


# ---------------------------------------------------------------------------
# per-layer evaluation
# ---------------------------------------------------------------------------


def _sts_task():
    return [("a", "b", 0.0), ("c", "d", 0.5), ("e", "f", 1.0)]


def test_per_layer_eval_flat_for_identical_layers():
    rng = seeded_rng(8)
    layer = rng.normal(size=(1, 6, 8))
    dump = _dump(np.repeat(layer, 3, axis=0))
    scores = per_layer_eval(dump, "sts", _sts_task())
    values = [s for _, s in scores]
    assert all(abs(v - values[0]) < 1e-9 for v in values)


def test_per_layer_eval_planted_signal_argmax():
    """Layer 2 encodes the gold similarity structure; others are noise."""
    rng = seeded_rng(9)
    pairs = [(f"s{i}", f"t{i}", g) for i, g in enumerate([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])]
    n, d = len(pairs), 8
    values = rng.normal(size=(4, 2 * n, d))
    base = rng.normal(size=d)
    other = rng.normal(size=d)
    for i, (_, _, gold) in enumerate(pairs):
        values[2, i] = base
        # interpolate the partner toward base so cosine increases with gold
        values[2, n + i] = (1 - gold) * other + gold * base
    scores = per_layer_eval(_dump(values), "sts", pairs)
    assert argmax_layer(scores) == 2


def test_per_layer_eval_single_layer_equals_evaltasks_score():
    rng = seeded_rng(10)
    pairs = _sts_task()
    table = {t: rng.normal(size=6) for p in pairs for t in p[:2]}

    def encode_fn(texts):
        x = np.array([table[t] for t in texts])
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    want = eval_sts(encode_fn, pairs, "m", "ds").score
    items = dump_item_texts("sts", pairs)
    dump = _dump(np.array([table[t] for t in items])[None, :, :])
    scores = per_layer_eval(dump, "sts", pairs)
    assert scores[0][1] == pytest.approx(want, abs=1e-12)


def test_per_layer_eval_retrieval_kind():
    rng = seeded_rng(11)
    data = RetrievalDataset(
        corpus={"d0": "x0", "d1": "x1"},
        queries={"q0": "y0"},
        qrels={("q0", "d0"): 1},
    )
    items = dump_item_texts("retrieval", data)
    assert items == ["y0", "x0", "x1"]
    values = np.zeros((2, 3, 4))
    values[0] = [[1, 0, 0, 0], [1, 0.1, 0, 0], [-1, 0, 0, 0]]  # relevant doc first
    values[1] = [[1, 0, 0, 0], [-1, 0, 0, 0], [1, 0.1, 0, 0]]  # relevant doc last
    scores = per_layer_eval(_dump(values), "retrieval", data)
    assert scores[0][1] == pytest.approx(1.0, abs=1e-12)
    assert scores[1][1] == pytest.approx(1.0 / np.log2(3), abs=1e-9)
    assert argmax_layer(scores) == 0


def test_per_layer_eval_item_count_mismatch():
    with pytest.raises(DumpError):
        per_layer_eval(_dump(np.zeros((1, 3, 4))), "sts", _sts_task())


def test_argmax_layer_skips_missing_scores():
    assert argmax_layer([(0, None), (1, 0.3), (2, 0.1)]) == 1
    with pytest.raises(DumpError):
        argmax_layer([(0, None), (1, None)])


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def test_csv_roundtrip_bit_exact():
    rng = seeded_rng(12)
    matrix = layer_correlation(_dump(rng.normal(size=(4, 2, 6))))
    back = csv_to_matrix(matrix_to_csv(matrix))
    assert np.array_equal(back.values, matrix.values)


def test_svg_golden_for_two_by_two():
    matrix = LayerCorrelationMatrix(values=np.array([[1.0, 0.0], [0.0, 1.0]]), n_items=1)
    svg = matrix_to_svg(matrix)
    want = (
        '<svg xmlns="http://www.w3.org/2000/svg" width="88" height="88" '
        'viewBox="0 0 88 88">\n'
        '<rect width="88" height="88" fill="white"/>\n'
        '<rect x="32" y="56" width="24" height="24" fill="#ff0000"/>\n'
        '<rect x="56" y="56" width="24" height="24" fill="#ffffff"/>\n'
        '<rect x="32" y="32" width="24" height="24" fill="#ffffff"/>\n'
        '<rect x="56" y="32" width="24" height="24" fill="#ff0000"/>\n'
        '<text x="44" y="92" font-size="10" text-anchor="middle">0</text>\n'
        '<text x="68" y="92" font-size="10" text-anchor="middle">1</text>\n'
        '<text x="26" y="72" font-size="10" text-anchor="end">0</text>\n'
        '<text x="26" y="48" font-size="10" text-anchor="end">1</text>\n'
        "</svg>\n"
    )
    assert svg == want


def test_svg_colors_for_extremes_and_nan():
    ones = LayerCorrelationMatrix(values=np.ones((2, 2)), n_items=1)
    svg = matrix_to_svg(ones)
    assert svg.count("#ff0000") == 4  # all-ones -> uniform red field
    mixed = LayerCorrelationMatrix(values=np.array([[1.0, -1.0], [np.nan, 1.0]]), n_items=1)
    svg = matrix_to_svg(mixed)
    assert "#0000ff" in svg  # -1 -> blue
    assert "#b0b0b0" in svg  # NaN -> grey


def test_render_heatmap_writes_files(tmp_path):
    matrix = LayerCorrelationMatrix(values=np.eye(3), n_items=2)
    csv_path, svg_path = render_heatmap(matrix, tmp_path / "corr")
    assert csv_path.read_text(encoding="utf-8").startswith("layer,0,1,2")
    assert svg_path.read_text(encoding="utf-8").startswith("<svg")
