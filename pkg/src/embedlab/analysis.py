"""Layer diagnostics: cross-layer rank correlation and per-layer task scores.

Works either on an in-repo model or on a binary hidden-state dump, so
per-layer states exported from any external model can be analysed with
the same tooling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaltasks import RetrievalDataset, ndcg_at_k, spearman
from .numerics import Tensor
from .pooling import summarize_layers
from .transformer import ModelConfig, forward, tokenize

DUMP_MAGIC = b"HSD1"


class DumpError(ValueError):
    """Malformed hidden-state dump file."""


@dataclass
class HiddenStateDump:
    """f32 per-layer vectors for a set of items, with a source label."""

    values: np.ndarray  # [n_layers, n_items, dim]
    source: str

    @property
    def n_layers(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


def save_dump(dump: HiddenStateDump, path) -> None:
    values = np.ascontiguousarray(dump.values, dtype="<f4")
    label = dump.source.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<III", *values.shape))
        fh.write(values.tobytes())
        fh.write(struct.pack("<H", len(label)))
        fh.write(label)


def load_dump(path) -> HiddenStateDump:
    raw = Path(path).read_bytes()
    if raw[:4] != DUMP_MAGIC:
        raise DumpError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 16:
        raise DumpError(f"{path}: truncated header")
    n_layers, n_items, dim = struct.unpack_from("<III", raw, 4)
    payload = n_layers * n_items * dim * 4
    offset = 16 + payload
    if len(raw) < offset + 2:
        raise DumpError(f"{path}: declared sizes exceed payload length")
    values = np.frombuffer(raw, dtype="<f4", count=n_layers * n_items * dim, offset=16)
    values = values.reshape(n_layers, n_items, dim).astype(np.float64)
    (label_len,) = struct.unpack_from("<H", raw, offset)
    if len(raw) != offset + 2 + label_len:
        raise DumpError(f"{path}: trailing or missing bytes")
    label = raw[offset + 2 :].decode("utf-8")
    return HiddenStateDump(values=values, source=label)


def dump_from_model(
    texts: list[str], model: ModelConfig, params: dict[str, Tensor], source: str, batch_size: int = 64
) -> HiddenStateDump:
    """Per-layer summary vectors (EOS or masked mean per the model's mask)."""
    chunks = []
    for start in range(0, len(texts), batch_size):
        seqs = [tokenize(t, model) for t in texts[start : start + batch_size]]
        hidden = forward(seqs, model, params)
        chunks.append(summarize_layers(hidden).data)  # [B, l, d]
    stacked = np.concatenate(chunks, axis=0)
    return HiddenStateDump(values=stacked.transpose(1, 0, 2), source=source)


# ---------------------------------------------------------------------------
# Experiment 1: cross-layer correlation
# ---------------------------------------------------------------------------


@dataclass
class LayerCorrelationMatrix:
    values: np.ndarray  # [l, l], NaN marks entries with no usable items
    n_items: int


def layer_correlation(dump: HiddenStateDump) -> LayerCorrelationMatrix:
    """Mean (over items) Spearman correlation between layer-pair vectors.

    For each item the d components of two layers' vectors are the paired
    observations. Items where either vector is constant are skipped for
    that pair; an entry with no usable items becomes NaN.
    """
    if dump.dim < 2:
        raise DumpError("layer correlation needs dim >= 2")
    l = dump.n_layers
    sums = np.zeros((l, l))
    counts = np.zeros((l, l), dtype=np.int64)
    for item in range(dump.n_items):
        vecs = dump.values[:, item, :]
        for a in range(l):
            for b in range(a, l):
                rho = spearman(vecs[a], vecs[b])
                if rho is None:
                    continue
                sums[a, b] += rho
                counts[a, b] += 1
    with np.errstate(invalid="ignore"):
        matrix = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    matrix = np.triu(matrix) + np.triu(matrix, 1).T  # mirror the upper triangle
    return LayerCorrelationMatrix(values=matrix, n_items=dump.n_items)


# ---------------------------------------------------------------------------
# Experiment 2: per-layer downstream scores
# ---------------------------------------------------------------------------


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms == 0, 1.0, norms)


def _sts_score(embs: np.ndarray, pairs: list[tuple[str, str, float]]) -> float | None:
    n = len(pairs)
    a, b = _normalize_rows(embs[:n]), _normalize_rows(embs[n:])
    cosines = (a * b).sum(axis=1)
    return spearman(cosines, [p[2] for p in pairs])


def _retrieval_score(embs: np.ndarray, data: RetrievalDataset) -> float | None:
    qids, dids = sorted(data.queries), sorted(data.corpus)
    q = _normalize_rows(embs[: len(qids)])
    d = _normalize_rows(embs[len(qids) :])
    per_query = []
    for i, qid in enumerate(qids):
        relevance = {doc: g for (qq, doc), g in data.qrels.items() if qq == qid and g > 0}
        if not relevance:
            continue
        order = np.argsort(-(d @ q[i]), kind="stable")
        per_query.append(ndcg_at_k([dids[j] for j in order], relevance, k=10))
    return float(np.mean(per_query)) if per_query else None


def dump_item_texts(kind: str, task_data) -> list[str]:
    """Item order expected in a dump used for per-layer evaluation."""
    if kind == "sts":
        return [p[0] for p in task_data] + [p[1] for p in task_data]
    if kind == "retrieval":
        return [task_data.queries[q] for q in sorted(task_data.queries)] + [
            task_data.corpus[d] for d in sorted(task_data.corpus)
        ]
    raise ValueError(f"per-layer evaluation supports sts and retrieval, not {kind!r}")


def per_layer_eval(dump: HiddenStateDump, kind: str, task_data) -> list[tuple[int, float | None]]:
    """Score every layer's vectors on an STS pair list or RetrievalDataset.

    Dump items must follow `dump_item_texts` order. A collapsed layer
    (constant predictions) yields a missing score.
    """
    expected = len(dump_item_texts(kind, task_data))
    if dump.n_items != expected:
        raise DumpError(f"dump has {dump.n_items} items, task needs {expected}")
    scores = []
    for layer in range(dump.n_layers):
        embs = dump.values[layer]
        if kind == "sts":
            scores.append((layer, _sts_score(embs, task_data)))
        else:
            scores.append((layer, _retrieval_score(embs, task_data)))
    return scores


def argmax_layer(scores: list[tuple[int, float | None]]) -> int:
    usable = [(s, layer) for layer, s in scores if s is not None]
    if not usable:
        raise DumpError("no layer produced a usable score")
    return max(usable)[1]


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def matrix_to_csv(matrix: LayerCorrelationMatrix) -> str:
    l = matrix.values.shape[0]
    lines = ["layer," + ",".join(str(i) for i in range(l))]
    for a in range(l):
        cells = ",".join(repr(float(v)) for v in matrix.values[a])
        lines.append(f"{a},{cells}")
    return "\n".join(lines) + "\n"


def csv_to_matrix(text: str) -> LayerCorrelationMatrix:
    lines = [ln for ln in text.strip().split("\n")]
    rows = [[float(c) for c in ln.split(",")[1:]] for ln in lines[1:]]
    return LayerCorrelationMatrix(values=np.array(rows), n_items=0)


def _diverging_color(v: float) -> str:
    """Blue (-1) -> white (0) -> red (+1); NaN renders grey."""
    if not np.isfinite(v):
        return "#b0b0b0"
    v = min(1.0, max(-1.0, v))
    if v >= 0:
        r, g, b = 255, round(255 * (1 - v)), round(255 * (1 - v))
    else:
        r, g, b = round(255 * (1 + v)), round(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def matrix_to_svg(matrix: LayerCorrelationMatrix, cell: int = 24, margin: int = 32) -> str:
    """Self-contained heatmap; x axis 0..l-1, y axis l-1..0 (top to bottom)."""
    l = matrix.values.shape[0]
    width = margin + l * cell + 8
    height = margin + l * cell + 8
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for a in range(l):  # row layer index; layer l-1 drawn at the top
        y = margin + (l - 1 - a) * cell
        for b in range(l):
            x = margin + b * cell
            color = _diverging_color(float(matrix.values[a, b]))
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{color}"/>')
    for b in range(l):
        x = margin + b * cell + cell // 2
        parts.append(
            f'<text x="{x}" y="{margin + l * cell + 12}" font-size="10" '
            f'text-anchor="middle">{b}</text>'
        )
    for a in range(l):
        y = margin + (l - 1 - a) * cell + cell // 2 + 4
        parts.append(f'<text x="{margin - 6}" y="{y}" font-size="10" text-anchor="end">{a}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_heatmap(matrix: LayerCorrelationMatrix, out_prefix) -> tuple[Path, Path]:
    out_prefix = Path(out_prefix)
    csv_path = out_prefix.with_suffix(".csv")
    svg_path = out_prefix.with_suffix(".svg")
    csv_path.write_text(matrix_to_csv(matrix), encoding="utf-8")
    svg_path.write_text(matrix_to_svg(matrix), encoding="utf-8")
    return csv_path, svg_path
