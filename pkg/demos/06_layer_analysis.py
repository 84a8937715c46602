"""Cross-layer similarity analysis on a tiny untrained backbone.

Dumps per-layer summary vectors for a batch of sentences, renders the
layer-by-layer correlation heatmap (CSV + SVG), and scores every layer on
a small STS task to find the most informative one.
"""

import tempfile
from pathlib import Path

from embedlab import synthetic
from embedlab.analysis import (
    argmax_layer,
    dump_from_model,
    layer_correlation,
    per_layer_eval,
    render_heatmap,
    dump_item_texts,
)
from embedlab.evaltasks import load_sts
from embedlab.numerics import seeded_rng
from embedlab.transformer import ModelConfig, init_params

work = Path(tempfile.mkdtemp(prefix="embedlab_demo_"))
synthetic.generate(work, n_clusters=4, size=100, seed=2)
pairs = load_sts(work / "sts/sts_0.jsonl")

config = ModelConfig(n_layers=4, hidden_dim=32, n_heads=2, ffn_dim=64,
                     vocab_size=2048, max_seq_len=32)
params = init_params(config, seeded_rng(0))

texts = dump_item_texts("sts", pairs)
dump = dump_from_model(texts, config, params, source="untrained-toy")
print(f"dump: {dump.n_layers} layers x {dump.n_items} items x {dump.dim} dims")

matrix = layer_correlation(dump)
csv_path, svg_path = render_heatmap(matrix, work / "layer_correlation")
print(f"heatmap written to {csv_path} and {svg_path}")
for row in matrix.values:
    print("  " + " ".join(f"{v:+.3f}" for v in row))

scores = per_layer_eval(dump, "sts", pairs)
for layer, score in scores:
    shown = "n/a" if score is None else f"{score:+.4f}"
    print(f"layer {layer}: STS Spearman {shown}")
print(f"best layer: {argmax_layer(scores)}")
