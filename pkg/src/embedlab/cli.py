"""Command-line surface: train / encode / eval / compare / analyze-layers / gen-synthetic.

Exit codes are part of the scripting contract: 0 success, 2 configuration
error, 3 data error, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, synthetic
from .checkpoint import (
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
    save_embeddings,
)
from .config import RunConfig, load_run_config
from .evaltasks import (
    DatasetError,
    EvalResult,
    eval_classification,
    eval_clustering,
    eval_retrieval,
    eval_sts,
    load_labeled,
    load_retrieval,
    load_sts,
)
from .numerics import NumericsError, seeded_rng
from .pooling import encode, init_pooler_params
from .stats import ComparisonError, compare_models, load_results, render_report, save_results
from .training import (
    DataError,
    TrainConfig,
    TrainingDiverged,
    load_examples,
    train,
)
from .transformer import ConfigError, init_params

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_CONFIG_ERRORS = (ConfigError,)
_DATA_ERRORS = (
    DataError,
    DatasetError,
    ComparisonError,
    CheckpointError,
    analysis.DumpError,
    synthetic.GenerationError,
    FileNotFoundError,
    NotADirectoryError,
)


def _split_tensors(tensors):
    backbone = {k: v for k, v in tensors.items() if not k.startswith("pool.")}
    pooler = {k: v for k, v in tensors.items() if k.startswith("pool.")}
    return backbone, pooler or None


def make_encoder(config: RunConfig, tensors):
    """Closure mapping a list of texts to normalized embedding rows."""
    backbone, pooler = _split_tensors(tensors)

    def encode_fn(texts):
        return encode(texts, config.model, backbone, config.pooling, pooler)

    return encode_fn


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    config = load_run_config(args.config)
    if args.seed is not None:
        config = RunConfig(
            model=config.model,
            pooling=config.pooling,
            train=TrainConfig(**{**config.train.to_dict(), "seed": args.seed}),
            model_id=config.model_id,
        )
    examples = load_examples(args.data)

    rng = seeded_rng(config.train.seed)
    params = init_params(config.model, rng)
    pooler = init_pooler_params(config.model, config.pooling, rng) if config.pooling.trainable else None

    trace = train(config.model, params, config.pooling, pooler, examples, config.train)

    tensors = dict(params)
    if pooler is not None:
        tensors.update(pooler)
    checksum = save_checkpoint(args.out, config, tensors)

    trace_path = Path(args.out).with_suffix(Path(args.out).suffix + ".loss.csv")
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in enumerate(trace):
            writer.writerow([step, repr(loss)])
    print(f"checkpoint written to {args.out} (sha256 {checksum})")
    print(f"loss trace written to {trace_path}")
    return EXIT_OK


def _read_id_text(path):
    ids, texts = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                ids.append(str(obj["id"]))
                texts.append(obj["text"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed line ({exc})") from exc
    return ids, texts


def cmd_encode(args) -> int:
    config, tensors = load_checkpoint(args.ckpt)
    ids, texts = _read_id_text(args.input)
    encode_fn = make_encoder(config, tensors)
    vectors = encode_fn(texts) if texts else np.zeros((0, config.pooling.out_dim))
    save_embeddings(args.out, ids, vectors)
    print(f"{len(ids)} embeddings written to {args.out}")
    if args.dump_hidden:
        backbone, _ = _split_tensors(tensors)
        dump = analysis.dump_from_model(texts, config.model, backbone, source=config.model_id)
        analysis.save_dump(dump, args.dump_hidden)
        print(f"hidden-state dump written to {args.dump_hidden}")
    return EXIT_OK


def _eval_datasets(args, config, tensors):
    encode_fn = make_encoder(config, tensors)
    data_dir = Path(args.data)
    results: list[EvalResult] = []
    if args.task == "sts":
        for path in sorted(data_dir.glob("*.jsonl")):
            results.append(eval_sts(encode_fn, load_sts(path), config.model_id, path.stem))
    elif args.task == "retrieval":
        if (data_dir / "corpus.jsonl").exists():
            sets = [(data_dir.name, data_dir)]
        else:
            sets = [(p.name, p) for p in sorted(data_dir.iterdir()) if p.is_dir()]
        for name, directory in sets:
            results.append(eval_retrieval(encode_fn, load_retrieval(directory), config.model_id, name))
    elif args.task == "classification":
        for path in sorted(data_dir.glob("*.jsonl")):
            texts, labels = load_labeled(path)
            results.append(
                eval_classification(encode_fn, texts, labels, config.model_id, path.stem, seed=args.seed)
            )
    elif args.task == "clustering":
        for path in sorted(data_dir.glob("*.jsonl")):
            texts, labels = load_labeled(path)
            results.append(
                eval_clustering(encode_fn, texts, labels, config.model_id, path.stem, seed=args.seed)
            )
    if not results:
        raise DatasetError(f"no {args.task} datasets found under {data_dir}")
    return results


def cmd_eval(args) -> int:
    config, tensors = load_checkpoint(args.ckpt)
    results = _eval_datasets(args, config, tensors)
    existing = load_results(args.out) if Path(args.out).exists() else []
    save_results(existing + results, args.out)
    for r in results:
        score = "n/a" if r.score is None else f"{r.score:.4f}"
        print(f"{r.model_id}  {r.task:<14}  {r.dataset:<24}  {r.metric:<14}  {score}")
    return EXIT_OK


def cmd_compare(args) -> int:
    baseline = load_results(args.baseline)
    challenger = load_results(args.challenger)
    report = compare_models(baseline, challenger, zero_method=args.zero_method)
    text, record = render_report(report)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_suffix(".txt").write_text(text, encoding="utf-8")
    with open(prefix.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2)
        fh.write("\n")
    sys.stdout.write(text)
    return EXIT_OK


def _load_task_data(kind, path):
    if kind == "sts":
        return load_sts(path)
    return load_retrieval(path)


def cmd_analyze_layers(args) -> int:
    if args.dump:
        dump = analysis.load_dump(args.dump)
    else:
        if not args.ckpt:
            raise ConfigError("either --dump or --ckpt is required")
        config, tensors = load_checkpoint(args.ckpt)
        backbone, _ = _split_tensors(tensors)
        if args.input:
            _, texts = _read_id_text(args.input)
        elif args.task and args.task_data:
            texts = analysis.dump_item_texts(args.task, _load_task_data(args.task, args.task_data))
        else:
            raise ConfigError("--ckpt mode needs --input or --task/--task-data")
        dump = analysis.dump_from_model(texts, config.model, backbone, source=config.model_id)

    matrix = analysis.layer_correlation(dump)
    csv_path, svg_path = analysis.render_heatmap(matrix, str(args.out_prefix) + "_correlation")
    print(f"correlation matrix written to {csv_path} and {svg_path}")

    if args.task and args.task_data:
        task_data = _load_task_data(args.task, args.task_data)
        scores = analysis.per_layer_eval(dump, args.task, task_data)
        score_path = Path(str(args.out_prefix) + "_layer_scores.csv")
        with open(score_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["layer", "score"])
            for layer, score in scores:
                writer.writerow([layer, "n/a" if score is None else repr(score)])
        best = analysis.argmax_layer(scores)
        print(f"per-layer scores written to {score_path} (best layer: {best})")
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    if args.clusters > args.size:
        raise ConfigError(f"--clusters {args.clusters} exceeds --size {args.size}")
    written = synthetic.generate(args.out, n_clusters=args.clusters, size=args.size, seed=args.seed)
    for kind, paths in written.items():
        for p in paths:
            print(f"{kind}: {p}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embedlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="contrastive training run")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="embed a JSONL file of id/text records")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-hidden", default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eval", help="run one task over a dataset directory")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--task", required=True, choices=["sts", "retrieval", "classification", "clustering"])
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="pairwise significance report")
    p.add_argument("--baseline", required=True)
    p.add_argument("--challenger", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--zero-method", choices=["wilcox", "pratt"], default="wilcox")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze-layers", help="cross-layer correlation and per-layer scores")
    p.add_argument("--dump", default=None)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--input", default=None)
    p.add_argument("--task", choices=["sts", "retrieval"], default=None)
    p.add_argument("--task-data", default=None)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_analyze_layers)

    p = sub.add_parser("gen-synthetic", help="write the synthetic dataset suite")
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--size", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synthetic)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, NumericsError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
