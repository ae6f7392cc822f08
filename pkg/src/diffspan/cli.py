"""Command-line surface: gen-data, train, eval, infer, sweep, selfcheck."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfg_mod
from . import selfcheck
from .checkpoint import load_model, save_checkpoint
from .data import generate_corpus, load_feature_dataset, save_corpus
from .evaluation import evaluate_selectors
from .model import SpanDiffusionModel
from .pipeline import infer, train
from .schedule import build_cosine_schedule


def _add_config_flags(parser: argparse.ArgumentParser, skip: tuple[str, ...] = ()) -> None:
    parser.add_argument("--config", help="key=value config file")
    for key in cfg_mod.SCHEMA:
        if key.name in skip:
            continue
        parser.add_argument(f"--{key.name}", default=None, metavar=key.type.upper(),
                            help=f"{key.help} (default {key.default})")


def _resolve(args: argparse.Namespace) -> dict:
    overrides = {key.name: getattr(args, key.name) for key in cfg_mod.SCHEMA}
    return cfg_mod.resolve(args.config, overrides)


def _load_split(data_dir: Path, split: str, k_target: int):
    manifest = data_dir / f"{split}.jsonl"
    return load_feature_dataset(manifest, k_target=k_target)


def _restore(ckpt: str):
    model, index = load_model(ckpt)
    snapshot = index.get("config", {})
    t_total = int(snapshot.get("t_total", 1000))
    lam = float(snapshot.get("lambda_scale", 2.0))
    return model, build_cosine_schedule(t_total, lam), snapshot


def cmd_gen_data(args: argparse.Namespace) -> int:
    values = _resolve(args)
    synth = cfg_mod.synth_config(values)
    splits = generate_corpus(synth, values["n_examples"])
    out_dir = Path(args.out)
    save_corpus(splits, out_dir)
    cfg_mod.write_config_file(values, out_dir / "config.txt")
    print(json.dumps({
        "out": str(out_dir),
        "train": len(splits.train), "val": len(splits.val), "test": len(splits.test),
    }))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    values = _resolve(args)
    model_cfg = cfg_mod.model_config(values)
    train_cfg = cfg_mod.train_config(values)
    examples = _load_split(Path(args.data), "train", model_cfg.k)
    model = SpanDiffusionModel(model_cfg, seed=train_cfg.seed)
    sched = build_cosine_schedule(train_cfg.t_total, train_cfg.lambda_scale)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"
    with log_path.open("w") as log_file:
        history = train(examples, model, sched, train_cfg,
                        log_fn=lambda rec: log_file.write(json.dumps(rec) + "\n"))
    save_checkpoint(out_dir / "last", model, config_echo=values, step=len(history))
    print(json.dumps({
        "checkpoint": str(out_dir / "last"),
        "steps": len(history),
        "final_loss": history[-1]["loss"] if history else None,
        "log": str(log_path),
    }))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model, sched, snapshot = _restore(args.ckpt)
    values = cfg_mod.resolve(args.config, {
        **{k: v for k, v in snapshot.items() if k in {key.name for key in cfg_mod.SCHEMA}},
        **{key.name: getattr(args, key.name) for key in cfg_mod.SCHEMA
           if getattr(args, key.name) is not None},
    })
    infer_cfg = cfg_mod.infer_config(values)
    examples = _load_split(Path(args.data), args.split, model.config.k)
    selectors = ("vote", "random") if args.ablate_voting else (args.selector,)
    reports = evaluate_selectors(examples, model, sched, infer_cfg, selectors)
    if len(reports) == 1:
        print(next(iter(reports.values())).to_json())
    else:
        print(json.dumps({sel: rep.to_dict() for sel, rep in reports.items()}))
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    model, sched, snapshot = _restore(args.ckpt)
    values = cfg_mod.resolve(args.config, {
        **{k: v for k, v in snapshot.items() if k in {key.name for key in cfg_mod.SCHEMA}},
        **{key.name: getattr(args, key.name) for key in cfg_mod.SCHEMA
           if getattr(args, key.name) is not None},
    })
    infer_cfg = cfg_mod.infer_config(values)
    examples = _load_split(Path(args.data), args.split, model.config.k)
    if args.id is not None:
        examples = [ex for ex in examples if ex.id == args.id]
        if not examples:
            print(f"error: no example with id {args.id!r}", file=sys.stderr)
            return 2
    for ex in examples[: args.limit]:
        final, candidates, _ = infer(ex, model, sched, infer_cfg)
        print(json.dumps({
            "id": ex.id,
            "start": final[0],
            "end": final[1],
            "candidates": [[float(s), float(e)] for s, e in candidates],
            "steps": infer_cfg.steps,
            "queries": infer_cfg.queries,
        }))
    if args.dump_attention:
        ex = examples[0]
        v_proj, q_proj = model.encoder.project_and_position(ex.video, ex.query)
        mask = np.ones(ex.query.shape[0], dtype=bool)
        weights = model.encoder.attention_weights(v_proj, q_proj, mask)
        with open(args.dump_attention, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["layer", "head", "clip", "token", "weight"])
            layers, heads, k, n = weights.shape
            for layer in range(layers):
                for head in range(heads):
                    for clip in range(k):
                        for token in range(n):
                            writer.writerow([layer, head, clip, token,
                                             float(weights[layer, head, clip, token])])
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    model, sched, snapshot = _restore(args.ckpt)
    base = cfg_mod.resolve(args.config, {
        k: v for k, v in snapshot.items() if k in {key.name for key in cfg_mod.SCHEMA}
    })
    examples = _load_split(Path(args.data), args.split, model.config.k)
    steps_list = [int(s) for s in args.steps.split(",")]
    queries_list = [int(q) for q in args.queries.split(",")]
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["steps", "queries", "r1_03", "r1_05", "r1_07", "mean_iou", "examples_per_sec"])
    from .pipeline import InferConfig

    for steps in steps_list:
        for queries in queries_list:
            metrics = np.zeros(4)
            rate = 0.0
            for rep in range(args.repeats):
                infer_cfg = InferConfig(queries=queries, steps=steps, seed=base["seed"] + rep)
                begin = time.perf_counter()
                report = evaluate_selectors(examples, model, sched, infer_cfg)["vote"]
                elapsed = time.perf_counter() - begin
                metrics += np.array([report.r1_03, report.r1_05, report.r1_07, report.mean_iou])
                rate += len(examples) / elapsed
            metrics /= args.repeats
            rate /= args.repeats
            writer.writerow([steps, queries, *(f"{m:.6f}" for m in metrics), f"{rate:.3f}"])
    text = buffer.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_selfcheck(args: argparse.Namespace) -> int:
    failures = selfcheck.run(verbose=True)
    print(f"selfcheck: {len(selfcheck.CHECKS) - failures}/{len(selfcheck.CHECKS)} checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffspan",
        description="Train, sample and evaluate the diffusion span localizer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus (manifest + binaries)")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train a model and write checkpoints + logs")
    p.add_argument("--data", required=True, help="corpus directory from gen-data")
    p.add_argument("--out", required=True, help="output directory for checkpoint + log")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--ckpt", required=True, help="checkpoint directory")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--selector", default="vote", choices=("vote", "random"))
    p.add_argument("--ablate-voting", action="store_true",
                   help="report vote and random selection side by side in one run")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("infer", help="predict spans for examples, JSONL on stdout")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--id", default=None, help="single example id")
    p.add_argument("--limit", type=int, default=1, help="max examples when --id absent")
    p.add_argument("--dump-attention", default=None,
                   help="write encoder cross-attention weights to this CSV")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("sweep", help="metric grid over sampling steps and query counts (CSV)")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--steps", default="1,5", help="comma list of sampling steps")
    p.add_argument("--queries", default="5", help="comma list of query counts")
    p.add_argument("--repeats", type=int, default=1, help="seeded repeats averaged per cell")
    p.add_argument("--out", default=None, help="also write the CSV here")
    _add_config_flags(p, skip=("steps", "queries"))
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("selfcheck", help="run the built-in property suite")
    p.set_defaults(fn=cmd_selfcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
