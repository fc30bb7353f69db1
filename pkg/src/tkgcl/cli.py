"""Command-line surface: ingest, toy, pretrain-dm, train, eval, report.

Every command is deterministic under a fixed seed and inputs; train and eval
append their artifacts and content hashes to a per-run manifest so a run can
be reproduced from the manifest alone.

Exit codes: 0 success, 1 internal error, 2 input error, 3 missing artifact.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .config import ABLATION_FLAGS, config_from_sources, k_for_dataset, parse_config_file
from .data import load_dataset, load_quadruples, write_dataset
from .diffusion import NoiseSchedule, init_denoiser, pretrain
from .errors import (InputError, MissingArtifactError, StreamContinuityError,
                     TkgclError)
from .metrics import evaluate_stream, load_report, write_report
from .reasoner import init_reasoner
from .toy import generate_toy_quads, write_toy_file
from .trainer import SALT_DM_INIT, SALT_DM_TRAIN, SALT_INIT, _rng, run_stream
from .data import FactSet


def _append_manifest(out_dir, record):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = dict(record)
    record.setdefault("wall_time", time.time())
    with open(out_dir / "manifest.jsonl", "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _read_manifest(out_dir):
    path = Path(out_dir) / "manifest.jsonl"
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def cmd_toy(args):
    quads = generate_toy_quads(
        num_entities=args.entities, num_relations=args.relations,
        num_tasks=args.tasks, facts_per_task=args.facts_per_task,
        recurrence=args.recurrence, seed=args.seed, granularity=args.granularity,
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_toy_file(args.out, quads)
    print(f"wrote {len(quads)} facts across {args.tasks} snapshots to {args.out}")
    return 0


def cmd_ingest(args):
    ratios = tuple(float(x) for x in args.ratios.split(","))
    quads, vocab = load_quadruples(args.data, granularity=args.granularity)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 11)))
    write_dataset(args.out, quads, ratios, rng, vocab, args.granularity, args.seed)
    stream = load_dataset(args.out)
    print(f"ingested {len(quads)} facts into {stream.num_tasks} tasks at {args.out}")
    print(f"vocabulary: {vocab.num_entities} entities, {vocab.num_relations} relations")
    return 0


def _build_config(args):
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {}
    for key in ("method", "k", "gamma", "mu", "n_layers", "dim", "lr", "epochs",
                "patience", "window", "seed", "tau", "heads", "dm_steps",
                "dm_pretrain_epochs", "dm_epochs", "dm_lr", "dm_batch",
                "er_capacity"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    for flag in ABLATION_FLAGS:
        if getattr(args, flag, False):
            overrides[flag] = True
    if overrides.get("k") is None and "k" not in file_values and getattr(args, "dataset_name", None):
        k = k_for_dataset(args.dataset_name)
        if k is not None:
            overrides["k"] = k
    return config_from_sources(file_values, overrides)


def cmd_train(args):
    config = _build_config(args)
    stream = load_dataset(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_digest = ckpt.file_digest(Path(args.dataset) / "vocab.txt")
    _append_manifest(out_dir, {
        "event": "run-start", "command": "train", "config": config.to_dict(),
        "config_hash": config.config_hash(), "seed": config.seed,
        "dataset": str(args.dataset), "dataset_digest": dataset_digest,
    })

    result = run_stream(stream, config)
    for t in range(stream.num_tasks):
        params, dm, record = result.reasoners[t], result.denoisers[t], result.records[t]
        r_path = ckpt.save_reasoner(out_dir, t, params,
                                    {"config_hash": config.config_hash()})
        entry = {
            "event": "task", "task": t,
            "reasoner_path": str(r_path),
            "reasoner_digest": ckpt.digest_tensors(params.tensors()),
            "epochs_run": record.epochs_run,
            "final_loss": record.losses[-1] if record.losses else None,
            "losses": [round(x, 8) for x in record.losses],
            "alphas": record.alphas,
        }
        if dm is not None:
            d_path = ckpt.save_denoiser(out_dir, t, dm, result.schedule,
                                        {"config_hash": config.config_hash()})
            entry["denoiser_path"] = str(d_path)
            entry["denoiser_digest"] = ckpt.digest_tensors(dm.tensors)
        _append_manifest(out_dir, entry)
    _append_manifest(out_dir, {"event": "run-end", "tasks": stream.num_tasks,
                               "config_hash": config.config_hash()})
    print(f"trained {stream.num_tasks} tasks with method={config.method}; "
          f"checkpoints in {out_dir}")
    return 0


def cmd_pretrain_dm(args):
    config = _build_config(args)
    stream = load_dataset(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = NoiseSchedule.linear(config.dm_steps)
    reasoner = init_reasoner(stream.vocab.num_entities, stream.vocab.num_relations,
                             config.dim, config.n_layers, _rng(config.seed, SALT_INIT))
    dm = init_denoiser(config.dim, config.dm_steps, _rng(config.seed, SALT_DM_INIT),
                       n_heads=config.heads, d_ff=config.ffn_dim)
    losses = pretrain(dm, FactSet(stream.train_facts(0), "train"), reasoner.ent,
                      reasoner.rel, schedule, config.dm_pretrain_epochs,
                      _rng(config.seed, SALT_DM_TRAIN, 0),
                      lr=config.dm_lr, batch_size=config.dm_batch)
    path = ckpt.save_denoiser(out_dir, 0, dm, schedule,
                              {"config_hash": config.config_hash(), "pretrain": True})
    _append_manifest(out_dir, {
        "event": "pretrain-dm", "config": config.to_dict(),
        "denoiser_path": str(path), "denoiser_digest": ckpt.digest_tensors(dm.tensors),
        "final_loss": losses[-1] if losses else None,
    })
    print(f"pretrained denoiser on task 0 train split; checkpoint at {path}")
    return 0


def _load_run(checkpoints_dir, stream):
    entries = _read_manifest(checkpoints_dir)
    config_dict = None
    for rec in entries:
        if rec.get("event") == "run-start":
            config_dict = rec.get("config")
    if config_dict is not None:
        config = config_from_sources(overrides=config_dict)
    else:
        config = config_from_sources(overrides={"method": "ft"})
    reasoners, denoisers = [], []
    for t in range(stream.num_tasks):
        r_path = ckpt.reasoner_path(checkpoints_dir, t)
        if not r_path.exists():
            raise StreamContinuityError(f"missing checkpoint for task {t}: {r_path}")
        reasoners.append(ckpt.load_reasoner(r_path, vocab=stream.vocab))
        d_path = ckpt.denoiser_path(checkpoints_dir, t)
        if d_path.exists():
            dm, schedule = ckpt.load_denoiser(d_path)
            denoisers.append(dm)
        else:
            denoisers.append(None)
            schedule = None
    schedule = None
    if any(d is not None for d in denoisers):
        _, schedule = ckpt.load_denoiser(
            ckpt.denoiser_path(checkpoints_dir,
                               max(t for t, d in enumerate(denoisers) if d is not None))
        )
    return config, reasoners, denoisers, schedule


def cmd_eval(args):
    stream = load_dataset(args.dataset)
    config, reasoners, denoisers, schedule = _load_run(args.checkpoints, stream)
    evaluation = evaluate_stream(stream, reasoners, config,
                                 denoisers=denoisers, schedule=schedule)
    out_dir = Path(args.out)
    written = write_report(out_dir, evaluation, plots=not args.no_plots)
    if args.filter != "both":
        mode = "time" if args.filter == "time-aware" else args.filter
        s = evaluation.summary[mode]
        print(f"[{mode}] current MRR {s['current_mrr']:.4f}  average MRR {s['average_mrr']:.4f}  "
              f"forgetting {s['forgetting']:.4f}")
    else:
        for mode in ("raw", "time"):
            s = evaluation.summary[mode]
            print(f"[{mode}] current MRR {s['current_mrr']:.4f}  average MRR {s['average_mrr']:.4f}  "
                  f"forgetting {s['forgetting']:.4f}")
    _append_manifest(out_dir, {
        "event": "eval", "checkpoints": str(args.checkpoints),
        "outputs": {p.name: ckpt.file_digest(p) for p in written},
        "config_hash": evaluation.config_hash,
    })
    print(f"report written to {out_dir}")
    return 0


def cmd_report(args):
    records = load_report(Path(args.metrics) / "report.jsonl"
                          if Path(args.metrics).is_dir() else args.metrics)
    n = 1 + max(r["model_task"] for r in records)
    from .metrics import MetricsMatrix, StreamEvaluation, summarize
    mats = {mode: MetricsMatrix.empty(n) for mode in ("raw", "time")}
    for rec in records:
        grid = getattr(mats[rec["filter"]], rec["metric"])
        grid[rec["model_task"], rec["eval_task"]] = (
            np.nan if rec["value"] is None else rec["value"]
        )
    evaluation = StreamEvaluation(matrices=mats, summary=summarize(mats))
    write_report(args.out, evaluation)
    print(f"report regenerated at {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="tkgcl",
                                     description="continual temporal-KG reasoning runs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="generate a synthetic quadruple file")
    p.add_argument("--out", required=True)
    p.add_argument("--entities", type=int, default=50)
    p.add_argument("--relations", type=int, default=8)
    p.add_argument("--tasks", type=int, default=10)
    p.add_argument("--facts-per-task", type=int, default=200, dest="facts_per_task")
    p.add_argument("--recurrence", type=float, default=0.3)
    p.add_argument("--granularity", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("ingest", help="split a quadruple file into the task stream")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--granularity", type=int, default=1)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest)

    def add_train_flags(p, with_method=True):
        p.add_argument("--config", default=None, help="flat key = value config file")
        if with_method:
            p.add_argument("--method", choices=["dgar", "ft", "er"], default=None)
        p.add_argument("--dataset-name", default=None, dest="dataset_name",
                       help="named dataset for the default prompt budget k")
        for flag in ABLATION_FLAGS:
            p.add_argument("--" + flag.replace("_", "-"), action="store_true", dest=flag)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--mu", type=float, default=None)
        p.add_argument("--layers", type=int, default=None, dest="n_layers")
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--patience", type=int, default=None)
        p.add_argument("--window", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--heads", type=int, default=None)
        p.add_argument("--dm-steps", type=int, default=None, dest="dm_steps")
        p.add_argument("--dm-pretrain-epochs", type=int, default=None, dest="dm_pretrain_epochs")
        p.add_argument("--dm-epochs", type=int, default=None, dest="dm_epochs")
        p.add_argument("--dm-lr", type=float, default=None, dest="dm_lr")
        p.add_argument("--dm-batch", type=int, default=None, dest="dm_batch")
        p.add_argument("--er-capacity", type=int, default=None, dest="er_capacity")

    p = sub.add_parser("train", help="run the continual stream")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("pretrain-dm", help="pretrain the denoiser on task 0")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    add_train_flags(p, with_method=False)
    p.set_defaults(func=cmd_pretrain_dm)

    p = sub.add_parser("eval", help="evaluate a checkpointed run")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--filter", choices=["raw", "time-aware", "both"], default="both")
    p.add_argument("--no-plots", action="store_true", dest="no_plots")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="regenerate summary and plots from a report")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MissingArtifactError, StreamContinuityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TkgclError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
