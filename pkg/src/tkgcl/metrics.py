"""Rank metrics, the per-task evaluation grid, and report emission.

p[i][j] holds the score of task j's test set under the model trained through
task i (defined for j <= i). Current is p[T][T], Average the unweighted mean
of the last row, and the forgetting score the mean of p[n][i] - p[i][i] over
past tasks (negative means knowledge loss, positive backward transfer).

Both raw and time-aware-filtered ranks are produced and labeled; filtering
removes other entities known true for the same (subject, relation) at the
queried timestamp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import ContractError, StreamContinuityError
from .prompts import build_replay_pool
from .reasoner import evolve, score
from .replay import ReplayInjection
from .trainer import SALT_EVAL, _no_hp_pool, _rng
from .diffusion import aggregate_replay, guided_reverse

FILTER_MODES = ("raw", "time")


def rank_query(scores, target: int, known_true=None) -> float:
    """Expected rank of `target` among candidate scores.

    Ties share the average of their positions. When `known_true` is given,
    every other entity in it is excluded before ranking; a target whose own
    score was already masked to -inf counts as filtered out and is a
    contract violation.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if not 0 <= target < len(scores):
        raise ContractError(f"target {target} outside the vocabulary")
    s_t = scores[target]
    if np.isneginf(s_t) or np.isnan(s_t):
        raise ContractError(f"target {target} was filtered out of the candidate set")
    mask = np.ones(len(scores), dtype=bool)
    if known_true is not None:
        known = np.asarray(list(known_true), dtype=np.int64)
        mask[known] = False
        mask[target] = True
    cand = scores[mask]
    greater = int((cand > s_t).sum())
    ties = int((cand == s_t).sum())  # includes the target itself
    return greater + (ties + 1) / 2.0


def mrr(ranks) -> float:
    ranks = np.asarray(ranks, dtype=np.float64).reshape(-1)
    if len(ranks) == 0:
        raise ContractError("mrr over an empty rank list")
    if ranks.min() < 1:
        raise ContractError("ranks must be >= 1")
    return float((1.0 / ranks).mean())


def hits_at_k(ranks, k: int) -> float:
    ranks = np.asarray(ranks, dtype=np.float64).reshape(-1)
    if len(ranks) == 0:
        raise ContractError("hits@k over an empty rank list")
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    return float((ranks <= k).mean())


@dataclass
class MetricsMatrix:
    """Lower-triangular grids of MRR / Hits@1 / Hits@10 (NaN above)."""

    mrr: np.ndarray
    hits1: np.ndarray
    hits10: np.ndarray

    @classmethod
    def empty(cls, n: int):
        return cls(*(np.full((n, n), np.nan) for _ in range(3)))

    @property
    def n(self):
        return self.mrr.shape[0]


def forgetting_score(p) -> float:
    """Mean of p[n][i] - p[i][i] over 1 < i <= n (1-based task indices)."""
    mat = p.mrr if isinstance(p, MetricsMatrix) else np.asarray(p, dtype=np.float64)
    n = mat.shape[0]
    if n < 2:
        raise ContractError("forgetting score needs at least two tasks")
    diffs = [mat[n - 1, i] - mat[i, i] for i in range(1, n)]
    return float(np.mean(diffs))


def _known_true_map(stream, j):
    snap = stream.full_snapshot(j)
    table = {}
    for s, r, o, _t in snap:
        table.setdefault((int(s), int(r)), set()).add(int(o))
    return table


def _eval_injection(stream, j, params, dm, schedule, config: TrainConfig, query_entities):
    """Replay machinery at evaluation time, mirroring training: prompts for
    the queried entities from times < j, generation guided by the evaluated
    model itself."""
    triples, _, _ = build_replay_pool(
        query_entities, config.k, j, stream.history_train(j),
        stream.vocab.num_relations, config.seed,
    )
    if config.no_hp:
        triples = _no_hp_pool(stream, j, len(triples), config.seed)
    if len(triples) == 0:
        return None
    rng = _rng(config.seed, SALT_EVAL, j)
    gen_t, gen_n = guided_reverse(
        triples[:, :3], dm, schedule, params, config.effective_gamma, rng, tau=config.tau
    )
    outputs = {}
    for b in range(len(triples)):
        outputs.setdefault(int(triples[b, 2]), []).append(gen_t[b])
        outputs.setdefault(int(triples[b, 0]), []).append(gen_n[b])
    pooled = aggregate_replay(outputs)
    ids = np.array(sorted(pooled), dtype=np.int64)
    vecs = np.stack([pooled[int(e)] for e in ids])
    return ReplayInjection(entity_ids=ids, vectors=vecs,
                           alpha_logit=params.alpha_logit, additive=config.no_ar)


def task_ranks(stream, j: int, params, config: TrainConfig, dm=None, schedule=None):
    """Raw and time-filtered ranks for task j's test set under `params`."""
    test = stream.tasks[j].test.quads
    if len(test) == 0:
        return {mode: np.zeros(0) for mode in FILTER_MODES}
    history = stream.history_train(j)[-config.window:]
    injection = None
    if (config.method == "dgar" and not config.no_gr and dm is not None and j > 0):
        injection = _eval_injection(stream, j, params, dm, schedule, config,
                                    np.unique(test[:, 0]))
    stack = evolve(params, history, hook=injection)
    logits = score(params, stack.h_final, test[:, :2])
    known = _known_true_map(stream, j)
    out = {mode: np.empty(len(test)) for mode in FILTER_MODES}
    for qi, (s, r, o, _t) in enumerate(test):
        row = logits[qi]
        out["raw"][qi] = rank_query(row, int(o))
        out["time"][qi] = rank_query(row, int(o), known_true=known[(int(s), int(r))])
    return out


@dataclass
class StreamEvaluation:
    matrices: dict            # filter mode -> MetricsMatrix
    summary: dict             # filter mode -> {current_*, average_*, forgetting}
    config_hash: str = ""
    method: str = ""


def evaluate_stream(stream, reasoners, config: TrainConfig, denoisers=None,
                    schedule=None) -> StreamEvaluation:
    """Fill the evaluation grid for a completed run.

    `reasoners` holds one parameter set per task (a missing entry is a
    stream-continuity error); `denoisers` supplies the generator used for
    replay-at-evaluation under the generative method.
    """
    n = stream.num_tasks
    if len(reasoners) < n or any(p is None for p in reasoners[:n]):
        missing = next((i for i, p in enumerate(reasoners[:n]) if p is None), len(reasoners))
        raise StreamContinuityError(f"missing checkpoint for task {missing}")
    denoisers = denoisers or [None] * n
    mats = {mode: MetricsMatrix.empty(n) for mode in FILTER_MODES}
    for i in range(n):
        for j in range(i + 1):
            ranks = task_ranks(stream, j, reasoners[i], config,
                               dm=denoisers[i], schedule=schedule)
            for mode in FILTER_MODES:
                rk = ranks[mode]
                if len(rk) == 0:
                    mats[mode].mrr[i, j] = np.nan
                    continue
                mats[mode].mrr[i, j] = mrr(rk)
                mats[mode].hits1[i, j] = hits_at_k(rk, 1)
                mats[mode].hits10[i, j] = hits_at_k(rk, 10)
    return StreamEvaluation(matrices=mats, summary=summarize(mats),
                            config_hash=config.config_hash(), method=config.method)


def summarize(matrices: dict) -> dict:
    """Current (last diagonal cell), Average (unweighted mean of the last
    row over all tasks' test sets), and forgetting, per filter mode."""
    summary = {}
    for mode, m in matrices.items():
        n = m.n
        summary[mode] = {
            "current_mrr": float(m.mrr[n - 1, n - 1]),
            "average_mrr": float(np.nanmean(m.mrr[n - 1])),
            "current_hits1": float(m.hits1[n - 1, n - 1]),
            "average_hits1": float(np.nanmean(m.hits1[n - 1])),
            "current_hits10": float(m.hits10[n - 1, n - 1]),
            "average_hits10": float(np.nanmean(m.hits10[n - 1])),
            "forgetting": forgetting_score(m) if n >= 2 else 0.0,
        }
    return summary


# --- reports ------------------------------------------------------------------

def write_report(out_dir, evaluation: StreamEvaluation, plots: bool = True):
    """Emit the cell-level report, the flat summary table, and line plots.

    Text outputs are byte-stable for identical evaluations (no timestamps,
    canonical float formatting).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    n = evaluation.matrices["raw"].n
    for mode in FILTER_MODES:
        m = evaluation.matrices[mode]
        for i in range(n):
            for j in range(i + 1):
                for name, grid in (("mrr", m.mrr), ("hits1", m.hits1), ("hits10", m.hits10)):
                    val = grid[i, j]
                    lines.append(json.dumps(
                        {"model_task": i, "eval_task": j, "filter": mode,
                         "metric": name, "value": None if np.isnan(val) else round(float(val), 10)},
                        sort_keys=True))
    report_path = out_dir / "report.jsonl"
    report_path.write_text("\n".join(lines) + "\n")

    rows = ["method=" + evaluation.method, "config=" + evaluation.config_hash, ""]
    header = f"{'filter':<6} {'metric':<9} {'current':>10} {'average':>10}"
    rows += [header, "-" * len(header)]
    for mode in FILTER_MODES:
        s = evaluation.summary[mode]
        for metric in ("mrr", "hits1", "hits10"):
            rows.append(
                f"{mode:<6} {metric:<9} {s['current_' + metric]:>10.4f} {s['average_' + metric]:>10.4f}"
            )
        rows.append(f"{mode:<6} {'forget':<9} {s['forgetting']:>10.4f}")
    summary_path = out_dir / "summary.txt"
    summary_path.write_text("\n".join(rows) + "\n")

    written = [report_path, summary_path]
    if plots:
        written += write_plots(out_dir, evaluation)
    return written


def write_plots(out_dir, evaluation: StreamEvaluation):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    m = evaluation.matrices["raw"]
    n = m.n
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for j in range(n):
        xs = np.arange(j, n)
        ax.plot(xs, m.mrr[j:, j], marker="o", markersize=3, label=f"task {j}" if n <= 10 else None)
    ax.set_xlabel("model trained through task")
    ax.set_ylabel("test MRR (raw)")
    ax.set_title("per-task MRR across the stream")
    if n <= 10:
        ax.legend(fontsize=7, ncols=2)
    curves_path = out_dir / "mrr_curves.png"
    fig.savefig(curves_path, dpi=120, metadata={"Software": None})
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    if n >= 2:
        drops = [m.mrr[n - 1, i] - m.mrr[i, i] for i in range(1, n)]
        ax.bar(np.arange(1, n), drops)
        ax.axhline(0.0, color="k", linewidth=0.8)
        ax.set_title(f"retention per task (mean {np.mean(drops):.4f})")
    ax.set_xlabel("task")
    ax.set_ylabel("final MRR - just-trained MRR")
    forget_path = out_dir / "forgetting.png"
    fig.savefig(forget_path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return [curves_path, forget_path]


def load_report(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
