"""Continual training over the task stream.

Each task initializes its parameters from the previous task's, optionally
assembles replay (prompt sampling, guided generation, per-layer injection),
trains with the combined loss, then updates the denoiser copy for the next
task. Fine-tuning and experience-replay baselines share the same loop with
the replay machinery switched off or swapped for a reservoir buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .data import FactSet, TaskStream
from .diffusion import (DenoiserParams, NoiseSchedule, aggregate_replay,
                        continual_update_dm, guided_reverse, init_denoiser, pretrain)
from .errors import ContractError
from .optim import Adam, zero_grads_like
from .prompts import build_replay_pool
from .reasoner import (ReasonerParams, evolve, evolve_backward, init_reasoner,
                       score, score_backward, sigmoid)
from .replay import ReplayInjection

# rng stream salts; prompt sampling uses (seed, task, entity) directly
SALT_INIT = 101
SALT_DM_INIT = 102
SALT_GEN = 103
SALT_DM_TRAIN = 104
SALT_ER = 105
SALT_NOHP = 106
SALT_EVAL = 9001


def _rng(*key):
    return np.random.default_rng(np.random.SeedSequence(key))


# --- losses -----------------------------------------------------------------

def _as_label_matrix(labels, num_entities):
    labels = np.asarray(labels)
    if labels.ndim == 1:
        mat = np.zeros((len(labels), num_entities))
        mat[np.arange(len(labels)), labels.astype(np.int64)] = 1.0
        return mat
    return labels.astype(np.float64)


def loss_current_grad(scores, labels):
    """Mean multi-class cross-entropy over queries, with its score gradient.

    Labels may be integer targets or a {0,1} matrix (multi-hot rows allowed);
    a row with no positive label is a contract violation.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = _as_label_matrix(labels, scores.shape[1])
    if y.shape != scores.shape:
        raise ContractError(f"labels shape {y.shape} != scores shape {scores.shape}")
    row_pos = y.sum(axis=1)
    if np.any(row_pos <= 0):
        raise ContractError("label row with no positive entry")
    B = scores.shape[0]
    z = scores - scores.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_p = z - lse
    loss = float(-(y * log_p).sum() / B)
    p = np.exp(log_p)
    d_scores = (row_pos[:, None] * p - y) / B
    return loss, d_scores


def loss_current(scores, labels) -> float:
    return loss_current_grad(scores, labels)[0]


def loss_total(l_tc: float, replay_facts, score_fn, mu: float) -> float:
    """L_t = L_current + mu * L_replay, the replay term applying the same
    cross-entropy to the prompt triples under the current model."""
    if mu < 0:
        raise ContractError(f"mu must be >= 0, got {mu}")
    replay_facts = np.asarray(replay_facts, dtype=np.int64).reshape(-1, replay_facts.shape[-1] if getattr(replay_facts, "ndim", 2) > 1 else 3)
    if len(replay_facts) == 0:
        return float(l_tc)
    scores = score_fn(replay_facts[:, :2])
    l_tr = loss_current(scores, replay_facts[:, 2])
    return float(l_tc) + mu * l_tr


# --- replay preparation -----------------------------------------------------

@dataclass
class ReplayStats:
    prompts_built: int = 0
    prompt_triples: int = 0
    generated: int = 0
    injected_entities: int = 0
    hook_calls: int = 0


@dataclass
class TaskRecord:
    task: int
    losses: list = field(default_factory=list)
    valid_mrr: list = field(default_factory=list)
    epochs_run: int = 0
    alphas: list = field(default_factory=list)
    stats: ReplayStats = field(default_factory=ReplayStats)
    dm_losses: list = field(default_factory=list)


class CountingInjection(ReplayInjection):
    """ReplayInjection that counts hook invocations for ablation assertions."""

    def __init__(self, *args, stats=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.stats = stats

    def apply(self, layer, h, alpha=None):
        if self.stats is not None:
            self.stats.hook_calls += 1
        return super().apply(layer, h, alpha=alpha)


def replay_pool_for(stream: TaskStream, t: int, query_entities, config: TrainConfig):
    """Prompt triples (s, r, e, time) for the given query entities at task t."""
    history = stream.history_train(t)
    return build_replay_pool(
        query_entities, config.k, t, history, stream.vocab.num_relations, config.seed
    )


def _no_hp_pool(stream: TaskStream, t: int, size: int, seed: int):
    """Uniform raw historical facts of matching size: the prompt-free replay
    source used by the no_hp ablation."""
    history = stream.history_train(t)
    pool = [h for h in history if len(h)]
    if not pool or size == 0:
        return np.zeros((0, 4), dtype=np.int64)
    allfacts = np.concatenate(pool)
    rng = _rng(seed, SALT_NOHP, t)
    idx = rng.choice(len(allfacts), size=min(size, len(allfacts)), replace=False)
    picked = allfacts[np.sort(idx)]
    return picked[:, [0, 1, 2, 3]]


def prepare_replay(stream: TaskStream, t: int, source: ReasonerParams,
                   dm: DenoiserParams, schedule: NoiseSchedule,
                   query_entities, alpha_logit, config: TrainConfig,
                   stats: ReplayStats, rng_key=SALT_GEN):
    """Build prompts, run guided generation, and assemble the injection.

    `source` is the frozen parameter copy used both for condition embeddings
    and for guidance scoring; `alpha_logit` is the live array of the model
    being trained so the blend weight adapts during the task.
    """
    triples, entities, sets = replay_pool_for(stream, t, query_entities, config)
    stats.prompts_built += sum(len(rs.prompts) for rs in sets)
    if config.no_hp:
        triples = _no_hp_pool(stream, t, len(triples), config.seed)
        entities = np.unique(triples[:, [0, 2]]) if len(triples) else entities[:0]
    stats.prompt_triples += len(triples)
    if len(triples) == 0:
        return None, triples
    rng = _rng(config.seed, rng_key, t)
    gen_target, gen_neighbor = guided_reverse(
        triples[:, :3], dm, schedule, source, config.effective_gamma, rng, tau=config.tau
    )
    stats.generated += 2 * len(triples)
    outputs = {}
    for b in range(len(triples)):
        outputs.setdefault(int(triples[b, 2]), []).append(gen_target[b])
        outputs.setdefault(int(triples[b, 0]), []).append(gen_neighbor[b])
    replay_map = aggregate_replay(outputs)
    ids = np.array(sorted(replay_map), dtype=np.int64)
    vecs = np.stack([replay_map[int(e)] for e in ids])
    stats.injected_entities += len(ids)
    injection = CountingInjection(
        entity_ids=ids, vectors=vecs, alpha_logit=alpha_logit,
        additive=config.no_ar, stats=stats,
    )
    return injection, triples


# --- experience-replay buffer -------------------------------------------------

class ReservoirBuffer:
    """Fixed-capacity uniform sample over every fact seen so far."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.items: list = []
        self.n_seen = 0

    def __len__(self):
        return len(self.items)

    def add_many(self, facts, rng):
        for fact in np.asarray(facts, dtype=np.int64).reshape(-1, 4):
            if self.capacity > 0:
                if len(self.items) < self.capacity:
                    self.items.append(fact.copy())
                else:
                    j = int(rng.integers(0, self.n_seen + 1))
                    if j < self.capacity:
                        self.items[j] = fact.copy()
            self.n_seen += 1

    def sample(self, k: int, rng):
        if k <= 0 or not self.items:
            return np.zeros((0, 4), dtype=np.int64)
        k = min(k, len(self.items))
        idx = rng.choice(len(self.items), size=k, replace=False)
        return np.stack([self.items[i] for i in np.sort(idx)])


# --- per-task training --------------------------------------------------------

def _valid_mrr(params, h_final, valid):
    if len(valid) == 0:
        return float("nan")
    logits = score(params, h_final, valid[:, :2])
    targets = valid[:, 2]
    better = (logits > logits[np.arange(len(valid)), targets][:, None]).sum(axis=1)
    ties = (logits == logits[np.arange(len(valid)), targets][:, None]).sum(axis=1)
    ranks = better + (ties + 1) / 2.0
    return float((1.0 / ranks).mean())


def train_task(stream: TaskStream, t: int, params_prev: ReasonerParams,
               dm_prev, config: TrainConfig, er_buffer=None):
    """Train task t from the previous task's parameters.

    Returns (params_t, dm_t, TaskRecord). dm_t is None for ft/er runs.
    """
    params = params_prev.copy()
    record = TaskRecord(task=t)
    stats = record.stats
    schedule = NoiseSchedule.linear(config.dm_steps) if config.method == "dgar" else None

    train = stream.train_facts(t)
    valid = stream.tasks[t].valid.quads
    queries = train[:, :2]
    targets = train[:, 2]

    injection = None
    replay_facts = np.zeros((0, 4), dtype=np.int64)
    if config.method == "dgar" and t > 0:
        query_entities = np.unique(train[:, 0])
        if config.no_gr:
            # prompts still feed the replay regularizer; no generation, no hook
            replay_facts, _, sets = replay_pool_for(stream, t, query_entities, config)
            stats.prompts_built += sum(len(rs.prompts) for rs in sets)
            stats.prompt_triples += len(replay_facts)
        else:
            injection, replay_facts = prepare_replay(
                stream, t, params_prev, dm_prev, schedule, query_entities,
                params.alpha_logit, config, stats,
            )
    elif config.method == "er" and er_buffer is not None and t > 0:
        # budget parity: sample as many facts as the prompts would contain
        budget_triples, _, _ = replay_pool_for(stream, t, np.unique(train[:, 0]), config)
        sampled = er_buffer.sample(len(budget_triples), _rng(config.seed, SALT_ER, t, 1))
        if len(sampled):
            combined = np.concatenate([train, sampled])
            queries = combined[:, :2]
            targets = combined[:, 2]

    use_replay_loss = (
        config.method == "dgar" and not config.no_lr and config.mu > 0 and len(replay_facts) > 0
    )
    history = stream.history_train(t)[-config.window:]
    opt = Adam(params.tensors(), lr=config.lr,
               lr_scale={"alpha_logit": config.alpha_lr_scale})
    best = None
    best_mrr = -np.inf
    stall = 0
    for epoch in range(config.epochs):
        stack, cache = evolve(params, history, hook=injection, want_cache=True)
        h_final = stack.h_final
        logits, sc_cache = score(params, h_final, queries, want_cache=True)
        l_tc, d_logits = loss_current_grad(logits, targets)
        l_total = l_tc
        grads = zero_grads_like(params.tensors())
        d_hf = np.zeros_like(h_final)
        score_backward(params, h_final, sc_cache, d_logits, grads, d_hf)
        if use_replay_loss:
            logits_r, sc_cache_r = score(params, h_final, replay_facts[:, :2], want_cache=True)
            l_tr, d_logits_r = loss_current_grad(logits_r, replay_facts[:, 2])
            l_total = l_tc + config.mu * l_tr
            score_backward(params, h_final, sc_cache_r, config.mu * d_logits_r, grads, d_hf)
        evolve_backward(params, cache, d_hf, grads, hook=injection)
        opt.step(grads)
        record.losses.append(l_total)
        record.epochs_run = epoch + 1

        if len(valid) and config.patience > 0:
            v_stack = evolve(params, history, hook=injection)
            mrr = _valid_mrr(params, v_stack.h_final, valid)
            record.valid_mrr.append(mrr)
            if mrr > best_mrr + 1e-12:
                best_mrr = mrr
                best = {k: v.copy() for k, v in params.tensors().items()}
                stall = 0
            else:
                stall += 1
                if stall >= config.patience:
                    break
    if best is not None:
        for key, val in params.tensors().items():
            val[...] = best[key]
    params.assert_finite()
    record.alphas = [float(a) for a in params.alphas()] if config.method == "dgar" else []

    dm_next = None
    if config.method == "dgar":
        train_set = FactSet(train, "train")
        rng_dm = _rng(config.seed, SALT_DM_TRAIN, t)
        if dm_prev is None:
            dm_next = init_denoiser(config.dim, config.dm_steps, _rng(config.seed, SALT_DM_INIT),
                                    n_heads=config.heads, d_ff=config.ffn_dim)
            record.dm_losses = pretrain(dm_next, train_set, params.ent, params.rel,
                                        schedule, config.dm_pretrain_epochs, rng_dm,
                                        lr=config.dm_lr, batch_size=config.dm_batch)
        else:
            replay_map = None
            alpha = 0.5
            if injection is not None and not injection.additive:
                replay_map = {int(e): injection.vectors[i] for i, e in enumerate(injection.entity_ids)}
                alpha = sigmoid(params.alpha_logit[-1])
            dm_next, record.dm_losses = continual_update_dm(
                dm_prev, train_set, params.ent, params.rel, schedule,
                config.dm_epochs, rng_dm, lr=config.dm_lr,
                batch_size=config.dm_batch, replay_map=replay_map, alpha=alpha,
            )
    if config.method == "er" and er_buffer is not None:
        er_buffer.add_many(train, _rng(config.seed, SALT_ER, t, 2))
    return params, dm_next, record


def run_er_baseline(stream, t, params_prev, buffer, config):
    """One experience-replay task step (thin wrapper over train_task)."""
    params, _, record = train_task(stream, t, params_prev, None, config, er_buffer=buffer)
    return params, record


# --- stream driver ------------------------------------------------------------

@dataclass
class RunResult:
    config: TrainConfig
    reasoners: list = field(default_factory=list)   # one ReasonerParams per task
    denoisers: list = field(default_factory=list)   # one DenoiserParams or None per task
    records: list = field(default_factory=list)
    schedule: NoiseSchedule | None = None


def run_stream(stream: TaskStream, config: TrainConfig, on_task=None) -> RunResult:
    """Drive the whole task stream under `config`.

    `on_task(t, params, dm, record)` runs after each task (checkpointing
    hook for the CLI). Deterministic for a fixed (stream, config).
    """
    rng_init = _rng(config.seed, SALT_INIT)
    params = init_reasoner(stream.vocab.num_entities, stream.vocab.num_relations,
                           config.dim, config.n_layers, rng_init)
    dm = None
    buffer = ReservoirBuffer(config.er_capacity) if config.method == "er" else None
    result = RunResult(config=config)
    result.schedule = NoiseSchedule.linear(config.dm_steps) if config.method == "dgar" else None
    for t in range(stream.num_tasks):
        params, dm_next, record = train_task(stream, t, params, dm, config, er_buffer=buffer)
        if config.method == "dgar":
            dm = dm_next
        result.reasoners.append(params)
        result.denoisers.append(dm if config.method == "dgar" else None)
        result.records.append(record)
        if on_task is not None:
            on_task(t, params, dm if config.method == "dgar" else None, record)
    return result
