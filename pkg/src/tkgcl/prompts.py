"""Historical context prompts: the sampling unit of replay data.

A prompt for entity e at past time i is the set of triples incident to e in
the snapshot at i, normalized so e sits in the object slot: (s, r, e) facts
are kept as-is and (e, r, s) facts become (s, r_inv, e). Sampling picks k
distinct historical times per query entity; the entities appearing in the
sampled prompts form the replay set eligible for injection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import invert_relation
from .errors import TemporalLeakError


@dataclass
class HistoryPrompt:
    """Triples (s, r, e) surrounding `entity` at historical time `time`."""

    entity: int
    time: int
    triples: np.ndarray  # (n, 3) int64 rows (s, r, entity)

    def __post_init__(self):
        self.triples = np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)
        if len(self.triples):
            self.triples = np.unique(self.triples, axis=0)

    def __len__(self):
        return len(self.triples)


@dataclass
class ReplaySet:
    """Prompts at up to k distinct times plus the induced entity set."""

    entity: int
    prompts: list[HistoryPrompt] = field(default_factory=list)
    entities: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def all_triples(self) -> np.ndarray:
        """(n, 4) rows (s, r, e, time) pooled over prompts, in time order."""
        rows = [
            np.column_stack([p.triples, np.full(len(p), p.time, dtype=np.int64)])
            for p in self.prompts
            if len(p)
        ]
        if not rows:
            return np.zeros((0, 4), dtype=np.int64)
        return np.concatenate(rows)

    def dump(self) -> str:
        lines = [f"replay-set entity={self.entity} times={[p.time for p in self.prompts]}"]
        for p in self.prompts:
            for s, r, o in p.triples:
                lines.append(f"  t={p.time}: ({s}, {r}, {o})")
        lines.append("  entities: " + ",".join(str(e) for e in self.entities))
        return "\n".join(lines)


def build_prompt(entity: int, time: int, current_task: int, history: list[np.ndarray],
                 num_relations: int) -> HistoryPrompt:
    """Build the prompt for `entity` at `time` from stored snapshots.

    `history` holds the fact arrays of snapshots 0..t-1 for the current task
    t; reading at or past the current task is a temporal leak.
    """
    if time >= current_task:
        raise TemporalLeakError(f"prompt time {time} >= current task {current_task}")
    snap = history[time]
    triples = []
    if len(snap):
        incoming = snap[snap[:, 2] == entity]
        for s, r, o, _t in incoming:
            triples.append((s, r, o))
        outgoing = snap[snap[:, 0] == entity]
        for s, r, o, _t in outgoing:
            triples.append((o, invert_relation(int(r), num_relations), s))
    triples = np.array(triples, dtype=np.int64).reshape(-1, 3)
    return HistoryPrompt(entity=int(entity), time=int(time), triples=triples)


def entity_times(entity: int, history: list[np.ndarray]) -> np.ndarray:
    """Historical times at which `entity` has at least one incident fact."""
    times = [
        i
        for i, snap in enumerate(history)
        if len(snap) and bool(np.any((snap[:, 0] == entity) | (snap[:, 2] == entity)))
    ]
    return np.array(times, dtype=np.int64)


def prompt_rng(seed: int, task: int, entity: int) -> np.random.Generator:
    """Per-entity generator split deterministically from (seed, task, entity)."""
    return np.random.default_rng(np.random.SeedSequence((seed, task, entity)))


def sample_prompts(entity: int, k: int, current_task: int, history: list[np.ndarray],
                   num_relations: int, rng: np.random.Generator) -> ReplaySet:
    """Sample prompts at min(k, |T_e|) distinct times, uniformly without
    replacement over the times where `entity` appears."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    replay = ReplaySet(entity=int(entity))
    if k == 0:
        return replay
    times = entity_times(entity, history)
    if len(times) == 0:
        return replay
    take = min(k, len(times))
    chosen = np.sort(rng.choice(times, size=take, replace=False))
    replay.prompts = [
        build_prompt(entity, int(i), current_task, history, num_relations) for i in chosen
    ]
    replay.entities = collect_replay_entities(replay.prompts)
    return replay


def collect_replay_entities(prompts: list[HistoryPrompt]) -> np.ndarray:
    """Union of heads and tails over all prompt triples, sorted."""
    ids = [p.triples[:, 0] for p in prompts if len(p)]
    ids += [p.triples[:, 2] for p in prompts if len(p)]
    if not ids:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(ids))


def build_replay_pool(query_entities, k: int, current_task: int, history: list[np.ndarray],
                      num_relations: int, seed: int):
    """Replay sets for every distinct query entity of the current batch.

    Returns (pooled (n, 4) triples-with-times, entity set, per-entity sets).
    """
    sets = []
    for e in np.unique(np.asarray(query_entities, dtype=np.int64)):
        rng = prompt_rng(seed, current_task, int(e))
        sets.append(sample_prompts(int(e), k, current_task, history, num_relations, rng))
    pooled = [rs.all_triples() for rs in sets if len(rs.prompts)]
    triples = np.concatenate(pooled) if pooled else np.zeros((0, 4), dtype=np.int64)
    entities = collect_replay_entities([p for rs in sets for p in rs.prompts])
    return triples, entities, sets
