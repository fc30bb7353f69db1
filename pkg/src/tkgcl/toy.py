"""Synthetic temporal-KG generator for desk-scale runs.

Facts come from two sources: a small recurring pool shared by every task
(stable knowledge) and a large pattern bank swept by a sliding window
(regime knowledge). Neighboring tasks share most of their window, distant
tasks almost none, so sequential fine-tuning overwrites old regimes and
visibly forgets while replay-based methods have real structure to retain.
"""

from __future__ import annotations

import numpy as np

from .data import canonical


def generate_toy_quads(num_entities=50, num_relations=8, num_tasks=10,
                       facts_per_task=200, recurrence=0.3, seed=0, granularity=1):
    """Quadruple array with raw times t * granularity and roughly
    facts_per_task rows per task, `recurrence` of them from the shared pool."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 77)))
    n_rec = int(round(recurrence * facts_per_task))
    n_new = facts_per_task - n_rec
    pool = _distinct_triples(rng, facts_per_task, num_entities, num_relations)
    # window slides half its width per task: each regime pattern lives in
    # roughly two consecutive tasks, then leaves the stream
    bank_size = max(2 * n_new, n_new + (num_tasks - 1) * max(1, n_new // 2))
    bank = _distinct_triples(rng, bank_size, num_entities, num_relations)
    stride = 0 if num_tasks <= 1 else (len(bank) - n_new) / (num_tasks - 1)
    rows = []
    for t in range(num_tasks):
        take = rng.choice(len(pool), size=min(n_rec, len(pool)), replace=False)
        rec = pool[np.sort(take)]
        lo = int(round(t * stride))
        window = bank[lo : lo + n_new]
        facts = np.concatenate([rec, window])
        quads = np.column_stack([facts, np.full(len(facts), t * granularity, dtype=np.int64)])
        rows.append(canonical(quads))
    return np.concatenate(rows)


def _distinct_triples(rng, n, num_entities, num_relations, entities=None):
    if n <= 0:
        return np.zeros((0, 3), dtype=np.int64)
    ents = np.arange(num_entities) if entities is None else np.asarray(entities)
    seen = set()
    out = []
    while len(out) < n:
        s = int(ents[rng.integers(len(ents))])
        r = int(rng.integers(num_relations))
        o = int(ents[rng.integers(len(ents))])
        if s == o or (s, r, o) in seen:
            continue
        seen.add((s, r, o))
        out.append((s, r, o))
    return np.array(out, dtype=np.int64)


def write_toy_file(path, quads):
    lines = [f"{s}\t{r}\t{o}\t{t}" for s, r, o, t in quads]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
