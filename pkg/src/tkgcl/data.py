"""Quadruple ingestion, snapshots, and the continual task stream.

Input files follow the event-quadruple convention: one fact per line, four
integer columns (subject, relation, object, raw time) separated by tabs or
spaces, raw times being multiples of a fixed granularity (e.g. 24 for daily
snapshots stored in hours).

Pipeline: load -> group by timestamp -> per-snapshot 8:1:1 split (seeded
shuffle, floor-then-remainder-to-train) -> inverse augmentation *within each
split part*, so a fact and its inverse always share a split.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, EmptyDatasetError, InputError, ParseError

SPLIT_NAMES = ("train", "valid", "test")


@dataclass(frozen=True)
class Vocabulary:
    num_entities: int
    num_relations: int  # before inverse augmentation

    @property
    def num_relations_aug(self) -> int:
        return 2 * self.num_relations


@dataclass
class FactSet:
    """Facts of one split, tagged with provenance so downstream consumers can
    refuse valid/test data where only training facts are allowed."""

    quads: np.ndarray  # (n, 4) int64 rows (s, r, o, t)
    split: str

    def __post_init__(self):
        self.quads = np.asarray(self.quads, dtype=np.int64).reshape(-1, 4)
        if self.split not in SPLIT_NAMES:
            raise DomainError(f"unknown split {self.split!r}")

    def __len__(self):
        return len(self.quads)


@dataclass
class Snapshot:
    """All facts sharing one timestamp."""

    timestamp: int
    facts: np.ndarray  # (n, 4) int64, every row carries `timestamp`

    def __post_init__(self):
        self.facts = canonical(self.facts)
        if len(self.facts) and not np.all(self.facts[:, 3] == self.timestamp):
            raise DomainError("snapshot facts must all carry its timestamp")


@dataclass
class Task:
    index: int
    train: FactSet
    valid: FactSet
    test: FactSet

    @property
    def splits(self):
        return (self.train, self.valid, self.test)


@dataclass
class TaskStream:
    """Time-ordered tasks plus the global vocabulary.

    Task index equals stream position: timestamps are densely re-indexed at
    build time even if the raw file skips periods.
    """

    tasks: list[Task]
    vocab: Vocabulary
    raw_times: list[int] = field(default_factory=list)  # pre-densification

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    def train_facts(self, t: int) -> np.ndarray:
        return self.tasks[t].train.quads

    def history_train(self, t: int) -> list[np.ndarray]:
        """Train-split graphs at times < t, the only snapshots replay and
        message passing may read (keeps valid/test facts out of the model's
        input everywhere)."""
        return [self.tasks[i].train.quads for i in range(t)]

    def full_snapshot(self, t: int) -> np.ndarray:
        """Train+valid+test facts at time t (ground truth for filtering)."""
        return canonical(np.concatenate([s.quads for s in self.tasks[t].splits]))


def canonical(quads: np.ndarray) -> np.ndarray:
    """Sorted, duplicate-free row form; the package-wide set representation."""
    quads = np.asarray(quads, dtype=np.int64).reshape(-1, 4)
    if len(quads) == 0:
        return quads
    return np.unique(quads, axis=0)


def load_quadruples(path, granularity: int = 1):
    """Read a quadruple file; divide raw times by `granularity`.

    Returns (quads, vocab) with quads an (n, 4) int64 array in canonical
    order. Vocabulary sizes are max id + 1. Dense task re-indexing happens
    later, in build_task_stream, so returned timestamps may skip values.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"quadruple file not found: {path}")
    if granularity < 1:
        raise InputError(f"granularity must be >= 1, got {granularity}")
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(path, line_no, f"expected 4 integer fields, got {len(parts)}")
            try:
                s, r, o, raw_t = (int(p) for p in parts)
            except ValueError:
                raise ParseError(path, line_no, f"non-integer field in {parts!r}") from None
            if min(s, r, o, raw_t) < 0:
                raise ParseError(path, line_no, "negative id or time")
            if raw_t % granularity != 0:
                raise ParseError(path, line_no, f"time {raw_t} not a multiple of granularity {granularity}")
            rows.append((s, r, o, raw_t // granularity))
    if not rows:
        raise EmptyDatasetError(f"no facts in {path}")
    quads = canonical(np.array(rows, dtype=np.int64))
    vocab = Vocabulary(
        num_entities=int(max(quads[:, 0].max(), quads[:, 2].max())) + 1,
        num_relations=int(quads[:, 1].max()) + 1,
    )
    return quads, vocab


def add_inverse(quads: np.ndarray, num_relations: int) -> np.ndarray:
    """Union facts with their inverses (o, r + num_relations, s, t)."""
    quads = np.asarray(quads, dtype=np.int64).reshape(-1, 4)
    if len(quads) == 0:
        return quads.copy()
    if quads[:, 1].max() >= num_relations:
        raise DomainError(
            f"relation id {int(quads[:, 1].max())} >= num_relations {num_relations}"
        )
    inv = quads[:, [2, 1, 0, 3]].copy()
    inv[:, 1] += num_relations
    return canonical(np.concatenate([quads, inv]))


def invert_relation(r: int, num_relations: int) -> int:
    """Map r to its inverse id: r + R for r < R, r - R otherwise."""
    return r + num_relations if r < num_relations else r - num_relations


def _split_counts(n: int, ratios) -> tuple[int, int, int]:
    # floor each ratio's count, hand remainders to train
    n_train = int(np.floor(n * ratios[0]))
    n_valid = int(np.floor(n * ratios[1]))
    n_test = int(np.floor(n * ratios[2]))
    n_train += n - (n_train + n_valid + n_test)
    return n_train, n_valid, n_test


def split_snapshots(quads: np.ndarray, ratios, rng: np.random.Generator):
    """Group facts by timestamp (densely re-indexed) and split each snapshot.

    Returns a list of (task_index, raw_time, train, valid, test) with
    un-augmented parts, plus the list of raw times in ascending order.
    """
    ratios = tuple(float(x) for x in ratios)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise InputError(f"split ratios must be 3 non-negative fractions summing to 1, got {ratios}")
    quads = canonical(quads)
    if len(quads) == 0:
        raise EmptyDatasetError("cannot build a task stream from zero facts")
    raw_times = np.unique(quads[:, 3])
    out = []
    for t_idx, raw_t in enumerate(raw_times):
        snap = quads[quads[:, 3] == raw_t].copy()
        snap[:, 3] = t_idx
        n = len(snap)
        if n < 3:
            warnings.warn(
                f"snapshot at time {int(raw_t)} has only {n} fact(s); all assigned to train",
                stacklevel=2,
            )
            counts = (n, 0, 0)
        else:
            counts = _split_counts(n, ratios)
        perm = rng.permutation(n)
        snap = snap[perm]
        tr = snap[: counts[0]]
        va = snap[counts[0] : counts[0] + counts[1]]
        te = snap[counts[0] + counts[1] :]
        out.append((t_idx, int(raw_t), canonical(tr), canonical(va), canonical(te)))
    return out, [int(t) for t in raw_times]


def build_task_stream(
    quads: np.ndarray,
    ratios,
    rng: np.random.Generator,
    num_relations: int | None = None,
    augment: bool = True,
) -> TaskStream:
    """Split facts into the continual task stream.

    Inverse augmentation is applied after splitting, within each part, so a
    fact and its inverse never straddle a split boundary.
    """
    quads = canonical(quads)
    if len(quads) == 0:
        raise EmptyDatasetError("cannot build a task stream from zero facts")
    if num_relations is None:
        num_relations = int(quads[:, 1].max()) + 1
    parts, raw_times = split_snapshots(quads, ratios, rng)
    tasks = []
    for t_idx, _raw, tr, va, te in parts:
        if augment:
            tr, va, te = (add_inverse(p, num_relations) for p in (tr, va, te))
        tasks.append(
            Task(
                index=t_idx,
                train=FactSet(tr, "train"),
                valid=FactSet(va, "valid"),
                test=FactSet(te, "test"),
            )
        )
    vocab = Vocabulary(
        num_entities=int(max(quads[:, 0].max(), quads[:, 2].max())) + 1,
        num_relations=num_relations,
    )
    return TaskStream(tasks=tasks, vocab=vocab, raw_times=raw_times)


# --- dataset directory format (written by `tkgcl ingest`) -------------------

def write_dataset(out_dir, quads, ratios, rng, vocab, granularity, seed):
    """Write canonical per-task split files plus a vocabulary header.

    Layout: <out>/vocab.txt and <out>/tasks/t###/{train,valid,test}.txt with
    un-augmented facts (augmentation is re-applied on load). Files are
    byte-stable for identical inputs.
    """
    out_dir = Path(out_dir)
    parts, raw_times = split_snapshots(quads, ratios, rng)
    (out_dir / "tasks").mkdir(parents=True, exist_ok=True)
    header = [
        f"num_entities = {vocab.num_entities}",
        f"num_relations = {vocab.num_relations}",
        f"num_tasks = {len(parts)}",
        f"granularity = {granularity}",
        f"seed = {seed}",
        "ratios = " + ",".join(f"{r:g}" for r in ratios),
        "raw_times = " + ",".join(str(t) for t in raw_times),
    ]
    (out_dir / "vocab.txt").write_text("\n".join(header) + "\n")
    for t_idx, _raw, tr, va, te in parts:
        task_dir = out_dir / "tasks" / f"t{t_idx:03d}"
        task_dir.mkdir(parents=True, exist_ok=True)
        for name, part in zip(SPLIT_NAMES, (tr, va, te)):
            lines = [f"{s}\t{r}\t{o}\t{t}" for s, r, o, t in part]
            (task_dir / f"{name}.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    return out_dir


def read_vocab_header(dataset_dir) -> dict:
    path = Path(dataset_dir) / "vocab.txt"
    if not path.exists():
        raise InputError(f"not a dataset directory (no vocab.txt): {dataset_dir}")
    out = {}
    for line in path.read_text().splitlines():
        if "=" not in line:
            continue
        key, val = (x.strip() for x in line.split("=", 1))
        out[key] = val
    return out


def load_dataset(dataset_dir, augment: bool = True) -> TaskStream:
    """Rebuild a TaskStream from an ingested dataset directory."""
    dataset_dir = Path(dataset_dir)
    header = read_vocab_header(dataset_dir)
    vocab = Vocabulary(int(header["num_entities"]), int(header["num_relations"]))
    num_tasks = int(header["num_tasks"])
    raw_times = [int(x) for x in header["raw_times"].split(",")] if header.get("raw_times") else []
    tasks = []
    for t_idx in range(num_tasks):
        task_dir = dataset_dir / "tasks" / f"t{t_idx:03d}"
        parts = []
        for name in SPLIT_NAMES:
            path = task_dir / f"{name}.txt"
            if not path.exists():
                raise InputError(f"missing split file {path}")
            text = path.read_text().strip()
            if text:
                rows = [[int(x) for x in line.split()] for line in text.splitlines()]
                part = np.array(rows, dtype=np.int64)
            else:
                part = np.zeros((0, 4), dtype=np.int64)
            if augment:
                part = add_inverse(part, vocab.num_relations)
            parts.append(FactSet(part, name))
        tasks.append(Task(index=t_idx, train=parts[0], valid=parts[1], test=parts[2]))
    return TaskStream(tasks=tasks, vocab=vocab, raw_times=raw_times)
