import numpy as np
import pytest

from tkgcl.data import (add_inverse, build_task_stream, canonical, load_dataset,
                        load_quadruples, split_snapshots, write_dataset)
from tkgcl.errors import DomainError, EmptyDatasetError, ParseError


def _write(tmp_path, text, name="quads.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_single_line_parse(tmp_path):
    path = _write(tmp_path, "3 1 5 24\n")
    quads, vocab = load_quadruples(path, granularity=24)
    assert quads.tolist() == [[3, 1, 5, 1]]
    assert vocab.num_entities == 6
    assert vocab.num_relations == 2


def test_empty_file_is_an_error(tmp_path):
    path = _write(tmp_path, "")
    with pytest.raises(EmptyDatasetError):
        load_quadruples(path)


def test_times_divided_by_granularity(tmp_path):
    # brute-force oracle: count lines and distinct raw times directly
    rng = np.random.default_rng(0)
    lines = []
    for i in range(10):
        t = [0, 24, 48][i % 3]
        lines.append(f"{rng.integers(5)} {rng.integers(3)} {5 + rng.integers(5)} {t}")
    path = _write(tmp_path, "\n".join(lines) + "\n")
    n_lines = len(lines)
    n_distinct_raw = len({line.split()[3] for line in lines})

    quads, _ = load_quadruples(path, granularity=24)
    assert set(quads[:, 3].tolist()) == {0, 1, 2}
    assert len(quads) == n_lines  # all rows distinct by construction
    assert len(np.unique(quads[:, 3])) == n_distinct_raw


def test_malformed_line_names_line_number(tmp_path):
    path = _write(tmp_path, "1 2 3 0\n1 2 three 0\n")
    with pytest.raises(ParseError) as exc:
        load_quadruples(path)
    assert exc.value.line_no == 2
    assert ":2:" in str(exc.value)


def test_wrong_column_count_is_a_parse_error(tmp_path):
    path = _write(tmp_path, "1 2 3\n")
    with pytest.raises(ParseError):
        load_quadruples(path)


def test_off_granularity_time_is_a_parse_error(tmp_path):
    path = _write(tmp_path, "1 2 3 25\n")
    with pytest.raises(ParseError):
        load_quadruples(path, granularity=24)


def test_tabs_and_spaces_both_accepted(tmp_path):
    path = _write(tmp_path, "1\t2\t3\t0\n4 0 5 0\n")
    quads, _ = load_quadruples(path)
    assert len(quads) == 2


def test_add_inverse_single_fact():
    out = add_inverse(np.array([[3, 1, 5, 1]]), num_relations=2)
    assert sorted(map(tuple, out.tolist())) == [(3, 1, 5, 1), (5, 3, 3, 1)]


def test_add_inverse_empty():
    out = add_inverse(np.zeros((0, 4), dtype=np.int64), num_relations=2)
    assert len(out) == 0


def test_add_inverse_involution_on_random_facts(rng):
    # brute-force check: inverting the inverse half returns the originals
    R = 6
    facts = set()
    while len(facts) < 50:
        facts.add((int(rng.integers(30)), int(rng.integers(R)),
                   int(rng.integers(30, 60)), int(rng.integers(4))))
    facts = canonical(np.array(sorted(facts), dtype=np.int64))
    aug = add_inverse(facts, R)
    assert len(aug) == 100
    fwd = aug[aug[:, 1] < R]
    inv = aug[aug[:, 1] >= R]
    assert len(fwd) == len(inv) == 50
    re_inverted = inv[:, [2, 1, 0, 3]].copy()
    re_inverted[:, 1] -= R
    assert set(map(tuple, re_inverted.tolist())) == set(map(tuple, facts.tolist()))


def test_add_inverse_rejects_out_of_range_relation():
    with pytest.raises(DomainError):
        add_inverse(np.array([[0, 5, 1, 0]]), num_relations=2)


def test_split_sizes_floor_then_remainder(rng):
    # oracle: floor each ratio's count, remainder goes to train
    facts = np.array([[i, 0, i + 1, 7] for i in range(10)])
    parts, _ = split_snapshots(facts, (0.8, 0.1, 0.1), rng)
    _idx, _raw, tr, va, te = parts[0]
    n = 10
    exp_tr, exp_va, exp_te = int(n * 0.8), int(n * 0.1), int(n * 0.1)
    exp_tr += n - (exp_tr + exp_va + exp_te)
    assert (len(tr), len(va), len(te)) == (exp_tr, exp_va, exp_te) == (8, 1, 1)


def test_tasks_follow_timestamp_order(rng):
    facts = np.array([[0, 0, 1, 5], [1, 0, 2, 0], [2, 0, 3, 11]] * 3)
    facts[:, 0] += np.arange(9)  # make rows distinct
    stream = build_task_stream(facts, (0.8, 0.1, 0.1), rng)
    assert stream.num_tasks == 3
    assert stream.raw_times == [0, 5, 11]
    for t, task in enumerate(stream.tasks):
        for part in task.splits:
            if len(part.quads):
                assert np.all(part.quads[:, 3] == t)


def test_same_seed_identical_splits():
    facts = np.array([[i, i % 3, (i + 1) % 20, i % 4] for i in range(40)])
    a = build_task_stream(facts, (0.8, 0.1, 0.1), np.random.default_rng(9))
    b = build_task_stream(facts, (0.8, 0.1, 0.1), np.random.default_rng(9))
    for ta, tb in zip(a.tasks, b.tasks):
        for pa, pb in zip(ta.splits, tb.splits):
            assert np.array_equal(pa.quads, pb.quads)


def test_small_snapshot_all_train_with_warning(rng):
    facts = np.array([[0, 0, 1, 0], [1, 0, 2, 0]])
    with pytest.warns(UserWarning):
        stream = build_task_stream(facts, (0.8, 0.1, 0.1), rng, augment=False)
    assert len(stream.tasks[0].train.quads) == 2
    assert len(stream.tasks[0].valid.quads) == 0
    assert len(stream.tasks[0].test.quads) == 0


def test_splits_disjoint_and_cover_snapshot(toy_stream):
    for task in toy_stream.tasks:
        tr, va, te = (set(map(tuple, p.quads.tolist())) for p in task.splits)
        assert not (tr & va) and not (tr & te) and not (va & te)
        snap = set(map(tuple, toy_stream.full_snapshot(task.index).tolist()))
        assert (tr | va | te) == snap


def test_inverse_relations_partition(toy_stream):
    R = toy_stream.vocab.num_relations
    for task in toy_stream.tasks:
        rels = task.train.quads[:, 1]
        assert ((rels < R).sum()) == ((rels >= R).sum())
        assert rels.max() < 2 * R


def test_fact_and_inverse_share_split(toy_stream):
    R = toy_stream.vocab.num_relations
    for task in toy_stream.tasks:
        for part in task.splits:
            rows = set(map(tuple, part.quads.tolist()))
            for s, r, o, t in part.quads:
                r_inv = r + R if r < R else r - R
                assert (o, r_inv, s, t) in rows


def test_snapshot_type_invariants():
    from tkgcl.data import Snapshot
    snap = Snapshot(timestamp=2, facts=np.array([[0, 1, 2, 2], [0, 1, 2, 2], [3, 0, 1, 2]]))
    assert len(snap.facts) == 2  # duplicates removed
    with pytest.raises(DomainError):
        Snapshot(timestamp=1, facts=np.array([[0, 1, 2, 2]]))


def test_toy_generator_respects_granularity(tmp_path):
    from tkgcl.toy import generate_toy_quads, write_toy_file
    quads = generate_toy_quads(num_entities=10, num_relations=2, num_tasks=3,
                               facts_per_task=12, seed=0, granularity=24)
    assert set(quads[:, 3].tolist()) == {0, 24, 48}
    path = write_toy_file(tmp_path / "t.txt", quads)
    loaded, _ = load_quadruples(path, granularity=24)
    assert set(loaded[:, 3].tolist()) == {0, 1, 2}


def test_dataset_roundtrip(tmp_path, rng):
    facts = np.array([[i % 7, i % 3, (i + 2) % 7, i % 3] for i in range(30)])
    facts = canonical(facts)
    from tkgcl.data import Vocabulary
    vocab = Vocabulary(7, 3)
    write_dataset(tmp_path / "ds", facts, (0.8, 0.1, 0.1), rng, vocab, 1, 0)
    stream = load_dataset(tmp_path / "ds")
    assert stream.vocab.num_entities == 7
    assert stream.num_tasks == 3
    built = build_task_stream(facts, (0.8, 0.1, 0.1), np.random.default_rng(12345))
    assert stream.num_tasks == built.num_tasks
    # loaded facts are augmented
    all_loaded = np.concatenate([t.train.quads for t in stream.tasks])
    assert all_loaded[:, 1].max() >= 3
