import numpy as np
import pytest

from tkgcl.config import TrainConfig
from tkgcl.errors import ContractError, StreamContinuityError
from tkgcl.metrics import (MetricsMatrix, evaluate_stream, forgetting_score,
                           hits_at_k, mrr, rank_query, summarize, write_report)
from tkgcl.trainer import run_stream


def test_rank_strict_top():
    assert rank_query(np.array([0.1, 0.9, 0.3]), 1) == 1


def test_rank_all_tied_is_expected_rank():
    # oracle: average of positions 1..5 is 3
    assert rank_query(np.ones(5), 2) == np.mean([1, 2, 3, 4, 5])


def test_rank_matches_sort_oracle():
    scores = np.array([0.9, 0.5, 0.7])
    # brute-force sort oracle
    order = np.argsort(-scores)
    assert rank_query(scores, 1) == list(order).index(1) + 1 == 3


def test_rank_random_matches_counting_oracle(rng):
    for _ in range(50):
        scores = rng.standard_normal(20)
        target = int(rng.integers(20))
        expected = 1 + int((scores > scores[target]).sum())
        assert rank_query(scores, target) == expected  # no ties a.s.


def test_rank_argsort_invariance(rng):
    scores = rng.standard_normal(15)
    target = 4
    base = rank_query(scores, target)
    assert rank_query(2.0 * scores + 1.0, target) == base
    assert rank_query(np.exp(scores), target) == base


def test_rank_known_true_filtering():
    scores = np.array([0.9, 0.5, 0.7, 0.8])
    # entities 0 and 3 are known true for this query; only 2 outranks
    assert rank_query(scores, 1, known_true={0, 3, 1}) == 2


def test_rank_filtered_target_is_contract_error():
    scores = np.array([0.9, -np.inf, 0.7])
    with pytest.raises(ContractError):
        rank_query(scores, 1)


def test_mrr_perfect():
    assert mrr([1, 1, 1]) == 1.0


def test_mrr_hand_value():
    expected = (1.0 + 1.0 / 2 + 1.0 / 4) / 3
    assert abs(mrr([1, 2, 4]) - expected) < 1e-15
    assert abs(mrr([1, 2, 4]) - 0.5833333333333334) < 1e-12


def test_mrr_matches_loop_oracle(rng):
    for _ in range(100):
        ranks = rng.integers(1, 50, size=int(rng.integers(1, 30)))
        acc = 0.0
        for rk in ranks:
            acc += 1.0 / rk
        assert abs(mrr(ranks) - acc / len(ranks)) < 1e-9


def test_mrr_empty_is_error():
    with pytest.raises(ContractError):
        mrr([])


def test_hits_direct_count():
    assert hits_at_k([1, 11, 10], 10) == pytest.approx(2 / 3)


def test_hits_saturates():
    ranks = [3, 7, 2]
    assert hits_at_k(ranks, 100) == 1.0


def test_hits_at_one_is_top_fraction(rng):
    ranks = rng.integers(1, 5, 40)
    assert hits_at_k(ranks, 1) == (ranks == 1).mean()


def test_hits_errors():
    with pytest.raises(ContractError):
        hits_at_k([], 10)
    with pytest.raises(ContractError):
        hits_at_k([1], 0)


def test_metric_monotonicity(rng):
    ranks = rng.integers(2, 30, 20).astype(float)
    base_mrr, base_hits = mrr(ranks), hits_at_k(ranks, 10)
    improved = ranks.copy()
    improved[5] = 1
    assert mrr(improved) >= base_mrr
    assert hits_at_k(improved, 10) >= base_hits


def test_metric_permutation_invariance(rng):
    ranks = rng.integers(1, 30, 25)
    perm = rng.permutation(25)
    assert mrr(ranks) == mrr(ranks[perm])
    assert hits_at_k(ranks, 5) == hits_at_k(ranks[perm], 5)


def test_forgetting_no_drift_is_zero():
    p = np.array([[0.5, np.nan, np.nan], [0.5, 0.6, np.nan], [0.5, 0.6, 0.7]])
    assert forgetting_score(p) == 0.0


def test_forgetting_hand_value():
    p = np.full((3, 3), np.nan)
    p[1, 1] = 0.5
    p[2, 2] = 0.4
    p[2, 1] = 0.6
    # oracle: mean(0.6 - 0.5, 0.4 - 0.4)
    assert abs(forgetting_score(p) - 0.05) < 1e-15


def test_forgetting_matches_loop_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(2, 8))
        p = rng.uniform(0, 1, (n, n))
        acc = 0.0
        for i in range(1, n):
            acc += p[n - 1, i] - p[i, i]
        assert abs(forgetting_score(p) - acc / (n - 1)) < 1e-12


def test_forgetting_single_task_is_error():
    with pytest.raises(ContractError):
        forgetting_score(np.array([[0.5]]))


def test_summarize_constant_row():
    m = MetricsMatrix.empty(3)
    for i in range(3):
        for j in range(i + 1):
            m.mrr[i, j] = 0.4
            m.hits1[i, j] = 0.2
            m.hits10[i, j] = 0.9
    s = summarize({"raw": m})["raw"]
    assert s["average_mrr"] == pytest.approx(0.4)
    assert s["current_mrr"] == pytest.approx(0.4)
    assert s["forgetting"] == pytest.approx(0.0)


def test_single_task_current_equals_average(rng):
    m = MetricsMatrix.empty(1)
    m.mrr[0, 0] = 0.37
    m.hits1[0, 0] = 0.1
    m.hits10[0, 0] = 0.8
    s = summarize({"raw": m})["raw"]
    assert s["current_mrr"] == s["average_mrr"] == pytest.approx(0.37)


def test_evaluate_stream_average_is_last_row_mean(toy_stream):
    config = TrainConfig(method="ft", dim=8, n_layers=1, epochs=2, patience=0,
                         seed=0, window=2)
    result = run_stream(toy_stream, config)
    ev = evaluate_stream(toy_stream, result.reasoners, config)
    n = toy_stream.num_tasks
    m = ev.matrices["raw"].mrr
    # hand-computed unweighted mean of the final row
    acc = 0.0
    for j in range(n):
        acc += m[n - 1, j]
    assert ev.summary["raw"]["average_mrr"] == pytest.approx(acc / n)
    assert ev.summary["raw"]["current_mrr"] == pytest.approx(m[n - 1, n - 1])
    # the grid is defined only for j <= i
    assert np.all(np.isnan(m[np.triu_indices(n, k=1)]))


def test_evaluate_stream_missing_checkpoint(toy_stream):
    config = TrainConfig(method="ft", dim=8, n_layers=1, epochs=1, patience=0, seed=0)
    result = run_stream(toy_stream, config)
    with pytest.raises(StreamContinuityError):
        evaluate_stream(toy_stream, result.reasoners[:-1], config)
    with pytest.raises(StreamContinuityError):
        evaluate_stream(toy_stream, [result.reasoners[0], None, result.reasoners[2]], config)


def test_test_splits_contain_both_directions(toy_stream):
    R = toy_stream.vocab.num_relations
    seen_fwd = seen_inv = False
    for task in toy_stream.tasks:
        if len(task.test.quads):
            rels = task.test.quads[:, 1]
            seen_fwd |= bool((rels < R).any())
            seen_inv |= bool((rels >= R).any())
    assert seen_fwd and seen_inv


def test_report_bytes_deterministic(tmp_path, toy_stream):
    config = TrainConfig(method="ft", dim=8, n_layers=1, epochs=2, patience=0, seed=0)
    result = run_stream(toy_stream, config)
    ev = evaluate_stream(toy_stream, result.reasoners, config)
    write_report(tmp_path / "a", ev, plots=False)
    write_report(tmp_path / "b", ev, plots=False)
    assert (tmp_path / "a" / "report.jsonl").read_bytes() == (tmp_path / "b" / "report.jsonl").read_bytes()
    assert (tmp_path / "a" / "summary.txt").read_bytes() == (tmp_path / "b" / "summary.txt").read_bytes()
    # both filter modes present and labeled
    text = (tmp_path / "a" / "report.jsonl").read_text()
    assert '"filter": "raw"' in text and '"filter": "time"' in text
