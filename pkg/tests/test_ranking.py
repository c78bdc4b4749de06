import numpy as np
import pytest

from conftest import make_state
from geodl.baselines import SUBCLASS_RELATION, BaselineState
from geodl.model import EmbeddingState
from geodl.normalize import NF1
from geodl.ranking import (
    baseline_evaluate,
    eligible_candidates,
    evaluate,
    rank_from_scores,
    rank_one,
    write_report,
)


def point_state(points, radii=None):
    pts = np.array(points, dtype=float)
    r = np.array(radii if radii is not None else [0.1] * len(pts))
    return EmbeddingState(pts, r, np.zeros((0, pts.shape[1])), np.zeros(0))


def brute_force_rank(scores, candidate_ids, target_id, ascending=True):
    """Materialize and sort every (score, id) pair, then find the target."""
    key = [(s if ascending else -s, i) for s, i in zip(scores, candidate_ids)]
    ordered = sorted(key)
    for position, (_, cid) in enumerate(ordered, start=1):
        if cid == target_id:
            return position
    raise AssertionError("target not present")


# --- rank_one ----------------------------------------------------------------


def test_rank_one_spec_example():
    # d at the origin, candidates A,B,C at distances 1,2,3; test pair (A, d)
    state = point_state([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [0.0, 0.0]])
    candidates = np.array([0, 1, 2])
    assert rank_one(NF1(0, 3), state, candidates) == 1
    assert rank_one(NF1(1, 3), state, candidates) == 2
    assert rank_one(NF1(2, 3), state, candidates) == 3


def test_rank_one_single_candidate():
    state = point_state([[1.0, 0.0], [0.0, 0.0]])
    assert rank_one(NF1(0, 1), state, np.array([0])) == 1


def test_rank_one_all_ties_break_by_index():
    state = point_state([[1.0, 0.0]] * 4 + [[0.0, 0.0]])
    candidates = np.array([0, 1, 2, 3])
    for target in range(4):
        assert rank_one(NF1(target, 4), state, candidates) == target + 1


def test_rank_one_missing_target_errors():
    state = point_state([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        rank_one(NF1(0, 1), state, np.array([1]))


def test_rank_one_direction_swap():
    # distances measured from the subclass when direction = sup
    state = point_state([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]])
    candidates = np.array([1, 2])
    assert rank_one(NF1(0, 1), state, candidates, direction="sup") == 1
    assert rank_one(NF1(0, 2), state, candidates, direction="sup") == 2


def test_rank_one_brute_force_equivalence(rng):
    for _ in range(300):
        n = int(rng.integers(2, 30))
        state = point_state(rng.normal(size=(n + 1, 3)))
        candidates = np.arange(n)
        target = int(rng.integers(0, n))
        got = rank_one(NF1(target, n), state, candidates)
        dists = np.linalg.norm(
            state.class_centers[candidates] - state.class_centers[n], axis=1
        )
        want = brute_force_rank(dists, candidates, target)
        assert got == want


def test_rank_monotone_in_candidates(rng):
    for _ in range(100):
        n = int(rng.integers(3, 20))
        state = point_state(rng.normal(size=(n + 2, 3)))
        base = np.arange(n)
        target = int(rng.integers(0, n))
        r1 = rank_one(NF1(target, n + 1), state, base)
        r2 = rank_one(NF1(target, n + 1), state, np.append(base, n))
        assert r2 >= r1


def test_rank_invariant_under_monotone_transform(rng):
    for _ in range(100):
        n = int(rng.integers(2, 40))
        scores = rng.normal(size=n) ** 2  # non-negative distances
        ids = np.arange(n)
        target = int(rng.integers(0, n))
        assert rank_from_scores(scores, ids, target) == rank_from_scores(
            scores**2, ids, target
        )


def test_radius_adjusted_flag_changes_order():
    # same centers, radically different radii
    state = point_state(
        [[1.0, 0.0], [1.0, 0.0], [0.0, 0.0]], radii=[0.9, 0.1, 0.5]
    )
    candidates = np.array([0, 1])
    plain = rank_one(NF1(0, 2), state, candidates)
    adjusted = rank_one(NF1(0, 2), state, candidates, adjust_radius=True)
    assert plain == 1  # tie broken by index
    assert adjusted == 2  # big ball cannot fit inside the source ball


# --- evaluate ----------------------------------------------------------------


def test_metrics_on_fixed_ranks():
    from geodl.ranking import _aggregate

    report = _aggregate([1, 5, 200], candidate_count=500,
                        direction="sub", filtered=False)
    assert report.hits1 == pytest.approx(1 / 3)
    assert report.hits10 == pytest.approx(2 / 3)
    assert report.hits100 == pytest.approx(2 / 3)
    assert report.median_rank == 5
    assert report.p90_rank == 200


def test_single_rank_one_report():
    from geodl.ranking import _aggregate

    report = _aggregate([1], candidate_count=10, direction="sub", filtered=False)
    assert report.hits1 == report.hits10 == report.hits100 == 1.0
    assert report.median_rank == 1
    assert report.p90_rank == 1


def test_equal_ranks_step_function():
    from geodl.ranking import _aggregate

    report = _aggregate([10] * 7, candidate_count=50,
                        direction="sub", filtered=False)
    assert report.hits1 == 0.0
    assert report.hits10 == 1.0
    assert report.hits100 == 1.0


def test_evaluate_excludes_source_and_orders():
    state = point_state(
        [[0.1, 0.0], [2.0, 0.0], [3.0, 0.0], [0.0, 0.0]]
    )
    tests = [NF1(0, 3)]
    report = evaluate(tests, state, np.array([0, 1, 2, 3]))
    assert report.ranks == [1]
    assert report.candidate_count == 4


def test_evaluate_empty_tests_error():
    state = point_state([[0.0, 0.0]])
    with pytest.raises(ValueError):
        evaluate([], state, np.array([0]))


def test_evaluate_filtered_removes_known_positives():
    # candidates 0,1,2; test (2, 3); class 1 is a known subclass of 3 and
    # closer to the source, so filtering improves the rank
    state = point_state(
        [[3.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 0.0]]
    )
    tests = [NF1(2, 3)]
    universe = np.array([0, 1, 2])
    unfiltered = evaluate(tests, state, universe)
    filtered = evaluate(tests, state, universe, filter_known=[NF1(1, 3)])
    assert unfiltered.ranks == [2]
    assert filtered.ranks == [1]
    assert filtered.filtered


def test_random_embedding_median_near_half(rng):
    n_candidates = 200
    n_tests = 60
    medians = []
    for seed in range(20):
        local = np.random.default_rng(seed)
        state = point_state(local.normal(size=(n_candidates + 1, 8)))
        source = n_candidates
        tests = [
            NF1(int(local.integers(0, n_candidates)), source)
            for _ in range(n_tests)
        ]
        report = evaluate(tests, state, np.arange(n_candidates))
        medians.append(report.median_rank)
    mean_median = float(np.mean(medians))
    assert abs(mean_median - n_candidates / 2) <= 0.15 * n_candidates


def test_eligible_candidates_filters_reserved_names():
    names = ["A", "__nf_0", "nominal(x)", "top", "B"]
    assert list(eligible_candidates(names)) == [0, 3, 4]


# --- baseline ranking ---------------------------------------------------------


def test_baseline_perfect_model_hits1():
    # entity 0 translated by the subclass relation lands exactly on entity 2
    ents = np.array([[0.0, 0.0], [5.0, 5.0], [1.0, 1.0]])
    rels = np.array([[1.0, 1.0]])
    state = BaselineState("transe", ents, rels)
    report = baseline_evaluate(
        [NF1(0, 2)], state, np.array([0, 1]), sub_relation=0
    )
    assert report.hits1 == 1.0
    assert report.ranks == [1]


def test_baseline_direction_swap_uses_tail_scores():
    # entity 2 translated by the subclass relation lands on entity 1, so in
    # the swapped direction candidate tails are ranked for head 2
    ents = np.array([[9.0, 9.0], [1.0, 1.0], [0.0, 0.0]])
    rels = np.array([[1.0, 1.0]])
    state = BaselineState("transe", ents, rels)
    report = baseline_evaluate(
        [NF1(2, 1)], state, np.array([0, 1]), direction="sup", sub_relation=0
    )
    assert report.ranks == [1]
    assert report.direction == "sup"


def test_baseline_random_embedding_median_near_half():
    n_candidates = 100
    medians = []
    for seed in range(20):
        local = np.random.default_rng(seed)
        state = BaselineState(
            "transe",
            local.normal(size=(n_candidates + 1, 6)),
            local.normal(size=(1, 6)),
        )
        tests = [NF1(int(local.integers(0, n_candidates)), n_candidates)
                 for _ in range(40)]
        report = baseline_evaluate(
            tests, state, np.arange(n_candidates), sub_relation=0
        )
        medians.append(report.median_rank)
    mean_median = float(np.mean(medians))
    assert abs(mean_median - n_candidates / 2) <= 0.15 * n_candidates


def test_baseline_brute_force_equivalence(rng):
    from geodl.baselines import scores_heads

    for _ in range(100):
        n = int(rng.integers(2, 25))
        ents = rng.normal(size=(n + 1, 4))
        rels = rng.normal(size=(1, 4))
        state = BaselineState("transe", ents, rels)
        target = int(rng.integers(0, n))
        cands = np.arange(n)
        got = baseline_evaluate(
            [NF1(target, n)], state, cands, sub_relation=0
        ).ranks[0]
        scores = scores_heads(state, cands, 0, n)
        assert got == brute_force_rank(scores, cands, target, ascending=False)


# --- report output -------------------------------------------------------------


def test_write_report_seven_rows_and_sidecar(tmp_path):
    from geodl.ranking import _aggregate

    report = _aggregate([1, 5, 200], 500, "sub", False)
    path = tmp_path / "report.tsv"
    write_report(path, report)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# geodl rank report direction=sub filtered=no")
    metric_rows = [l for l in lines if not l.startswith("#")]
    assert len(metric_rows) == 7
    names = [row.split("\t")[0] for row in metric_rows]
    assert names == ["hits1", "hits10", "hits100", "median_rank",
                     "p90_rank", "candidate_count", "test_count"]
    ranks = (tmp_path / "report.tsv.ranks").read_text().splitlines()
    assert ranks == ["1", "5", "200"]
