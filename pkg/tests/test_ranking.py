import numpy as np
import pytest

from majorness.errors import DisconnectedGraphError, DivergenceError, ParameterError
from majorness.ranking import BTConfig, Ranking, RankingEntry, fit_bradley_terry, select_anchors

from conftest import comparison_set


def log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def grid_search_mle_3items(pair_wins, lo=-3.0, hi=3.0):
    """Brute-force MLE for items (A, B, C) under the zero-sum gauge.

    pair_wins: dict like {("A","B"): wins of A over B, ...} for all ordered pairs.
    Coarse-to-fine grid over (theta_A, theta_B); theta_C = -(A+B).
    """
    def loglik(a, b):
        c = -(a + b)
        t = {"A": a, "B": b, "C": c}
        ll = 0.0
        for (x, y), w in pair_wins.items():
            if w:
                ll = ll + w * log_sigmoid(t[x] - t[y])
        return ll

    step = 0.01
    grid = np.arange(lo, hi + step / 2, step)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    ll = loglik(A, B)
    i, j = np.unravel_index(np.argmax(ll), ll.shape)
    best_a, best_b = grid[i], grid[j]
    fine = np.arange(-0.02, 0.0201, 0.001)
    A2, B2 = np.meshgrid(best_a + fine, best_b + fine, indexing="ij")
    ll2 = loglik(A2, B2)
    i2, j2 = np.unravel_index(np.argmax(ll2), ll2.shape)
    a, b = best_a + fine[i2], best_b + fine[j2]
    return {"A": a, "B": b, "C": -(a + b)}


THREE_ITEM_SPEC = (
    [("r", "A", "B", "left_more_major")] * 2
    + [("r", "B", "C", "left_more_major")] * 2
    + [("r", "A", "C", "left_more_major")]
    + [("r", "C", "A", "left_more_major")]
)
THREE_ITEM_WINS = {
    ("A", "B"): 2, ("B", "A"): 0,
    ("B", "C"): 2, ("C", "B"): 0,
    ("A", "C"): 1, ("C", "A"): 1,
}


def spec_with_ts(spec):
    return [(r, l, rr, c) for (r, l, rr, c) in spec]


def test_clear_winner_has_higher_theta():
    cset = comparison_set([("r%d" % i, "A", "B", "left_more_major") for i in range(5)])
    ranking = fit_bradley_terry(cset)
    assert ranking.theta_of("A") > ranking.theta_of("B")
    assert [e.item_id for e in ranking.entries] == ["A", "B"]


def test_even_split_is_symmetric():
    spec = [("r", "A", "B", "left_more_major")] * 3 + [("r", "A", "B", "right_more_major")] * 3
    ranking = fit_bradley_terry(comparison_set(spec))
    assert abs(ranking.theta_of("A") - ranking.theta_of("B")) < 1e-6


def test_matches_grid_search_mle():
    # Oracle: brute-force likelihood maximization over a dense theta grid.
    expected = grid_search_mle_3items({k: v for k, v in THREE_ITEM_WINS.items()})
    ranking = fit_bradley_terry(
        comparison_set(spec_with_ts(THREE_ITEM_SPEC)), BTConfig(epsilon=0.0)
    )
    for item in "ABC":
        assert ranking.theta_of(item) == pytest.approx(expected[item], abs=1e-2)


def test_regularized_fit_matches_regularized_grid():
    # With pseudo-wins folded into the oracle's counts the same grid search
    # must find the regularized optimum.
    eps = 0.5
    wins = {k: v + eps for k, v in THREE_ITEM_WINS.items()}
    expected = grid_search_mle_3items(wins)
    ranking = fit_bradley_terry(comparison_set(spec_with_ts(THREE_ITEM_SPEC)))
    for item in "ABC":
        assert ranking.theta_of(item) == pytest.approx(expected[item], abs=1e-2)


def test_ties_count_as_half_wins():
    spec = [("r", "A", "B", "equal")] * 4
    ranking = fit_bradley_terry(comparison_set(spec))
    assert abs(ranking.theta_of("A") - ranking.theta_of("B")) < 1e-6


def test_zero_sum_gauge_and_ranks():
    ranking = fit_bradley_terry(comparison_set(spec_with_ts(THREE_ITEM_SPEC)))
    assert sum(e.theta for e in ranking.entries) == pytest.approx(0.0, abs=1e-9)
    assert [e.rank for e in ranking.entries] == [1, 2, 3]
    thetas = [e.theta for e in ranking.entries]
    assert thetas == sorted(thetas, reverse=True)


def test_relabeling_equivariance():
    base = fit_bradley_terry(comparison_set(spec_with_ts(THREE_ITEM_SPEC)))
    relabel = {"A": "zz", "B": "mm", "C": "aa"}
    spec2 = [(r, relabel[l], relabel[rr], c) for (r, l, rr, c) in THREE_ITEM_SPEC]
    permuted = fit_bradley_terry(comparison_set(spec2))
    base_order = [relabel[e.item_id] for e in base.entries]
    assert base_order == [e.item_id for e in permuted.entries]
    for e_base, e_perm in zip(base.entries, permuted.entries):
        assert e_base.theta == pytest.approx(e_perm.theta, abs=1e-9)


def test_duplicating_all_records_keeps_maximizer():
    cfg = BTConfig(epsilon=0.0)
    once = fit_bradley_terry(comparison_set(spec_with_ts(THREE_ITEM_SPEC)), cfg)
    tripled = fit_bradley_terry(
        comparison_set(spec_with_ts(THREE_ITEM_SPEC * 3)), cfg
    )
    for item in "ABC":
        assert once.theta_of(item) == pytest.approx(tripled.theta_of(item), abs=1e-6)


def test_swapping_sides_and_inverting_choice_is_identity():
    flip = {"left_more_major": "right_more_major", "right_more_major": "left_more_major", "equal": "equal"}
    swapped = [(r, rr, l, flip[c]) for (r, l, rr, c) in THREE_ITEM_SPEC]
    base = fit_bradley_terry(comparison_set(spec_with_ts(THREE_ITEM_SPEC)))
    other = fit_bradley_terry(comparison_set(swapped))
    for item in "ABC":
        assert base.theta_of(item) == pytest.approx(other.theta_of(item), abs=1e-9)


def test_disconnected_graph_names_components():
    spec = [("r", "A", "B", "left_more_major"), ("r", "C", "D", "left_more_major")]
    with pytest.raises(DisconnectedGraphError) as exc:
        fit_bradley_terry(comparison_set(spec))
    assert [["A", "B"], ["C", "D"]] == sorted(exc.value.components)


def test_all_wins_diverges_without_epsilon_but_not_with():
    spec = [("r%d" % i, "A", "B", "left_more_major") for i in range(3)]
    with pytest.raises(DivergenceError):
        fit_bradley_terry(comparison_set(spec), BTConfig(epsilon=0.0))
    ranking = fit_bradley_terry(comparison_set(spec))  # default epsilon 0.5
    assert np.isfinite(ranking.theta_of("A"))
    assert ranking.theta_of("A") > ranking.theta_of("B")


def test_single_item_rejected():
    with pytest.raises(ParameterError):
        fit_bradley_terry(comparison_set([]))


def make_ranking(n):
    entries = tuple(
        RankingEntry(f"i{rank:03d}", float(n - rank), rank) for rank in range(1, n + 1)
    )
    return Ranking(entries, 0.0)


def test_anchor_ranks_100_10():
    anchors = select_anchors(make_ranking(100), 10)
    # ascending majorness means the deepest rank comes first
    assert list(anchors.anchors) == [f"i{r:03d}" for r in (95, 85, 75, 65, 55, 45, 35, 25, 15, 5)]


def test_anchor_identity_when_k_equals_n():
    ranking = make_ranking(7)
    anchors = select_anchors(ranking, 7)
    assert list(anchors.anchors) == [f"i{r:03d}" for r in range(7, 0, -1)]


def test_anchor_rounding_small_case():
    # (i-0.5)*3/2 gives 0.75 and 2.25 which round to ranks 1 and 2
    anchors = select_anchors(make_ranking(3), 2)
    assert list(anchors.anchors) == ["i002", "i001"]


def test_anchor_parameter_errors():
    ranking = make_ranking(5)
    with pytest.raises(ParameterError):
        select_anchors(ranking, 1)
    with pytest.raises(ParameterError):
        select_anchors(ranking, 6)


def test_anchors_ascend_in_theta():
    ranking = fit_bradley_terry(comparison_set(spec_with_ts(THREE_ITEM_SPEC)))
    anchors = select_anchors(ranking, 2)
    thetas = [ranking.theta_of(a) for a in anchors.anchors]
    assert thetas == sorted(thetas)
