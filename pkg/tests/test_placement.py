import numpy as np
import pytest

from majorness.errors import ParameterError, StateError, ValidationError
from majorness.placement import (
    Judgment,
    RatingRecord,
    WalkOrder,
    aggregate_ratings,
    place_by_bisection,
    rating_from_placement,
    read_ratings_jsonl,
    replay_walk,
    start_placement,
    step_placement,
    write_ratings_jsonl,
)
from majorness.ranking import AnchorSet

ANCHORS10 = AnchorSet(tuple(f"a{i}" for i in range(10)))  # ascending majorness

MORE = Judgment.ITEM_MORE_MINOR
LESS = Judgment.ITEM_LESS_MINOR


def test_start_from_most_major():
    s = start_placement("x", ANCHORS10)
    assert s.state == "active" and s.cursor == 0
    assert s.current_anchor() == "a9"  # most major anchor first


def test_single_anchor_set_is_valid():
    s = start_placement("x", AnchorSet(("only",)))
    assert s.active
    step_placement(s, LESS)
    assert s.placement_slot == 1


def test_self_comparison_flagged():
    s = start_placement("a3", ANCHORS10)
    assert s.self_comparison


def test_empty_anchor_set_rejected():
    with pytest.raises(ParameterError):
        start_placement("x", AnchorSet(()))


def test_immediate_less_minor_gives_top_slot():
    s = start_placement("x", ANCHORS10)
    step_placement(s, LESS)
    assert s.placement_slot == 10
    assert rating_from_placement(s.placement_slot) == 10


def test_walk_off_minor_end_gives_slot_zero():
    s = start_placement("x", ANCHORS10)
    for _ in range(10):
        step_placement(s, MORE)
    assert s.placement_slot == 0
    assert rating_from_placement(0) == 1


def test_slot_rule_by_hand():
    # 7 "more minor" steps then "less minor": the item beats 10 - 7 = 3 anchors.
    s = start_placement("x", ANCHORS10)
    for _ in range(7):
        step_placement(s, MORE)
    step_placement(s, LESS)
    assert s.placement_slot == 3
    assert rating_from_placement(3) == 3


def test_stepping_placed_session_raises():
    s = start_placement("x", ANCHORS10)
    step_placement(s, LESS)
    with pytest.raises(StateError):
        step_placement(s, MORE)


def test_walk_from_most_minor_matches_reverse_semantics():
    # beats 4 anchors: 4 "less minor" advances then a "more minor" stop
    s = start_placement("x", ANCHORS10, WalkOrder.FROM_MOST_MINOR)
    assert s.current_anchor() == "a0"
    for _ in range(4):
        step_placement(s, LESS)
    step_placement(s, MORE)
    assert s.placement_slot == 4


def test_rating_map_examples():
    assert rating_from_placement(0) == 1
    assert rating_from_placement(5) == 5
    assert rating_from_placement(10) == 10


def test_rating_out_of_range():
    with pytest.raises(ParameterError):
        rating_from_placement(11)
    with pytest.raises(ParameterError):
        rating_from_placement(-1)


def test_every_walk_terminates_within_k_steps():
    rng = np.random.default_rng(7)
    for _ in range(200):
        s = start_placement("x", ANCHORS10)
        steps = 0
        while s.active:
            j = MORE if rng.random() < 0.7 else LESS
            step_placement(s, j)
            steps += 1
        assert steps <= 10
        assert 0 <= s.placement_slot <= 10
        assert 1 <= rating_from_placement(s.placement_slot) <= 10


def test_monotone_latent_gives_monotone_rating():
    anchor_latents = {f"a{i}": (i + 0.5) / 10 for i in range(10)}

    def rate(latent):
        s = start_placement("x", ANCHORS10)
        while s.active:
            beats = latent > anchor_latents[s.current_anchor()]
            step_placement(s, LESS if beats else MORE)
        return rating_from_placement(s.placement_slot)

    ratings = [rate(v) for v in np.linspace(0, 1, 101)]
    assert all(b >= a for a, b in zip(ratings, ratings[1:]))
    assert min(ratings) == 1 and max(ratings) == 10


def test_bisection_matches_linear_walk_for_consistent_judges():
    anchor_latents = {f"a{i}": (i + 0.5) / 10 for i in range(10)}
    for latent in np.linspace(0, 1, 37):
        s = start_placement("x", ANCHORS10)
        while s.active:
            beats = latent > anchor_latents[s.current_anchor()]
            step_placement(s, LESS if beats else MORE)
        slot_bisect = place_by_bisection(
            lambda a: latent > anchor_latents[a], ANCHORS10
        )
        assert slot_bisect == s.placement_slot


def test_replay_walk_validates():
    slot, rating = replay_walk(ANCHORS10, [MORE.value] * 7 + [LESS.value])
    assert (slot, rating) == (3, 3)
    with pytest.raises(ValidationError):
        replay_walk(ANCHORS10, [LESS.value, MORE.value])  # judgment after terminal
    with pytest.raises(ValidationError):
        replay_walk(ANCHORS10, [MORE.value] * 3)  # stops before placement
    with pytest.raises(ValidationError):
        replay_walk(ANCHORS10, ["sideways"])


def test_aggregate_ratings():
    def rec(rater, item, slot):
        walk = (MORE,) * (10 - slot) + ((LESS,) if slot > 0 else ())
        return RatingRecord(rater, item, max(1, min(10, slot)), slot, walk, 0.0)

    out = aggregate_ratings([rec("r1", "x", 4), rec("r2", "x", 6)])
    assert out[0].mean_rating == pytest.approx(5.0)
    single = aggregate_ratings([rec("r1", "y", 7)])
    assert single[0].std == 0.0 and single[0].n_ratings == 1
    spread = aggregate_ratings([rec("r1", "z", 1), rec("r2", "z", 1), rec("r3", "z", 10)])
    assert spread[0].mean_rating == pytest.approx(4.0)


def test_rating_record_invariant():
    with pytest.raises(ValidationError):
        RatingRecord("r", "x", 5, 4, (MORE,), 0.0)  # rating != clamp(slot)


def test_ratings_jsonl_roundtrip(tmp_path):
    records = [
        RatingRecord("r1", "x", 3, 3, (MORE,) * 7 + (LESS,), 1.0),
        RatingRecord("r2", "y", 1, 0, (MORE,) * 10, 2.0),
    ]
    path = tmp_path / "ratings.jsonl"
    write_ratings_jsonl(records, path)
    assert read_ratings_jsonl(path) == records
