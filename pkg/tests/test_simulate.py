import numpy as np
import pytest
from scipy.stats import kendalltau, spearmanr

from majorness.audio import AudioBuffer
from majorness.comparisons import Choice, ComparisonSet
from majorness.errors import ParameterError
from majorness.features import FeatureConfig, chroma
from majorness.placement import aggregate_ratings
from majorness.ranking import AnchorSet, fit_bradley_terry
from majorness.simulate import (
    CHORD_SECONDS,
    PROGRESSION_ROOTS,
    ItemLatent,
    RaterModel,
    all_pairs,
    gen_corpus,
    make_raters,
    sim_pairwise,
    sim_placements,
    synth_progression,
)


def latent_items(latents):
    return [ItemLatent(f"it{i:03d}", float(v)) for i, v in enumerate(latents)]


def test_gen_corpus_empty_rejected():
    with pytest.raises(ParameterError):
        gen_corpus(0)


def test_gen_corpus_deterministic():
    a = gen_corpus(3, seed=11, clip_seconds=2.0)
    b = gen_corpus(3, seed=11, clip_seconds=2.0)
    for x, y in zip(a, b):
        assert x.item_id == y.item_id
        assert x.latent_majorness == y.latent_majorness
        assert np.array_equal(x.audio.samples, y.audio.samples)
    c = gen_corpus(3, seed=12, clip_seconds=2.0)
    assert any(not np.array_equal(x.audio.samples, z.audio.samples) for x, z in zip(a, c))


def test_gen_corpus_length_and_latents():
    items = gen_corpus(5, seed=0, clip_seconds=3.0)
    for it in items:
        assert len(it.audio.samples) == int(3.0 * 44100)
        assert 0.0 <= it.latent_majorness <= 1.0


def chord_third_classes(samples, chord_idx, root):
    """Chroma of one chord segment; returns (major-third, minor-third) energy."""
    sr = 44100
    start = int(chord_idx * CHORD_SECONDS * sr)
    seg = samples[start : start + int(CHORD_SECONDS * sr)]
    cv = chroma(AudioBuffer(seg, sr), FeatureConfig())
    major_pc = (root + 4) % 12
    minor_pc = (root + 3) % 12
    return cv.energies[major_pc], cv.energies[minor_pc]


def test_latent_one_gives_all_major_progression():
    rng = np.random.default_rng(0)
    samples = synth_progression(1.0, rng, clip_seconds=5.0)
    for idx in range(4):
        root_pc = PROGRESSION_ROOTS[idx % len(PROGRESSION_ROOTS)] % 12
        maj, minr = chord_third_classes(samples, idx, root_pc)
        assert maj > minr


def test_latent_zero_gives_all_minor_progression():
    rng = np.random.default_rng(0)
    samples = synth_progression(0.0, rng, clip_seconds=5.0)
    for idx in range(4):
        root_pc = PROGRESSION_ROOTS[idx % len(PROGRESSION_ROOTS)] % 12
        maj, minr = chord_third_classes(samples, idx, root_pc)
        assert minr > maj


def test_noiseless_pairwise_follows_latent_sign():
    items = latent_items([0.2, 0.8, 0.5])
    raters = make_raters(3)
    records = sim_pairwise(items, raters, all_pairs([i.item_id for i in items]), seed=4)
    latent = {i.item_id: i.latent_majorness for i in items}
    for rec in records:
        if latent[rec.left_id] > latent[rec.right_id]:
            assert rec.choice is Choice.LEFT
        else:
            assert rec.choice is Choice.RIGHT


def test_equal_latents_noiseless_tie():
    items = latent_items([0.5, 0.5])
    records = sim_pairwise(items, make_raters(1), [("it000", "it001")], seed=0)
    assert records[0].choice is Choice.EQUAL


def test_huge_noise_win_rate_near_half():
    items = latent_items([0.3, 0.7])
    rater = RaterModel("noisy", noise_sigma=100.0)
    pairs = [("it000", "it001")] * 10_000
    records = sim_pairwise(items, [rater], pairs, seed=8)
    wins_right = sum(1 for r in records if r.choice is Choice.RIGHT)
    assert abs(wins_right / len(records) - 0.5) < 0.05


def test_raters_per_pair_rotation():
    items = latent_items([0.1, 0.5, 0.9])
    raters = make_raters(7)
    pairs = all_pairs([i.item_id for i in items])
    records = sim_pairwise(items, raters, pairs, seed=1, raters_per_pair=5)
    assert len(records) == len(pairs) * 5
    by_pair = {}
    for r in records:
        by_pair.setdefault((r.left_id, r.right_id), set()).add(r.rater_id)
    assert all(len(v) == 5 for v in by_pair.values())


def anchor_set_from(latents, items):
    order = np.argsort(latents)
    return AnchorSet(tuple(items[i].item_id for i in order))


def test_noiseless_placement_matches_anchor_counting():
    rng = np.random.default_rng(3)
    latents = rng.uniform(0, 1, 30)
    items = latent_items(latents)
    anchor_ids = sorted(rng.choice(30, size=10, replace=False))
    anchors = AnchorSet(
        tuple(items[i].item_id for i in sorted(anchor_ids, key=lambda i: latents[i]))
    )
    anchor_latents = sorted(latents[i] for i in anchor_ids)
    records = sim_placements(items, anchors, make_raters(3), ratings_per_item=2, seed=5)
    latent = {i.item_id: i.latent_majorness for i in items}
    for rec in records:
        below = sum(1 for a in anchor_latents if a < latent[rec.item_id])
        assert rec.placement_slot == below
        assert rec.rating == max(1, min(10, below))


def test_item_above_all_anchors_rates_ten():
    latents = [0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.99]
    items = latent_items(latents)
    anchors = AnchorSet(tuple(i.item_id for i in items[:10]))
    records = sim_placements(items, anchors, make_raters(4), ratings_per_item=4, seed=0)
    top = [r for r in records if r.item_id == items[10].item_id]
    assert top and all(r.rating == 10 for r in top)


def test_noisy_placement_std_bounded():
    rng = np.random.default_rng(21)
    latents = rng.uniform(0, 1, 100)
    items = latent_items(latents)
    order = np.argsort(latents)
    anchors = AnchorSet(tuple(items[i].item_id for i in order[5::10]))
    raters = make_raters(5, noise_sigma=0.05)
    records = sim_placements(items, anchors, raters, ratings_per_item=5, seed=7)
    for summary in aggregate_ratings(records):
        assert summary.std <= 1.5


def test_noiseless_end_to_end_recovers_exact_order():
    rng = np.random.default_rng(13)
    latents = rng.uniform(0, 1, 30)
    items = latent_items(latents)
    records = sim_pairwise(
        items, make_raters(5), all_pairs([i.item_id for i in items]), seed=2, raters_per_pair=5
    )
    cset = ComparisonSet(tuple(records))
    ranking = fit_bradley_terry(cset)
    theta = {e.item_id: e.theta for e in ranking.entries}
    tau, _ = kendalltau([theta[i.item_id] for i in items], latents)
    assert tau == 1.0


def test_noisy_end_to_end_rank_correlation():
    rng = np.random.default_rng(14)
    latents = rng.uniform(0, 1, 40)
    items = latent_items(latents)
    raters = make_raters(5, noise_sigma=0.1)
    records = sim_pairwise(
        items, raters, all_pairs([i.item_id for i in items]), seed=3, raters_per_pair=5
    )
    ranking = fit_bradley_terry(ComparisonSet(tuple(records)))
    theta = {e.item_id: e.theta for e in ranking.entries}
    rho, _ = spearmanr([theta[i.item_id] for i in items], latents)
    assert rho >= 0.95


def test_mean_rating_distribution_avoids_extremes():
    rng = np.random.default_rng(31)
    latents = rng.uniform(0, 1, 100)
    items = latent_items(latents)
    order = np.argsort(latents)
    anchors = AnchorSet(tuple(items[i].item_id for i in order[5::10]))
    raters = make_raters(5, noise_sigma=0.1)
    records = sim_placements(items, anchors, raters, ratings_per_item=5, seed=7)
    means = [s.mean_rating for s in aggregate_ratings(records)]
    extreme = sum(1 for m in means if m == 1.0 or m == 10.0)
    assert extreme / len(means) < 0.10
