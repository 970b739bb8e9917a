"""Acceptance suite: one test per criterion, each printing a pass/fail line
(visible with pytest -s). Stated time budgets are asserted where given.
"""
import json
import threading
import time

import numpy as np
import pytest
from scipy.stats import kendalltau, spearmanr

from majorness.audio import AudioBuffer, write_wav
from majorness.comparisons import ComparisonSet
from majorness.convnet import ArchConfig, TrainConfig, forward, grad_check, init_model, train
from majorness.errors import ShapeError
from majorness.evaluation import CorpusItem, LabeledCorpus, logistic_cv, mode_experiment
from majorness.features import FeatureConfig, chroma, mel_center_frequencies, mel_spectrogram
from majorness.keyprofile import keyprofile_majorness
from majorness.pipeline import PipelineConfig, run_pipeline, simulate_study
from majorness.ranking import BTConfig, fit_bradley_terry
from majorness.reliability import RaterMatrix, cronbach_alpha, filter_raters, krippendorff_alpha
from majorness.service import StudyConfig, StudyService
from majorness.simulate import (
    ItemLatent,
    all_pairs,
    make_raters,
    sim_pairwise,
    synth_progression,
)

from conftest import comparison_set
from test_ranking import THREE_ITEM_SPEC, THREE_ITEM_WINS, grid_search_mle_3items
from test_reliability import CANONICAL, cronbach_oracle, kripp_oracle

PITCH = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


def report(num, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def triad_buffer(root_midi, quality, seconds=2.0):
    intervals = (0, 4, 7) if quality == "major" else (0, 3, 7)
    t = np.arange(int(seconds * 44100)) / 44100
    samples = sum(
        0.2 * np.sin(2 * np.pi * 440.0 * 2 ** ((root_midi + iv - 69) / 12) * t)
        for iv in intervals
    )
    return AudioBuffer(samples, 44100)


def test_criterion_01_bradley_terry_grid_oracle():
    t0 = time.perf_counter()
    expected = grid_search_mle_3items(dict(THREE_ITEM_WINS))
    ranking = fit_bradley_terry(comparison_set(THREE_ITEM_SPEC), BTConfig(epsilon=0.0))
    errs = [abs(ranking.theta_of(i) - expected[i]) for i in "ABC"]
    elapsed = time.perf_counter() - t0
    ok = max(errs) < 1e-2 and elapsed < 1.0
    report(1, ok, f"max |theta err| {max(errs):.4f} vs grid MLE, {elapsed:.2f}s")


def test_criterion_02_ranking_recovery_100_items():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    latents = rng.uniform(0, 1, 100)
    items = [ItemLatent(f"it{i:03d}", float(v)) for i, v in enumerate(latents)]
    pairs = all_pairs([i.item_id for i in items])

    noisy = sim_pairwise(items, make_raters(8, noise_sigma=0.1), pairs,
                         seed=1, raters_per_pair=5)
    ranking = fit_bradley_terry(ComparisonSet(tuple(noisy)))
    theta = {e.item_id: e.theta for e in ranking.entries}
    rho, _ = spearmanr([theta[i.item_id] for i in items], latents)

    clean = sim_pairwise(items, make_raters(5), pairs, seed=2, raters_per_pair=5)
    ranking0 = fit_bradley_terry(ComparisonSet(tuple(clean)))
    theta0 = {e.item_id: e.theta for e in ranking0.entries}
    tau, _ = kendalltau([theta0[i.item_id] for i in items], latents)

    elapsed = time.perf_counter() - t0
    ok = rho >= 0.95 and tau == 1.0 and elapsed < 60.0
    report(2, ok, f"spearman {rho:.4f} (noise 0.1), kendall tau {tau:.3f} (noiseless), {elapsed:.1f}s")


def test_criterion_03_reliability_oracles():
    m_canon = RaterMatrix([f"c{i}" for i in range(4)], [f"u{i}" for i in range(12)],
                          np.array(CANONICAL, dtype=float))
    k_err = abs(krippendorff_alpha(m_canon) - kripp_oracle(CANONICAL))

    vals = [[1, 2, 1], [2, 3, 2], [3, 4, 3], [4, 5, 4]]
    m43 = RaterMatrix(["r0", "r1", "r2"], [f"i{k}" for k in range(4)], np.array(vals, float))
    c_err = abs(cronbach_alpha(m43) - cronbach_oracle(vals))

    ident = np.tile(np.array([[1.0], [4.0], [7.0], [9.0]]), (1, 3))
    m_ident = RaterMatrix(["a", "b", "c"], [f"i{k}" for k in range(4)], ident)
    both_one = (
        abs(cronbach_alpha(m_ident) - 1.0) < 1e-12
        and abs(krippendorff_alpha(m_ident) - 1.0) < 1e-12
    )

    rng = np.random.default_rng(2024)
    rand = rng.integers(1, 11, size=(1000, 5)).astype(float)
    m_rand = RaterMatrix([f"r{k}" for k in range(5)], [f"i{k}" for k in range(1000)], rand)
    k_rand = krippendorff_alpha(m_rand)
    c_rand = cronbach_alpha(m_rand)

    ok = (k_err < 1e-9 and c_err < 1e-12 and both_one
          and abs(k_rand) < 0.1 and abs(c_rand) < 0.1)
    report(3, ok, f"kripp oracle err {k_err:.2e}, cronbach err {c_err:.2e}, "
                  f"random alphas {k_rand:+.3f}/{c_rand:+.3f}")


def test_criterion_04_rater_filtering():
    rng = np.random.default_rng(7)
    base = rng.integers(1, 11, size=60).astype(float)
    cols = [np.clip(base + rng.integers(-1, 2, size=60), 1, 10) for _ in range(8)]
    cols += [11.0 - base, 11.0 - base]
    values = np.stack(cols, axis=1)
    raters = [f"good{i}" for i in range(8)] + ["neg0", "neg1"]
    matrix = RaterMatrix(raters, [f"i{k}" for k in range(60)], values)
    pre = cronbach_alpha(matrix)
    kept, rep = filter_raters(matrix)
    ok = sorted(rep.removed_raters) == ["neg0", "neg1"] and rep.cronbach_alpha >= pre
    report(4, ok, f"removed {rep.removed_raters}, cronbach {pre:.3f} -> {rep.cronbach_alpha:.3f}")


def test_criterion_05_dsp():
    cfg = FeatureConfig()
    frames = cfg.frame_count(int(12 * 44100))

    t = np.arange(int(12 * 44100)) / 44100
    buf = AudioBuffer(0.5 * np.sin(2 * np.pi * 440.0 * t), 44100)
    mel = mel_spectrogram(buf, cfg)
    centers = mel_center_frequencies(cfg)
    nearest = int(np.argmin(np.abs(centers - 440.0)))
    argmax_ok = bool(np.all(np.argmax(mel.values, axis=1) == nearest))

    triads_ok = True
    for root in range(60, 72):
        for quality, third in (("major", 4), ("minor", 3)):
            cv = chroma(triad_buffer(root, quality), cfg)
            expected = {PITCH[(root + iv) % 12] for iv in (0, third, 7)}
            if set(cv.top_classes(3)) != expected:
                triads_ok = False

    ok = frames == 515 and argmax_ok and triads_ok
    report(5, ok, f"frames(12s)={frames}, 440Hz argmax band {nearest} every frame: "
                  f"{argmax_ok}, 24 triad chromas: {triads_ok}")


def test_criterion_06_keyprofile_separates_all_triads():
    correct = 0
    for root in range(60, 72):
        for quality in ("major", "minor"):
            score = keyprofile_majorness(chroma(triad_buffer(root, quality)))
            if (score > 0.5) == (quality == "major"):
                correct += 1
    report(6, correct == 24, f"key-profile triad classification {correct}/24")


def test_criterion_07_model_verification():
    from test_convnet import TINY as tiny
    from test_convnet import structured_dataset

    rng = np.random.default_rng(12345)
    gc = grad_check(init_model(tiny, seed=3), (rng.normal(size=(40, 24)), 4.0))

    data = structured_dataset(np.random.default_rng(12345), np.linspace(1.5, 9.5, 8))
    params = init_model(tiny, seed=4, head_bias=5.0)
    _, trace = train(params, data,
                     TrainConfig(learning_rate=0.05, batch_size=8, epochs=500, seed=0))

    default = init_model(ArchConfig(), seed=0)
    y50 = forward(default, rng.normal(size=(50, 299)))
    y500 = forward(default, rng.normal(size=(500, 299)))
    with pytest.raises(ShapeError):
        forward(default, rng.normal(size=(5, 299)))

    again = init_model(ArchConfig(), seed=0)
    deterministic = all(
        np.array_equal(default.weights[k], again.weights[k]) for k in default.weights
    )
    ok = (gc < 1e-3 and trace[-1] < 1e-2 and np.isfinite(y50) and np.isfinite(y500)
          and deterministic)
    report(7, ok, f"grad_check {gc:.2e}, overfit loss@500 {trace[-1]:.2e}, "
                  f"variable-length ok, deterministic init {deterministic}")


def test_criterion_08_mode_experiment_analog(tmp_path):
    t0 = time.perf_counter()
    items = []
    rng = np.random.default_rng(11)
    for i in range(96):
        label = "major" if i < 48 else "minor"
        latent = 1.0 if label == "major" else 0.0
        # upward transpositions only: below ~150 Hz the triad notes collapse
        # into one FFT bin and chroma peaks stop resolving
        samples = synth_progression(latent, np.random.default_rng(100 + i),
                                    clip_seconds=12.0, transpose=int(rng.integers(0, 12)))
        path = tmp_path / f"piece{i:03d}.wav"
        write_wav(path, AudioBuffer(samples, 44100))
        items.append(CorpusItem(f"piece{i:03d}", path, label))
    corpus = LabeledCorpus(items)

    scorer = lambda buf: keyprofile_majorness(chroma(buf))
    rep = mode_experiment(corpus, scorer, clip_seconds=12.0, folds=10, seed=0)

    scores = [r["feature"] for r in rep.per_item]
    labels = [r["label"] for r in rep.per_item]
    shuffled_accs = []
    for s in range(5):
        perm = np.random.default_rng(s).permutation(labels)
        shuffled_accs.append(
            logistic_cv(scores, perm, folds=10, seed=s).cv_accuracy
        )
    baseline = float(np.mean(shuffled_accs))
    elapsed = time.perf_counter() - t0
    ok = rep.cv_accuracy >= 0.70 and abs(baseline - 0.5) <= 0.05 and elapsed < 120.0
    report(8, ok, f"cv accuracy {rep.cv_accuracy:.3f} (>=0.70), shuffled baseline "
                  f"{baseline:.3f} (0.5 +/- 0.05), {elapsed:.0f}s")


def test_criterion_09_end_to_end_pipeline(tmp_path):
    t0 = time.perf_counter()
    cfg = PipelineConfig(
        data_dir=tmp_path / "study",
        seed=0,
        study=StudyConfig(excerpt_seconds=15.0, ratings_per_item=5),
        epochs=15,
        learning_rate=0.02,
        batch_size=16,
    )
    cfg.data_dir.mkdir(parents=True)
    simulate_study(cfg, n_items=200, n_raters=12, noise_sigma=0.1)
    summary = run_pipeline(cfg, "all")
    eval_doc = json.loads((cfg.data_dir / "eval.json").read_text())
    r = eval_doc["pearson_r_vs_latent"]
    elapsed = time.perf_counter() - t0
    ok = r is not None and r >= 0.48 and elapsed < 600.0
    report(9, ok, f"held-out r vs latent {r:.3f} (>=0.48), cv {summary['cv_accuracy']}, "
                  f"{elapsed:.0f}s (<600)")


def test_criterion_10_service_contract(tmp_path):
    n_items, n_raters, per_pair = 20, 50, 5
    config = StudyConfig(raters_per_pair=per_pair)
    items = [f"it{i:02d}" for i in range(n_items)]
    log_path = tmp_path / "annotations.jsonl"
    svc = StudyService(config, items, log_path=log_path)

    def worker(rater):
        while True:
            task = svc.next_task(rater, "pair")
            if task is None:
                return
            svc.submit_annotation(task.task_id, {"choice": "left_more_major"})

    threads = [threading.Thread(target=worker, args=(f"r{i:02d}",)) for i in range(n_raters)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()

    lines = [json.loads(l) for l in log_path.read_text().splitlines() if l.strip()]
    n_pairs = n_items * (n_items - 1) // 2
    counts = {}
    seen = set()
    dup_free = True
    for rec in lines:
        unit = (rec["left"], rec["right"])
        counts[unit] = counts.get(unit, 0) + 1
        key = (rec["rater"], unit)
        dup_free = dup_free and key not in seen
        seen.add(key)
    coverage_ok = len(counts) == n_pairs and all(c == per_pair for c in counts.values())

    svc2 = StudyService(config, items, log_path=log_path)
    status = svc2.status()
    replay_ok = (
        status["comparisons"] == n_pairs * per_pair
        and status["pairs_complete"] == n_pairs
        and svc2.next_task("r00", "pair") is None
    )
    ok = coverage_ok and dup_free and replay_ok
    report(10, ok, f"{len(lines)} records, every pair x{per_pair}, dup-free {dup_free}, "
                   f"replay ok {replay_ok}")
