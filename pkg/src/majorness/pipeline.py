"""Batch pipeline stages over a study data directory.

Stage outputs are deterministic given the directory contents and the seed:
rerunning a stage with unchanged inputs rewrites byte-identical files. Each
stage writes its artifacts plus a JSON summary; `all` chains every stage and
merges the summaries.

Directory layout:
  study.json           study configuration
  audio/<item>.wav     excerpt audio
  items.jsonl          simulated ground-truth latents (optional)
  comparisons.jsonl    pairwise records      ratings.jsonl   placement records
  annotations.jsonl    service log (exported to the two files above if present)
  ranking.csv anchors.txt matrix.csv matrix_filtered.csv reliability.json
  features/<item>.mels chroma.csv model.mjrn train.json eval.json strip.txt
  summary.json
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import convnet, simulate
from .audio import CANONICAL_RATE, AudioBuffer, read_wav, resample_to_44100, write_wav
from .comparisons import read_comparisons_jsonl, write_comparisons_jsonl
from .errors import StageError
from .evaluation import EvalReport, figure_strip, logistic_cv, pearson
from .features import FeatureConfig, chroma, mel_spectrogram, read_mels, write_mels
from .placement import write_ratings_jsonl
from .ranking import (
    anchors_to_text,
    fit_bradley_terry,
    ranking_from_csv,
    ranking_to_csv,
    select_anchors,
)
from .reliability import RaterMatrix, cronbach_alpha, filter_raters, krippendorff_alpha
from .service import StudyConfig, export_standard_files, schedule_pairs

STAGES = ("rank", "anchors", "reliability", "features", "train", "evaluate", "all")


@dataclass
class PipelineConfig:
    data_dir: Path
    seed: int = 0
    study: StudyConfig = field(default_factory=StudyConfig)
    holdout_frac: float = 0.25
    epochs: int = 30
    learning_rate: float = 0.02
    batch_size: int = 16
    min_corr: float = 0.2
    max_removed_frac: float = 0.5

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)

    def path(self, name: str) -> Path:
        return self.data_dir / name


def _require(cfg: PipelineConfig, name: str, needed_stage: str) -> Path:
    p = cfg.path(name)
    if not p.exists():
        raise StageError(f"{p} not found; run the `{needed_stage}` stage first")
    return p


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _ensure_wire_files(cfg: PipelineConfig) -> None:
    """Derive comparisons/ratings from the service log when they are absent."""
    log = cfg.path("annotations.jsonl")
    cmp_p, rat_p = cfg.path("comparisons.jsonl"), cfg.path("ratings.jsonl")
    if log.exists() and not (cmp_p.exists() and rat_p.exists()):
        export_standard_files(log, cmp_p, rat_p)


def stage_rank(cfg: PipelineConfig) -> dict:
    _ensure_wire_files(cfg)
    src = cfg.path("comparisons.jsonl")
    if not src.exists():
        raise StageError(f"{src} not found; run `simulate` or collect annotations first")
    result = read_comparisons_jsonl(src)
    if len(result.comparisons) == 0:
        raise StageError(f"{src} contains no usable comparison records")
    ranking = fit_bradley_terry(result.comparisons)
    ranking_to_csv(ranking, cfg.path("ranking.csv"))
    summary = {
        "n_items": len(ranking),
        "n_records": len(result.comparisons),
        "n_malformed": result.n_malformed,
        "iterations": ranking.n_iterations,
        "log_likelihood": ranking.log_likelihood,
        "ranking_id": ranking.fingerprint(),
    }
    _write_json(cfg.path("rank.json"), summary)
    return summary


def stage_anchors(cfg: PipelineConfig) -> dict:
    _require(cfg, "ranking.csv", "rank")
    ranking = ranking_from_csv(cfg.path("ranking.csv"))
    anchors = select_anchors(ranking, cfg.study.anchor_count)
    anchors_to_text(anchors, cfg.path("anchors.txt"))
    summary = {"anchors": list(anchors.anchors), "source_ranking_id": anchors.source_ranking_id}
    _write_json(cfg.path("anchors.json"), summary)
    return summary


def stage_reliability(cfg: PipelineConfig) -> dict:
    _ensure_wire_files(cfg)
    src = cfg.path("ratings.jsonl")
    if not src.exists():
        raise StageError(f"{src} not found; run `simulate` or collect annotations first")
    from .placement import read_ratings_jsonl

    records = read_ratings_jsonl(src)
    if not records:
        raise StageError(f"{src} contains no rating records")
    from .placement import aggregate_ratings, summaries_to_csv

    summaries_to_csv(aggregate_ratings(records), cfg.path("summaries.csv"))
    matrix = RaterMatrix.from_records(records)
    matrix.to_csv(cfg.path("matrix.csv"))
    try:
        pre_cronbach = cronbach_alpha(matrix)
    except Exception:
        pre_cronbach = None
    try:
        pre_kripp = krippendorff_alpha(matrix)
    except Exception:
        pre_kripp = None
    kept, report = filter_raters(matrix, cfg.min_corr, cfg.max_removed_frac)
    kept.to_csv(cfg.path("matrix_filtered.csv"))
    summary = {
        "n_raters": matrix.n_raters,
        "n_items": len(matrix.items),
        "pre_filter": {"cronbach_alpha": pre_cronbach, "krippendorff_alpha": pre_kripp},
        "post_filter": {
            "cronbach_alpha": report.cronbach_alpha,
            "krippendorff_alpha": report.krippendorff_alpha,
        },
        "removed_raters": report.removed_raters,
        "per_rater_agreement": report.per_rater_agreement,
        "policy": report.policy,
    }
    _write_json(cfg.path("reliability.json"), summary)
    return summary


def stage_features(cfg: PipelineConfig) -> dict:
    audio_dir = _require(cfg, "audio", "simulate")
    wavs = sorted(Path(audio_dir).glob("*.wav"))
    if not wavs:
        raise StageError(f"{audio_dir} holds no WAV files")
    feat_dir = cfg.path("features")
    feat_dir.mkdir(exist_ok=True)
    feature_config = FeatureConfig()
    chroma_rows = []
    total_frames = 0
    for wav in wavs:
        item_id = wav.stem
        buf = resample_to_44100(read_wav(wav))
        mel = mel_spectrogram(buf, feature_config, item_id=item_id)
        write_mels(mel, feat_dir / f"{item_id}.mels")
        total_frames += mel.n_frames
        cv = chroma(buf, feature_config)
        chroma_rows.append((item_id, cv))
    with open(cfg.path("chroma.csv"), "w", encoding="utf-8") as fh:
        fh.write("item_id," + ",".join(f"pc_{i}" for i in range(12)) + ",silence\n")
        for item_id, cv in chroma_rows:
            cells = ",".join(f"{e:.9g}" for e in cv.energies)
            fh.write(f"{item_id},{cells},{int(cv.is_silence)}\n")
    summary = {
        "n_items": len(wavs),
        "n_mels": feature_config.n_mels,
        "window": feature_config.window,
        "hop": feature_config.hop,
        "total_frames": total_frames,
    }
    _write_json(cfg.path("features.json"), summary)
    return summary


def _mean_ratings_from_matrix(path: Path) -> dict[str, float]:
    matrix = RaterMatrix.from_csv(path)
    with np.errstate(all="ignore"):
        means = np.nanmean(matrix.values, axis=1)
    return {
        item: float(m)
        for item, m in zip(matrix.items, means)
        if not math.isnan(m)
    }


def _split_items(items: list[str], holdout_frac: float, seed: int) -> tuple[list[str], list[str]]:
    rng = np.random.default_rng(seed)
    order = sorted(items)
    rng.shuffle(order)
    n_holdout = max(1, int(round(len(order) * holdout_frac)))
    holdout = sorted(order[:n_holdout])
    train = sorted(order[n_holdout:])
    return train, holdout


def stage_train(cfg: PipelineConfig) -> dict:
    feat_dir = _require(cfg, "features", "features")
    matrix_path = _require(cfg, "matrix_filtered.csv", "reliability")
    targets = _mean_ratings_from_matrix(matrix_path)
    items = sorted(
        p.stem for p in Path(feat_dir).glob("*.mels") if p.stem in targets
    )
    if len(items) < 8:
        raise StageError(f"only {len(items)} items have both features and ratings")
    train_items, holdout_items = _split_items(items, cfg.holdout_frac, cfg.seed)

    mels = {item: read_mels(feat_dir / f"{item}.mels") for item in items}
    train_stack = np.concatenate([mels[i].ravel() for i in train_items])
    shift = float(train_stack.mean())
    scale = float(1.0 / (train_stack.std() + 1e-12))
    n_mels = next(iter(mels.values())).shape[1]
    arch = convnet.ArchConfig(n_mels=n_mels, input_shift=shift, input_scale=scale)
    train_targets = np.array([targets[i] for i in train_items])
    params = convnet.init_model(arch, seed=cfg.seed, head_bias=float(train_targets.mean()))
    convnet.calibrate_features(params, [mels[i] for i in train_items])
    dataset = [(mels[i], targets[i]) for i in train_items]
    params, trace = convnet.train(
        params,
        dataset,
        convnet.TrainConfig(
            learning_rate=cfg.learning_rate,
            batch_size=cfg.batch_size,
            epochs=cfg.epochs,
            seed=cfg.seed,
        ),
    )
    convnet.save_checkpoint(params, cfg.path("model.mjrn"))
    summary = {
        "n_train": len(train_items),
        "n_holdout": len(holdout_items),
        "holdout_items": holdout_items,
        "epoch_losses": [round(v, 6) for v in trace],
        "final_loss": round(trace[-1], 6) if trace else None,
        "n_weights": params.n_weights(),
        "arch": {"n_mels": arch.n_mels, "branch_channels": arch.branch_channels,
                 "stem_channels": arch.stem_channels, "pool_time": arch.pool_time},
    }
    _write_json(cfg.path("train.json"), summary)
    return summary


def stage_evaluate(cfg: PipelineConfig) -> dict:
    model_path = _require(cfg, "model.mjrn", "train")
    feat_dir = _require(cfg, "features", "features")
    matrix_path = _require(cfg, "matrix_filtered.csv", "reliability")
    train_info = json.loads(_require(cfg, "train.json", "train").read_text(encoding="utf-8"))
    holdout = train_info["holdout_items"]
    params = convnet.load_checkpoint(model_path)
    targets = _mean_ratings_from_matrix(matrix_path)

    predictions = {}
    for item in holdout:
        mel = read_mels(Path(feat_dir) / f"{item}.mels")
        predictions[item] = convnet.forward(params, mel)

    pred = [predictions[i] for i in holdout]
    rating = [targets[i] for i in holdout]
    r_ratings = pearson(pred, rating)

    r_latent = None
    cv_report: EvalReport | None = None
    latents_path = cfg.path("items.jsonl")
    if latents_path.exists():
        latents = simulate.read_items_jsonl(latents_path)
        lat = [latents[i] for i in holdout]
        r_latent = pearson(pred, lat)
        labels = [1 if latents[i] > 0.5 else 0 for i in holdout]
        if len(set(labels)) == 2:
            folds = min(10, len(holdout))
            cv_report = logistic_cv(pred, labels, folds=folds, seed=cfg.seed, item_ids=holdout)
            cv_report.per_item.sort(key=lambda r: -r["feature"])
            cfg.path("strip.txt").write_text(figure_strip(cv_report), encoding="utf-8")

    summary = {
        "n_holdout": len(holdout),
        "pearson_r": r_latent if r_latent is not None else r_ratings,
        "pearson_r_vs_ratings": r_ratings,
        "pearson_r_vs_latent": r_latent,
        "cv_accuracy": cv_report.cv_accuracy if cv_report else None,
        "fold_accuracies": cv_report.fold_accuracies if cv_report else [],
        "mistakes": cv_report.mistakes if cv_report else [],
        "predictions": {k: round(v, 6) for k, v in predictions.items()},
    }
    _write_json(cfg.path("eval.json"), summary)
    return summary


def run_pipeline(cfg: PipelineConfig, stage: str) -> dict:
    """Run one stage (or `all`); returns the stage summary."""
    if stage not in STAGES:
        raise StageError(f"unknown stage {stage!r}; expected one of {STAGES}")
    if stage != "all":
        return {
            "rank": stage_rank,
            "anchors": stage_anchors,
            "reliability": stage_reliability,
            "features": stage_features,
            "train": stage_train,
            "evaluate": stage_evaluate,
        }[stage](cfg)
    rank_s = stage_rank(cfg)
    anchors_s = stage_anchors(cfg)
    rel_s = stage_reliability(cfg)
    feat_s = stage_features(cfg)
    train_s = stage_train(cfg)
    eval_s = stage_evaluate(cfg)
    summary = {
        "n_items": rank_s["n_items"],
        "n_comparisons": rank_s["n_records"],
        "anchors": anchors_s["anchors"],
        "cronbach_alpha": rel_s["post_filter"]["cronbach_alpha"],
        "krippendorff_alpha": rel_s["post_filter"]["krippendorff_alpha"],
        "removed_raters": rel_s["removed_raters"],
        "n_feature_items": feat_s["n_items"],
        "train_final_loss": train_s["final_loss"],
        "pearson_r": eval_s["pearson_r"],
        "cv_accuracy": eval_s["cv_accuracy"],
    }
    _write_json(cfg.path("summary.json"), summary)
    return summary


def simulate_study(
    cfg: PipelineConfig,
    n_items: int,
    n_raters: int,
    noise_sigma: float = 0.1,
    bias_sigma: float = 0.0,
) -> dict:
    """Generate a full synthetic study in the data directory: audio, latent
    ground truth, pairwise comparisons, and placement ratings produced through
    the real protocol (ranking and anchors are fitted internally and are
    reproduced exactly by the rank/anchors stages)."""
    data_dir = cfg.data_dir
    audio_dir = data_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    study = cfg.study

    items = []
    master = np.random.default_rng(cfg.seed)
    latents = master.uniform(0.0, 1.0, size=n_items)
    for i in range(n_items):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, i]))
        samples = simulate.synth_progression(float(latents[i]), rng, study.excerpt_seconds)
        item = simulate.SyntheticItem(f"item_{i:04d}", float(latents[i]), AudioBuffer(samples, CANONICAL_RATE))
        write_wav(audio_dir / f"{item.item_id}.wav", item.audio)
        items.append(simulate.ItemLatent(item.item_id, item.latent_majorness))

    simulate.write_items_jsonl(items, data_dir / "items.jsonl")
    (data_dir / "study.json").write_text(study.to_json() + "\n", encoding="utf-8")

    raters = simulate.make_raters(n_raters, noise_sigma, bias_sigma, seed=cfg.seed + 1)
    pairs = schedule_pairs([it.item_id for it in items], study)
    comparisons = simulate.sim_pairwise(
        items, raters, pairs, seed=cfg.seed + 2, raters_per_pair=study.raters_per_pair
    )
    write_comparisons_jsonl(comparisons, data_dir / "comparisons.jsonl")

    from .comparisons import ingest_comparisons

    cset = ingest_comparisons(r.to_json() for r in comparisons).comparisons
    ranking = fit_bradley_terry(cset)
    anchors = select_anchors(ranking, study.anchor_count)
    ratings = simulate.sim_placements(
        items, anchors, raters, study.ratings_per_item, seed=cfg.seed + 3
    )
    write_ratings_jsonl(ratings, data_dir / "ratings.jsonl")
    return {
        "n_items": n_items,
        "n_raters": n_raters,
        "n_pairs": len(pairs),
        "n_comparisons": len(comparisons),
        "n_ratings": len(ratings),
        "noise_sigma": noise_sigma,
    }
