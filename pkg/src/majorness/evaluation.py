"""Correlation and cross-validated classification experiments.

The mode experiment mirrors the binary major/minor setup: score every excerpt
with a majorness function, fit a one-feature logistic regression under
stratified k-fold cross-validation, and lay the items out left to right by
predicted majorness with the misclassified ones marked.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .audio import AudioBuffer, read_wav
from .errors import (
    InsufficientDataError,
    MajornessError,
    ParameterError,
    UndefinedStatisticError,
)
from .placement import ItemRatingSummary


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation; needs equal lengths >= 3 and variance in both."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("pearson needs two equal-length 1-D sequences")
    if len(x) < 3:
        raise ParameterError(f"pearson needs at least 3 points, got {len(x)}")
    dx, dy = x - x.mean(), y - y.mean()
    nx, ny = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if nx == 0 or ny == 0:
        raise UndefinedStatisticError("pearson undefined: zero variance input")
    return float(dx @ dy) / (nx * ny)


@dataclass
class EvalReport:
    pearson_r: float | None
    cv_accuracy: float | None
    fold_accuracies: list[float] = field(default_factory=list)
    per_item: list[dict] = field(default_factory=list)
    mistakes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "pearson_r": self.pearson_r,
                "cv_accuracy": self.cv_accuracy,
                "fold_accuracies": self.fold_accuracies,
                "per_item": self.per_item,
                "mistakes": self.mistakes,
            },
            sort_keys=True,
        )


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _log_likelihood(x: np.ndarray, y: np.ndarray, w: float, b: float) -> float:
    z = w * x + b
    # log sigma(z) for y=1, log(1 - sigma(z)) for y=0, stably
    return float(np.sum(np.where(y == 1, -np.logaddexp(0, -z), -np.logaddexp(0, z))))


def fit_logistic_1d(
    x: Sequence[float],
    y: Sequence[int],
    tol: float = 1e-8,
    max_iter: int = 20000,
) -> tuple[float, float]:
    """Two-parameter logistic regression by gradient ascent with step halving.

    Separable data pushes |w| toward infinity; the iteration cap returns the
    best parameters found, which already classify the training set perfectly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    classes = set(y.tolist())
    if classes == {0} or classes == {1}:
        only = 1 if classes == {1} else 0
        return 0.0, 50.0 if only == 1 else -50.0  # constant predictor
    # Ascend in standardized coordinates (same MLE, scale-free conditioning).
    mu, sigma = float(x.mean()), float(x.std())
    if sigma == 0:
        sigma = 1.0
    z = (x - mu) / sigma
    w, b = 0.0, 0.0
    step = 1.0
    ll = _log_likelihood(z, y, w, b)
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-np.clip(w * z + b, -500, 500)))
        resid = y - p
        gw, gb = float(resid @ z), float(resid.sum())
        while step > 1e-12:
            w_new, b_new = w + step * gw, b + step * gb
            ll_new = _log_likelihood(z, y, w_new, b_new)
            if ll_new >= ll:
                break
            step *= 0.5
        else:
            break
        moved = max(abs(w_new - w), abs(b_new - b))
        w, b, ll = w_new, b_new, ll_new
        step *= 1.2
        if moved < tol:
            break
    return w / sigma, b - w * mu / sigma


def stratified_folds(labels: Sequence[int], folds: int, seed: int) -> np.ndarray:
    """Seeded stratified fold index per sample."""
    labels = np.asarray(labels)
    if folds < 2:
        raise ParameterError("need at least 2 folds")
    if len(labels) < folds:
        raise ParameterError(f"need at least {folds} samples for {folds} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=int)
    offset = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            assignment[i] = (pos + offset) % folds
        offset += len(idx)  # stagger classes so folds stay balanced
    return assignment


def logistic_cv(
    feature: Sequence[float],
    labels: Sequence[int],
    folds: int = 10,
    seed: int = 0,
    item_ids: Sequence[str] | None = None,
) -> EvalReport:
    """Stratified k-fold CV of a one-feature logistic classifier at 0.5."""
    feature = np.asarray(feature, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if feature.shape != labels.shape:
        raise ParameterError("feature and labels must have equal length")
    if len(set(labels.tolist())) < 2:
        raise ParameterError("both classes must be present")
    ids = list(item_ids) if item_ids is not None else [str(i) for i in range(len(labels))]
    fold_of = stratified_folds(labels, folds, seed)
    fold_accuracies = []
    predicted = np.zeros(len(labels))
    for f in range(folds):
        test = fold_of == f
        w, b = fit_logistic_1d(feature[~test], labels[~test])
        p = np.array([_sigmoid(w * v + b) for v in feature[test]])
        predicted[test] = p
        fold_accuracies.append(float(np.mean((p >= 0.5).astype(int) == labels[test])))
    hard = (predicted >= 0.5).astype(int)
    mistakes = [ids[i] for i in range(len(labels)) if hard[i] != labels[i]]
    per_item = [
        {
            "item_id": ids[i],
            "feature": float(feature[i]),
            "label": int(labels[i]),
            "prediction": float(predicted[i]),
        }
        for i in range(len(labels))
    ]
    return EvalReport(
        pearson_r=None,
        cv_accuracy=float(np.mean(fold_accuracies)),
        fold_accuracies=fold_accuracies,
        per_item=per_item,
        mistakes=mistakes,
    )


@dataclass(frozen=True)
class CorpusItem:
    item_id: str
    path: Path
    label: str  # "major" | "minor"


@dataclass
class LabeledCorpus:
    items: list[CorpusItem]

    def __post_init__(self):
        for it in self.items:
            if it.label not in ("major", "minor"):
                raise ParameterError(f"{it.item_id}: label must be major or minor")
            if not Path(it.path).exists():
                raise ParameterError(f"{it.item_id}: audio path {it.path} does not exist")

    @classmethod
    def from_manifest_csv(cls, path: str | Path) -> "LabeledCorpus":
        base = Path(path).parent
        items = []
        with open(path, "r", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                p = Path(row["path"])
                if not p.is_absolute():
                    p = base / p
                items.append(CorpusItem(row["item_id"], p, row["label"]))
        return cls(items)


def mode_experiment(
    corpus: LabeledCorpus,
    scorer: Callable[[AudioBuffer], float],
    clip_seconds: float = 12.0,
    folds: int = 10,
    seed: int = 0,
) -> EvalReport:
    """Score the first clip_seconds of each item, cross-validate a logistic
    classifier on the scores, and order the per-item table by majorness."""
    if not corpus.items:
        raise ParameterError("corpus is empty")
    scores, labels, ids = [], [], []
    for it in corpus.items:
        try:
            buf = read_wav(it.path).first_seconds(clip_seconds)
            scores.append(float(scorer(buf)))
        except MajornessError as exc:
            raise type(exc)(f"{it.path}: {exc}") from exc
        labels.append(1 if it.label == "major" else 0)
        ids.append(it.item_id)
    report = logistic_cv(scores, labels, folds=folds, seed=seed, item_ids=ids)
    report.per_item.sort(key=lambda r: -r["feature"])
    return report


def figure_strip(report: EvalReport) -> str:
    """Plain-text strip of items ordered most to least major; misclassified
    items are marked with '!'."""
    wrong = set(report.mistakes)
    lines = ["pred_rank  score     label  item"]
    for pos, row in enumerate(report.per_item, start=1):
        mark = "!" if row["item_id"] in wrong else " "
        label = {1: "major", 0: "minor"}.get(row.get("label"), "?")
        lines.append(
            f"{pos:9d}  {row['feature']:+.5f} {mark} {label:6s} {row['item_id']}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class EmotionCorrelations:
    per_dimension: dict[str, float]
    n_joined: int


def read_emotion_table(path: str | Path) -> dict[str, dict[str, float]]:
    """CSV with an item_id column and one column per emotion dimension."""
    table: dict[str, dict[str, float]] = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            item = row.pop("item_id")
            table[item] = {k: float(v) for k, v in row.items() if v != ""}
    return table


def emotion_correlation(
    summaries: Sequence[ItemRatingSummary],
    emotion_table: dict[str, dict[str, float]],
) -> EmotionCorrelations:
    """Pearson r of mean majorness ratings against each emotion dimension over
    the item intersection of the two tables."""
    by_item = {s.item_id: s.mean_rating for s in summaries}
    joined = sorted(set(by_item) & set(emotion_table))
    if len(joined) < 3:
        raise InsufficientDataError(
            f"only {len(joined)} items in the join; need at least 3"
        )
    dims = sorted({d for item in joined for d in emotion_table[item]})
    ratings = [by_item[i] for i in joined]
    out = {}
    for dim in dims:
        rows = [i for i in joined if dim in emotion_table[i]]
        if len(rows) < 3:
            continue
        out[dim] = pearson([by_item[i] for i in rows], [emotion_table[i][dim] for i in rows])
    return EmotionCorrelations(out, len(joined))
