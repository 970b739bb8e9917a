"""Inter-rater consistency statistics over a sparse items-by-raters matrix.

Cronbach's alpha is computed on the complete-case item subset (rows where
every rater has a value); Krippendorff's alpha handles missing cells natively
and is the primary statistic for sparse matrices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InsufficientDataError, ParameterError
from .placement import RatingRecord

METRICS = ("interval", "ordinal")


@dataclass
class RaterMatrix:
    raters: list[str]
    items: list[str]
    values: np.ndarray  # shape (n_items, n_raters), NaN = missing

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.items), len(self.raters)):
            raise ParameterError("matrix shape does not match item/rater lists")

    @property
    def n_raters(self) -> int:
        return len(self.raters)

    def drop_raters(self, rater_ids: Iterable[str]) -> "RaterMatrix":
        drop = set(rater_ids)
        keep = [i for i, r in enumerate(self.raters) if r not in drop]
        return RaterMatrix(
            [self.raters[i] for i in keep], list(self.items), self.values[:, keep].copy()
        )

    @classmethod
    def from_records(cls, records: Iterable[RatingRecord]) -> "RaterMatrix":
        cells: dict[tuple[str, str], list[int]] = {}
        for rec in records:
            cells.setdefault((rec.item_id, rec.rater_id), []).append(rec.rating)
        items = sorted({k[0] for k in cells})
        raters = sorted({k[1] for k in cells})
        values = np.full((len(items), len(raters)), np.nan)
        for (item, rater), vals in cells.items():
            values[items.index(item), raters.index(rater)] = sum(vals) / len(vals)
        return cls(raters, items, values)

    @classmethod
    def from_csv(cls, path: str | Path) -> "RaterMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split(",")
            raters = header[1:]
            items, rows = [], []
            for line in fh:
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split(",")
                items.append(parts[0])
                rows.append([float(p) if p != "" else np.nan for p in parts[1:]])
        return cls(raters, items, np.array(rows) if rows else np.empty((0, len(raters))))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("item_id," + ",".join(self.raters) + "\n")
            for item, row in zip(self.items, self.values):
                cells = ["" if math.isnan(v) else f"{v:.12g}" for v in row]
                fh.write(item + "," + ",".join(cells) + "\n")


@dataclass
class ReliabilityReport:
    cronbach_alpha: float | None
    krippendorff_alpha: float | None
    removed_raters: list[str] = field(default_factory=list)
    per_rater_agreement: dict[str, float] = field(default_factory=dict)
    policy: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "cronbach_alpha": self.cronbach_alpha,
                "krippendorff_alpha": self.krippendorff_alpha,
                "removed_raters": self.removed_raters,
                "per_rater_agreement": self.per_rater_agreement,
                "policy": self.policy,
            },
            sort_keys=True,
        )


def cronbach_alpha(matrix: RaterMatrix) -> float | None:
    """alpha = k/(k-1) * (1 - sum(rater variances) / variance(item totals)).

    Returns None (the undefined marker) when the total variance is zero.
    """
    if matrix.n_raters < 2:
        raise InsufficientDataError("Cronbach's alpha needs at least 2 raters")
    complete = matrix.values[~np.isnan(matrix.values).any(axis=1)]
    if complete.shape[0] < 2:
        raise InsufficientDataError(
            f"only {complete.shape[0]} complete-case items; need at least 2"
        )
    k = matrix.n_raters
    rater_var = complete.var(axis=0, ddof=1).sum()
    total_var = complete.sum(axis=1).var(ddof=1)
    if total_var == 0:
        return None
    return float(k / (k - 1) * (1.0 - rater_var / total_var))


def _ordinal_deltas(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    # delta(c, k) = (sum of frequencies from c to k, minus half of the ends)^2
    cum = np.concatenate([[0.0], np.cumsum(counts)])
    v = len(values)
    deltas = np.zeros((v, v))
    for a in range(v):
        for b in range(a + 1, v):
            span = cum[b + 1] - cum[a]
            deltas[a, b] = deltas[b, a] = (span - (counts[a] + counts[b]) / 2.0) ** 2
    return deltas


def krippendorff_alpha(matrix: RaterMatrix, metric: str = "interval") -> float:
    """alpha = 1 - D_observed / D_expected over all pairable values.

    Units are items with at least two ratings; within-unit pair counts are
    weighted by 1/(m_u - 1) per Krippendorff's coincidence definition.
    """
    if metric not in METRICS:
        raise ParameterError(f"unknown metric {metric!r}; expected one of {METRICS}")
    units = [row[~np.isnan(row)] for row in matrix.values]
    units = [u for u in units if len(u) >= 2]
    if not units:
        raise InsufficientDataError("no item has two or more ratings")

    pooled = np.concatenate(units)
    n = len(pooled)
    distinct, inverse_all = np.unique(pooled, return_inverse=True)
    counts = np.bincount(inverse_all, minlength=len(distinct)).astype(float)

    if metric == "interval":
        deltas = (distinct[:, None] - distinct[None, :]) ** 2
    else:
        deltas = _ordinal_deltas(distinct, counts)

    # Coincidence matrix: within-unit ordered pairs weighted by 1/(m_u - 1).
    v = len(distinct)
    coincidence = np.zeros((v, v))
    pos = 0
    for u in units:
        m = len(u)
        idx = inverse_all[pos : pos + m]
        pos += m
        unit_counts = np.bincount(idx, minlength=v).astype(float)
        pair_counts = np.outer(unit_counts, unit_counts)
        np.fill_diagonal(pair_counts, unit_counts * (unit_counts - 1))
        coincidence += pair_counts / (m - 1)

    d_observed = float(np.sum(coincidence * deltas)) / n
    expected_pairs = np.outer(counts, counts)
    np.fill_diagonal(expected_pairs, counts * (counts - 1))
    d_expected = float(np.sum(expected_pairs * deltas)) / (n * (n - 1))
    if d_expected == 0:
        return 1.0  # every pairable value identical
    return 1.0 - d_observed / d_expected


def _agreement_with_peers(values: np.ndarray, col: int) -> float:
    """Pearson correlation of one rater against the mean of the others over
    shared items; 0.0 when undefined (too few shared items or no variance)."""
    own = values[:, col]
    others = np.delete(values, col, axis=1)
    with np.errstate(all="ignore"):
        peer_mean = np.nanmean(others, axis=1)
    ok = ~np.isnan(own) & ~np.isnan(peer_mean)
    if ok.sum() < 3:
        return 0.0
    x, y = own[ok], peer_mean[ok]
    sx, sy = x.std(), y.std()
    if sx == 0 or sy == 0:
        return 0.0
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


def filter_raters(
    matrix: RaterMatrix,
    min_corr: float = 0.2,
    max_removed_frac: float = 0.5,
) -> tuple[RaterMatrix, ReliabilityReport]:
    """Iteratively drop the rater least correlated with the rest while that
    correlation is below min_corr and the removal budget allows it."""
    if matrix.n_raters < 3:
        raise InsufficientDataError("rater filtering needs at least 3 raters")
    n_original = matrix.n_raters
    current = matrix
    removed: list[str] = []
    agreement: dict[str, float] = {}
    while True:
        corrs = {
            rater: _agreement_with_peers(current.values, i)
            for i, rater in enumerate(current.raters)
        }
        agreement.update(corrs)
        worst = min(corrs, key=lambda r: (corrs[r], r))
        budget_ok = (len(removed) + 1) / n_original <= max_removed_frac
        if corrs[worst] >= min_corr or not budget_ok:
            break
        if current.n_raters - 1 < 2:
            raise ParameterError("policy would remove all but one rater")
        removed.append(worst)
        current = current.drop_raters([worst])

    try:
        c_alpha = cronbach_alpha(current)
    except InsufficientDataError:
        c_alpha = None
    try:
        k_alpha = krippendorff_alpha(current)
    except InsufficientDataError:
        k_alpha = None
    report = ReliabilityReport(
        cronbach_alpha=c_alpha,
        krippendorff_alpha=k_alpha,
        removed_raters=removed,
        per_rater_agreement=agreement,
        policy={"min_corr": min_corr, "max_removed_frac": max_removed_frac},
    )
    return current, report
