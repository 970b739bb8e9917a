"""Bradley-Terry aggregation of pairwise comparisons and anchor selection.

The latent strengths theta maximize the Bradley-Terry likelihood
P(i beats j) = exp(theta_i) / (exp(theta_i) + exp(theta_j)) via
minorization-maximization sweeps (Hunter 2004). "equal" judgments count as
half a win for each side; a configurable epsilon of pseudo-wins in both
directions keeps items with a perfect record finite.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .comparisons import Choice, ComparisonSet
from .errors import DisconnectedGraphError, DivergenceError, ParameterError

TIE_POLICIES = ("half", "ignore")


@dataclass(frozen=True)
class BTConfig:
    max_iter: int = 2000
    tol: float = 1e-8          # convergence: max |delta theta| after recentering
    tie_policy: str = "half"
    epsilon: float = 0.5       # pseudo-wins added both ways on every observed pair

    def __post_init__(self):
        if self.tie_policy not in TIE_POLICIES:
            raise ParameterError(f"unknown tie_policy {self.tie_policy!r}")
        if self.epsilon < 0 or self.tol <= 0 or self.max_iter < 1:
            raise ParameterError("epsilon must be >= 0, tol > 0, max_iter >= 1")


@dataclass(frozen=True)
class RankingEntry:
    item_id: str
    theta: float
    rank: int  # 1 = most major


@dataclass(frozen=True)
class Ranking:
    entries: tuple[RankingEntry, ...]
    log_likelihood: float
    n_iterations: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def theta_of(self, item_id: str) -> float:
        for e in self.entries:
            if e.item_id == item_id:
                return e.theta
        raise KeyError(item_id)

    def fingerprint(self) -> str:
        h = hashlib.sha1()
        for e in self.entries:
            h.update(f"{e.item_id}:{e.theta:.9f};".encode())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class AnchorSet:
    """Anchor item ids ordered ascending in majorness (most minor first)."""

    anchors: tuple[str, ...]
    source_ranking_id: str = ""

    def __post_init__(self):
        if len(set(self.anchors)) != len(self.anchors):
            raise ParameterError("anchor ids must be distinct")

    def __len__(self) -> int:
        return len(self.anchors)


def _win_matrix(cset: ComparisonSet, config: BTConfig) -> tuple[np.ndarray, list[str]]:
    items = sorted(cset.items)
    index = {item: i for i, item in enumerate(items)}
    wins = np.zeros((len(items), len(items)))
    for rec in cset.records:
        i, j = index[rec.left_id], index[rec.right_id]
        if rec.choice is Choice.LEFT:
            wins[i, j] += 1.0
        elif rec.choice is Choice.RIGHT:
            wins[j, i] += 1.0
        elif config.tie_policy == "half":
            wins[i, j] += 0.5
            wins[j, i] += 0.5
    if config.epsilon > 0:
        observed = np.zeros_like(wins, dtype=bool)
        for rec in cset.records:
            i, j = index[rec.left_id], index[rec.right_id]
            observed[i, j] = observed[j, i] = True
        wins[observed] += config.epsilon
    return wins, items


def bt_log_likelihood(theta: np.ndarray, wins: np.ndarray) -> float:
    """Data log-likelihood sum_{i!=j} w_ij * log sigma(theta_i - theta_j)."""
    diff = theta[:, None] - theta[None, :]
    logp = -np.logaddexp(0.0, -diff)
    mask = wins > 0
    return float(np.sum(wins[mask] * logp[mask]))


def fit_bradley_terry(cset: ComparisonSet, config: BTConfig | None = None) -> Ranking:
    """Fit zero-sum latent strengths to a comparison set.

    Raises DisconnectedGraphError when the comparison graph has more than one
    component, and DivergenceError when epsilon=0 and some item has only wins
    or only losses (the MLE is then at infinity).
    """
    config = config or BTConfig()
    if len(cset.items) < 2:
        raise ParameterError("need at least 2 items to rank")
    comps = cset.connected_components()
    if len(comps) > 1:
        raise DisconnectedGraphError(comps)

    wins, items = _win_matrix(cset, config)
    n = len(items)
    totals_out = wins.sum(axis=1)
    totals_in = wins.sum(axis=0)
    if config.epsilon == 0:
        degenerate = [items[i] for i in range(n) if totals_out[i] == 0 or totals_in[i] == 0]
        if degenerate:
            raise DivergenceError(
                "items with only wins or only losses cannot converge without "
                f"regularization epsilon: {', '.join(degenerate)}"
            )

    games = wins + wins.T
    pi = np.ones(n)
    theta = np.zeros(n)
    converged_at = None
    for it in range(1, config.max_iter + 1):
        pair_sum = pi[:, None] + pi[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(games > 0, games / pair_sum, 0.0)
        denom = ratio.sum(axis=1)
        pi_new = np.where(denom > 0, totals_out / denom, pi)
        log_pi = np.log(np.maximum(pi_new, 1e-300))
        theta_new = log_pi - log_pi.mean()
        delta = float(np.max(np.abs(theta_new - theta)))
        theta = theta_new
        pi = np.exp(theta)
        if delta < config.tol:
            converged_at = it
            break
    if converged_at is None:
        raise DivergenceError(f"Bradley-Terry fit did not converge in {config.max_iter} sweeps")

    # Report the likelihood of the actual data (tie-adjusted, no epsilon).
    raw_cfg = BTConfig(config.max_iter, config.tol, config.tie_policy, 0.0)
    raw_wins, _ = _win_matrix(cset, raw_cfg)
    ll = bt_log_likelihood(theta, raw_wins)

    order = sorted(range(n), key=lambda i: (-theta[i], items[i]))
    entries = tuple(
        RankingEntry(items[i], float(theta[i]), rank)
        for rank, i in enumerate(order, start=1)
    )
    return Ranking(entries, ll, converged_at)


def _round_half_up(x: float) -> int:
    # round() is banker's rounding, which maps the N==k anchor case to rank 0.
    return math.floor(x + 0.5)


def select_anchors(ranking: Ranking, k: int = 10) -> AnchorSet:
    """Items at k evenly spaced rank quantiles, ordered ascending in majorness.

    Target ranks are round((i - 0.5) * N / k) for i = 1..k, counted from the
    most major item (rank 1).
    """
    n = len(ranking)
    if k < 2 or k > n:
        raise ParameterError(f"anchor count k={k} must be in [2, {n}]")
    by_rank = {e.rank: e.item_id for e in ranking.entries}
    target_ranks = [_round_half_up((i - 0.5) * n / k) for i in range(1, k + 1)]
    ids = [by_rank[r] for r in target_ranks]
    return AnchorSet(tuple(reversed(ids)), ranking.fingerprint())


def ranking_to_csv(ranking: Ranking, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "theta", "rank"])
        for e in ranking.entries:
            writer.writerow([e.item_id, f"{e.theta:.12g}", e.rank])


def ranking_from_csv(path: str | Path) -> Ranking:
    entries = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            entries.append(RankingEntry(row["item_id"], float(row["theta"]), int(row["rank"])))
    entries.sort(key=lambda e: e.rank)
    return Ranking(tuple(entries), float("nan"))


def anchors_to_text(anchors: AnchorSet, path: str | Path) -> None:
    Path(path).write_text("\n".join(anchors.anchors) + "\n", encoding="utf-8")


def anchors_from_text(path: str | Path) -> AnchorSet:
    ids = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    return AnchorSet(tuple(ids))
