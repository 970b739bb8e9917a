"""Anchored-scale placement: walk an item along ordered anchors until it sits
between two of them, then convert the placement into a 1..10 rating.

The canonical walk starts at the most major anchor and moves toward the most
minor one. At each step the rater says whether the item is more minor than
the current anchor (advance) or less minor (stop: the item is bracketed).
``placement_slot`` counts the anchors the item beats in majorness, so a walk
that falls off the minor end lands in slot 0. Ratings are
``clamp(slot, 1, 10)``: with 10 anchors the bottom two slots merge into 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import ParameterError, StateError, ValidationError
from .ranking import AnchorSet

RATING_MIN = 1
RATING_MAX = 10


class Judgment(str, Enum):
    ITEM_MORE_MINOR = "item_more_minor"
    ITEM_LESS_MINOR = "item_less_minor"


class WalkOrder(str, Enum):
    FROM_MOST_MAJOR = "from_most_major"
    FROM_MOST_MINOR = "from_most_minor"


@dataclass
class PlacementSession:
    """Single-owner state machine for one item's walk along the anchors."""

    item_id: str
    anchors: tuple[str, ...]  # ascending majorness, as stored in AnchorSet
    order: WalkOrder = WalkOrder.FROM_MOST_MAJOR
    cursor: int = 0
    judgments: list[Judgment] = field(default_factory=list)
    state: str = "active"
    placement_slot: int | None = None
    self_comparison: bool = False

    @property
    def active(self) -> bool:
        return self.state == "active"

    def current_anchor(self) -> str:
        if not self.active:
            raise StateError("session already placed")
        if self.order is WalkOrder.FROM_MOST_MAJOR:
            return self.anchors[len(self.anchors) - 1 - self.cursor]
        return self.anchors[self.cursor]


def start_placement(
    item_id: str,
    anchors: AnchorSet | Sequence[str],
    order: WalkOrder = WalkOrder.FROM_MOST_MAJOR,
) -> PlacementSession:
    ids = tuple(anchors.anchors if isinstance(anchors, AnchorSet) else anchors)
    if not ids:
        raise ParameterError("anchor set is empty")
    return PlacementSession(
        item_id=item_id,
        anchors=ids,
        order=WalkOrder(order),
        self_comparison=item_id in ids,
    )


def step_placement(session: PlacementSession, judgment: Judgment) -> PlacementSession:
    """Apply one judgment; mutates and returns the session."""
    if not session.active:
        raise StateError("cannot step a placed session")
    judgment = Judgment(judgment)
    session.judgments.append(judgment)
    k = len(session.anchors)
    if session.order is WalkOrder.FROM_MOST_MAJOR:
        if judgment is Judgment.ITEM_MORE_MINOR:
            session.cursor += 1
            if session.cursor == k:          # fell off the minor end
                _finish(session, 0)
        else:                                # item beats this anchor and all below
            _finish(session, k - session.cursor)
    else:
        if judgment is Judgment.ITEM_LESS_MINOR:
            session.cursor += 1
            if session.cursor == k:          # beats every anchor
                _finish(session, k)
        else:
            _finish(session, session.cursor)
    return session


def _finish(session: PlacementSession, slot: int) -> None:
    session.state = "placed"
    session.placement_slot = slot


def rating_from_placement(slot: int, n_anchors: int = 10) -> int:
    if not isinstance(slot, int) or slot < 0 or slot > n_anchors:
        raise ParameterError(f"placement slot {slot!r} outside 0..{n_anchors}")
    return max(RATING_MIN, min(RATING_MAX, slot))


def replay_walk(
    anchors: AnchorSet | Sequence[str],
    judgments: Iterable[Judgment | str],
    order: WalkOrder = WalkOrder.FROM_MOST_MAJOR,
) -> tuple[int, int]:
    """Run a submitted walk through the state machine; returns (slot, rating).

    Raises ValidationError if the walk has judgments after the terminal step
    or stops before reaching one.
    """
    session = start_placement("replayed", anchors, order)
    for j in judgments:
        if not session.active:
            raise ValidationError("walk continues past its terminal judgment")
        try:
            step_placement(session, Judgment(j))
        except ValueError as exc:
            raise ValidationError(f"unknown judgment {j!r}") from exc
    if session.active:
        raise ValidationError("walk ended before the item was placed")
    slot = session.placement_slot
    return slot, rating_from_placement(slot, len(session.anchors))


def place_by_bisection(
    beats_anchor: Callable[[str], bool],
    anchors: AnchorSet | Sequence[str],
) -> int:
    """Binary-search variant of the walk; same slot as the linear protocol
    for any judge whose answers are consistent with a total order."""
    ids = tuple(anchors.anchors if isinstance(anchors, AnchorSet) else anchors)
    if not ids:
        raise ParameterError("anchor set is empty")
    lo, hi = 0, len(ids)
    while lo < hi:
        mid = (lo + hi) // 2
        if beats_anchor(ids[mid]):
            lo = mid + 1
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class RatingRecord:
    rater_id: str
    item_id: str
    rating: int
    placement_slot: int
    walk: tuple[Judgment, ...]
    timestamp: float

    def __post_init__(self):
        if not (RATING_MIN <= self.rating <= RATING_MAX):
            raise ValidationError(f"rating {self.rating} outside 1..10")
        if self.rating != max(RATING_MIN, min(RATING_MAX, self.placement_slot)):
            raise ValidationError("rating does not match clamp(slot, 1, 10)")

    def to_json(self) -> str:
        return json.dumps(
            {
                "rater": self.rater_id,
                "item": self.item_id,
                "rating": self.rating,
                "slot": self.placement_slot,
                "walk": [j.value for j in self.walk],
                "ts": self.timestamp,
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class ItemRatingSummary:
    item_id: str
    mean_rating: float
    n_ratings: int
    std: float


def aggregate_ratings(records: Iterable[RatingRecord]) -> list[ItemRatingSummary]:
    """Per-item mean and sample std, items sorted by id; n=1 gives std 0."""
    by_item: dict[str, list[int]] = {}
    for rec in records:
        by_item.setdefault(rec.item_id, []).append(rec.rating)
    out = []
    for item_id in sorted(by_item):
        vals = by_item[item_id]
        n = len(vals)
        mean = sum(vals) / n
        std = math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
        out.append(ItemRatingSummary(item_id, mean, n, std))
    return out


def read_ratings_jsonl(path: str | Path) -> list[RatingRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(
                RatingRecord(
                    rater_id=str(obj["rater"]),
                    item_id=str(obj["item"]),
                    rating=int(obj["rating"]),
                    placement_slot=int(obj["slot"]),
                    walk=tuple(Judgment(j) for j in obj["walk"]),
                    timestamp=float(obj["ts"]),
                )
            )
    return records


def write_ratings_jsonl(records: Iterable[RatingRecord], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
            n += 1
    return n


def summaries_to_csv(summaries: Iterable[ItemRatingSummary], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("item_id,mean,std,n\n")
        for s in summaries:
            fh.write(f"{s.item_id},{s.mean_rating:.12g},{s.std:.12g},{s.n_ratings}\n")


def summaries_from_csv(path: str | Path) -> list[ItemRatingSummary]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        for line in fh:
            if not line.strip():
                continue
            item_id, mean, std, n = line.rstrip("\n").split(",")
            out.append(ItemRatingSummary(item_id, float(mean), int(n), float(std)))
    return out
