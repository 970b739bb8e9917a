"""Pairwise comparison records and their JSON-lines ingestion.

Wire format: one JSON object per line with fields exactly
``{rater, left, right, choice, ts}`` where choice is one of
``left_more_major`` / ``right_more_major`` / ``equal``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ValidationError


class Choice(str, Enum):
    LEFT = "left_more_major"
    RIGHT = "right_more_major"
    EQUAL = "equal"


@dataclass(frozen=True)
class ComparisonRecord:
    """One rater's judgment of a single pair."""

    rater_id: str
    left_id: str
    right_id: str
    choice: Choice
    timestamp: float

    def __post_init__(self):
        if not self.left_id or not self.right_id:
            raise ValidationError("comparison references an empty item id")
        if self.left_id == self.right_id:
            raise ValidationError(f"self-comparison of item {self.left_id!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "rater": self.rater_id,
                "left": self.left_id,
                "right": self.right_id,
                "choice": self.choice.value,
                "ts": self.timestamp,
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class ComparisonSet:
    """Deduplicated comparison records plus the item universe they span."""

    records: tuple[ComparisonRecord, ...]
    items: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        referenced = {r.left_id for r in self.records} | {r.right_id for r in self.records}
        if not referenced <= self.items:
            object.__setattr__(self, "items", frozenset(self.items) | referenced)

    def __len__(self) -> int:
        return len(self.records)

    def connected_components(self) -> list[set[str]]:
        """Connected components of the comparison graph (isolated items included)."""
        adj: dict[str, set[str]] = {i: set() for i in self.items}
        for r in self.records:
            adj[r.left_id].add(r.right_id)
            adj[r.right_id].add(r.left_id)
        seen: set[str] = set()
        comps = []
        for start in sorted(adj):
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                node = stack.pop()
                for nxt in adj[node]:
                    if nxt not in comp:
                        comp.add(nxt)
                        stack.append(nxt)
            seen |= comp
            comps.append(comp)
        return comps


@dataclass(frozen=True)
class IngestResult:
    comparisons: ComparisonSet
    n_malformed: int


def _coerce_id(value) -> str | None:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        return None
    return str(value)


def ingest_comparisons(events: Iterable) -> IngestResult:
    """Build a ComparisonSet from parsed events (dicts or JSON strings).

    Exact duplicates (same rater, pair, choice and timestamp) collapse to one
    record. Events that do not match the schema are skipped and counted; an
    otherwise well-formed event with an empty item id raises ValidationError.
    """
    seen: set[tuple] = set()
    records: list[ComparisonRecord] = []
    malformed = 0
    for event in events:
        if isinstance(event, (str, bytes)):
            if isinstance(event, bytes):
                event = event.decode("utf-8", errors="replace")
            if not event.strip():
                continue
            try:
                event = json.loads(event)
            except json.JSONDecodeError:
                malformed += 1
                continue
        if not isinstance(event, dict):
            malformed += 1
            continue
        rater = _coerce_id(event.get("rater"))
        left = _coerce_id(event.get("left"))
        right = _coerce_id(event.get("right"))
        ts = event.get("ts")
        try:
            choice = Choice(event.get("choice"))
        except ValueError:
            malformed += 1
            continue
        if rater is None or left is None or right is None:
            malformed += 1
            continue
        if left == "" or right == "":
            raise ValidationError("comparison references an empty item id")
        if not rater or not isinstance(ts, (int, float)) or isinstance(ts, bool):
            malformed += 1
            continue
        if left == right:
            malformed += 1
            continue
        key = (rater, left, right, choice, float(ts))
        if key in seen:
            continue
        seen.add(key)
        records.append(ComparisonRecord(rater, left, right, choice, float(ts)))
    return IngestResult(ComparisonSet(tuple(records)), malformed)


def iter_jsonl(path: str | Path) -> Iterator[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            yield from fh
    except OSError as exc:
        raise IOError(f"cannot read comparisons from {path}: {exc}") from exc


def read_comparisons_jsonl(path: str | Path) -> IngestResult:
    return ingest_comparisons(iter_jsonl(path))


def write_comparisons_jsonl(records: Iterable[ComparisonRecord], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
            n += 1
    return n
