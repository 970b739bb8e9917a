"""Task scheduling and append-only persistence for annotation studies.

All bookkeeping updates and log appends happen under one lock, so concurrent
raters see a linearizable assignment history: a (rater, unit) combination is
assigned at most once, units stop being offered once their coverage target is
met, and every completed task appends exactly one log line. The log is the
source of truth; live assignments are not persisted and are safely re-issued
after a restart.
"""
from __future__ import annotations

import itertools
import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .comparisons import Choice
from .errors import ParameterError, StateError, ValidationError
from .placement import replay_walk
from .ranking import AnchorSet

KINDS = ("pair", "placement")


@dataclass(frozen=True)
class StudyConfig:
    raters_per_pair: int = 5
    ratings_per_item: int = 5
    anchor_count: int = 10
    excerpt_seconds: float = 15.0
    data_dir: str = "study"
    task_expiry_seconds: float = 1800.0
    full_coverage_max_items: int = 200  # above this, sample a connected pair subset
    pair_subset_size: int = 2000
    seed: int = 0

    def __post_init__(self):
        counts = (self.raters_per_pair, self.ratings_per_item, self.anchor_count)
        if any(c < 1 for c in counts):
            raise ParameterError("all study counts must be >= 1")
        if self.excerpt_seconds <= 0:
            raise ParameterError("excerpt_seconds must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_file(cls, path: str | Path) -> "StudyConfig":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class TaskAssignment:
    task_id: str
    rater_id: str
    kind: str
    payload: dict
    issued_at: float

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "rater": self.rater_id,
            "kind": self.kind,
            "payload": self.payload,
            "issued_at": self.issued_at,
        }


def schedule_pairs(item_ids: list[str], config: StudyConfig) -> list[tuple[str, str]]:
    """All pairs for small studies; otherwise a random connected subset."""
    ids = sorted(item_ids)
    pairs = list(itertools.combinations(ids, 2))
    if len(ids) <= config.full_coverage_max_items or len(pairs) <= config.pair_subset_size:
        return pairs
    rng = np.random.default_rng(config.seed)
    order = list(ids)
    rng.shuffle(order)
    chosen = {tuple(sorted((order[i], order[i + 1]))) for i in range(len(order) - 1)}
    flat = [p for p in pairs if p not in chosen]
    rng.shuffle(flat)
    for p in flat:
        if len(chosen) >= config.pair_subset_size:
            break
        chosen.add(p)
    return sorted(chosen)


class StudyService:
    def __init__(
        self,
        config: StudyConfig,
        item_ids: list[str],
        anchors: AnchorSet | None = None,
        audio_dir: str | Path | None = None,
        log_path: str | Path | None = None,
        clock=time.time,
    ):
        if len(item_ids) < 2:
            raise ParameterError("a study needs at least 2 items")
        self.config = config
        self.items = sorted(item_ids)
        self.anchors = anchors
        self.audio_dir = Path(audio_dir) if audio_dir else None
        self.log_path = Path(log_path) if log_path else None
        self._clock = clock
        self._lock = threading.Lock()
        self._log_fh = None

        self._pairs = schedule_pairs(self.items, config)
        self._pair_done: dict[tuple, int] = {p: 0 for p in self._pairs}
        self._pair_ever: dict[tuple, set] = {p: set() for p in self._pairs}
        self._item_done: dict[str, int] = {i: 0 for i in self.items}
        self._item_ever: dict[str, set] = {i: set() for i in self.items}
        self._active: dict[str, TaskAssignment] = {}
        self._active_per_unit: dict = {}
        self._open_by_rater: dict[tuple, str] = {}
        self._acks: dict[str, dict] = {}
        self._log_lines = 0
        if self.log_path and self.log_path.exists():
            self._replay()

    # -- persistence ------------------------------------------------------

    def _replay(self) -> None:
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                self._log_lines += 1
                self._apply_record(rec, self._log_lines - 1)

    def _apply_record(self, rec: dict, line_no: int) -> None:
        task_id = rec["task_id"]
        if rec["kind"] == "pair":
            unit = (rec["left"], rec["right"])
            if unit in self._pair_done:
                self._pair_done[unit] += 1
                self._pair_ever[unit].add(rec["rater"])
            ack = {"task_id": task_id, "accepted": True, "line": line_no}
        else:
            item = rec["item"]
            if item in self._item_done:
                self._item_done[item] += 1
                self._item_ever[item].add(rec["rater"])
            ack = {"task_id": task_id, "accepted": True, "line": line_no, "rating": rec["rating"]}
        self._acks[task_id] = ack

    def _append(self, rec: dict) -> int:
        if self.log_path:
            if self._log_fh is None:
                self.log_path.parent.mkdir(parents=True, exist_ok=True)
                self._log_fh = open(self.log_path, "a", encoding="utf-8")
            self._log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
            self._log_fh.flush()
        line_no = self._log_lines
        self._log_lines += 1
        return line_no

    # -- scheduling -------------------------------------------------------

    def _purge_expired(self) -> None:
        now = self._clock()
        expired = [
            t for t in self._active.values()
            if now - t.issued_at > self.config.task_expiry_seconds
        ]
        for task in expired:
            self._drop_active(task)

    def _drop_active(self, task: TaskAssignment) -> None:
        self._active.pop(task.task_id, None)
        self._open_by_rater.pop((task.rater_id, task.kind), None)
        unit = self._unit_of(task)
        if self._active_per_unit.get(unit):
            self._active_per_unit[unit] -= 1

    @staticmethod
    def _unit_of(task: TaskAssignment) -> tuple | str:
        if task.kind == "pair":
            return (task.payload["left"], task.payload["right"])
        return task.payload["item"]

    def next_task(self, rater_id: str, kind: str) -> TaskAssignment | None:
        """Least-covered eligible unit not yet assigned to this rater, or None
        when the rater has exhausted the study. Re-asking without submitting
        returns the same assignment."""
        if kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}")
        if not rater_id:
            raise ValidationError("rater id must be non-empty")
        with self._lock:
            self._purge_expired()
            open_id = self._open_by_rater.get((rater_id, kind))
            if open_id:
                return self._active[open_id]
            if kind == "placement" and self.anchors is None:
                raise StateError("anchors are not configured; run rank and anchors first")
            unit = self._pick_unit(rater_id, kind)
            if unit is None:
                return None
            task = TaskAssignment(
                task_id=uuid.uuid4().hex,
                rater_id=rater_id,
                kind=kind,
                payload=self._payload_for(unit, kind),
                issued_at=self._clock(),
            )
            self._active[task.task_id] = task
            self._open_by_rater[(rater_id, kind)] = task.task_id
            self._active_per_unit[unit] = self._active_per_unit.get(unit, 0) + 1
            if kind == "pair":
                self._pair_ever[unit].add(rater_id)
            else:
                self._item_ever[unit].add(rater_id)
            return task

    def _pick_unit(self, rater_id: str, kind: str):
        if kind == "pair":
            done, ever, target = self._pair_done, self._pair_ever, self.config.raters_per_pair
        else:
            done, ever, target = self._item_done, self._item_ever, self.config.ratings_per_item
        best, best_load = None, None
        for unit in done:
            load = done[unit] + self._active_per_unit.get(unit, 0)
            if load >= target or rater_id in ever[unit]:
                continue
            if best is None or load < best_load:
                best, best_load = unit, load
        return best

    def _payload_for(self, unit, kind: str) -> dict:
        if kind == "pair":
            return {"left": unit[0], "right": unit[1]}
        return {"item": unit, "anchors": list(self.anchors.anchors)}

    # -- submissions ------------------------------------------------------

    def submit_annotation(self, task_id: str, payload: dict) -> dict:
        """Exactly-once append; resubmitting a task returns the original ack."""
        with self._lock:
            if task_id in self._acks:
                return self._acks[task_id]
            self._purge_expired()
            task = self._active.get(task_id)
            if task is None:
                raise ValidationError(f"unknown or expired task {task_id}")
            if task.kind == "pair":
                rec = self._pair_record(task, payload)
            else:
                rec = self._placement_record(task, payload)
            line_no = self._append(rec)
            self._apply_record(rec, line_no)
            self._drop_active(task)
            return self._acks[task_id]

    def _pair_record(self, task: TaskAssignment, payload: dict) -> dict:
        try:
            choice = Choice(payload["choice"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"pair submission needs a valid choice, got {payload!r}")
        return {
            "kind": "pair",
            "task_id": task.task_id,
            "rater": task.rater_id,
            "left": task.payload["left"],
            "right": task.payload["right"],
            "choice": choice.value,
            "ts": self._clock(),
        }

    def _placement_record(self, task: TaskAssignment, payload: dict) -> dict:
        walk = payload.get("walk")
        if not isinstance(walk, list) or not walk:
            raise ValidationError("placement submission needs a non-empty walk")
        slot, rating = replay_walk(self.anchors, walk)  # raises ValidationError
        return {
            "kind": "placement",
            "task_id": task.task_id,
            "rater": task.rater_id,
            "item": task.payload["item"],
            "walk": list(walk),
            "slot": slot,
            "rating": rating,
            "ts": self._clock(),
        }

    # -- reporting --------------------------------------------------------

    def status(self) -> dict:
        with self._lock:
            self._purge_expired()
            pair_counts = list(self._pair_done.values())
            return {
                "items": len(self.items),
                "pairs_total": len(self._pairs),
                "raters_per_pair": self.config.raters_per_pair,
                "pairs_complete": sum(
                    1 for c in pair_counts if c >= self.config.raters_per_pair
                ),
                "comparisons": sum(pair_counts),
                "ratings": sum(self._item_done.values()),
                "ratings_per_item": self.config.ratings_per_item,
                "items_fully_rated": sum(
                    1 for c in self._item_done.values() if c >= self.config.ratings_per_item
                ),
                "active_tasks": len(self._active),
            }

    def audio_path(self, item_id: str) -> Path | None:
        if self.audio_dir is None or item_id not in self._item_done:
            return None
        path = self.audio_dir / f"{item_id}.wav"
        return path if path.exists() else None

    def close(self) -> None:
        if self._log_fh:
            self._log_fh.close()
            self._log_fh = None


def export_standard_files(log_path: str | Path, comparisons_path: str | Path, ratings_path: str | Path) -> tuple[int, int]:
    """Split the study log into the plain comparison/rating wire files."""
    n_cmp = n_rat = 0
    with open(log_path, "r", encoding="utf-8") as fh, \
         open(comparisons_path, "w", encoding="utf-8") as cmp_fh, \
         open(ratings_path, "w", encoding="utf-8") as rat_fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["kind"] == "pair":
                cmp_fh.write(json.dumps(
                    {"rater": rec["rater"], "left": rec["left"], "right": rec["right"],
                     "choice": rec["choice"], "ts": rec["ts"]}, sort_keys=True) + "\n")
                n_cmp += 1
            else:
                rat_fh.write(json.dumps(
                    {"rater": rec["rater"], "item": rec["item"], "rating": rec["rating"],
                     "slot": rec["slot"], "walk": rec["walk"], "ts": rec["ts"]}, sort_keys=True) + "\n")
                n_rat += 1
    return n_cmp, n_rat
