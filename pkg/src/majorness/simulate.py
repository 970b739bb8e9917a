"""Synthetic corpora and simulated annotators.

Items are chord-progression excerpts: sine triads over a fixed root cycle,
each triad drawn major with probability equal to the item's latent majorness.
Raters follow a Thurstonian model: every listen yields the latent value plus
a rater bias and Gaussian noise, and judgments compare those percepts. The
placement simulation drives the real anchored-scale state machine, so the
records it emits went through the same code path as live annotations.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import CANONICAL_RATE, AudioBuffer
from .comparisons import Choice, ComparisonRecord
from .errors import ParameterError
from .placement import (
    Judgment,
    RatingRecord,
    WalkOrder,
    rating_from_placement,
    start_placement,
    step_placement,
)
from .ranking import AnchorSet

# I-IV-V-I roots around middle C: with every chord major the clip is diatonic
# C major, with every chord minor it is diatonic C natural minor, so the
# latent smoothly trades major-key for minor-key content.
PROGRESSION_ROOTS = (60, 53, 55, 60)
CHORD_SECONDS = 1.25
MAJOR_TRIAD = (0, 4, 7)
MINOR_TRIAD = (0, 3, 7)
NOTE_AMP = 0.22
RAMP_SECONDS = 0.01


@dataclass(frozen=True)
class SyntheticItem:
    item_id: str
    latent_majorness: float
    audio: AudioBuffer


@dataclass(frozen=True)
class ItemLatent:
    """Audio-free stand-in accepted by the sim_* functions (they only read
    item_id and latent_majorness); keeps big corpora out of memory."""

    item_id: str
    latent_majorness: float


@dataclass(frozen=True)
class RaterModel:
    rater_id: str
    noise_sigma: float = 0.0
    bias: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be >= 0")

    def perceive(self, latent: float, rng: np.random.Generator) -> float:
        noise = rng.normal(0.0, self.noise_sigma) if self.noise_sigma > 0 else 0.0
        return latent + self.bias + noise


def make_raters(n: int, noise_sigma: float = 0.0, bias_sigma: float = 0.0, seed: int = 0) -> list[RaterModel]:
    rng = np.random.default_rng(seed)
    biases = rng.normal(0.0, bias_sigma, size=n) if bias_sigma > 0 else np.zeros(n)
    return [RaterModel(f"rater_{i:03d}", noise_sigma, float(biases[i])) for i in range(n)]


def _midi_to_hz(note: int) -> float:
    return 440.0 * 2.0 ** ((note - 69) / 12.0)


def synth_progression(
    latent: float,
    rng: np.random.Generator,
    clip_seconds: float,
    sample_rate: int = CANONICAL_RATE,
    transpose: int = 0,
) -> np.ndarray:
    """Sine-triad progression; each chord is major with probability latent.
    transpose shifts every root by that many semitones."""
    n_total = int(round(clip_seconds * sample_rate))
    chord_len = int(round(CHORD_SECONDS * sample_rate))
    out = np.zeros(n_total, dtype=np.float64)
    t = np.arange(chord_len) / sample_rate
    ramp = min(int(RAMP_SECONDS * sample_rate), chord_len // 2)
    env = np.ones(chord_len)
    if ramp > 0:
        fade = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, ramp))
        env[:ramp] = fade
        env[-ramp:] = fade[::-1]
    pos = 0
    for chord_idx in itertools.count():
        if pos >= n_total:
            break
        root = PROGRESSION_ROOTS[chord_idx % len(PROGRESSION_ROOTS)] + transpose
        intervals = MAJOR_TRIAD if rng.random() < latent else MINOR_TRIAD
        chord = np.zeros(chord_len)
        for iv in intervals:
            chord += NOTE_AMP * np.sin(2 * np.pi * _midi_to_hz(root + iv) * t)
        chord *= env
        n = min(chord_len, n_total - pos)
        out[pos : pos + n] = chord[:n]
        pos += n
    return out


def gen_corpus(n: int, seed: int = 0, clip_seconds: float = 15.0) -> list[SyntheticItem]:
    """n items with uniform latent majorness and deterministic audio."""
    if n < 1:
        raise ParameterError("corpus size must be >= 1")
    master = np.random.default_rng(seed)
    latents = master.uniform(0.0, 1.0, size=n)
    items = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        samples = synth_progression(float(latents[i]), rng, clip_seconds)
        items.append(
            SyntheticItem(
                item_id=f"item_{i:04d}",
                latent_majorness=float(latents[i]),
                audio=AudioBuffer(samples, CANONICAL_RATE),
            )
        )
    return items


def all_pairs(item_ids: list[str]) -> list[tuple[str, str]]:
    return list(itertools.combinations(sorted(item_ids), 2))


def sim_pairwise(
    items: list[SyntheticItem],
    raters: list[RaterModel],
    pairs: list[tuple[str, str]],
    seed: int = 0,
    raters_per_pair: int | None = None,
) -> list[ComparisonRecord]:
    """Comparison records from noisy perception of the latent values.

    With raters_per_pair set, each pair is judged by that many raters chosen
    by deterministic rotation through the pool; otherwise every rater judges
    every pair.
    """
    latent = {it.item_id: it.latent_majorness for it in items}
    for a, b in pairs:
        if a not in latent or b not in latent:
            raise ParameterError(f"pair ({a}, {b}) references unknown items")
    rng = np.random.default_rng(seed)
    records = []
    ts = 0.0
    for pair_idx, (a, b) in enumerate(pairs):
        if raters_per_pair is None:
            chosen = raters
        else:
            chosen = [raters[(pair_idx + j) % len(raters)] for j in range(raters_per_pair)]
        for rater in chosen:
            pa = rater.perceive(latent[a], rng)
            pb = rater.perceive(latent[b], rng)
            if pa > pb:
                choice = Choice.LEFT
            elif pb > pa:
                choice = Choice.RIGHT
            else:
                choice = Choice.EQUAL
            ts += 1.0
            records.append(ComparisonRecord(rater.rater_id, a, b, choice, ts))
    return records


def sim_placements(
    items: list[SyntheticItem],
    anchors: AnchorSet,
    raters: list[RaterModel],
    ratings_per_item: int = 5,
    seed: int = 0,
) -> list[RatingRecord]:
    """Walk each item through the real placement protocol with noisy percepts.

    Raters rotate deterministically over items. The item percept is drawn
    once per walk; each anchor listen gets fresh noise (and no rater bias,
    since anchors are the shared scale)."""
    latent = {it.item_id: it.latent_majorness for it in items}
    for a in anchors.anchors:
        if a not in latent:
            raise ParameterError(f"anchor {a} has no known latent value")
    rng = np.random.default_rng(seed)
    records = []
    ts = 0.0
    for item_idx, item in enumerate(items):
        for j in range(ratings_per_item):
            rater = raters[(item_idx + j) % len(raters)]
            v_item = rater.perceive(item.latent_majorness, rng)
            session = start_placement(item.item_id, anchors, WalkOrder.FROM_MOST_MAJOR)
            while session.active:
                anchor_latent = latent[session.current_anchor()]
                noise = rng.normal(0.0, rater.noise_sigma) if rater.noise_sigma > 0 else 0.0
                v_anchor = anchor_latent + noise
                judgment = (
                    Judgment.ITEM_LESS_MINOR if v_item > v_anchor else Judgment.ITEM_MORE_MINOR
                )
                step_placement(session, judgment)
            slot = session.placement_slot
            ts += 1.0
            records.append(
                RatingRecord(
                    rater_id=rater.rater_id,
                    item_id=item.item_id,
                    rating=rating_from_placement(slot, len(anchors)),
                    placement_slot=slot,
                    walk=tuple(session.judgments),
                    timestamp=ts,
                )
            )
    return records


def write_items_jsonl(items: list[SyntheticItem], path: str | Path) -> None:
    """Ground-truth latents, used by evaluation when present."""
    with open(path, "w", encoding="utf-8") as fh:
        for it in items:
            fh.write(
                json.dumps({"item": it.item_id, "latent": it.latent_majorness}, sort_keys=True)
                + "\n"
            )


def read_items_jsonl(path: str | Path) -> dict[str, float]:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out[str(obj["item"])] = float(obj["latent"])
    return out
