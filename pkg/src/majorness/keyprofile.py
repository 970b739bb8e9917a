"""Key-profile baseline: correlate chroma against rotated major/minor
templates and squash the margin into a 0..1 majorness score."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, UndefinedInputError
from .features import ChromaVector

# Krumhansl & Kessler (1982) probe-tone ratings, C major / C minor.
KRUMHANSL_MAJOR = (6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88)
KRUMHANSL_MINOR = (6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17)

DEFAULT_GAIN = 5.0


@dataclass
class KeyProfileModel:
    major_profile: np.ndarray = field(default_factory=lambda: np.array(KRUMHANSL_MAJOR))
    minor_profile: np.ndarray = field(default_factory=lambda: np.array(KRUMHANSL_MINOR))
    gain: float = DEFAULT_GAIN

    def __post_init__(self):
        self.major_profile = np.asarray(self.major_profile, dtype=float)
        self.minor_profile = np.asarray(self.minor_profile, dtype=float)
        for name, prof in (("major", self.major_profile), ("minor", self.minor_profile)):
            if prof.shape != (12,) or np.any(prof <= 0):
                raise ParameterError(f"{name} profile must be 12 strictly positive values")


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    da, db = a - a.mean(), b - b.mean()
    na, nb = np.sqrt((da * da).sum()), np.sqrt((db * db).sum())
    if na == 0 or nb == 0:
        return 0.0
    return float((da * db).sum() / (na * nb))


def best_profile_correlation(energies: np.ndarray, profile: np.ndarray) -> float:
    """Max Pearson correlation over the 12 transpositions of the profile."""
    return max(_corr(energies, np.roll(profile, t)) for t in range(12))


def keyprofile_majorness(chroma_vec: ChromaVector, model: KeyProfileModel | None = None) -> float:
    """sigmoid(gain * (best major correlation - best minor correlation))."""
    if chroma_vec.is_silence:
        raise UndefinedInputError("majorness is undefined for silence-flagged chroma")
    model = model or KeyProfileModel()
    energies = np.asarray(chroma_vec.energies, dtype=float)
    r_major = best_profile_correlation(energies, model.major_profile)
    r_minor = best_profile_correlation(energies, model.minor_profile)
    return 1.0 / (1.0 + math.exp(-model.gain * (r_major - r_minor)))
