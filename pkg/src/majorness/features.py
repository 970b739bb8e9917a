"""Mel-spectrogram and pitch-class (chroma) extraction.

The front end is a power STFT with a Hann window of 2048 samples and half
overlap at 44.1 kHz, pooled through 299 triangular filters on the HTK mel
scale and floored natural log. With 299 filters over a 2048-point FFT many
triangles are narrower than one FFT bin, so each filter weight is the
triangle's *integrated area* over the bin, normalized to a unit sum. That
keeps every filter non-empty and makes a pure tone peak in the band whose
center is nearest the tone.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .audio import AudioBuffer
from .errors import ParameterError, UnsupportedFormatError

PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
CHROMA_FMIN = 55.0    # A1
CHROMA_FMAX = 4186.0  # C8
MELS_MAGIC = b"MELS"


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 44100
    window: int = 2048
    hop: int = 1024
    n_mels: int = 299
    fmin: float = 0.0
    fmax: float | None = None  # defaults to Nyquist
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.hop * 2 != self.window:
            raise ParameterError("hop must be half the window (half overlap)")
        if self.n_mels < 1:
            raise ParameterError("n_mels must be >= 1")
        if self.effective_fmax <= self.fmin:
            raise ParameterError("fmin must be below fmax")

    @property
    def effective_fmax(self) -> float:
        return self.fmax if self.fmax is not None else self.sample_rate / 2.0

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.window:
            return 0
        return (n_samples - self.window) // self.hop + 1


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (frames, n_mels) natural-log magnitudes
    config: FeatureConfig
    item_id: str = ""

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@dataclass
class ChromaVector:
    energies: np.ndarray  # 12 pitch classes C..B, unit sum (all zero if silent)
    is_silence: bool = False

    def top_classes(self, k: int = 3) -> list[str]:
        order = np.argsort(self.energies)[::-1][:k]
        return [PITCH_CLASSES[i] for i in order]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def _triangle_cumulative(f: np.ndarray, lo: float, peak: float, hi: float) -> np.ndarray:
    """Integral of the unit-peak triangle (lo, peak, hi) from lo up to f."""
    f = np.clip(f, lo, hi)
    left_area = 0.5 * (peak - lo)
    rising = 0.5 * (f - lo) ** 2 / max(peak - lo, 1e-12)
    falling = left_area + 0.5 * (hi - peak) * (
        1.0 - ((hi - f) / max(hi - peak, 1e-12)) ** 2
    )
    return np.where(f <= peak, rising, falling)


@lru_cache(maxsize=8)
def _mel_filterbank_cached(config: FeatureConfig) -> tuple[np.ndarray, np.ndarray]:
    n_bins = config.window // 2 + 1
    df = config.sample_rate / config.window
    bin_edges = (np.arange(n_bins + 1) - 0.5) * df
    mel_points = np.linspace(
        hz_to_mel(config.fmin), hz_to_mel(config.effective_fmax), config.n_mels + 2
    )
    hz_points = mel_to_hz(mel_points)
    weights = np.zeros((config.n_mels, n_bins))
    for k in range(config.n_mels):
        lo, peak, hi = hz_points[k], hz_points[k + 1], hz_points[k + 2]
        areas = np.diff(_triangle_cumulative(bin_edges, lo, peak, hi))
        total = areas.sum()
        if total > 0:
            weights[k] = areas / total
    centers = hz_points[1:-1]
    return weights, centers


def mel_filterbank(config: FeatureConfig) -> np.ndarray:
    """Filter weights, shape (n_mels, n_fft_bins)."""
    return _mel_filterbank_cached(config)[0]


def mel_center_frequencies(config: FeatureConfig) -> np.ndarray:
    return _mel_filterbank_cached(config)[1]


def stft_power(buffer: AudioBuffer, config: FeatureConfig) -> np.ndarray:
    """Squared-magnitude STFT, shape (frames, window//2 + 1). No padding."""
    if buffer.sample_rate != config.sample_rate:
        raise ParameterError(
            f"buffer rate {buffer.sample_rate} != config rate {config.sample_rate}; resample first"
        )
    n = config.frame_count(len(buffer.samples))
    if n == 0:
        raise ParameterError(
            f"audio too short: {len(buffer.samples)} samples, need at least {config.window}"
        )
    window = np.hanning(config.window)
    frames = np.lib.stride_tricks.sliding_window_view(buffer.samples, config.window)
    frames = frames[:: config.hop][:n]
    return np.abs(np.fft.rfft(frames * window, axis=1)) ** 2


def mel_spectrogram(
    buffer: AudioBuffer, config: FeatureConfig | None = None, item_id: str = ""
) -> MelSpectrogram:
    config = config or FeatureConfig()
    power = stft_power(buffer, config)
    mel = power @ mel_filterbank(config).T
    values = np.log(np.maximum(mel, config.log_floor))
    return MelSpectrogram(values, config, item_id)


def chroma(buffer: AudioBuffer, config: FeatureConfig | None = None) -> ChromaVector:
    """Pitch-class energy profile from spectral peaks.

    Per frame, local maxima of the power spectrum in 55..4186 Hz are refined
    by parabolic interpolation on the log spectrum (below roughly 360 Hz a
    semitone is narrower than one FFT bin, so raw bin frequencies would land
    notes on the wrong class). Each peak's frequency maps to
    round(12*log2(f/440)) + 9 mod 12 and its power accumulates there; the
    result is normalized to unit sum, or zero-flagged for silence.
    """
    config = config or FeatureConfig()
    power = stft_power(buffer, config)
    df = config.sample_rate / config.window
    lo = max(1, int(np.ceil(CHROMA_FMIN / df)))
    hi = min(power.shape[1] - 2, int(np.floor(CHROMA_FMAX / df)))
    if hi <= lo:
        return ChromaVector(np.zeros(12), is_silence=True)
    body = power[:, lo : hi + 1]
    left = power[:, lo - 1 : hi]
    right = power[:, lo + 1 : hi + 2]
    peaks = (body >= left) & (body > right) & (body > 0.0)
    if not peaks.any():
        return ChromaVector(np.zeros(12), is_silence=True)
    frame_idx, rel_bin = np.nonzero(peaks)
    bins = rel_bin + lo
    log_p = np.log(np.maximum(power, 1e-300))
    alpha = log_p[frame_idx, bins - 1]
    beta = log_p[frame_idx, bins]
    gamma = log_p[frame_idx, bins + 1]
    denom = alpha - 2.0 * beta + gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(np.abs(denom) > 1e-12, 0.5 * (alpha - gamma) / denom, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    peak_freqs = (bins + delta) * df
    classes = (np.round(12.0 * np.log2(peak_freqs / 440.0)).astype(int) + 9) % 12
    energies = np.bincount(classes, weights=power[frame_idx, bins], minlength=12)
    total = energies.sum()
    if total <= 0.0:
        return ChromaVector(np.zeros(12), is_silence=True)
    return ChromaVector(energies / total, is_silence=False)


def write_mels(mel: MelSpectrogram, path: str | Path) -> None:
    """Binary layout: magic "MELS", u32 frames, u32 n_mels, then row-major
    little-endian float32 values."""
    frames, n_mels = mel.values.shape
    with open(path, "wb") as fh:
        fh.write(MELS_MAGIC)
        fh.write(struct.pack("<II", frames, n_mels))
        fh.write(mel.values.astype("<f4").tobytes())


def read_mels(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MELS_MAGIC:
        raise UnsupportedFormatError(f"{path} is not a MELS file")
    frames, n_mels = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * frames * n_mels
    if len(data) != expected:
        raise UnsupportedFormatError(
            f"{path}: expected {expected} bytes for {frames}x{n_mels}, got {len(data)}"
        )
    values = np.frombuffer(data[12:], dtype="<f4").reshape(frames, n_mels)
    return values.astype(np.float64)
