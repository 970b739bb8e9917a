"""WAV decoding, encoding and resampling.

Only RIFF/WAVE with PCM16 or float32 samples and 1-2 channels is accepted;
stereo is downmixed by averaging. Resampling is linear interpolation, which
is plenty for the synthetic corpora this package works at.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import UnsupportedFormatError

CANONICAL_RATE = 44100


@dataclass
class AudioBuffer:
    samples: np.ndarray  # mono, float, amplitude in [-1, 1]
    sample_rate: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise UnsupportedFormatError(f"invalid sample rate {self.sample_rate}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise UnsupportedFormatError("audio contains non-finite samples")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def first_seconds(self, seconds: float) -> "AudioBuffer":
        n = min(len(self.samples), int(round(seconds * self.sample_rate)))
        return AudioBuffer(self.samples[:n].copy(), self.sample_rate, dict(self.meta))


def decode_wav(data: bytes) -> AudioBuffer:
    """Decode WAV bytes to a mono buffer; reports channels/codec in .meta."""
    try:
        rate, raw = wavfile.read(io.BytesIO(data))
    except Exception as exc:
        raise UnsupportedFormatError(f"not a decodable WAV stream: {exc}") from exc
    if raw.dtype == np.int16:
        samples = raw.astype(np.float64) / 32768.0
        codec = "pcm16"
    elif raw.dtype == np.float32:
        samples = raw.astype(np.float64)
        codec = "float32"
    else:
        raise UnsupportedFormatError(f"unsupported WAV sample format {raw.dtype}")
    if samples.ndim == 1:
        channels = 1
    elif samples.ndim == 2 and samples.shape[1] in (1, 2):
        channels = samples.shape[1]
        samples = samples.mean(axis=1)
    else:
        raise UnsupportedFormatError(f"unsupported channel layout {raw.shape}")
    return AudioBuffer(
        samples, int(rate), {"channels": channels, "codec": codec, "n_frames": len(samples)}
    )


def encode_wav(buffer: AudioBuffer) -> bytes:
    """Encode to PCM16 WAV bytes (values clipped to [-1, 1])."""
    clipped = np.clip(buffer.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype(np.int16)
    out = io.BytesIO()
    wavfile.write(out, buffer.sample_rate, pcm)
    return out.getvalue()


def read_wav(path: str | Path) -> AudioBuffer:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    return decode_wav(data)


def write_wav(path: str | Path, buffer: AudioBuffer) -> None:
    Path(path).write_bytes(encode_wav(buffer))


def resample_to_44100(buffer: AudioBuffer) -> AudioBuffer:
    if buffer.sample_rate == CANONICAL_RATE:
        return buffer
    n_in = len(buffer.samples)
    if n_in == 0:
        return AudioBuffer(np.empty(0), CANONICAL_RATE, dict(buffer.meta))
    n_out = int(round(n_in * CANONICAL_RATE / buffer.sample_rate))
    t_in = np.arange(n_in) / buffer.sample_rate
    t_out = np.arange(n_out) / CANONICAL_RATE
    return AudioBuffer(np.interp(t_out, t_in, buffer.samples), CANONICAL_RATE, dict(buffer.meta))
