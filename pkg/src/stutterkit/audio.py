"""Mono waveform container and 16 kHz wav file I/O.

The whole pipeline runs at one canonical sample rate.  Files at any other
rate, or with more than one channel, are rejected rather than resampled;
rate conversion belongs to upstream corpus preparation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

CANONICAL_RATE_HZ = 16000


def seconds_to_samples(seconds: float, rate_hz: int = CANONICAL_RATE_HZ) -> int:
    """Convert a non-negative duration or offset to a sample count.

    Rounds half away from zero, fixed pipeline-wide so clip extraction and
    window extraction agree on boundaries.
    """
    if seconds < 0:
        raise ValueError(f"seconds must be >= 0, got {seconds}")
    return int(math.floor(seconds * rate_hz + 0.5))


def samples_to_seconds(n_samples: int, rate_hz: int = CANONICAL_RATE_HZ) -> float:
    return n_samples / rate_hz


@dataclass
class WaveformBuffer:
    """Mono audio samples with their sample rate.

    Samples are float64 amplitudes in [-1, 1].
    """

    samples: np.ndarray
    sample_rate_hz: int = CANONICAL_RATE_HZ

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"samples must be mono (1-D), got shape {self.samples.shape}")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.samples.size and np.max(np.abs(self.samples)) > 1.0:
            raise ValueError("amplitudes must lie in [-1, 1]")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def slice_samples(self, start: int, length: int) -> "WaveformBuffer":
        if start < 0 or length < 0 or start + length > self.samples.size:
            raise ValueError(
                f"slice [{start}, {start + length}) outside buffer of {self.samples.size} samples"
            )
        return WaveformBuffer(self.samples[start:start + length].copy(), self.sample_rate_hz)


def load_wav(path: str | Path, expected_rate_hz: int = CANONICAL_RATE_HZ) -> WaveformBuffer:
    """Read a mono wav file at the canonical rate into a WaveformBuffer.

    Integer PCM is scaled to [-1, 1].  A rate or channel-count mismatch is
    an error, not a conversion.
    """
    path = Path(path)
    rate, data = wavfile.read(path)
    if rate != expected_rate_hz:
        raise ValueError(
            f"{path}: sample rate {rate} Hz, pipeline requires {expected_rate_hz} Hz"
        )
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise ValueError(f"{path}: unsupported wav dtype {data.dtype}")
    return WaveformBuffer(samples, rate)


def save_wav(wave: WaveformBuffer, path: str | Path) -> None:
    """Write a buffer as 16-bit PCM."""
    pcm = np.clip(np.round(wave.samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), wave.sample_rate_hz, pcm)


def load_clip(
    audio_path: str | Path,
    offset_s: float,
    duration_s: float,
    expected_rate_hz: int = CANONICAL_RATE_HZ,
) -> WaveformBuffer:
    """Extract one manifest clip from its source file."""
    wave = load_wav(audio_path, expected_rate_hz)
    start = seconds_to_samples(offset_s, wave.sample_rate_hz)
    length = seconds_to_samples(duration_s, wave.sample_rate_hz)
    if start + length > wave.samples.size:
        raise ValueError(
            f"{audio_path}: clip [{offset_s}, {offset_s + duration_s}) s extends past "
            f"end of file ({wave.duration_s:.3f} s)"
        )
    return wave.slice_samples(start, length)
