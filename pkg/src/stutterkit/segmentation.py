"""Overlapped fixed-length windowing of variable-length clips.

Long clips are split into 3 s windows with 1.5 s overlap for inference.
The final window is right-aligned against the clip end instead of being
zero-padded, so padding only ever appears when the whole clip is shorter
than one window.  Per-window class probabilities are reduced back to one
clip-level vector by an element-wise maximum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import CANONICAL_RATE_HZ, WaveformBuffer, seconds_to_samples
from .corpus import NUM_CLASSES

WINDOW_S = 3.0
OVERLAP_S = 1.5


@dataclass(frozen=True)
class Window:
    """One planned slice of a parent clip."""

    parent_clip_id: str
    offset_s: float
    duration_s: float
    padded: bool


def plan_windows(
    clip_duration_s: float,
    window_s: float = WINDOW_S,
    overlap_s: float = OVERLAP_S,
    clip_id: str = "",
) -> list[Window]:
    """Lay out windows covering [0, clip_duration_s).

    A clip no longer than one window yields a single window at offset 0,
    flagged padded when the clip is strictly shorter.  Longer clips get
    offsets 0, s, 2s, ... with stride s = window_s - overlap_s; when the
    last regular window does not end exactly at the clip end, one extra
    window is right-aligned there.  Offsets are strictly increasing.
    """
    if not clip_duration_s > 0:
        raise ValueError(f"clip duration must be > 0, got {clip_duration_s}")
    if not overlap_s >= 0:
        raise ValueError(f"overlap must be >= 0, got {overlap_s}")
    if not window_s > overlap_s:
        raise ValueError(f"window {window_s} s must exceed overlap {overlap_s} s")

    if clip_duration_s <= window_s:
        return [Window(clip_id, 0.0, window_s, padded=clip_duration_s < window_s)]

    stride = window_s - overlap_s
    offsets = []
    k = 0
    while k * stride + window_s <= clip_duration_s:
        offsets.append(k * stride)
        k += 1
    tail = clip_duration_s - window_s
    if offsets[-1] + window_s < clip_duration_s and tail > offsets[-1]:
        offsets.append(tail)
    return [Window(clip_id, off, window_s, padded=False) for off in offsets]


def extract_window(
    wave: WaveformBuffer,
    w: Window,
    expected_rate_hz: int = CANONICAL_RATE_HZ,
) -> WaveformBuffer:
    """Cut one window's samples out of its parent clip.

    Always returns exactly round(duration_s * rate) samples; any shortfall
    is filled with trailing zeros.  An unpadded window may fall short by at
    most one sample (boundary rounding); more than that is an error.
    """
    if wave.sample_rate_hz != expected_rate_hz:
        raise ValueError(
            f"buffer at {wave.sample_rate_hz} Hz, pipeline requires {expected_rate_hz} Hz"
        )
    rate = wave.sample_rate_hz
    start = seconds_to_samples(w.offset_s, rate)
    want = seconds_to_samples(w.duration_s, rate)
    chunk = wave.samples[start:start + want]
    shortfall = want - chunk.size
    if shortfall > 1 and not w.padded:
        raise ValueError(
            f"window at {w.offset_s} s overruns unpadded clip by {shortfall} samples"
        )
    if shortfall > 0:
        chunk = np.concatenate([chunk, np.zeros(shortfall, dtype=np.float64)])
    return WaveformBuffer(chunk.copy(), rate)


def aggregate_predictions(window_probs: Sequence[Sequence[float]]) -> np.ndarray:
    """Reduce per-window class probabilities to one clip-level vector.

    Element-wise maximum over windows: an event detected in any window is
    kept for the clip.
    """
    if len(window_probs) == 0:
        raise ValueError("need at least one window prediction")
    mat = np.asarray(window_probs, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != NUM_CLASSES:
        raise ValueError(
            f"expected shape (n_windows, {NUM_CLASSES}), got {np.shape(window_probs)}"
        )
    if np.any(mat < 0.0) or np.any(mat > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return mat.max(axis=0)


def save_window_plan(windows: Sequence[Window], path: str | Path) -> None:
    """Write a window plan as csv rows for audit."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "offset_s", "duration_s", "padded"])
        for w in windows:
            writer.writerow([
                w.parent_clip_id,
                repr(float(w.offset_s)),
                repr(float(w.duration_s)),
                "1" if w.padded else "0",
            ])
