"""Window planning, sample extraction, max-aggregation."""

from __future__ import annotations

import csv

import numpy as np
import pytest

from stutterkit.audio import WaveformBuffer
from stutterkit.segmentation import (
    OVERLAP_S,
    WINDOW_S,
    Window,
    aggregate_predictions,
    extract_window,
    plan_windows,
    save_window_plan,
)


# ---------------------------------------------------------------------------
# Planning, hand-worked cases
# ---------------------------------------------------------------------------

def test_plan_exact_window_is_single_unpadded():
    assert plan_windows(3.0) == [Window("", 0.0, 3.0, padded=False)]


def test_plan_short_clip_is_single_padded():
    assert plan_windows(2.0) == [Window("", 0.0, 3.0, padded=True)]
    assert plan_windows(0.4) == [Window("", 0.0, 3.0, padded=True)]


def test_plan_six_seconds():
    """Stride 1.5: offsets 0, 1.5, 3.0; the last ends exactly at 6.0."""
    offsets = [w.offset_s for w in plan_windows(6.0)]
    assert offsets == [0.0, 1.5, 3.0]
    assert not any(w.padded for w in plan_windows(6.0))


def test_plan_typical_clip_gets_right_aligned_tail():
    """A 4.12 s clip: one regular window, then a tail at 4.12 - 3.0."""
    windows = plan_windows(4.12)
    assert len(windows) == 2
    assert windows[0].offset_s == 0.0
    assert windows[1].offset_s == 4.12 - 3.0
    assert not windows[1].padded


def test_plan_no_tail_when_regular_grid_reaches_the_end():
    offsets = [w.offset_s for w in plan_windows(4.5)]
    assert offsets == [0.0, 1.5]
    assert offsets[-1] + WINDOW_S == 4.5


def test_plan_longer_clip():
    offsets = [w.offset_s for w in plan_windows(7.3)]
    assert offsets == [0.0, 1.5, 3.0, pytest.approx(4.3)]


def test_plan_carries_clip_id():
    for w in plan_windows(5.0, clip_id="c9"):
        assert w.parent_clip_id == "c9"


def test_plan_validation():
    with pytest.raises(ValueError):
        plan_windows(0.0)
    with pytest.raises(ValueError):
        plan_windows(5.0, window_s=3.0, overlap_s=3.0)
    with pytest.raises(ValueError):
        plan_windows(5.0, overlap_s=-0.5)


def test_plan_random_durations_cover_the_clip():
    """Seeded sweep: strictly increasing offsets, no gaps, full coverage."""
    rng = np.random.default_rng(7)
    for _ in range(100):
        d = float(rng.uniform(0.5, 20.0))
        windows = plan_windows(d)
        offsets = [w.offset_s for w in windows]
        assert all(b > a for a, b in zip(offsets, offsets[1:]))
        if d <= WINDOW_S:
            assert len(windows) == 1 and windows[0].padded == (d < WINDOW_S)
            continue
        assert not any(w.padded for w in windows)
        # interior windows sit on the regular stride grid
        stride = WINDOW_S - OVERLAP_S
        for k, off in enumerate(offsets[:-1]):
            assert off == k * stride
        # every sample of [0, d] falls inside some window
        assert offsets[0] == 0.0
        assert offsets[-1] + WINDOW_S >= d - 1e-9
        for a, b in zip(offsets, offsets[1:]):
            assert b <= a + WINDOW_S + 1e-9
        # windows never extend past the clip
        assert offsets[-1] + WINDOW_S <= d + 1e-9


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def make_ramp(duration_s: float) -> WaveformBuffer:
    n = int(round(duration_s * 16000))
    return WaveformBuffer(np.linspace(-0.8, 0.8, n))


def test_extract_regular_window_is_a_pure_slice():
    wave = make_ramp(6.0)
    w = Window("c", 1.5, 3.0, padded=False)
    got = extract_window(wave, w)
    assert np.array_equal(got.samples, wave.samples[24000:72000])


def test_extract_padded_window_zero_fills_the_tail():
    wave = make_ramp(2.0)
    got = extract_window(wave, Window("c", 0.0, 3.0, padded=True))
    assert got.samples.size == 48000
    assert np.array_equal(got.samples[:32000], wave.samples)
    assert np.all(got.samples[32000:] == 0.0)


def test_extract_tolerates_one_sample_rounding_shortfall():
    wave = WaveformBuffer(np.full(47999, 0.1))
    got = extract_window(wave, Window("c", 0.0, 3.0, padded=False))
    assert got.samples.size == 48000
    assert got.samples[-1] == 0.0


def test_extract_rejects_larger_overrun_of_unpadded_window():
    wave = WaveformBuffer(np.zeros(47000))
    with pytest.raises(ValueError, match="overruns"):
        extract_window(wave, Window("c", 0.0, 3.0, padded=False))


def test_extract_rejects_wrong_rate():
    wave = WaveformBuffer(np.zeros(8000), sample_rate_hz=8000)
    with pytest.raises(ValueError, match="Hz"):
        extract_window(wave, Window("c", 0.0, 3.0, padded=True))


def test_planned_windows_reassemble_every_sample():
    """Union of extracted windows covers the parent clip exactly."""
    wave = make_ramp(7.3)
    covered = np.zeros(wave.samples.size, dtype=bool)
    for w in plan_windows(wave.duration_s):
        start = int(round(w.offset_s * 16000))
        chunk = extract_window(wave, w)
        stop = min(start + chunk.samples.size, covered.size)
        assert np.array_equal(chunk.samples[:stop - start], wave.samples[start:stop])
        covered[start:stop] = True
    assert covered.all()


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def test_aggregate_hand_case():
    probs = [
        [0.1, 0.9, 0.3, 0.2, 0.5],
        [0.4, 0.1, 0.3, 0.6, 0.2],
    ]
    assert np.array_equal(aggregate_predictions(probs), [0.4, 0.9, 0.3, 0.6, 0.5])


def test_aggregate_single_window_is_identity():
    row = np.array([0.3, 0.1, 0.9, 0.0, 1.0])
    assert np.array_equal(aggregate_predictions([row]), row)


def test_aggregate_matches_scan_oracle_and_is_permutation_invariant():
    rng = np.random.default_rng(21)
    for _ in range(50):
        n = int(rng.integers(1, 12))
        mat = rng.uniform(0.0, 1.0, (n, 5))
        got = aggregate_predictions(mat)
        oracle = mat[0].copy()
        for row in mat[1:]:
            for j in range(5):
                if row[j] > oracle[j]:
                    oracle[j] = row[j]
        assert np.array_equal(got, oracle)
        shuffled = mat[rng.permutation(n)]
        assert np.array_equal(aggregate_predictions(shuffled), got)
        # idempotent, and never decreased by an extra window
        assert np.array_equal(aggregate_predictions([got]), got)
        extra = rng.uniform(0.0, 1.0, (1, 5))
        widened = aggregate_predictions(np.vstack([mat, extra]))
        assert np.all(widened >= got)


def test_aggregate_validation():
    with pytest.raises(ValueError):
        aggregate_predictions([])
    with pytest.raises(ValueError):
        aggregate_predictions([[0.1, 0.2, 0.3]])  # wrong class count
    with pytest.raises(ValueError):
        aggregate_predictions([[0.1, 0.2, 0.3, 0.4, 1.2]])


# ---------------------------------------------------------------------------
# Plan persistence
# ---------------------------------------------------------------------------

def test_save_window_plan_rows(tmp_path):
    windows = plan_windows(4.12, clip_id="clip7")
    path = tmp_path / "plan.csv"
    save_window_plan(windows, path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert rows[0] == {"clip_id": "clip7", "offset_s": "0.0",
                       "duration_s": "3.0", "padded": "0"}
    assert float(rows[1]["offset_s"]) == 4.12 - 3.0
