"""How clips of any length become fixed 3 s windows, and back into one score.

The model only ever sees 3.0 s inputs. Shorter clips are zero-padded, longer
ones are cut into 1.5 s-overlapped windows plus a right-aligned tail, and the
per-window probabilities are folded with an element-wise max: one firing
window is enough to flag the clip.
"""

import numpy as np

from stutterkit.audio import WaveformBuffer
from stutterkit.corpus import CLASS_NAMES
from stutterkit.model import TINY_TEST_SPEC, DysfluencyModel
from stutterkit.segmentation import aggregate_predictions, extract_window, plan_windows

for duration in (2.0, 3.0, 4.12, 4.5, 7.3):
    windows = plan_windows(duration, 3.0, 1.5, clip_id="demo")
    marks = ["pad" if w.padded else f"{w.offset_s:.2f}s" for w in windows]
    print(f"{duration:5.2f} s clip -> {len(windows)} window(s): {marks}")
print()

# Extraction really does hand the model 48000 samples every time.
rng = np.random.default_rng(0)
clip = WaveformBuffer(rng.uniform(-0.3, 0.3, int(7.3 * 16000)))
windows = plan_windows(clip.duration_s, 3.0, 1.5, clip_id="noise")
pieces = [extract_window(clip, w) for w in windows]
print("extracted sample counts:", [p.samples.size for p in pieces])
print()

# Run a (untrained) model over the windows and aggregate. The per-class
# probabilities sit near 0.5 because the heads start at tiny random weights.
model = DysfluencyModel(TINY_TEST_SPEC, seed=0)
per_window = np.vstack([model.predict(p)[0] for p in pieces])
clip_probs = aggregate_predictions(per_window)
print("per-window probabilities:")
for w, row in zip(windows, per_window):
    cells = "  ".join(f"{name}={p:.3f}" for name, p in zip(CLASS_NAMES, row))
    print(f"  offset {w.offset_s:4.2f} s: {cells}")
print("clip-level (max over windows):")
print("  " + "  ".join(f"{name}={p:.3f}" for name, p in zip(CLASS_NAMES, clip_probs)))
print()

# The same plumbing is what `stutterkit infer --audio clip.wav --weights m.npz`
# runs; `evaluate_corpus` applies it to every clip in a manifest.
