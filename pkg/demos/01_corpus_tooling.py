"""Manifests end to end: build, inspect, length-filter, and mix corpora.

Everything here also exists as CLI subcommands; the last section prints the
equivalent invocations.
"""

from pathlib import Path

from stutterkit.corpus import (
    filter_by_max_length,
    load_manifest,
    mix_corpora,
    save_manifest,
    split_stats,
    unify_labels,
)
from stutterkit.synthetic import make_duration_profile_manifest, make_separable_corpus

out_dir = Path(__file__).parent / "demo_out" / "corpus"
out_dir.mkdir(parents=True, exist_ok=True)

# Render a small synthetic corpus to disk. Each clip is a tone mixture whose
# components encode its labels, so later demos can actually learn from it.
corpus = make_separable_corpus(n_clips=12, seed=0, duration_range=(1.0, 2.5))
manifest_path = corpus.write_manifest(out_dir)
print(f"wrote {manifest_path}")

records = load_manifest(manifest_path)
print(split_stats(records).to_text())
print()

# Multiple annotators per clip get reduced to one binary vector per class.
# Three annotators, two say "block", one says "prolongation":
raw_counts = [2, 0, 1, 0, 0]
for rule in ("majority", "any", "unanimous"):
    print(f"unify_labels({raw_counts}, 3, {rule!r}) ->",
          unify_labels(raw_counts, 3, rule).as_bools())
print()

# Long recordings dominate wall-clock cost during fine-tuning. Dropping
# everything over a length threshold keeps most clips but sheds far more
# duration, because duration concentrates in the tail. The profile manifest
# below reproduces that shape with 2000 synthetic durations.
profile = make_duration_profile_manifest()
for threshold in (3.0, 5.0, 7.0, 10.0):
    kept, stats = filter_by_max_length(profile, threshold)
    print(f"max {threshold:4.1f} s: keep {stats.clips_kept_fraction:6.1%} of clips, "
          f"{stats.duration_kept_fraction:6.1%} of duration")
print()

# Mixing corpora prefixes clip ids with their corpus id so nothing collides,
# then shuffles deterministically.
other = make_separable_corpus(n_clips=6, seed=1, duration_range=(1.0, 2.0),
                              corpus_id="extra")
other_manifest = other.write_manifest(out_dir / "extra")
mixed = mix_corpora([records, load_manifest(other_manifest)], seed=4)
mixed_path = out_dir / "mixed.csv"
save_manifest(mixed, mixed_path)
print(f"mixed {len(mixed)} clips -> {mixed_path}")
print("first ids:", [r.clip_id for r in mixed[:4]])
print()

print("CLI equivalents:")
print(f"  stutterkit manifest validate --in {manifest_path}")
print(f"  stutterkit stats --in {manifest_path}")
print(f"  stutterkit filter --in {manifest_path} --out kept.csv --max-clip-len 7")
print(f"  stutterkit mix --in {manifest_path} --in {other_manifest} --out mixed.csv")
print(f"  stutterkit plot --kind length-dist --in {manifest_path} --out lengths.png")
