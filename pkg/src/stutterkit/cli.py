"""Command-line pipeline driver.

Subcommands cover the whole workflow: ``manifest validate``, ``filter``,
``mix``, ``stats``, ``train``, ``eval``, ``infer``, ``ablate-length``,
``plot``, ``report``.

Options resolve in three layers: hard defaults, then the matching section
of an optional ``--config`` file (flat key-value, one section per
subcommand), then explicit flags, which always win.  Every command that
produces file artifacts writes the fully resolved options next to them as
``config.snapshot``; feeding that file back through ``--config`` reproduces
the run.  Exit codes: 0 success, 1 runtime failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import shutil
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless rendering; must precede pyplot import
import matplotlib.pyplot as plt
import numpy as np

from .audio import load_clip, load_wav
from .configio import read_config, write_config
from .corpus import (
    CLASS_NAMES, DEFAULT_LANGUAGES, ClipRecord, LabelVector, ManifestError,
    filter_by_max_length, load_manifest, mix_corpora, save_manifest, split_stats,
)
from .evaluation import (
    evaluate_corpus, format_f1_table, infer_clip, length_ablation, load_report_dict,
    report_from_dict, save_ablation_table, save_report,
)
from .loss import MTLLossConfig
from .model import DysfluencyModel, EncoderSpec, load_checkpoint
from .segmentation import OVERLAP_S, WINDOW_S, plan_windows, save_window_plan
from .training import TrainConfig, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


# ---------------------------------------------------------------------------
# Option resolution: defaults < config file section < explicit flags
# ---------------------------------------------------------------------------

def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in _str_list(text)]


def resolve_options(args: argparse.Namespace, section: str, schema: dict) -> dict:
    """Merge flag values over config-file values over schema defaults.

    ``schema`` maps option name -> (converter for file strings, default).
    Unknown keys in the config section are rejected to catch typos.
    """
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = read_config(args.config).get(section, {})
        unknown = set(file_values) - set(schema)
        if unknown:
            raise ValueError(
                f"unknown keys in config section [{section}]: {', '.join(sorted(unknown))}"
            )
    resolved = {}
    for key, (convert, default) in schema.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in file_values:
            resolved[key] = convert(file_values[key])
        else:
            resolved[key] = default
    return resolved


def _require(opts: dict, *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) in (None, [])]
    if missing:
        raise ValueError(
            "missing required option(s): " + ", ".join(f"--{k.replace('_', '-')}" for k in missing)
        )


def _snapshot(out_dir: Path, section: str, opts: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(out_dir / "config.snapshot", {section: opts})


# ---------------------------------------------------------------------------
# Shared schemas and helpers
# ---------------------------------------------------------------------------

_LANGUAGES_KEY = {"languages": (_str_list, list(DEFAULT_LANGUAGES))}

# Options shared by train and ablate-length.
_TRAIN_CORE_SCHEMA = {
    "train_manifest": (str, None),
    "dev_manifest": (str, None),
    "audio_root": (str, None),
    "lr": (float, 3e-5),
    "batch_size": (int, 8),
    "max_epochs": (int, 20),
    "patience": (int, 5),
    "weight_decay": (float, 0.01),
    "seed": (int, 0),
    "monitored_metric": (str, "dev_loss"),
    "grad_clip": (float, None),
    "freeze_encoder": (_parse_bool, False),
    "alpha": (float, 0.7),
    "gamma": (float, 3.0),
    "w_main": (float, 0.9),
    "scaling": (str, "batch_mean"),
    "encoder": (str, "reference-tiny"),
    "weights": (str, None),
    "hidden_size": (int, 64),
    "conv_channels": (_str_list, ["32", "48", "64", "64"]),
    "blocks": (int, 2),
    "heads": (int, 4),
    "mlp_ratio": (int, 2),
    **_LANGUAGES_KEY,
}


def _encoder_spec(opts: dict) -> EncoderSpec:
    backend_by_flag = {"reference-tiny": "reference_tiny", "external": "external_pretrained"}
    if opts["encoder"] not in backend_by_flag:
        raise ValueError(
            f"--encoder must be one of {tuple(backend_by_flag)}, got {opts['encoder']!r}"
        )
    return EncoderSpec(
        backend=backend_by_flag[opts["encoder"]],
        hidden_size=opts["hidden_size"],
        conv_channels=tuple(int(c) for c in opts["conv_channels"]),
        n_blocks=opts["blocks"],
        n_heads=opts["heads"],
        mlp_ratio=opts["mlp_ratio"],
        weights_source=opts["weights"],
    )


def _train_configs(opts: dict) -> tuple[TrainConfig, MTLLossConfig]:
    tcfg = TrainConfig(
        learning_rate=opts["lr"],
        batch_size=opts["batch_size"],
        max_epochs=opts["max_epochs"],
        patience=opts["patience"],
        weight_decay=opts["weight_decay"],
        seed=opts["seed"],
        monitored_metric=opts["monitored_metric"],
        grad_clip=opts["grad_clip"],
        freeze_encoder=opts["freeze_encoder"],
    )
    lcfg = MTLLossConfig(alpha=opts["alpha"], gamma=opts["gamma"],
                         w_main=opts["w_main"], scaling=opts["scaling"])
    return tcfg, lcfg


def _wave_provider(audio_root: str | None):
    if audio_root is None:
        return None  # module defaults apply
    root = Path(audio_root)

    def provider(record: ClipRecord):
        return load_clip(root / record.audio_path, record.offset_s, record.duration_s)

    return provider


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_manifest_validate(args: argparse.Namespace) -> int:
    schema = {"input": (str, None), **_LANGUAGES_KEY}
    opts = resolve_options(args, "manifest-validate", schema)
    _require(opts, "input")
    records = load_manifest(opts["input"], tuple(opts["languages"]))
    print(f"OK: {len(records)} clips in {opts['input']}")
    return EXIT_OK


def cmd_filter(args: argparse.Namespace) -> int:
    schema = {
        "input": (str, None),
        "output": (str, None),
        "max_clip_len": (float, None),
        **_LANGUAGES_KEY,
    }
    opts = resolve_options(args, "filter", schema)
    _require(opts, "input", "output", "max_clip_len")
    records = load_manifest(opts["input"], tuple(opts["languages"]))
    kept, stats = filter_by_max_length(records, opts["max_clip_len"])
    save_manifest(kept, opts["output"])
    _snapshot(Path(opts["output"]).parent, "filter", opts)
    print(f"kept {len(kept)}/{len(records)} clips "
          f"({stats.clips_kept_fraction:.1%}), "
          f"{stats.duration_kept_fraction:.1%} of total duration "
          f"(threshold {stats.threshold_s} s)")
    return EXIT_OK


def cmd_mix(args: argparse.Namespace) -> int:
    schema = {
        "inputs": (_str_list, None),
        "output": (str, None),
        "seed": (int, 0),
        **_LANGUAGES_KEY,
    }
    opts = resolve_options(args, "mix", schema)
    _require(opts, "inputs", "output")
    manifests = [load_manifest(p, tuple(opts["languages"])) for p in opts["inputs"]]
    mixed = mix_corpora(manifests, opts["seed"])
    save_manifest(mixed, opts["output"])
    _snapshot(Path(opts["output"]).parent, "mix", opts)
    print(f"mixed {len(manifests)} manifests into {len(mixed)} clips -> {opts['output']}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    schema = {
        "input": (str, None),
        "out_json": (str, None),
        "out_text": (str, None),
        **_LANGUAGES_KEY,
    }
    opts = resolve_options(args, "stats", schema)
    _require(opts, "input")
    records = load_manifest(opts["input"], tuple(opts["languages"]))
    stats = split_stats(records)
    print(stats.to_text())
    if opts["out_json"]:
        Path(opts["out_json"]).write_text(stats.to_json() + "\n", encoding="utf-8")
    if opts["out_text"]:
        Path(opts["out_text"]).write_text(stats.to_text() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    schema = {**_TRAIN_CORE_SCHEMA, "run_dir": (str, None)}
    opts = resolve_options(args, "train", schema)
    _require(opts, "train_manifest", "dev_manifest", "run_dir")
    languages = tuple(opts["languages"])
    train_set = load_manifest(opts["train_manifest"], languages)
    dev_set = load_manifest(opts["dev_manifest"], languages)
    spec = _encoder_spec(opts)
    tcfg, lcfg = _train_configs(opts)
    model = DysfluencyModel(spec, languages=languages, seed=tcfg.seed)
    print(f"training on {len(train_set)} clips, dev {len(dev_set)}, "
          f"{model.n_parameters()} parameters")
    provider = _wave_provider(opts["audio_root"])
    kwargs = {"wave_provider": provider} if provider else {}
    model, history = train(
        model, train_set, dev_set, tcfg, lcfg,
        run_dir=opts["run_dir"],
        config_snapshot={"train": opts},
        **kwargs,
    )
    for record in history:
        print(f"epoch {record.epoch}: train_loss={record.train_loss:.6f} "
              f"{tcfg.monitored_metric}={record.dev_metric:.6f}")
    from .training import best_epoch_index

    best = history[best_epoch_index(history, tcfg.metric_mode)]
    print(f"best epoch {best.epoch} ({tcfg.monitored_metric}={best.dev_metric:.6f}); "
          f"artifacts in {opts['run_dir']}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    schema = {
        "manifest": (str, None),
        "weights": (str, None),
        "threshold": (float, 0.5),
        "out_dir": (str, None),
        "set_id": (str, None),
        "audio_root": (str, None),
    }
    opts = resolve_options(args, "eval", schema)
    _require(opts, "manifest", "weights")
    model, meta = load_checkpoint(opts["weights"])
    records = load_manifest(opts["manifest"], model.languages)
    set_id = opts["set_id"] or Path(opts["manifest"]).stem
    provider = _wave_provider(opts["audio_root"])
    kwargs = {"wave_provider": provider} if provider else {}
    report = evaluate_corpus(
        model, records, opts["threshold"],
        window_s=float(meta["window_s"]), overlap_s=float(meta["overlap_s"]),
        test_set_id=set_id, model_id=Path(opts["weights"]).stem, **kwargs,
    )
    table = format_f1_table({set_id: report})
    print(table)
    print(f"mean F1 = {report.mean_f1:.4f} at threshold {report.threshold}")
    if opts["out_dir"]:
        out_dir = Path(opts["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        save_report(report, out_dir / "metrics.json")
        (out_dir / "table.txt").write_text(table + "\n", encoding="utf-8")
        _snapshot(out_dir, "eval", opts)
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    schema = {
        "weights": (str, None),
        "audio": (str, None),
        "manifest": (str, None),
        "threshold": (float, 0.5),
        "out_dir": (str, None),
        "audio_root": (str, None),
    }
    opts = resolve_options(args, "infer", schema)
    _require(opts, "weights")
    if bool(opts["audio"]) == bool(opts["manifest"]):
        raise ValueError("provide exactly one of --audio or --manifest")
    model, meta = load_checkpoint(opts["weights"])
    window_s, overlap_s = float(meta["window_s"]), float(meta["overlap_s"])

    if opts["audio"]:
        wave = load_wav(opts["audio"])
        record = ClipRecord(
            clip_id=Path(opts["audio"]).stem, corpus_id="adhoc",
            language=model.languages[0], audio_path=opts["audio"],
            offset_s=0.0, duration_s=wave.duration_s,
            labels=LabelVector(), split="test",
        )
        records = [record]
        provider = lambda r: wave  # noqa: E731 - single preloaded buffer
    else:
        records = load_manifest(opts["manifest"], model.languages)
        provider = _wave_provider(opts["audio_root"])

    all_windows = []
    rows = []
    for record in records:
        windows = plan_windows(record.duration_s, window_s, overlap_s,
                               clip_id=record.clip_id)
        all_windows.extend(windows)
        kwargs = {"wave_provider": provider} if provider else {}
        pred = infer_clip(model, record, opts["threshold"],
                          window_s, overlap_s, **kwargs)
        rows.append((record, windows, pred))
        offsets = ", ".join(f"{w.offset_s:.2f}" for w in windows)
        print(f"{record.clip_id}: {len(windows)} window(s) at [{offsets}] s")
        print("  " + "  ".join(
            f"{name}={p:.4f}{'*' if d else ''}"
            for name, p, d in zip(CLASS_NAMES, pred.probs, pred.decisions)
        ))
    if opts["out_dir"]:
        out_dir = Path(opts["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "predictions.csv").open("w", encoding="utf-8", newline="") as fh:
            header = ["clip_id", "n_windows"]
            header += [f"prob_{n}" for n in CLASS_NAMES] + [f"dec_{n}" for n in CLASS_NAMES]
            fh.write(",".join(header) + "\n")
            for record, windows, pred in rows:
                cells = [record.clip_id, str(len(windows))]
                cells += [repr(float(p)) for p in pred.probs]
                cells += ["1" if d else "0" for d in pred.decisions]
                fh.write(",".join(cells) + "\n")
        save_window_plan(all_windows, out_dir / "windows.csv")
        _snapshot(out_dir, "infer", opts)
    return EXIT_OK


def cmd_ablate_length(args: argparse.Namespace) -> int:
    schema = {
        **_TRAIN_CORE_SCHEMA,
        "eval_manifests": (_str_list, None),
        "thresholds": (_float_list, None),
        "out_dir": (str, None),
        "threshold": (float, 0.5),
    }
    opts = resolve_options(args, "ablate-length", schema)
    _require(opts, "train_manifest", "dev_manifest", "eval_manifests",
             "thresholds", "out_dir")
    languages = tuple(opts["languages"])
    train_set = load_manifest(opts["train_manifest"], languages)
    dev_set = load_manifest(opts["dev_manifest"], languages)
    eval_sets = {}
    for item in opts["eval_manifests"]:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ValueError(f"--eval-manifest needs NAME=PATH, got {item!r}")
        eval_sets[name] = load_manifest(path, languages)
    spec = _encoder_spec(opts)
    tcfg, lcfg = _train_configs(opts)
    provider = _wave_provider(opts["audio_root"])
    train_kwargs = {"wave_provider": provider} if provider else {}

    def pipeline(records):
        model = DysfluencyModel(spec, languages=languages, seed=tcfg.seed)
        trained, _ = train(model, records, dev_set, tcfg, lcfg, **train_kwargs)
        return trained

    ablate_kwargs = {"wave_provider": provider} if provider else {}
    rows = length_ablation(pipeline, train_set, opts["thresholds"], eval_sets,
                           threshold=opts["threshold"], **ablate_kwargs)
    out_dir = Path(opts["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    save_ablation_table(rows, out_dir / "ablation.csv")
    _snapshot(out_dir, "ablate-length", opts)
    for row in rows:
        cells = " ".join(f"{name}={row.f1[name]:.4f}" for name in CLASS_NAMES)
        print(f"max_len={row.threshold_s:g}s set={row.eval_set_id} {cells}")
    print(f"ablation table -> {out_dir / 'ablation.csv'}")
    return EXIT_OK


# -- plotting ---------------------------------------------------------------

PLOT_KINDS = ("length-dist", "length-ablation", "language-dist")


def _read_delimited(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty data file")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def _plot_length_dist(sidecar: Path, image_out: Path) -> None:
    _, rows = _read_delimited(sidecar)
    lefts = [float(r[0]) for r in rows]
    counts = [int(r[2]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(lefts, counts, width=0.5, align="edge", edgecolor="black")
    ax.set_xlabel("clip length (s)")
    ax.set_ylabel("clips")
    ax.set_title("Clip length distribution")
    fig.tight_layout()
    fig.savefig(image_out, dpi=120)
    plt.close(fig)


def _plot_language_dist(sidecar: Path, image_out: Path) -> None:
    _, rows = _read_delimited(sidecar)
    languages = [r[0] for r in rows]
    fractions = [float(r[2]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(languages, [f * 100 for f in fractions], edgecolor="black")
    ax.set_ylabel("share of clips (%)")
    ax.set_title("Language distribution")
    fig.tight_layout()
    fig.savefig(image_out, dpi=120)
    plt.close(fig)


def _plot_length_ablation(sidecar: Path, image_out: Path) -> None:
    header, rows = _read_delimited(sidecar)
    if not rows:
        raise ValueError(f"{sidecar}: no ablation rows")
    fig, ax = plt.subplots(figsize=(7, 4))
    eval_sets = sorted({r[1] for r in rows})
    for set_id in eval_sets:
        subset = [r for r in rows if r[1] == set_id]
        xs = [float(r[0]) for r in subset]
        for j, name in enumerate(CLASS_NAMES):
            ys = [float(r[2 + j]) for r in subset]
            label = f"{set_id}:{name}" if len(eval_sets) > 1 else name
            ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel("max training clip length (s)")
    ax.set_ylabel("F1")
    ax.set_title("Length-threshold ablation")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(image_out, dpi=120)
    plt.close(fig)


def cmd_plot(args: argparse.Namespace) -> int:
    schema = {
        "kind": (str, None),
        "input": (str, None),
        "output": (str, None),
        **_LANGUAGES_KEY,
    }
    opts = resolve_options(args, "plot", schema)
    _require(opts, "kind", "input", "output")
    if opts["kind"] not in PLOT_KINDS:
        raise ValueError(f"--kind must be one of {PLOT_KINDS}, got {opts['kind']!r}")
    image_out = Path(opts["output"])
    sidecar = image_out.with_suffix(".data.csv")

    if opts["kind"] == "length-dist":
        records = load_manifest(opts["input"], tuple(opts["languages"]))
        if not records:
            raise ValueError(f"{opts['input']}: empty dataset, nothing to plot")
        durations = np.array([r.duration_s for r in records])
        edges = np.arange(0.0, np.ceil(durations.max() / 0.5) * 0.5 + 0.5, 0.5)
        counts, _ = np.histogram(durations, bins=edges)
        with sidecar.open("w", encoding="utf-8", newline="") as fh:
            fh.write("bin_left_s,bin_right_s,count\n")
            for left, right, count in zip(edges[:-1], edges[1:], counts):
                # plain floats: np.float64 reprs as 'np.float64(x)' and
                # would not parse back
                fh.write(f"{float(left)!r},{float(right)!r},{int(count)}\n")
        _plot_length_dist(sidecar, image_out)
    elif opts["kind"] == "language-dist":
        records = load_manifest(opts["input"], tuple(opts["languages"]))
        if not records:
            raise ValueError(f"{opts['input']}: empty dataset, nothing to plot")
        stats = split_stats(records)
        with sidecar.open("w", encoding="utf-8", newline="") as fh:
            fh.write("language,count,fraction\n")
            for lang in sorted(stats.language_counts):
                fh.write(f"{lang},{stats.language_counts[lang]},"
                         f"{stats.language_fractions[lang]!r}\n")
        _plot_language_dist(sidecar, image_out)
    else:
        source = Path(opts["input"])
        if not source.is_file():
            raise ValueError(f"data file not found: {source}")
        if source.resolve() != sidecar.resolve():
            shutil.copyfile(source, sidecar)
        _plot_length_ablation(sidecar, image_out)
    _snapshot(image_out.parent, "plot", opts)
    print(f"wrote {image_out} (data: {sidecar})")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    schema = {"inputs": (_str_list, None), "output": (str, None)}
    opts = resolve_options(args, "report", schema)
    _require(opts, "inputs")
    rows = {}
    for path in opts["inputs"]:
        payload = load_report_dict(path)
        report = report_from_dict(payload)
        label = report.test_set_id or Path(path).stem
        if label in rows:
            raise ValueError(f"duplicate report label {label!r}")
        rows[label] = report
    table = format_f1_table(rows)
    print(table)
    if opts["output"]:
        Path(opts["output"]).write_text(table + "\n", encoding="utf-8")
        _snapshot(Path(opts["output"]).parent, "report", opts)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file; flags override its values")


def _add_train_core_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--train-manifest")
    parser.add_argument("--dev-manifest")
    parser.add_argument("--audio-root")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--max-epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--weight-decay", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--monitored-metric", choices=["dev_loss", "dev_mean_f1"])
    parser.add_argument("--grad-clip", type=float)
    parser.add_argument("--freeze-encoder", action="store_const", const=True)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--w-main", type=float)
    parser.add_argument("--scaling", choices=["none", "batch_mean"])
    parser.add_argument("--encoder", choices=["reference-tiny", "external"])
    parser.add_argument("--weights", help="weights source for --encoder external")
    parser.add_argument("--hidden-size", type=int)
    parser.add_argument("--conv-channels", type=_str_list)
    parser.add_argument("--blocks", type=int)
    parser.add_argument("--heads", type=int)
    parser.add_argument("--mlp-ratio", type=int)
    parser.add_argument("--languages", type=_str_list)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stutterkit",
        description="Multilingual dysfluency detection pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_manifest = sub.add_parser("manifest", help="manifest tooling")
    manifest_sub = p_manifest.add_subparsers(dest="subcommand", required=True)
    p_validate = manifest_sub.add_parser("validate", help="check a manifest file")
    p_validate.add_argument("--in", dest="input")
    p_validate.add_argument("--languages", type=_str_list)
    _add_config_flag(p_validate)
    p_validate.set_defaults(func=cmd_manifest_validate)

    p_filter = sub.add_parser("filter", help="drop clips over a length threshold")
    p_filter.add_argument("--in", dest="input")
    p_filter.add_argument("--out", dest="output")
    p_filter.add_argument("--max-clip-len", type=float)
    p_filter.add_argument("--languages", type=_str_list)
    _add_config_flag(p_filter)
    p_filter.set_defaults(func=cmd_filter)

    p_mix = sub.add_parser("mix", help="combine and shuffle manifests")
    p_mix.add_argument("--in", dest="inputs", action="append")
    p_mix.add_argument("--out", dest="output")
    p_mix.add_argument("--seed", type=int)
    p_mix.add_argument("--languages", type=_str_list)
    _add_config_flag(p_mix)
    p_mix.set_defaults(func=cmd_mix)

    p_stats = sub.add_parser("stats", help="per-language and per-class counts")
    p_stats.add_argument("--in", dest="input")
    p_stats.add_argument("--out-json")
    p_stats.add_argument("--out-text")
    p_stats.add_argument("--languages", type=_str_list)
    _add_config_flag(p_stats)
    p_stats.set_defaults(func=cmd_stats)

    p_train = sub.add_parser("train", help="fine-tune a model")
    _add_train_core_flags(p_train)
    p_train.add_argument("--run-dir")
    _add_config_flag(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a manifest with a checkpoint")
    p_eval.add_argument("--manifest")
    p_eval.add_argument("--weights")
    p_eval.add_argument("--threshold", type=float)
    p_eval.add_argument("--out-dir")
    p_eval.add_argument("--set-id")
    p_eval.add_argument("--audio-root")
    _add_config_flag(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_infer = sub.add_parser("infer", help="predict for a file or manifest")
    p_infer.add_argument("--weights")
    p_infer.add_argument("--audio")
    p_infer.add_argument("--manifest")
    p_infer.add_argument("--threshold", type=float)
    p_infer.add_argument("--out-dir")
    p_infer.add_argument("--audio-root")
    _add_config_flag(p_infer)
    p_infer.set_defaults(func=cmd_infer)

    p_ablate = sub.add_parser("ablate-length", help="sweep max training clip length")
    _add_train_core_flags(p_ablate)
    p_ablate.add_argument("--eval-manifest", dest="eval_manifests", action="append",
                          metavar="NAME=PATH")
    p_ablate.add_argument("--thresholds", type=_float_list)
    p_ablate.add_argument("--out-dir")
    p_ablate.add_argument("--threshold", type=float)
    _add_config_flag(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate_length)

    p_plot = sub.add_parser("plot", help="render a figure plus its data sidecar")
    p_plot.add_argument("--kind", choices=list(PLOT_KINDS))
    p_plot.add_argument("--in", dest="input")
    p_plot.add_argument("--out", dest="output")
    p_plot.add_argument("--languages", type=_str_list)
    _add_config_flag(p_plot)
    p_plot.set_defaults(func=cmd_plot)

    p_report = sub.add_parser("report", help="merge metrics files into one table")
    p_report.add_argument("--in", dest="inputs", action="append")
    p_report.add_argument("--out", dest="output")
    _add_config_flag(p_report)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ManifestError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
