"""Fine-tuning loop: batching, AdamW, early stopping, checkpoints.

Training consumes whole clips (windowing is an inference-time procedure);
variable-length clips in a batch are zero-padded to the batch maximum and
the encoder receives the true lengths as a mask.  All shuffling derives
from the run seed, so two runs with the same seed and config produce
identical histories on one machine.

A run directory, when given, collects:

    config.snapshot   resolved configuration (ini sections)
    history.csv       one row per epoch
    train.log         per-step losses: step,loss_total,loss_main,loss_aux
    ckpt/epoch-N.npz  one checkpoint per completed epoch
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tinynet
from .audio import WaveformBuffer
from .configio import write_config
from .corpus import ClipRecord
from .evaluation import load_record_wave, mean_f1_whole_clip
from .loss import MTLLossConfig, batch_losses
from .model import DysfluencyModel, save_checkpoint

OPTIMIZERS = ("adamw",)
MONITORED_METRICS = ("dev_loss", "dev_mean_f1")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters; defaults are the tuned operating point."""

    learning_rate: float = 3e-5
    batch_size: int = 8
    max_epochs: int = 20
    patience: int = 5
    optimizer: str = "adamw"
    weight_decay: float = 0.01
    seed: int = 0
    monitored_metric: str = "dev_loss"
    grad_clip: float | None = None  # max global L2 norm; off by default
    freeze_encoder: bool = False

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.patience < self.max_epochs:
            raise ValueError(
                f"patience ({self.patience}) must be < max_epochs ({self.max_epochs})"
            )
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.monitored_metric not in MONITORED_METRICS:
            raise ValueError(
                f"monitored_metric must be one of {MONITORED_METRICS}, "
                f"got {self.monitored_metric!r}"
            )
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")

    @property
    def metric_mode(self) -> str:
        return "min" if self.monitored_metric == "dev_loss" else "max"

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "optimizer": self.optimizer,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "monitored_metric": self.monitored_metric,
            "grad_clip": self.grad_clip,
            "freeze_encoder": self.freeze_encoder,
        }


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float
    checkpoint_ref: str | None = None


class AdamW:
    """Adam with decoupled weight decay, updating parameter dicts in place."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        learning_rate: float,
        weight_decay: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = params
        self.lr = learning_rate
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p -= self.lr * (update + self.weight_decay * p)


def should_stop(history: Sequence[EpochRecord], patience: int, mode: str = "min") -> bool:
    """True when the monitored metric has not improved for `patience` epochs.

    The best epoch is the first one attaining the best value, so exact ties
    never reset the counter.  A stream that worsens from epoch 1 on stops
    after exactly 1 + patience epochs.
    """
    if not history:
        raise ValueError("history must be non-empty")
    if mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    values = [r.dev_metric for r in history]
    best_idx = 0
    for i, v in enumerate(values[1:], start=1):
        if (v < values[best_idx]) if mode == "min" else (v > values[best_idx]):
            best_idx = i
    return (len(values) - 1 - best_idx) >= patience


def best_epoch_index(history: Sequence[EpochRecord], mode: str = "min") -> int:
    """Index of the first epoch attaining the best monitored value."""
    values = [r.dev_metric for r in history]
    best = min(values) if mode == "min" else max(values)
    return values.index(best)


def pad_batch(waves: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad clips to the batch maximum; returns (batch, true lengths)."""
    lengths = np.array([w.size for w in waves], dtype=np.int64)
    batch = np.zeros((len(waves), int(lengths.max())), dtype=np.float64)
    for i, w in enumerate(waves):
        batch[i, :w.size] = w
    return batch, lengths


@dataclass
class _Materialized:
    """Clips decoded once up front; desk-scale sets fit in memory."""

    waves: list[np.ndarray]
    targets: np.ndarray      # (N, 5) bool
    lang_one_hot: np.ndarray  # (N, K) bool
    records: list[ClipRecord] = field(default_factory=list)


def _materialize(
    records: Sequence[ClipRecord],
    languages: Sequence[str],
    wave_provider: Callable[[ClipRecord], WaveformBuffer],
) -> _Materialized:
    waves, targets, one_hot = [], [], []
    lang_index = {lang: i for i, lang in enumerate(languages)}
    for r in records:
        if r.language not in lang_index:
            raise ValueError(f"clip {r.clip_id!r}: language {r.language!r} not in model languages")
        waves.append(wave_provider(r).samples)
        targets.append(r.labels.as_bools())
        row = np.zeros(len(languages), dtype=bool)
        row[lang_index[r.language]] = True
        one_hot.append(row)
    return _Materialized(
        waves=waves,
        targets=np.array(targets, dtype=bool),
        lang_one_hot=np.array(one_hot, dtype=bool),
        records=list(records),
    )


def _epoch_batches(n: int, batch_size: int, perm: np.ndarray) -> list[np.ndarray]:
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def _dev_loss(model: DysfluencyModel, data: _Materialized, batch_size: int,
              lcfg: MTLLossConfig) -> float:
    total, n = 0.0, len(data.waves)
    for idx in _epoch_batches(n, batch_size, np.arange(n)):
        batch, lengths = pad_batch([data.waves[i] for i in idx])
        main_z, aux_z, _ = model.forward_batch(batch, lengths)
        bl = batch_losses(
            tinynet.sigmoid(main_z), tinynet.sigmoid(aux_z),
            data.targets[idx], data.lang_one_hot[idx], lcfg,
        )
        weight = len(idx) if lcfg.scaling == "batch_mean" else 1.0
        total += bl.total * weight
    return total / n if lcfg.scaling == "batch_mean" else total


def train(
    model: DysfluencyModel,
    train_set: Sequence[ClipRecord],
    dev_set: Sequence[ClipRecord],
    tcfg: TrainConfig,
    lcfg: MTLLossConfig | None = None,
    run_dir: str | Path | None = None,
    wave_provider: Callable[[ClipRecord], WaveformBuffer] = load_record_wave,
    config_snapshot: dict[str, dict] | None = None,
    window_s: float = 3.0,
    overlap_s: float = 1.5,
) -> tuple[DysfluencyModel, list[EpochRecord]]:
    """Fine-tune the model, returning it at its best dev epoch.

    Stops early once the monitored dev metric fails to improve for
    `tcfg.patience` consecutive epochs; otherwise runs `tcfg.max_epochs`.
    A non-finite loss aborts with a diagnostic naming the batch.
    """
    if not train_set:
        raise ValueError("train_set must be non-empty")
    if not dev_set:
        raise ValueError("dev_set must be non-empty")
    lcfg = lcfg or MTLLossConfig()

    log_fh = None
    ckpt_dir = None
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        ckpt_dir = run_dir / "ckpt"
        ckpt_dir.mkdir(exist_ok=True)
        # callers (the CLI) may hand in their fully resolved option sections;
        # otherwise record the effective library-level configuration
        snapshot = config_snapshot or {
            "train": tcfg.to_dict(),
            "loss": {"alpha": lcfg.alpha, "gamma": lcfg.gamma, "w_main": lcfg.w_main,
                     "scaling": lcfg.scaling, "eps": lcfg.eps},
            "encoder": model.spec.to_dict(),
            "run": {"languages": list(model.languages), "window_s": window_s,
                    "overlap_s": overlap_s},
        }
        write_config(run_dir / "config.snapshot", snapshot)
        log_fh = (run_dir / "train.log").open("w", encoding="utf-8")

    train_data = _materialize(train_set, model.languages, wave_provider)
    dev_data = _materialize(dev_set, model.languages, wave_provider)

    params = model.parameters()
    head_keys = {k for k in params if k.startswith(("head_main.", "head_aux."))}
    # freezing must keep the encoder out of the optimizer entirely, or its
    # decoupled weight decay would still shrink the frozen weights
    trainable = {
        k: v for k, v in params.items()
        if not tcfg.freeze_encoder or k in head_keys
    }
    optimizer = AdamW(trainable, tcfg.learning_rate, tcfg.weight_decay)
    history: list[EpochRecord] = []
    best_params: dict[str, np.ndarray] | None = None
    step = 0
    n_train = len(train_data.waves)

    try:
        for epoch in range(1, tcfg.max_epochs + 1):
            perm = np.random.default_rng([tcfg.seed, epoch]).permutation(n_train)
            epoch_loss = 0.0
            for batch_no, idx in enumerate(_epoch_batches(n_train, tcfg.batch_size, perm)):
                batch, lengths = pad_batch([train_data.waves[i] for i in idx])
                model.zero_grads()
                main_z, aux_z, cache = model.forward_batch(batch, lengths)
                bl = batch_losses(
                    tinynet.sigmoid(main_z), tinynet.sigmoid(aux_z),
                    train_data.targets[idx], train_data.lang_one_hot[idx], lcfg,
                )
                if not np.isfinite(bl.total):
                    clip_ids = [train_data.records[i].clip_id for i in idx]
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch} batch {batch_no} "
                        f"(clips {clip_ids})"
                    )
                model.backward_batch(bl.dmain_logits, bl.daux_logits, cache)
                grads = {k: g for k, g in model.gradients().items() if k in trainable}
                if tcfg.grad_clip is not None:
                    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                    if norm > tcfg.grad_clip:
                        scale = tcfg.grad_clip / norm
                        for g in grads.values():
                            g *= scale
                optimizer.step(grads)
                step += 1
                if log_fh is not None:
                    log_fh.write(f"{step},{bl.total!r},{bl.main!r},{bl.aux!r}\n")
                weight = len(idx) if lcfg.scaling == "batch_mean" else 1.0
                epoch_loss += bl.total * weight
            train_loss = epoch_loss / n_train if lcfg.scaling == "batch_mean" else epoch_loss

            if tcfg.monitored_metric == "dev_loss":
                dev_metric = _dev_loss(model, dev_data, tcfg.batch_size, lcfg)
            else:
                dev_metric = mean_f1_whole_clip(model, dev_data.waves, dev_data.targets)

            ref = None
            if ckpt_dir is not None:
                ref = f"ckpt/epoch-{epoch}.npz"
                save_checkpoint(model, run_dir / ref, window_s, overlap_s,
                                extra={"epoch": epoch})
            history.append(EpochRecord(epoch, train_loss, dev_metric, ref))

            mode = tcfg.metric_mode
            if best_epoch_index(history, mode) == len(history) - 1:
                best_params = {k: v.copy() for k, v in params.items()}
            if should_stop(history, tcfg.patience, mode):
                break
    finally:
        if log_fh is not None:
            log_fh.close()

    if best_params is not None:
        for name, value in best_params.items():
            params[name][...] = value
    if run_dir is not None:
        save_history(history, Path(run_dir) / "history.csv")
    return model, history


def save_history(history: Sequence[EpochRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "dev_metric", "checkpoint_ref"])
        for r in history:
            writer.writerow([r.epoch, repr(r.train_loss), repr(r.dev_metric),
                             r.checkpoint_ref or ""])


def load_history(path: str | Path) -> list[EpochRecord]:
    out = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(EpochRecord(
                epoch=int(row["epoch"]),
                train_loss=float(row["train_loss"]),
                dev_metric=float(row["dev_metric"]),
                checkpoint_ref=row["checkpoint_ref"] or None,
            ))
    return out
