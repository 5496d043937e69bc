"""Optimizer arithmetic, early stopping, and the fine-tuning loop."""

from __future__ import annotations

import numpy as np
import pytest

from stutterkit.loss import MTLLossConfig
from stutterkit.model import TINY_TEST_SPEC, DysfluencyModel, load_checkpoint
from stutterkit.synthetic import make_separable_corpus
from stutterkit.training import (
    AdamW,
    EpochRecord,
    TrainConfig,
    best_epoch_index,
    load_history,
    pad_batch,
    save_history,
    should_stop,
    train,
)


def hist(*values: float) -> list[EpochRecord]:
    return [EpochRecord(epoch=i + 1, train_loss=0.0, dev_metric=v)
            for i, v in enumerate(values)]


# ---------------------------------------------------------------------------
# TrainConfig
# ---------------------------------------------------------------------------

def test_config_defaults_are_the_documented_operating_point():
    cfg = TrainConfig()
    assert cfg.learning_rate == 3e-5
    assert cfg.batch_size == 8
    assert cfg.max_epochs == 20
    assert cfg.patience == 5
    assert cfg.optimizer == "adamw"
    assert cfg.metric_mode == "min"


def test_config_validation():
    with pytest.raises(ValueError, match="patience"):
        TrainConfig(patience=20, max_epochs=20)
    with pytest.raises(ValueError, match="learning_rate"):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError, match="optimizer"):
        TrainConfig(optimizer="sgd")
    with pytest.raises(ValueError, match="monitored_metric"):
        TrainConfig(monitored_metric="accuracy")
    with pytest.raises(ValueError, match="batch_size"):
        TrainConfig(batch_size=0)


def test_metric_mode_follows_metric():
    assert TrainConfig(monitored_metric="dev_mean_f1").metric_mode == "max"


# ---------------------------------------------------------------------------
# AdamW
# ---------------------------------------------------------------------------

def test_adamw_first_step_hand_computed():
    """t=1 bias correction makes m_hat = g and v_hat = g*g, so the step is
    lr * (g / (|g| + eps) + wd * p)."""
    p = {"w": np.array([1.0])}
    opt = AdamW(p, learning_rate=0.1, weight_decay=0.01)
    opt.step({"w": np.array([2.0])})
    want = 1.0 - 0.1 * (2.0 / (2.0 + 1e-8) + 0.01 * 1.0)
    assert p["w"][0] == pytest.approx(want, rel=1e-15)


def test_adamw_matches_reference_recurrence():
    rng = np.random.default_rng(0)
    p = {"w": rng.normal(size=(3, 2))}
    ref = p["w"].copy()
    opt = AdamW(p, learning_rate=0.05, weight_decay=0.02)
    m = np.zeros_like(ref)
    v = np.zeros_like(ref)
    for t in range(1, 6):
        g = rng.normal(size=(3, 2))
        opt.step({"w": g.copy()})
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mhat = m / (1 - 0.9 ** t)
        vhat = v / (1 - 0.999 ** t)
        ref = ref - 0.05 * (mhat / (np.sqrt(vhat) + 1e-8) + 0.02 * ref)
        assert p["w"] == pytest.approx(ref, rel=1e-12)


def test_adamw_weight_decay_is_decoupled():
    """Zero gradients still shrink weights geometrically by lr * wd."""
    p = {"w": np.array([4.0])}
    opt = AdamW(p, learning_rate=0.1, weight_decay=0.5)
    for _ in range(3):
        opt.step({"w": np.array([0.0])})
    assert p["w"][0] == pytest.approx(4.0 * (1 - 0.05) ** 3, rel=1e-12)


def test_adamw_updates_in_place():
    arr = np.array([1.0, 2.0])
    opt = AdamW({"w": arr}, learning_rate=0.1)
    opt.step({"w": np.array([1.0, 1.0])})
    assert arr[0] != 1.0  # same buffer was modified


# ---------------------------------------------------------------------------
# Early stopping
# ---------------------------------------------------------------------------

def test_stops_after_exactly_one_plus_patience_when_worsening():
    values = [1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6]
    for k in range(1, 6):
        assert not should_stop(hist(*values[:k]), patience=5)
    assert should_stop(hist(*values[:6]), patience=5)


def test_never_stops_while_improving():
    values = [1.0 - 0.01 * i for i in range(30)]
    for k in range(1, 31):
        assert not should_stop(hist(*values[:k]), patience=5)


def test_exact_ties_do_not_reset_the_counter():
    assert should_stop(hist(1.0, 1.0, 1.0), patience=2)
    assert not should_stop(hist(1.0, 1.0, 0.9), patience=2)


def test_improvement_resets_the_counter():
    # worse, worse, better: the new best restarts the wait
    assert not should_stop(hist(1.0, 1.2, 1.1, 0.9), patience=3)
    assert should_stop(hist(1.0, 1.2, 1.1, 0.9, 1.0, 1.0, 1.0), patience=3)


def test_should_stop_max_mode():
    assert should_stop(hist(0.9, 0.8, 0.7), patience=2, mode="max")
    assert not should_stop(hist(0.7, 0.8, 0.9), patience=2, mode="max")


def test_should_stop_validation():
    with pytest.raises(ValueError):
        should_stop([], patience=2)
    with pytest.raises(ValueError):
        should_stop(hist(1.0), patience=2, mode="median")


def test_best_epoch_index_prefers_first():
    assert best_epoch_index(hist(1.0, 0.5, 0.5, 0.7)) == 1
    assert best_epoch_index(hist(0.2, 0.5, 0.5, 0.7), mode="max") == 3


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------

def test_pad_batch_hand_case():
    batch, lengths = pad_batch([np.array([1.0, 2.0]), np.array([3.0])])
    assert np.array_equal(lengths, [2, 1])
    assert np.array_equal(batch, [[1.0, 2.0], [3.0, 0.0]])


# ---------------------------------------------------------------------------
# History persistence
# ---------------------------------------------------------------------------

def test_history_roundtrip(tmp_path):
    records = [
        EpochRecord(1, 0.123456789012345, 0.5, "ckpt/epoch-1.npz"),
        EpochRecord(2, 1.0 / 3.0, 2.0 / 7.0, None),
    ]
    path = tmp_path / "history.csv"
    save_history(records, path)
    assert load_history(path) == records  # repr round-trips floats exactly


# ---------------------------------------------------------------------------
# The training loop on a small synthetic corpus
# ---------------------------------------------------------------------------

SMALL_TCFG = dict(learning_rate=3e-5, batch_size=4, max_epochs=2, patience=1, seed=5)


@pytest.fixture(scope="module")
def small_corpus():
    return make_separable_corpus(n_clips=8, seed=3, duration_range=(0.3, 0.5))


def run_small(small_corpus, run_dir=None, **overrides):
    model = DysfluencyModel(TINY_TEST_SPEC, seed=1)
    tcfg = TrainConfig(**{**SMALL_TCFG, **overrides})
    return train(
        model, small_corpus.records, small_corpus.records[:4], tcfg,
        MTLLossConfig(), run_dir=run_dir, wave_provider=small_corpus.wave,
    )


def test_train_runs_and_writes_artifacts(small_corpus, tmp_path):
    run_dir = tmp_path / "run"
    model, history = run_small(small_corpus, run_dir=run_dir)
    assert 1 <= len(history) <= 2
    assert all(np.isfinite(r.train_loss) and np.isfinite(r.dev_metric) for r in history)
    assert (run_dir / "config.snapshot").is_file()
    assert (run_dir / "train.log").is_file()
    assert (run_dir / "history.csv").is_file()
    assert load_history(run_dir / "history.csv") == history
    for r in history:
        assert (run_dir / r.checkpoint_ref).is_file()
    # one train.log line per optimizer step: ceil(8/4) batches per epoch
    log_lines = (run_dir / "train.log").read_text().strip().splitlines()
    assert len(log_lines) == 2 * len(history)


def test_train_returns_best_epoch_parameters(small_corpus, tmp_path):
    run_dir = tmp_path / "run"
    model, history = run_small(small_corpus, run_dir=run_dir)
    best = history[best_epoch_index(history, "min")]
    ckpt_model, _ = load_checkpoint(run_dir / best.checkpoint_ref)
    got = model.parameters()
    want = ckpt_model.parameters()
    for name in want:
        assert np.array_equal(got[name], want[name]), name


def test_train_is_seed_deterministic(small_corpus, tmp_path):
    run_a = tmp_path / "a"
    run_b = tmp_path / "b"
    _, hist_a = run_small(small_corpus, run_dir=run_a)
    _, hist_b = run_small(small_corpus, run_dir=run_b)
    assert hist_a == hist_b
    assert (run_a / "history.csv").read_bytes() == (run_b / "history.csv").read_bytes()
    assert (run_a / "train.log").read_bytes() == (run_b / "train.log").read_bytes()


def test_train_different_seed_changes_history(small_corpus):
    _, hist_a = run_small(small_corpus)
    _, hist_b = run_small(small_corpus, seed=6)
    assert hist_a != hist_b


def test_freeze_encoder_moves_only_the_heads(small_corpus):
    init = {k: v.copy() for k, v in DysfluencyModel(TINY_TEST_SPEC, seed=1).parameters().items()}
    model, _ = run_small(small_corpus, freeze_encoder=True)
    after = model.parameters()
    for name, value in after.items():
        if name.startswith(("head_main.", "head_aux.")):
            assert not np.array_equal(value, init[name]), name
        else:
            assert np.array_equal(value, init[name]), name


def test_monitored_f1_mode_runs(small_corpus):
    _, history = run_small(small_corpus, monitored_metric="dev_mean_f1")
    assert all(0.0 <= r.dev_metric <= 1.0 for r in history)


def test_grad_clip_branches(small_corpus):
    _, hist_plain = run_small(small_corpus)
    _, hist_loose = run_small(small_corpus, grad_clip=1e30)  # never triggers
    assert hist_plain == hist_loose
    _, hist_tight = run_small(small_corpus, grad_clip=1e-6)  # always triggers
    assert all(np.isfinite(r.train_loss) for r in hist_tight)
    assert hist_tight != hist_plain


def test_train_rejects_empty_sets(small_corpus):
    model = DysfluencyModel(TINY_TEST_SPEC, seed=1)
    tcfg = TrainConfig(**SMALL_TCFG)
    with pytest.raises(ValueError, match="train_set"):
        train(model, [], small_corpus.records[:2], tcfg,
              wave_provider=small_corpus.wave)
    with pytest.raises(ValueError, match="dev_set"):
        train(model, small_corpus.records[:2], [], tcfg,
              wave_provider=small_corpus.wave)


def test_train_rejects_unknown_language(small_corpus):
    model = DysfluencyModel(TINY_TEST_SPEC, languages=("EN", "DE"), seed=1)
    tcfg = TrainConfig(**SMALL_TCFG)
    with pytest.raises(ValueError, match="language"):
        train(model, small_corpus.records, small_corpus.records[:2], tcfg,
              wave_provider=small_corpus.wave)
