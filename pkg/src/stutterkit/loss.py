"""Focal loss, auxiliary BCE, and their weighted multi-task combination.

The per-class focal term is

    FL(p_t) = -alpha * (1 - p_t)**gamma * log(p_t)

with p_t = p when the class is present and 1 - p otherwise.  The main task
loss is the mean focal term over the five dysfluency classes; the auxiliary
task is the mean element-wise binary cross-entropy over the language
one-hot.  They combine as

    L = w_main * L_main + (1 - w_main) * L_aux

Probabilities are clamped to [eps, 1 - eps] before any log, and the
analytic gradients below are the exact gradients of the clamped losses
(zero wherever the clamp is active).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CLAMP_EPS = 1e-7
SCALING_MODES = ("none", "batch_mean")


@dataclass(frozen=True)
class MTLLossConfig:
    """Loss hyperparameters; defaults are the tuned operating point."""

    alpha: float = 0.7
    gamma: float = 3.0
    w_main: float = 0.9
    scaling: str = "batch_mean"
    eps: float = CLAMP_EPS

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0.0 <= self.w_main <= 1.0:
            raise ValueError(f"w_main must be in [0, 1], got {self.w_main}")
        if self.scaling not in SCALING_MODES:
            raise ValueError(f"scaling must be one of {SCALING_MODES}, got {self.scaling!r}")
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"eps must be in (0, 0.5), got {self.eps}")


def _check_probs(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if np.any(np.isnan(probs)):
        raise ValueError("NaN probability")
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return probs


def focal_term(prob: float, target: bool, alpha: float, gamma: float,
               eps: float = CLAMP_EPS) -> float:
    """One class's focal loss contribution."""
    p = float(_check_probs(np.array(prob)))
    p = min(max(p, eps), 1.0 - eps)
    p_t = p if target else 1.0 - p
    return -alpha * (1.0 - p_t) ** gamma * np.log(p_t)


def focal_loss_multilabel(probs, targets, cfg: MTLLossConfig) -> float:
    """Mean focal term over the label classes."""
    probs = _check_probs(probs)
    targets = np.asarray(targets, dtype=bool)
    if probs.shape != targets.shape or probs.ndim != 1:
        raise ValueError(
            f"probs and targets must be equal-length vectors, got {probs.shape} vs {targets.shape}"
        )
    p = np.clip(probs, cfg.eps, 1.0 - cfg.eps)
    p_t = np.where(targets, p, 1.0 - p)
    terms = -cfg.alpha * (1.0 - p_t) ** cfg.gamma * np.log(p_t)
    return float(terms.mean())


def focal_grad_probs(probs, targets, cfg: MTLLossConfig) -> np.ndarray:
    """d focal_loss_multilabel / d probs (includes the 1/n mean factor).

    Derivative of the clamped loss: exactly zero where the clamp is active.
    Works element-wise on arrays of any matching shape; the mean factor is
    1 / size of the last axis.
    """
    probs = _check_probs(probs)
    targets = np.asarray(targets, dtype=bool)
    if probs.shape != targets.shape:
        raise ValueError(f"shape mismatch: {probs.shape} vs {targets.shape}")
    inside = (probs > cfg.eps) & (probs < 1.0 - cfg.eps)
    p = np.clip(probs, cfg.eps, 1.0 - cfg.eps)
    p_t = np.where(targets, p, 1.0 - p)
    one_m = 1.0 - p_t
    # d/dp_t [-a (1-p_t)^g log p_t] = a g (1-p_t)^(g-1) log p_t - a (1-p_t)^g / p_t
    if cfg.gamma == 0.0:
        d_pt = -cfg.alpha / p_t
    else:
        d_pt = cfg.alpha * cfg.gamma * one_m ** (cfg.gamma - 1.0) * np.log(p_t) \
            - cfg.alpha * one_m ** cfg.gamma / p_t
    sign = np.where(targets, 1.0, -1.0)
    n = probs.shape[-1]
    return np.where(inside, d_pt * sign, 0.0) / n


def bce_aux(probs, one_hot_target, eps: float = CLAMP_EPS) -> float:
    """Mean element-wise binary cross-entropy over the language one-hot."""
    probs = _check_probs(probs)
    target = np.asarray(one_hot_target, dtype=bool)
    if probs.shape != target.shape or probs.ndim != 1:
        raise ValueError(f"shape mismatch: {probs.shape} vs {target.shape}")
    if target.sum() != 1:
        raise ValueError(f"language target must be one-hot, got {int(target.sum())} set bits")
    p = np.clip(probs, eps, 1.0 - eps)
    terms = -(target * np.log(p) + (~target) * np.log(1.0 - p))
    return float(terms.mean())


def bce_grad_probs(probs, one_hot_target, eps: float = CLAMP_EPS) -> np.ndarray:
    """d bce_aux / d probs, zero where the clamp is active."""
    probs = _check_probs(probs)
    target = np.asarray(one_hot_target, dtype=bool)
    inside = (probs > eps) & (probs < 1.0 - eps)
    p = np.clip(probs, eps, 1.0 - eps)
    d = np.where(target, -1.0 / p, 1.0 / (1.0 - p))
    k = probs.shape[-1]
    return np.where(inside, d, 0.0) / k


def mtl_combine(l_main: float, l_aux: float, cfg: MTLLossConfig) -> float:
    """Weighted sum of the two task losses."""
    if not (np.isfinite(l_main) and np.isfinite(l_aux)):
        raise ValueError(f"losses must be finite, got {l_main}, {l_aux}")
    if l_main < 0 or l_aux < 0:
        raise ValueError(f"losses must be non-negative, got {l_main}, {l_aux}")
    return cfg.w_main * l_main + (1.0 - cfg.w_main) * l_aux


@dataclass(frozen=True)
class BatchLoss:
    """Scalar losses plus exact logit gradients for one batch."""

    total: float
    main: float
    aux: float
    dmain_logits: np.ndarray
    daux_logits: np.ndarray


def batch_losses(
    main_probs: np.ndarray,
    aux_probs: np.ndarray,
    targets: np.ndarray,
    lang_one_hot: np.ndarray,
    cfg: MTLLossConfig,
) -> BatchLoss:
    """Combined loss over a batch of per-clip probabilities.

    main_probs (B, 5), aux_probs (B, K), targets (B, 5) boolean,
    lang_one_hot (B, K) boolean with exactly one bit per row.  With
    ``scaling = batch_mean`` each task is the batch mean of its per-sample
    losses before weighting; ``none`` sums instead.  The returned gradients
    are with respect to the head logits (the sigmoid jacobian p(1-p) is
    already applied) and include all weighting factors.
    """
    main_probs = _check_probs(main_probs)
    aux_probs = _check_probs(aux_probs)
    targets = np.asarray(targets, dtype=bool)
    lang_one_hot = np.asarray(lang_one_hot, dtype=bool)
    if main_probs.ndim != 2 or main_probs.shape != targets.shape:
        raise ValueError(f"bad main shapes: {main_probs.shape} vs {targets.shape}")
    if aux_probs.ndim != 2 or aux_probs.shape != lang_one_hot.shape:
        raise ValueError(f"bad aux shapes: {aux_probs.shape} vs {lang_one_hot.shape}")
    if np.any(lang_one_hot.sum(axis=1) != 1):
        raise ValueError("every language target row must be one-hot")

    n_batch = main_probs.shape[0]
    per_sample_main = np.array([
        focal_loss_multilabel(main_probs[i], targets[i], cfg) for i in range(n_batch)
    ])
    per_sample_aux = np.array([
        bce_aux(aux_probs[i], lang_one_hot[i], cfg.eps) for i in range(n_batch)
    ])
    reduce_factor = 1.0 / n_batch if cfg.scaling == "batch_mean" else 1.0
    l_main = float(per_sample_main.sum() * reduce_factor)
    l_aux = float(per_sample_aux.sum() * reduce_factor)
    total = mtl_combine(l_main, l_aux, cfg)

    dmain_p = focal_grad_probs(main_probs, targets, cfg) * cfg.w_main * reduce_factor
    daux_p = np.vstack([
        bce_grad_probs(aux_probs[i], lang_one_hot[i], cfg.eps) for i in range(n_batch)
    ]) * (1.0 - cfg.w_main) * reduce_factor
    # chain through the sigmoid: dz = dp * p(1-p)
    dmain_z = dmain_p * main_probs * (1.0 - main_probs)
    daux_z = daux_p * aux_probs * (1.0 - aux_probs)
    return BatchLoss(total=total, main=l_main, aux=l_aux,
                     dmain_logits=dmain_z, daux_logits=daux_z)
