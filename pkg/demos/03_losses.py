"""The focal loss and the two-head combination, by the numbers.

Focal loss reshapes binary cross-entropy so easy decisions stop contributing:
the (1 - p_t)^gamma factor crushes the loss once the model is confidently
right, leaving the hard, rare positives to dominate the gradient. That is the
point of using it for dysfluency labels, where most clips are negatives for
most classes.
"""

import numpy as np

from stutterkit.loss import (
    MTLLossConfig,
    batch_losses,
    focal_loss_multilabel,
    focal_term,
)
from stutterkit import tinynet

# How gamma changes the penalty for a correct-class probability p.
print("p_t      gamma=0   gamma=1   gamma=3")
for p in (0.1, 0.3, 0.5, 0.7, 0.9, 0.99):
    row = [focal_term(p, True, alpha=1.0, gamma=g) for g in (0.0, 1.0, 3.0)]
    print(f"{p:4.2f}    " + "  ".join(f"{v:8.5f}" for v in row))
print()

# With gamma = 0 and alpha = 1 nothing is reshaped: the multi-label focal
# loss is exactly the mean binary cross-entropy.
rng = np.random.default_rng(0)
probs = rng.uniform(0.05, 0.95, 5)
targets = rng.integers(0, 2, 5).astype(bool)
plain = MTLLossConfig(alpha=1.0, gamma=0.0)
bce = float(np.mean(-np.log(np.where(targets, probs, 1.0 - probs))))
print(f"focal(gamma=0, alpha=1) = {focal_loss_multilabel(probs, targets, plain):.12f}")
print(f"mean BCE                = {bce:.12f}")
print()

# The training objective mixes the dysfluency head with a language head:
# total = 0.9 * focal + 0.1 * BCE. batch_losses also hands back analytic
# gradients with respect to both heads' logits.
cfg = MTLLossConfig()
main_z = rng.normal(0.0, 0.5, (4, 5))
aux_z = rng.normal(0.0, 0.5, (4, 3))
targets = rng.integers(0, 2, (4, 5)).astype(bool)
lang = np.zeros((4, 3))
lang[np.arange(4), rng.integers(0, 3, 4)] = 1.0
bl = batch_losses(tinynet.sigmoid(main_z), tinynet.sigmoid(aux_z), targets, lang, cfg)
print(f"batch: total={bl.total:.6f}  main={bl.main:.6f}  aux={bl.aux:.6f}")
print(f"       (check: 0.9*main + 0.1*aux = {0.9 * bl.main + 0.1 * bl.aux:.6f})")
print()

# Central differences agree with the returned gradient, here on one logit.
h = 1e-6
probe = main_z.copy()
probe[1, 2] += h
up = batch_losses(tinynet.sigmoid(probe), tinynet.sigmoid(aux_z), targets, lang, cfg).total
probe[1, 2] -= 2 * h
down = batch_losses(tinynet.sigmoid(probe), tinynet.sigmoid(aux_z), targets, lang, cfg).total
print(f"analytic d(total)/d(main_z[1,2]) = {bl.dmain_logits[1, 2]:.9f}")
print(f"numeric                          = {(up - down) / (2 * h):.9f}")
