"""How label distances become negative weights.

Each anchor reweights its negatives in proportion to how far their labels are,
normalized so the weights average to one. Close negatives are pushed away less
than distant ones, and a negative with the anchor's own label is not pushed
at all.
"""

import numpy as np

from numsense import DistanceKind, compute_lambda, fcrc, infonce

labels = np.array([20.0, 30.0, 40.0, 60.0])
np.set_printoptions(precision=4, suppress=True)

for kind in DistanceKind:
    print(f"{kind.value:>8}:", compute_lambda(labels, kind)[0, 1:])

# beta cancels under mean normalization; the exponential mode keeps it.
print("mean, beta 1 vs 100:", compute_lambda(labels, beta=1)[0, 1:], compute_lambda(labels, beta=100)[0, 1:])
print("exp, beta 0.05:     ", compute_lambda(labels, beta=0.05, mode="exp")[0, 1:])

# Same-label negatives get zero weight; a batch where everything shares one
# label falls back to uniform weights.
print("ties:", compute_lambda([20, 20, 50, 60])[0])
print("all equal:", compute_lambda([33, 33, 33])[0])

# With all weights equal to one the loss is plain InfoNCE.
sims = np.random.default_rng(1).normal(size=(4, 4)) * 5
print("weighted loss", fcrc(sims, compute_lambda(labels)).item())
print("unit weights ", fcrc(sims, np.ones((4, 4))).item(), "== InfoNCE", infonce(sims).item())
