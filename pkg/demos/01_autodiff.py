"""A tour of the autodiff core.

Graphs are built eagerly from DiffNode values; backward() fills .grad on every
leaf. gradient_check compares those gradients with central differences.
"""

import numpy as np

from numsense import numcore as nc

rng = np.random.default_rng(0)

# Cosine similarities between two small batches, scaled by a temperature;
# the loss is the mean negative log-probability of each row's matching column.
z = nc.leaf(rng.normal(size=(4, 3)))
w = nc.leaf(rng.normal(size=(4, 3)))
sims = nc.l2_normalize_rows(z) @ nc.l2_normalize_rows(w).T
probs = nc.row_softmax(nc.scale(sims, 1 / 0.07))
loss = -nc.sum_(nc.mul(nc.log(probs), nc.constant(np.eye(4)))) * 0.25
nc.backward(loss)
print("loss", loss.item())
print("d loss / d z\n", z.grad)

# Every op kind has a backward rule. The checker perturbs each coordinate by
# +-step and reports the worst relative error it sees.
report = nc.gradient_check(
    lambda a, b: nc.sum_(nc.tanh(nc.matmul(a, b))),
    [rng.normal(size=(3, 4)), rng.normal(size=(4, 2))],
)
print(report)

# Ask for more precision than floating point can give and the check fails,
# pointing at the coordinate that was furthest off.
print(nc.gradient_check(lambda a: nc.sum_(nc.exp(a)), [rng.normal(size=(2, 2))], tolerance=1e-12))

# Invalid inputs fail loudly rather than producing NaNs.
try:
    nc.log([[0.0]])
except ValueError as exc:
    print("log(0):", exc)
