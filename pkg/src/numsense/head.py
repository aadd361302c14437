"""Coarse-to-fine prediction.

Class probabilities come from a softmax over similarity logits; the
continuous prediction is the probability-weighted sum of shifted bin
centers, ``sum_i p_i * b_i / (1 + delta_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import numcore as nc
from .binning import BinSpec
from .errors import BadArityError

MIN_SHIFT_DENOMINATOR = 0.5


def class_probabilities(logits) -> nc.DiffNode:
    return nc.row_softmax(logits)


def _reciprocal(x: nc.DiffNode) -> nc.DiffNode:
    return nc.exp(nc.neg(nc.log(x)))


def shifted_centers(spec: BinSpec, delta) -> nc.DiffNode:
    """``b_i / (1 + delta_i)`` as a 1 x K node."""
    delta = nc.as_node(delta)
    if delta.shape != (1, spec.k):
        raise BadArityError(f"delta must be 1 x {spec.k}, got {delta.shape}")
    one_plus = nc.add(nc.constant(np.ones((1, spec.k))), delta)
    return nc.mul(nc.constant(spec.centers.reshape(1, -1)), _reciprocal(one_plus))


def predict(probabilities, spec: BinSpec, delta) -> nc.DiffNode:
    """N x 1 predictions for input-independent shifts ``delta`` (1 x K)."""
    probabilities = nc.as_node(probabilities)
    if probabilities.shape[1] != spec.k:
        raise BadArityError(f"{probabilities.shape[1]} probabilities for {spec.k} bins")
    return nc.matmul(probabilities, nc.transpose(shifted_centers(spec, delta)))


def predict_with_shifts(probabilities, spec: BinSpec, shifts) -> nc.DiffNode:
    """Like :func:`predict` but with one shift vector per row (``shifts`` is N x K)."""
    probabilities, shifts = nc.as_node(probabilities), nc.as_node(shifts)
    n, k = probabilities.shape
    if k != spec.k or shifts.shape != (n, k):
        raise BadArityError(f"probabilities {probabilities.shape}, shifts {shifts.shape}, {spec.k} bins")
    centers = nc.constant(np.tile(spec.centers, (n, 1)))
    one_plus = nc.add(nc.constant(np.ones((n, k))), shifts)
    weighted = nc.mul(probabilities, nc.mul(centers, _reciprocal(one_plus)))
    return nc.sum_(weighted, axis=1)


def clamp_delta(delta: np.ndarray) -> np.ndarray:
    """Keep ``1 + delta_i >= 0.5``."""
    return np.maximum(delta, MIN_SHIFT_DENOMINATOR - 1.0)


@dataclass
class DeltaNet:
    """One-hidden-layer map from class probabilities to per-bin shifts.

    The output is squashed to (-0.5, 0.5) so ``1 + delta`` stays in (0.5, 1.5)
    without clamping.
    """

    A: object  # K x K
    a: object  # 1 x K
    B: object  # K x K
    c: object  # 1 x K

    def map(self, fn) -> "DeltaNet":
        return DeltaNet(*(fn(getattr(self, f.name)) for f in fields(self)))


def init_delta_net(k: int, rng=None) -> DeltaNet:
    rng = np.random.default_rng(rng)
    # zero output layer: the network starts at delta = 0
    return DeltaNet(
        A=rng.normal(0.0, 1.0 / np.sqrt(k), size=(k, k)),
        a=np.zeros((1, k)),
        B=np.zeros((k, k)),
        c=np.zeros((1, k)),
    )


def delta_from_network(net: DeltaNet, probabilities) -> nc.DiffNode:
    probabilities = nc.as_node(probabilities)
    ones = nc.constant(np.ones((probabilities.shape[0], 1)))
    hidden = nc.tanh(nc.matmul(probabilities, net.A) + nc.matmul(ones, net.a))
    out = nc.tanh(nc.matmul(hidden, net.B) + nc.matmul(ones, net.c))
    return nc.scale(out, 0.5)


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray  # N x K
    value: np.ndarray  # N
    coarse_class: np.ndarray  # N


def summarize(probabilities: nc.DiffNode, predictions: nc.DiffNode) -> Prediction:
    p = probabilities.value
    return Prediction(p.copy(), predictions.value[:, 0].copy(), p.argmax(axis=1))
