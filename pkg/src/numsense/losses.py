"""Contrastive and regression objectives.

The rank-aware contrastive loss re-weights every negative term of InfoNCE by
a label-distance weight lambda_ij. Weights are normalized per anchor so they
average to one over the anchor's negatives; with all weights equal to one the
loss is plain InfoNCE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .binning import DistanceKind, pairwise_distances
from .embeddings import similarity_logits
from .errors import BatchTooSmallError, LengthMismatchError, NonFiniteError, ShapeMismatchError

LAMBDA_MODES = ("mean", "exp")

IMAGE_ANCHORED = "image"
TEXT_ANCHORED = "text"


def compute_lambda(
    labels,
    kind="absolute",
    beta: float = 1.0,
    fallback: bool = True,
    mode: str = "mean",
) -> np.ndarray:
    """Per-anchor negative weights from pairwise label distances.

    ``mode="mean"`` divides ``beta * d_ij`` by its mean over the anchor's
    negatives (so beta cancels). ``mode="exp"`` uses
    ``(M-1) * softmax_j(beta * d_ij)``. Both give rows whose off-diagonal
    mean is 1. The diagonal is set to 0 and is never read by the losses.

    A row whose distances are all zero cannot be mean-normalized; with
    ``fallback`` it becomes all ones, otherwise ``ValueError`` is raised.
    """
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    m = y.size
    if m < 2:
        raise BatchTooSmallError(f"need at least 2 samples per batch, got {m}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if mode not in LAMBDA_MODES:
        raise ValueError(f"unknown lambda mode {mode!r}")
    off = ~np.eye(m, dtype=bool)
    scaled = beta * pairwise_distances(y, DistanceKind.parse(kind))

    if mode == "mean":
        row_mean = np.where(off, scaled, 0.0).sum(axis=1) / (m - 1)
        degenerate = row_mean == 0.0
        if np.any(degenerate) and not fallback:
            raise ValueError(f"all negatives share the anchor's label in rows {np.flatnonzero(degenerate).tolist()}")
        safe = np.where(degenerate, 1.0, row_mean)
        lam = np.where(degenerate[:, None], 1.0, scaled / safe[:, None])
    else:
        shifted = np.where(off, scaled, -np.inf)
        shifted = shifted - shifted.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        lam = (m - 1) * e / e.sum(axis=1, keepdims=True)
    lam[~off] = 0.0
    return lam


def degenerate_rows(labels, kind="absolute") -> np.ndarray:
    """Mask of anchors whose negatives all have zero label distance."""
    d = pairwise_distances(labels, kind)
    np.fill_diagonal(d, 0.0)
    return d.sum(axis=1) == 0.0


def fcrc(similarities, lam, direction: str = IMAGE_ANCHORED) -> nc.DiffNode:
    """Weighted contrastive loss over a temperature-scaled M x M similarity matrix.

    Entry (i, j) of ``similarities`` is cos(z_i, w_j) / tau. For the
    text-anchored direction the matrix is transposed first, so row i then
    holds text i against every image; ``lam`` is always indexed
    ``[anchor, negative]``.
    """
    sims = nc.as_node(similarities)
    m = sims.shape[0]
    if sims.shape != (m, m):
        raise ShapeMismatchError(f"similarity matrix must be square, got {sims.shape}")
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (m, m):
        raise ShapeMismatchError(f"lambda is {lam.shape}, similarities are {sims.shape}")
    if not np.all(np.isfinite(sims.value)):
        raise NonFiniteError("non-finite similarity")
    if direction == TEXT_ANCHORED:
        sims = nc.transpose(sims)
    elif direction != IMAGE_ANCHORED:
        raise ValueError(f"direction must be 'image' or 'text', got {direction!r}")

    weights = lam.copy()
    np.fill_diagonal(weights, 1.0)
    # subtracting the (constant) row max leaves the loss and its gradient unchanged
    row_max = sims.value.max(axis=1, keepdims=True)
    shifted = nc.add(sims, nc.constant(np.broadcast_to(-row_max, (m, m))))
    log_denominator = nc.log(nc.sum_(nc.mul(nc.exp(shifted), nc.constant(weights)), axis=1))
    positive = nc.sum_(nc.mul(shifted, nc.constant(np.eye(m))), axis=1)
    return nc.mean(nc.add(log_denominator, nc.neg(positive)))


def infonce(similarities, direction: str = IMAGE_ANCHORED) -> nc.DiffNode:
    sims = nc.as_node(similarities)
    return fcrc(sims, np.ones(sims.shape), direction)


def regression_loss(predictions, targets) -> nc.DiffNode:
    """Mean absolute error between N x 1 ``predictions`` and ``targets``."""
    predictions = nc.as_node(predictions)
    t = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    if predictions.shape != t.shape:
        raise LengthMismatchError(f"{predictions.shape[0]} predictions for {t.shape[0]} targets")
    return nc.mean(nc.abs_(nc.add(predictions, nc.constant(-t))))


@dataclass(frozen=True)
class LossBreakdown:
    fcrc_i2t: float
    fcrc_t2i: float
    regression: float
    total: float

    @property
    def contrastive(self) -> float:
        return 0.5 * (self.fcrc_i2t + self.fcrc_t2i)


REGRESSION_WEIGHT = 1.0


def total_loss(Z, W_selected, lam_i2t, lam_t2i, predictions, targets, tau: float):
    """Mean of both contrastive directions plus the regression term (weight 1).

    ``Z`` and ``W_selected`` are the M unit-norm image embeddings and the
    prompt rows paired with them. Returns ``(breakdown, total_node)``.
    """
    Z, W_selected, predictions = nc.as_node(Z), nc.as_node(W_selected), nc.as_node(predictions)
    m = Z.shape[0]
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if W_selected.shape[0] != m or predictions.shape[0] != m or t.size != m:
        raise ShapeMismatchError(
            f"inconsistent batch: {m} images, {W_selected.shape[0]} texts, "
            f"{predictions.shape[0]} predictions, {t.size} targets"
        )
    sims = similarity_logits(Z, W_selected, tau)
    i2t = fcrc(sims, lam_i2t, IMAGE_ANCHORED)
    t2i = fcrc(sims, lam_t2i, TEXT_ANCHORED)
    reg = regression_loss(predictions, t)
    contrastive = nc.scale(nc.add(i2t, t2i), 0.5)
    total = nc.add(contrastive, nc.scale(reg, REGRESSION_WEIGHT))
    breakdown = LossBreakdown(i2t.item(), t2i.item(), reg.item(), total.item())
    return breakdown, total
