"""Mini-batch training with Adam."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import numcore as nc
from .binning import BinSpec, DistanceKind
from .data import Dataset
from .diagnostics import evaluate
from .embeddings import DEFAULT_DIM, DEFAULT_HIDDEN, DEFAULT_TAU, prompt_rows
from .errors import EmptyDatasetError, NonFiniteError, ShapeMismatchError
from .head import clamp_delta
from .losses import LossBreakdown, compute_lambda, degenerate_rows, total_loss
from .model import ModelParams, forward, init_model


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    tau: float = DEFAULT_TAU
    beta: float = 1.0
    distance: DistanceKind = DistanceKind.ABSOLUTE
    loss: str = "fcrc"  # or "infonce"
    lambda_mode: str = "mean"  # or "exp"
    seed: int = 0
    delta_variant: str = "free"  # or "network"
    hidden: int = DEFAULT_HIDDEN
    dim: int = DEFAULT_DIM
    use_encoder: bool = True

    def __post_init__(self):
        object.__setattr__(self, "distance", DistanceKind.parse(self.distance))
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be at least 2, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not self.tau > 0 or not self.beta > 0:
            raise ValueError("tau and beta must be positive")
        if self.loss not in ("fcrc", "infonce"):
            raise ValueError(f"loss must be 'fcrc' or 'infonce', got {self.loss!r}")
        if self.lambda_mode not in ("mean", "exp"):
            raise ValueError(f"lambda_mode must be 'mean' or 'exp', got {self.lambda_mode!r}")
        if self.delta_variant not in ("free", "network"):
            raise ValueError(f"delta_variant must be 'free' or 'network', got {self.delta_variant!r}")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(
    params: dict,
    grads: dict,
    state: AdamState,
    lr: float,
    constraints: dict[str, Callable[[np.ndarray], np.ndarray]] | None = None,
):
    """One bias-corrected Adam update. Returns ``(new_params, state)``.

    ``constraints`` maps parameter names to projections applied after the
    update (the delta clamp, for instance).
    """
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    out = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatchError(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        new = p - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        if constraints and name in constraints:
            new = constraints[name](new)
        out[name] = new
    return out, state


@dataclass
class TrainHistory:
    losses: list[LossBreakdown] = field(default_factory=list)
    eval_mae: list[float] = field(default_factory=list)
    eval_accuracy: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.losses)

    def to_csv(self) -> str:
        rows = ["epoch,fcrc_i2t,fcrc_t2i,regression,total,eval_mae,eval_acc"]
        for epoch, (b, mae, acc) in enumerate(zip(self.losses, self.eval_mae, self.eval_accuracy), start=1):
            rows.append(
                ",".join([str(epoch)] + [repr(float(x)) for x in (b.fcrc_i2t, b.fcrc_t2i, b.regression, b.total, mae, acc)])
            )
        return "\n".join(rows) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_bytes(self.to_csv().encode("utf-8"))


def _batches(perm: np.ndarray, size: int):
    for start in range(0, perm.size, size):
        idx = perm[start : start + size]
        if idx.size >= 2:
            yield idx


def batch_lambda(cfg: TrainConfig, labels) -> np.ndarray:
    if cfg.loss == "infonce":
        m = len(labels)
        return np.ones((m, m))
    return compute_lambda(labels, cfg.distance, cfg.beta, fallback=True, mode=cfg.lambda_mode)


def train_step(model: ModelParams, X, y, bins, spec: BinSpec, cfg: TrainConfig):
    """Loss breakdown and gradients (keyed like ``model.named()``) for one batch."""
    nodes = model.map(nc.leaf)
    out = forward(nodes, X, spec)
    texts = prompt_rows(nodes.prompts, bins)
    lam = batch_lambda(cfg, y)
    breakdown, total = total_loss(out.embeddings, texts, lam, lam, out.predictions, y, cfg.tau)
    nc.backward(total)
    grads = {name: node.grad for name, node in nodes.named().items()}
    return breakdown, grads


def _mean_breakdown(items: list[LossBreakdown]) -> LossBreakdown:
    cols = np.array([[b.fcrc_i2t, b.fcrc_t2i, b.regression, b.total] for b in items])
    return LossBreakdown(*(float(v) for v in cols.mean(axis=0)))


def train(cfg: TrainConfig, data: Dataset, spec: BinSpec, eval_data: Dataset | None = None):
    """Train from a seeded initialization; returns ``(model, history)``.

    Each epoch reshuffles the training set and drops a final batch with
    fewer than two samples.
    """
    if len(data) < 2:
        raise EmptyDatasetError(f"need at least 2 training samples, got {len(data)}")
    if data.bins is None:
        data = data.with_bins(spec)
    if eval_data is not None and eval_data.bins is None:
        eval_data = eval_data.with_bins(spec)

    init_seed, shuffle_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    model = init_model(
        data.d_in,
        spec.k,
        hidden=cfg.hidden,
        dim=cfg.dim,
        tau=cfg.tau,
        seed=init_seed,
        use_encoder=cfg.use_encoder,
        delta_variant=cfg.delta_variant,
    )
    rng = np.random.default_rng(shuffle_seed)
    state = AdamState()
    history = TrainHistory()
    if np.unique(data.bins).size == 1:
        history.warnings.append("all training samples fall in one bin")
    constraints = {"delta": clamp_delta}

    step = 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(len(data))
        seen, fallbacks = [], 0
        for idx in _batches(perm, cfg.batch_size):
            step += 1
            y = data.y[idx]
            breakdown, grads = train_step(model, data.X[idx], y, data.bins[idx], spec, cfg)
            if not math.isfinite(breakdown.total):
                raise NonFiniteError(f"non-finite loss at epoch {epoch}, step {step}")
            if cfg.loss == "fcrc" and cfg.lambda_mode == "mean":
                fallbacks += int(degenerate_rows(y, cfg.distance).sum())
            params, state = adam_step(model.named(), grads, state, cfg.learning_rate, constraints)
            model = model.with_named(params)
            seen.append(breakdown)
        if fallbacks:
            history.warnings.append(f"epoch {epoch}: {fallbacks} anchor(s) used the uniform lambda fallback")
        history.losses.append(_mean_breakdown(seen))
        if eval_data is not None:
            metrics = evaluate(model, eval_data, spec)
            history.eval_mae.append(metrics.mae)
            history.eval_accuracy.append(metrics.coarse_accuracy)
        else:
            history.eval_mae.append(float("nan"))
            history.eval_accuracy.append(float("nan"))
    return model, history
