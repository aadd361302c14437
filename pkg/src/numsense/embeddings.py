"""Small stand-ins for the two towers of a dual encoder.

The "image" side is a two-layer tanh network, the "text" side a learnable
table with one embedding row per concept bin. Both produce unit-norm rows,
so their dot products are cosine similarities.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Union

import numpy as np

from . import numcore as nc
from .errors import ShapeMismatchError

DEFAULT_TAU = 0.07
DEFAULT_HIDDEN = 32
DEFAULT_DIM = 16
PROMPT_INIT_STD = 0.02

Param = Union[np.ndarray, nc.DiffNode]


@dataclass
class EncoderParams:
    W1: Param  # D_in x H
    b1: Param  # 1 x H
    W2: Param  # H x D
    b2: Param  # 1 x D

    @property
    def d_in(self) -> int:
        return _shape(self.W1)[0]

    @property
    def hidden(self) -> int:
        return _shape(self.W1)[1]

    @property
    def dim(self) -> int:
        return _shape(self.W2)[1]

    def map(self, fn) -> "EncoderParams":
        return EncoderParams(*(fn(getattr(self, f.name)) for f in fields(self)))


@dataclass
class PromptTable:
    table: Param  # K x D

    @property
    def k(self) -> int:
        return _shape(self.table)[0]


def _shape(p: Param) -> tuple[int, int]:
    return p.shape


def init_encoder(d_in: int, hidden: int = DEFAULT_HIDDEN, dim: int = DEFAULT_DIM, rng=None) -> EncoderParams:
    rng = np.random.default_rng(rng)
    return EncoderParams(
        W1=rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_in, hidden)),
        b1=np.zeros((1, hidden)),
        W2=rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, dim)),
        b2=np.zeros((1, dim)),
    )


def init_prompts(k: int, dim: int = DEFAULT_DIM, rng=None) -> PromptTable:
    rng = np.random.default_rng(rng)
    return PromptTable(rng.normal(0.0, PROMPT_INIT_STD, size=(k, dim)))


def _ones_column(n: int) -> nc.DiffNode:
    return nc.constant(np.ones((n, 1)))


def encode(params: EncoderParams | None, X) -> nc.DiffNode:
    """Unit-norm embeddings of the rows of ``X``.

    With ``params=None`` the encoder is bypassed and the raw feature rows are
    only normalized (used for precomputed embeddings).
    """
    X = nc.as_node(X)
    if params is None:
        return nc.l2_normalize_rows(X)
    if X.shape[1] != params.d_in:
        raise ShapeMismatchError(f"encoder expects {params.d_in} input columns, got {X.shape[1]}")
    ones = _ones_column(X.shape[0])
    h = nc.tanh(nc.matmul(X, params.W1) + nc.matmul(ones, params.b1))
    z = nc.matmul(h, params.W2) + nc.matmul(ones, params.b2)
    return nc.l2_normalize_rows(z)


def prompt_rows(table: PromptTable | Param, bins) -> nc.DiffNode:
    """Unit-norm prompt embeddings for each entry of ``bins``, stacked in order."""
    if isinstance(table, PromptTable):
        table = table.table
    table = nc.as_node(table)
    bins = np.asarray(bins, dtype=np.intp).reshape(-1)
    if bins.size and (bins.min() < 0 or bins.max() >= table.shape[0]):
        raise IndexError(f"bin index out of range for a {table.shape[0]}-row prompt table")
    return nc.l2_normalize_rows(nc.row_select(table, bins))


def similarity_logits(Z, W, tau: float = DEFAULT_TAU) -> nc.DiffNode:
    """Entry (i, k) is cos(z_i, w_k) / tau for unit-norm rows ``Z`` and ``W``."""
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    Z, W = nc.as_node(Z), nc.as_node(W)
    if Z.shape[1] != W.shape[1]:
        raise ShapeMismatchError(f"embedding widths differ: {Z.shape[1]} vs {W.shape[1]}")
    return nc.scale(nc.matmul(Z, nc.transpose(W)), 1.0 / tau)
