"""Model parameters, the forward pass, and the binary checkpoint format.

Checkpoint layout (all little-endian)::

    b"NCLP"                     4 bytes
    version, D_in, H, D, K      five int32
    zero padding                4 bytes
    float64 parameters          W1, b1, W2, b2, prompts, delta, tau
                                [+ A, a, B, c of the delta network, version 2]

``H == 0`` marks a model without an encoder (raw features are normalized
and used directly); the encoder arrays are then absent and ``D == D_in``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numcore as nc
from .binning import BinSpec
from .embeddings import (
    DEFAULT_DIM,
    DEFAULT_HIDDEN,
    DEFAULT_TAU,
    EncoderParams,
    encode,
    init_encoder,
    init_prompts,
    similarity_logits,
)
from .head import DeltaNet, class_probabilities, delta_from_network, init_delta_net, predict, predict_with_shifts

MAGIC = b"NCLP"
HEADER = struct.Struct("<4s5i4x")
VERSION_FREE_DELTA = 1
VERSION_DELTA_NET = 2


@dataclass
class ModelParams:
    encoder: EncoderParams | None
    prompts: object  # K x D
    delta: object  # 1 x K
    tau: float = DEFAULT_TAU
    delta_net: DeltaNet | None = None

    @property
    def k(self) -> int:
        return self.prompts.shape[0]

    @property
    def dim(self) -> int:
        return self.prompts.shape[1]

    def named(self) -> dict:
        """Trainable arrays (or nodes) keyed by name, in declaration order."""
        out = {}
        if self.encoder is not None:
            out.update(W1=self.encoder.W1, b1=self.encoder.b1, W2=self.encoder.W2, b2=self.encoder.b2)
        out["prompts"] = self.prompts
        out["delta"] = self.delta
        if self.delta_net is not None:
            out.update(
                net_A=self.delta_net.A, net_a=self.delta_net.a, net_B=self.delta_net.B, net_c=self.delta_net.c
            )
        return out

    def map(self, fn) -> "ModelParams":
        return ModelParams(
            None if self.encoder is None else self.encoder.map(fn),
            fn(self.prompts),
            fn(self.delta),
            self.tau,
            None if self.delta_net is None else self.delta_net.map(fn),
        )

    def with_named(self, arrays: dict) -> "ModelParams":
        enc = None
        if self.encoder is not None:
            enc = EncoderParams(arrays["W1"], arrays["b1"], arrays["W2"], arrays["b2"])
        net = None
        if self.delta_net is not None:
            net = DeltaNet(arrays["net_A"], arrays["net_a"], arrays["net_B"], arrays["net_c"])
        return ModelParams(enc, arrays["prompts"], arrays["delta"], self.tau, net)


def init_model(
    d_in: int,
    k: int,
    hidden: int = DEFAULT_HIDDEN,
    dim: int = DEFAULT_DIM,
    tau: float = DEFAULT_TAU,
    seed: int = 0,
    use_encoder: bool = True,
    delta_variant: str = "free",
) -> ModelParams:
    if delta_variant not in ("free", "network"):
        raise ValueError(f"unknown delta variant {delta_variant!r}")
    rng = np.random.default_rng(seed)
    encoder = init_encoder(d_in, hidden, dim, rng) if use_encoder else None
    prompts = init_prompts(k, dim if use_encoder else d_in, rng).table
    net = init_delta_net(k, rng) if delta_variant == "network" else None
    return ModelParams(encoder, prompts, np.zeros((1, k)), float(tau), net)


@dataclass
class Forward:
    embeddings: nc.DiffNode  # N x D, unit rows
    prompt_table: nc.DiffNode  # K x D, unit rows
    logits: nc.DiffNode  # N x K
    probabilities: nc.DiffNode
    predictions: nc.DiffNode  # N x 1


def forward(model: ModelParams, X, spec: BinSpec) -> Forward:
    """Embed ``X``, score it against every concept prompt, and predict a value.

    ``model`` may hold arrays (constants) or leaf nodes (for training).
    """
    Z = encode(model.encoder, X)
    table = nc.l2_normalize_rows(nc.as_node(model.prompts))
    logits = similarity_logits(Z, table, model.tau)
    probs = class_probabilities(logits)
    if model.delta_net is None:
        y = predict(probs, spec, model.delta)
    else:
        y = predict_with_shifts(probs, spec, delta_from_network(model.delta_net, probs))
    return Forward(Z, table, logits, probs, y)


# ---------------------------------------------------------------------------
# checkpoint


def save_checkpoint(model: ModelParams, path) -> None:
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in model.named().items()}
    version = VERSION_FREE_DELTA if model.delta_net is None else VERSION_DELTA_NET
    if model.encoder is None:
        d_in, hidden = model.dim, 0
    else:
        d_in, hidden = arrays["W1"].shape
    header = HEADER.pack(MAGIC, version, d_in, hidden, model.dim, model.k)
    body = [arrays[name] for name in arrays if not name.startswith("net_")]
    body.append(np.array([model.tau]))
    body += [arrays[name] for name in arrays if name.startswith("net_")]
    payload = b"".join(a.astype("<f8").tobytes(order="C") for a in body)
    Path(path).write_bytes(header + payload)


def load_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError("checkpoint truncated before end of header")
    magic, version, d_in, hidden, dim, k = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"not a checkpoint file (magic {magic!r})")
    if version not in (VERSION_FREE_DELTA, VERSION_DELTA_NET):
        raise ValueError(f"unsupported checkpoint version {version}")
    shapes = []
    if hidden:
        shapes += [(d_in, hidden), (1, hidden), (hidden, dim), (1, dim)]
    shapes += [(k, dim), (1, k), (1, 1)]
    if version == VERSION_DELTA_NET:
        shapes += [(k, k), (1, k), (k, k), (1, k)]
    expected = HEADER.size + 8 * sum(r * c for r, c in shapes)
    if len(raw) != expected:
        raise ValueError(f"checkpoint is {len(raw)} bytes, header implies {expected}")
    flat = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).astype(np.float64)
    parts, pos = [], 0
    for r, c in shapes:
        parts.append(flat[pos : pos + r * c].reshape(r, c).copy())
        pos += r * c
    encoder = EncoderParams(*parts[:4]) if hidden else None
    rest = parts[4:] if hidden else parts
    prompts, delta, tau = rest[0], rest[1], float(rest[2][0, 0])
    net = DeltaNet(*rest[3:7]) if version == VERSION_DELTA_NET else None
    return ModelParams(encoder, prompts, delta, tau, net)
