"""Synthetic ordinal data, the embeddings CSV format, and train/eval splits."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .binning import BinSpec, assign_bins
from .errors import EmptyDatasetError, ParseError


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray  # N x D_in
    y: np.ndarray  # N
    bins: np.ndarray | None = None  # N, filled by with_bins()

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError(f"features {X.shape} do not match {y.size} labels")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.bins is not None:
            bins = np.array(self.bins, dtype=np.intp).reshape(-1)
            if bins.size != y.size:
                raise ValueError(f"{bins.size} bin indices for {y.size} labels")
            object.__setattr__(self, "bins", bins)

    def __len__(self):
        return self.y.size

    @property
    def d_in(self) -> int:
        return self.X.shape[1]

    def with_bins(self, spec: BinSpec) -> "Dataset":
        return Dataset(self.X, self.y, assign_bins(self.y, spec))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.X[idx], self.y[idx], None if self.bins is None else self.bins[idx])


@dataclass(frozen=True)
class SyntheticConfig:
    n: int = 1000
    d_in: int = 8
    y_range: tuple[float, float] = (16.0, 77.0)
    noise_std: float = 0.3
    omega: float = 0.1
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.y_range
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not lo < hi:
            raise ValueError(f"label range needs lo < hi, got {self.y_range}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.d_in < 3:
            raise ValueError(f"d_in must be at least 3, got {self.d_in}")


def generate_synthetic(cfg: SyntheticConfig, spec: BinSpec) -> Dataset:
    """Labels uniform on ``cfg.y_range``; features trace a noisy curve.

    Row layout: ``[sin(omega t), cos(omega t), t rescaled to [-1, 1], 0, ...]``
    plus independent Gaussian noise on every coordinate.
    """
    lo, hi = (float(v) for v in cfg.y_range)
    if lo < spec.lo or hi > spec.hi:
        raise ValueError(f"label range [{lo}, {hi}] exceeds the bins [{spec.lo}, {spec.hi}]")
    rng = np.random.default_rng(cfg.seed)
    t = rng.uniform(lo, hi, size=cfg.n)
    X = np.zeros((cfg.n, cfg.d_in))
    X[:, 0] = np.sin(cfg.omega * t)
    X[:, 1] = np.cos(cfg.omega * t)
    X[:, 2] = 2.0 * (t - lo) / (hi - lo) - 1.0
    X += rng.normal(0.0, cfg.noise_std, size=X.shape)
    return Dataset(X, t, assign_bins(t, spec))


# ---------------------------------------------------------------------------
# embeddings CSV: header ``label,f0,...,f{D-1}``, repr-formatted floats


def write_embeddings_csv(data: Dataset, path) -> None:
    header = ",".join(["label"] + [f"f{j}" for j in range(data.d_in)])
    lines = [header]
    for label, row in zip(data.y.tolist(), data.X.tolist()):
        lines.append(",".join(repr(v) for v in [label, *row]))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def load_embeddings_csv(path, spec: BinSpec | None = None) -> Dataset:
    """Read an embeddings CSV; bins are assigned when ``spec`` is given."""
    text = Path(path).read_bytes().decode("utf-8")
    if not text:
        raise ParseError("empty file")
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    header = lines[0].split(",")
    width = len(header) - 1
    if header[0] != "label" or width < 1 or header[1:] != [f"f{j}" for j in range(width)]:
        raise ParseError(f"header must be label,f0,...,f{{D-1}}; got {lines[0]!r}", 1)
    if len(lines) == 1:
        raise EmptyDatasetError(f"{path}: no data rows")
    values = np.empty((len(lines) - 1, width + 1))
    for i, line in enumerate(lines[1:]):
        fields = line.split(",")
        if len(fields) != width + 1:
            raise ParseError(f"ragged row: {len(fields)} fields, expected {width + 1}", i + 2)
        try:
            values[i] = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", i + 2) from None
    if not np.all(np.isfinite(values)):
        raise ParseError("non-finite value")
    data = Dataset(values[:, 1:], values[:, 0])
    return data if spec is None else data.with_bins(spec)


def split(data: Dataset, train_fraction: float = 0.8, shots_per_bin: int | None = None, seed: int = 0):
    """Seeded shuffle into ``(train, eval)``.

    With ``shots_per_bin`` the train part takes that many samples from each
    bin (all of them when a bin is smaller) and everything else is eval.
    """
    n = len(data)
    perm = np.random.default_rng(seed).permutation(n)
    if shots_per_bin is not None:
        if data.bins is None:
            raise ValueError("shots_per_bin needs a dataset with bins assigned")
        if shots_per_bin < 1:
            raise ValueError("shots_per_bin must be at least 1")
        taken = np.zeros(n, dtype=bool)
        counts: dict[int, int] = {}
        for i in perm:
            b = int(data.bins[i])
            if counts.get(b, 0) < shots_per_bin:
                counts[b] = counts.get(b, 0) + 1
                taken[i] = True
        train_idx, eval_idx = perm[taken[perm]], perm[~taken[perm]]
    else:
        if not 0.0 < train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
        n_train = int(round(train_fraction * n))
        train_idx, eval_idx = perm[:n_train], perm[n_train:]
    if train_idx.size == 0 or eval_idx.size == 0:
        raise EmptyDatasetError(f"split produced {train_idx.size} train and {eval_idx.size} eval samples")
    return data.subset(train_idx), data.subset(eval_idx)
