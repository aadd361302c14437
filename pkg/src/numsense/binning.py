"""Label bins with concept names, and label distances between samples."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadArityError, OutOfRangeError, ParseError

AGE_CONCEPTS = ("teenager", "young adult", "middle adult", "older adult", "senior")
DECADE_CONCEPTS = ("1930s", "1940s", "1950s", "1960s", "1970s")
AESTHETICS_CONCEPTS = ("unacceptable", "flawed", "ordinary", "professional", "exceptional")


class DistanceKind(str, enum.Enum):
    ABSOLUTE = "absolute"
    SQRT_ABSOLUTE = "sqrt"
    SQUARED = "squared"

    @classmethod
    def parse(cls, name: "str | DistanceKind") -> "DistanceKind":
        if isinstance(name, cls):
            return name
        aliases = {"abs": "absolute", "sqrt-absolute": "sqrt", "sqrt_absolute": "sqrt", "square": "squared"}
        name = aliases.get(name, name)
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown distance kind {name!r}; expected absolute, sqrt or squared") from None


def label_distance(y_i, y_j, kind="absolute"):
    """Distance between labels; works elementwise on arrays.

    ``sqrt`` is taken of the absolute difference so the result is symmetric.
    """
    kind = DistanceKind.parse(kind)
    diff = np.abs(np.asarray(y_i, dtype=np.float64) - np.asarray(y_j, dtype=np.float64))
    if kind is DistanceKind.ABSOLUTE:
        out = diff
    elif kind is DistanceKind.SQRT_ABSOLUTE:
        out = np.sqrt(diff)
    else:
        out = diff * diff
    return float(out) if out.ndim == 0 else out


def pairwise_distances(labels, kind="absolute") -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    return label_distance(y[:, None], y[None, :], kind)


@dataclass(frozen=True)
class BinSpec:
    """Contiguous bins ``[edges[i], edges[i+1])`` (last one closed) with centers and names."""

    edges: np.ndarray
    centers: np.ndarray
    concepts: tuple[str, ...]

    def __post_init__(self):
        edges = np.array(self.edges, dtype=np.float64).reshape(-1)
        centers = np.array(self.centers, dtype=np.float64).reshape(-1)
        concepts = tuple(str(c) for c in self.concepts)
        k = edges.size - 1
        if k < 2:
            raise BadArityError(f"need at least 2 bins, got {k}")
        if centers.size != k or len(concepts) != k:
            raise BadArityError(
                f"{k} bins but {centers.size} centers and {len(concepts)} concept names"
            )
        if not np.all(np.isfinite(edges)) or not np.all(np.diff(edges) > 0):
            raise ValueError("bin edges must be finite and strictly ascending")
        if np.any(centers < edges[:-1]) or np.any(centers > edges[1:]):
            raise ValueError("every center must lie inside its bin")
        edges.setflags(write=False)
        centers.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "concepts", concepts)

    @property
    def k(self) -> int:
        return self.centers.size

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])

    def __eq__(self, other):
        if not isinstance(other, BinSpec):
            return NotImplemented
        return (
            np.array_equal(self.edges, other.edges)
            and np.array_equal(self.centers, other.centers)
            and self.concepts == other.concepts
        )

    __hash__ = None


def default_concepts(k: int) -> tuple[str, ...]:
    if k == len(AGE_CONCEPTS):
        return AGE_CONCEPTS
    return tuple(f"level {i}" for i in range(k))


def default_bins(y_min: float, y_max: float, k: int, concepts: Sequence[str] | None = None) -> BinSpec:
    """Uniform-width bins over ``[y_min, y_max]`` with midpoint centers."""
    if not y_min < y_max:
        raise ValueError(f"need y_min < y_max, got {y_min}, {y_max}")
    if k < 2:
        raise BadArityError(f"need at least 2 bins, got {k}")
    if concepts is None:
        concepts = default_concepts(k)
    if len(concepts) != k:
        raise BadArityError(f"{k} bins but {len(concepts)} concept names")
    edges = np.linspace(y_min, y_max, k + 1)
    return BinSpec(edges, 0.5 * (edges[:-1] + edges[1:]), tuple(concepts))


def assign_bins(y, spec: BinSpec) -> np.ndarray:
    """Vectorized :func:`assign_bin`."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    bad = (y < spec.edges[0]) | (y > spec.edges[-1]) | ~np.isfinite(y)
    if np.any(bad):
        raise OutOfRangeError(
            f"label {float(y[bad][0])!r} outside [{spec.lo}, {spec.hi}]"
        )
    idx = np.searchsorted(spec.edges, y, side="right") - 1
    return np.minimum(idx, spec.k - 1).astype(np.intp)


def assign_bin(y: float, spec: BinSpec) -> int:
    return int(assign_bins([y], spec)[0])


# ---------------------------------------------------------------------------
# bin file: one ``edge_lo,edge_hi,center,concept-name`` line per bin


def load_bins(path) -> BinSpec:
    text = Path(path).read_bytes().decode("utf-8")
    edges, centers, concepts = [], [], []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        parts = line.split(",", 3)
        if len(parts) != 4:
            raise ParseError("expected edge_lo,edge_hi,center,concept-name", lineno)
        try:
            lo, hi, center = (float(p) for p in parts[:3])
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", lineno) from None
        if edges and lo != edges[-1]:
            raise ParseError(f"bin starts at {lo} but previous bin ends at {edges[-1]}", lineno)
        if not edges:
            edges.append(lo)
        edges.append(hi)
        centers.append(center)
        concepts.append(parts[3])
    if not centers:
        raise ParseError("empty bin file")
    return BinSpec(edges, centers, tuple(concepts))


def save_bins(spec: BinSpec, path) -> None:
    lines = [
        f"{float(spec.edges[i])!r},{float(spec.edges[i + 1])!r},"
        f"{float(spec.centers[i])!r},{spec.concepts[i]}\n"
        for i in range(spec.k)
    ]
    Path(path).write_bytes("".join(lines).encode("utf-8"))
