"""Windowed median transformation and the pairwise-distance protected template."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DimensionError, TemplateFileError
from .keyspace import KeySet, RandomVector

TEMPLATE_MAGIC = b"CBT1"


@dataclass(frozen=True)
class ProtectedTemplate:
    distances: np.ndarray  # float64, length n*(n-1)/2, lexicographic (i, j) pairs
    n: int
    key_id: str
    feature_length: int

    def __post_init__(self):
        d = np.ascontiguousarray(self.distances, dtype=np.float64)
        if d.ndim != 1 or d.size != self.n * (self.n - 1) // 2:
            raise DimensionError(f"template for n={self.n} needs {self.n * (self.n - 1) // 2} distances, got {d.size}")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)

    def __len__(self) -> int:
        return self.distances.size

    def __eq__(self, other):
        if not isinstance(other, ProtectedTemplate):
            return NotImplemented
        return (self.n == other.n and self.key_id == other.key_id
                and self.feature_length == other.feature_length
                and np.array_equal(self.distances, other.distances))

    __hash__ = None


class _WindowPlan:
    """Gather indices for one random vector, grouped by window size."""

    def __init__(self, windows: tuple[int, ...]):
        w = np.asarray(windows, dtype=np.int64)
        starts = np.concatenate(([0], np.cumsum(w)[:-1]))
        self.windows = w
        self.length = int(w.sum())
        self.groups = []
        for size in np.unique(w):
            which = np.flatnonzero(w == size)
            idx = starts[which][:, None] + np.arange(size)[None, :]
            self.groups.append((which, idx))

    def medians(self, values: np.ndarray) -> np.ndarray:
        # windows are at most a few dozen wide: a row sort beats np.median
        out = np.empty(self.windows.size)
        for which, idx in self.groups:
            size = idx.shape[1]
            g = np.sort(values[idx], axis=1)
            if size % 2:
                out[which] = g[:, size // 2]
            else:
                out[which] = 0.5 * (g[:, size // 2 - 1] + g[:, size // 2])
        return out

    def apply(self, values: np.ndarray) -> np.ndarray:
        return np.repeat(self.medians(values), self.windows)


@lru_cache(maxsize=128)
def _plan(windows: tuple[int, ...]) -> _WindowPlan:
    return _WindowPlan(windows)


def transform(features, vector: RandomVector) -> np.ndarray:
    """Replace every window of ``features`` by copies of its median.

    Even-sized windows use the mean of the two central values.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 1 or f.size != vector.feature_length:
        raise DimensionError(
            f"feature vector of length {f.size} does not match random vector length {vector.feature_length}")
    return _plan(vector.windows).apply(f)


def pair_index(n: int) -> list[tuple[int, int]]:
    """Pairs (i, j), i < j, in the order the template stores them."""
    return list(combinations(range(n), 2))


def pairwise_distances(vectors: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows, lexicographic pair order.

    Computed from row differences rather than a Gram matrix so that
    translating every row by the same vector leaves the result unchanged
    to rounding.
    """
    return pdist(np.asarray(vectors, dtype=np.float64), metric="euclidean")


def generate_template(features, key_set: KeySet) -> ProtectedTemplate:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 1 or f.size != key_set.feature_length:
        raise DimensionError(
            f"feature vector of length {f.size} does not match key set length {key_set.feature_length}")
    if key_set.n < 2:
        raise DimensionError("a template needs at least two random vectors")
    transformed = np.empty((key_set.n, f.size))
    for i, vec in enumerate(key_set.vectors):
        transformed[i] = transform(f, vec)
    return ProtectedTemplate(pairwise_distances(transformed), key_set.n, key_set.key_id, key_set.feature_length)


# -- template files ----------------------------------------------------------

def template_to_bytes(t: ProtectedTemplate) -> bytes:
    kid = t.key_id.encode("utf-8")
    header = TEMPLATE_MAGIC + struct.pack("<IQI", t.n, t.feature_length, len(kid)) + kid
    return header + t.distances.astype("<f8").tobytes()


def template_from_bytes(data: bytes) -> ProtectedTemplate:
    if data[:4] != TEMPLATE_MAGIC:
        raise TemplateFileError("not a CBT1 template (bad magic bytes)")
    try:
        n, l, klen = struct.unpack_from("<IQI", data, 4)
    except struct.error:
        raise TemplateFileError("truncated template header") from None
    off = 4 + 16 + klen
    if len(data) < off:
        raise TemplateFileError("truncated key id")
    try:
        key_id = data[20:off].decode("utf-8")
    except UnicodeDecodeError:
        raise TemplateFileError("key id is not valid UTF-8") from None
    m = n * (n - 1) // 2
    if n < 2 or len(data) != off + 8 * m:
        raise TemplateFileError(f"template body holds {len(data) - off} bytes, expected {8 * m} for n={n}")
    d = np.frombuffer(data, dtype="<f8", count=m, offset=off).astype(np.float64)
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise TemplateFileError("template distances must be finite and non-negative")
    return ProtectedTemplate(d, n, key_id, l)


def save_template(t: ProtectedTemplate, path: str | Path) -> None:
    Path(path).write_bytes(template_to_bytes(t))


def load_template(path: str | Path) -> ProtectedTemplate:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise TemplateFileError(f"cannot read template {path}: {exc}") from exc
    return template_from_bytes(data)


def template_to_csv(t: ProtectedTemplate) -> str:
    lines = ["i,j,distance"]
    for (i, j), d in zip(pair_index(t.n), t.distances.tolist()):
        lines.append(f"{i + 1},{j + 1},{d!r}")
    return "\n".join(lines) + "\n"
