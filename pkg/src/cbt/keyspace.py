"""Random window-size vectors (the revocable keys) and keyspace counting.

A random vector is an ordered sequence of window sizes in ``[2, 20]`` that
sums to the feature length.  A key set holds ``n`` distinct such vectors;
replacing the key set revokes every template made with it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ArgumentError, InfeasibleLengthError, KeyFileError

logger = logging.getLogger(__name__)

MIN_WINDOW = 2
MAX_WINDOW = 20
RECOMMENDED_N = (15, 30)
KEY_FILE_VERSION = 1


@dataclass(frozen=True)
class RandomVector:
    windows: tuple[int, ...]

    @property
    def feature_length(self) -> int:
        return sum(self.windows)

    def __len__(self) -> int:
        return len(self.windows)

    def validate(self, feature_length: int | None = None,
                 bounds: tuple[int, int] = (MIN_WINDOW, MAX_WINDOW)) -> None:
        lo, hi = bounds
        if not self.windows:
            raise InfeasibleLengthError("random vector has no windows")
        for w in self.windows:
            if not lo <= w <= hi:
                raise InfeasibleLengthError(
                    f"window size {w} violates the bound {lo} <= r <= {hi}")
        if feature_length is not None and self.feature_length != feature_length:
            raise InfeasibleLengthError(
                f"windows sum to {self.feature_length}, expected {feature_length}")


@dataclass(frozen=True)
class KeySet:
    vectors: tuple[RandomVector, ...]
    feature_length: int
    key_id: str
    seed: str | None = None

    @property
    def n(self) -> int:
        return len(self.vectors)

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self):
        return iter(self.vectors)

    def validate(self) -> None:
        if self.n < 2:
            raise ArgumentError(f"a key set needs at least 2 vectors, got {self.n}")
        for v in self.vectors:
            v.validate(self.feature_length)
        if len({v.windows for v in self.vectors}) != self.n:
            raise ArgumentError("random vectors in a key set must be pairwise distinct")


def _check_bounds(bounds: tuple[int, int]) -> tuple[int, int]:
    lo, hi = int(bounds[0]), int(bounds[1])
    if lo < 1 or hi < lo:
        raise ArgumentError(f"invalid window bounds {bounds}")
    return lo, hi


def _feasible_remainders(l: int, lo: int, hi: int) -> np.ndarray:
    # ok[r] is True when r can be written as a sum of parts in [lo, hi]
    ok = np.zeros(l + 1, dtype=bool)
    ok[0] = True
    for r in range(lo, l + 1):
        ok[r] = ok[max(0, r - hi):r - lo + 1].any()
    return ok


@lru_cache(maxsize=64)
def _always_feasible_from(lo: int, hi: int) -> int | None:
    """Smallest L such that every length >= L splits into windows, or None."""
    ok = _feasible_remainders(hi * hi + 2 * hi, lo, hi)
    run = 0
    for r in range(1, len(ok)):
        run = run + 1 if ok[r] else 0
        if run == lo:
            return r - lo + 1
    return None


def generate_random_vector(l: int, bounds: tuple[int, int] = (MIN_WINDOW, MAX_WINDOW),
                           seed=None) -> RandomVector:
    """Draw window sizes uniformly left to right until they sum to ``l``.

    Each draw is restricted to the sizes that leave a completable remainder,
    so the result always satisfies the bounds without a rejection loop.
    ``seed`` is anything accepted by ``numpy.random.default_rng``.
    """
    lo, hi = _check_bounds(bounds)
    l = int(l)
    if l < lo:
        raise InfeasibleLengthError(f"feature length {l} cannot be split into windows of size {lo}..{hi}")
    rng = np.random.default_rng(seed)

    # While the remainder stays above `safe`, every size in [lo, hi] is an
    # allowed draw, so draws can be batched.
    windows: list[int] = []
    remaining = l
    floor = _always_feasible_from(lo, hi)
    if floor is not None:
        safe = floor + hi
        while remaining > safe:
            batch = rng.integers(lo, hi + 1, size=(remaining - safe) // lo + 1)
            csum = np.cumsum(batch)
            keep = max(1, int(np.searchsorted(csum, remaining - safe, side="right")))
            windows.extend(batch[:keep].tolist())
            remaining -= int(csum[keep - 1])

    ok = _feasible_remainders(remaining, lo, hi)
    if not ok[remaining]:
        raise InfeasibleLengthError(f"feature length {l} cannot be split into windows of size {lo}..{hi}")
    while remaining > 0:
        choices = [w for w in range(lo, min(hi, remaining) + 1) if ok[remaining - w]]
        w = choices[int(rng.integers(len(choices)))]
        windows.append(w)
        remaining -= w
    return RandomVector(tuple(windows))


def _key_id(vectors) -> str:
    h = hashlib.sha256()
    for v in vectors:
        h.update(np.asarray(v.windows, dtype="<u2").tobytes())
        h.update(b"|")
    return h.hexdigest()[:16]


def generate_key_set(n: int, l: int, seed=None,
                     bounds: tuple[int, int] = (MIN_WINDOW, MAX_WINDOW),
                     key_id: str | None = None) -> KeySet:
    """Generate ``n`` pairwise-distinct random vectors for feature length ``l``.

    A collision is resolved by redrawing from a fresh child seed.  Raises
    ``InfeasibleLengthError`` if fewer than ``n`` distinct vectors exist.
    """
    if n < 2:
        raise ArgumentError(f"n must be at least 2 (template would be empty), got {n}")
    if not RECOMMENDED_N[0] <= n <= RECOMMENDED_N[1]:
        warnings.warn(f"n={n} is outside the recommended range {RECOMMENDED_N[0]}..{RECOMMENDED_N[1]}",
                      stacklevel=2)
    lo, hi = _check_bounds(bounds)
    if l <= 4 * hi:
        # for longer vectors the composition count dwarfs any sensible n
        available = count_compositions_bounded(l, (lo, hi))
        if available < n:
            raise InfeasibleLengthError(f"only {available} distinct vectors exist for l={l}, asked for {n}")

    ss = np.random.SeedSequence(seed)
    vectors: list[RandomVector] = []
    seen: set[tuple[int, ...]] = set()
    for child in ss.spawn(n):
        v = generate_random_vector(l, (lo, hi), child)
        while v.windows in seen:
            (child,) = child.spawn(1)
            v = generate_random_vector(l, (lo, hi), child)
        seen.add(v.windows)
        vectors.append(v)
    vectors_t = tuple(vectors)
    return KeySet(vectors=vectors_t, feature_length=int(l),
                  key_id=key_id or _key_id(vectors_t),
                  seed=None if seed is None else str(seed))


# -- key files ---------------------------------------------------------------

def key_set_to_dict(ks: KeySet) -> dict:
    return {
        "version": KEY_FILE_VERSION,
        "key_id": ks.key_id,
        "l": ks.feature_length,
        "n": ks.n,
        "vectors": [list(v.windows) for v in ks.vectors],
        "seed": ks.seed,
    }


def key_set_from_dict(data: dict) -> KeySet:
    if not isinstance(data, dict):
        raise KeyFileError("key file must hold a JSON object")
    if data.get("version") != KEY_FILE_VERSION:
        raise KeyFileError(f"unsupported key file version {data.get('version')!r}")
    try:
        l = data["l"]
        n = data["n"]
        raw = data["vectors"]
        key_id = data["key_id"]
    except KeyError as exc:
        raise KeyFileError(f"key file missing field {exc}") from None
    if not (isinstance(l, int) and isinstance(n, int) and isinstance(raw, list) and isinstance(key_id, str)):
        raise KeyFileError("key file fields have the wrong types")
    if len(raw) != n:
        raise KeyFileError(f"key file declares n={n} but holds {len(raw)} vectors")
    vectors = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or not all(isinstance(w, int) and not isinstance(w, bool) for w in row):
            raise KeyFileError(f"vector {i} is not a list of integers")
        vectors.append(RandomVector(tuple(row)))
    seed = data.get("seed")
    ks = KeySet(tuple(vectors), l, key_id, None if seed is None else str(seed))
    try:
        ks.validate()
    except (InfeasibleLengthError, ArgumentError) as exc:
        raise KeyFileError(f"invariant violation: {exc}") from exc
    return ks


def save_key_set(ks: KeySet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(key_set_to_dict(ks), separators=(",", ":")) + "\n")


def load_key_set(path: str | Path) -> KeySet:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise KeyFileError(f"cannot read key file {path}: {exc}") from exc
    return key_set_from_dict(data)


# -- counting ----------------------------------------------------------------

@lru_cache(maxsize=None)
def partitions_into_k(k: int, l: int) -> int:
    """Partitions of ``l`` into exactly ``k`` positive parts (no size bound).

    Uses P_k(l) = P_k(l - k) + P_{k-1}(l - 1), filled bottom-up so deep
    arguments do not hit the recursion limit.
    """
    if k < 0 or l < 0:
        return 0
    if k == 0:
        return 1 if l == 0 else 0
    if k > l:
        return 0
    # row[j] holds P_kk(j) for the current kk
    prev = [1] + [0] * l  # kk = 0
    for kk in range(1, k + 1):
        row = [0] * (l + 1)
        for j in range(kk, l + 1):
            row[j] = row[j - kk] + prev[j - 1]
        prev = row
    return prev[l]


def count_partitions_paper(l: int, bounds: tuple[int, int] = (MIN_WINDOW, MAX_WINDOW)) -> int:
    """Sum of P_k(l) for k from ceil(l/hi) to floor(l/lo).

    The window bounds only restrict the number of parts here; the parts
    themselves are unrestricted, so partitions containing 1s or parts above
    ``hi`` are counted.  See ``count_partitions_bounded`` for the exact
    number of admissible window multisets.
    """
    lo, hi = _check_bounds(bounds)
    l = int(l)
    if l < 1:
        return 0
    k_min, k_max = math.ceil(l / hi), l // lo
    if k_min > k_max:
        return 0
    # one table pass instead of a call per k
    total = 0
    prev = [1] + [0] * l
    for kk in range(1, k_max + 1):
        row = [0] * (l + 1)
        for j in range(kk, l + 1):
            row[j] = row[j - kk] + prev[j - 1]
        if kk >= k_min:
            total += row[l]
        prev = row
    return total


def count_partitions_bounded(l: int, bounds: tuple[int, int] = (MIN_WINDOW, MAX_WINDOW)) -> int:
    """Number of multisets of window sizes in ``bounds`` summing to ``l``."""
    lo, hi = _check_bounds(bounds)
    l = int(l)
    if l < 0:
        return 0
    # classic coin-change DP, one part size at a time
    ways = [1] + [0] * l
    for part in range(lo, hi + 1):
        for j in range(part, l + 1):
            ways[j] += ways[j - part]
    return ways[l] if l > 0 else 1


def count_compositions_bounded(l: int, bounds: tuple[int, int] = (MIN_WINDOW, MAX_WINDOW)) -> int:
    """Number of ordered window sequences with sizes in ``bounds`` summing to ``l``."""
    lo, hi = _check_bounds(bounds)
    l = int(l)
    if l < 0:
        return 0
    ways = [1] + [0] * l
    for j in range(1, l + 1):
        ways[j] = sum(ways[j - w] for w in range(lo, min(hi, j) + 1))
    return ways[l]


@dataclass(frozen=True)
class KeyspaceCount:
    l: int
    bounds: tuple[int, int]
    paper_partition_count: int
    exact_bounded_partition_count: int
    exact_bounded_composition_count: int

    def as_dict(self) -> dict:
        # decimal strings keep big integers exact in JSON consumers
        return {
            "l": self.l,
            "bounds": list(self.bounds),
            "paper_partition_count": str(self.paper_partition_count),
            "exact_bounded_partition_count": str(self.exact_bounded_partition_count),
            "exact_bounded_composition_count": str(self.exact_bounded_composition_count),
        }


def keyspace_count(l: int, bounds: tuple[int, int] = (MIN_WINDOW, MAX_WINDOW)) -> KeyspaceCount:
    bounds = _check_bounds(bounds)
    return KeyspaceCount(
        l=int(l),
        bounds=bounds,
        paper_partition_count=count_partitions_paper(l, bounds),
        exact_bounded_partition_count=count_partitions_bounded(l, bounds),
        exact_bounded_composition_count=count_compositions_bounded(l, bounds),
    )
