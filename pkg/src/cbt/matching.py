"""Cosine-dissimilarity matching of protected templates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ArgumentError, DegenerateTemplateError, IncomparableTemplateError
from .template import ProtectedTemplate

FACE_THRESHOLD = 0.45
FINGERPRINT_THRESHOLD = 0.5
DEFAULT_THRESHOLDS = {"face": FACE_THRESHOLD, "fingerprint": FINGERPRINT_THRESHOLD}


def _vec(t) -> np.ndarray:
    return np.asarray(t.distances if isinstance(t, ProtectedTemplate) else t, dtype=np.float64)


def cosine_dissimilarity(a, b) -> float:
    """``1 - cos(a, b)``, clamped to [0, 1].

    Accepts templates or plain arrays.  For non-negative inputs the true
    value already lies in [0, 1]; the clamp only removes rounding residue.
    """
    x, y = _vec(a), _vec(b)
    if x.shape != y.shape:
        raise IncomparableTemplateError(f"template dimensions differ: {x.size} vs {y.size}")
    mx, my = np.max(np.abs(x), initial=0.0), np.max(np.abs(y), initial=0.0)
    if mx == 0 or my == 0:
        raise DegenerateTemplateError("cannot compare an all-zero template")
    if np.array_equal(x, y):
        return 0.0
    # rescale first so tiny or huge entries cannot underflow/overflow the norms
    x, y = x / mx, y / my
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    score = 1.0 - float(np.dot(x, y)) / (nx * ny)
    return min(max(score, 0.0), 1.0)


@dataclass(frozen=True)
class VerificationDecision:
    accepted: bool
    best_score: float
    threshold: float


@dataclass(frozen=True)
class IdentificationResult:
    ranking: tuple[tuple[str, float], ...]  # (subject_id, best score), ascending

    @property
    def best(self) -> tuple[str, float]:
        return self.ranking[0]

    def rank_of(self, subject_id) -> int:
        """1-based rank of ``subject_id``."""
        for k, (sid, _) in enumerate(self.ranking, start=1):
            if sid == subject_id:
                return k
        raise KeyError(subject_id)


def best_score(query, enrolled: Iterable) -> float:
    scores = [cosine_dissimilarity(query, t) for t in enrolled]
    if not scores:
        raise ArgumentError("no enrolled templates to compare against")
    return min(scores)


def verify(query, enrolled: Iterable, threshold: float = FACE_THRESHOLD) -> VerificationDecision:
    """Accept when the best (minimum) dissimilarity is strictly below ``threshold``."""
    s = best_score(query, enrolled)
    return VerificationDecision(accepted=s < threshold, best_score=s, threshold=threshold)


def identify(query, gallery: Mapping[str, Iterable]) -> IdentificationResult:
    """Rank every gallery subject by its best dissimilarity to ``query``.

    Ties are broken by subject id.
    """
    if not gallery:
        raise ArgumentError("gallery is empty")
    scored = [(sid, best_score(query, templates)) for sid, templates in gallery.items()]
    scored.sort(key=lambda item: (item[1], item[0]))
    return IdentificationResult(tuple(scored))
