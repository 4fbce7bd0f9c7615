"""Verification/identification metrics and the unlinkability analysis.

Scores are dissimilarities: a comparison is accepted when its score is
strictly below the threshold, the same convention as ``matching.verify``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, UndefinedDIError


@dataclass(frozen=True)
class ScoreSet:
    genuine: np.ndarray
    imposter: np.ndarray

    @classmethod
    def of(cls, genuine, imposter) -> "ScoreSet":
        g = np.asarray(genuine, dtype=np.float64).ravel()
        i = np.asarray(imposter, dtype=np.float64).ravel()
        if g.size == 0 or i.size == 0:
            raise ArgumentError("genuine and imposter score sets must be non-empty")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(i))):
            raise ArgumentError("scores must be finite")
        return cls(g, i)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray

    def rows(self):
        return zip(self.thresholds.tolist(), self.far.tolist(), self.frr.tolist())


def _as_scoreset(scores) -> ScoreSet:
    if isinstance(scores, ScoreSet):
        return scores
    g, i = scores
    return ScoreSet.of(g, i)


def rates_at(scores, thresholds) -> tuple[np.ndarray, np.ndarray]:
    """FAR and FRR at each threshold (accept iff score < threshold)."""
    s = _as_scoreset(scores)
    t = np.asarray(thresholds, dtype=np.float64)
    g = np.sort(s.genuine)
    i = np.sort(s.imposter)
    far = np.searchsorted(i, t, side="left") / i.size
    frr = 1.0 - np.searchsorted(g, t, side="left") / g.size
    return far, frr


def far_frr_curve(scores, num_thresholds: int = 1001, lo: float = 0.0, hi: float = 1.0) -> RocCurve:
    """FAR/FRR on a uniform threshold grid over ``[lo, hi]`` (default [0, 1])."""
    if num_thresholds < 2:
        raise ArgumentError("num_thresholds must be at least 2")
    if not hi > lo:
        raise ArgumentError(f"threshold range [{lo}, {hi}] is empty")
    t = np.linspace(lo, hi, num_thresholds)
    far, frr = rates_at(scores, t)
    return RocCurve(t, far, frr)


def compute_eer(curve: RocCurve) -> tuple[float, float]:
    """Equal error rate and its threshold from a sampled FAR/FRR curve.

    The crossing of FAR - FRR is located between adjacent grid points and
    linearly interpolated.  When the difference is exactly zero over a run
    of grid points the midpoint of that run is reported.  If the curves
    never cross on the grid, the endpoint with the smaller gap is used.
    """
    t, far, frr = curve.thresholds, curve.far, curve.frr
    diff = far - frr
    nonneg = np.flatnonzero(diff >= 0)
    if nonneg.size == 0:
        k = len(t) - 1
        return float((far[k] + frr[k]) / 2), float(t[k])
    k = int(nonneg[0])
    if diff[k] == 0:
        m = k
        while m + 1 < len(t) and diff[m + 1] == 0:
            m += 1
        return float(far[k]), float((t[k] + t[m]) / 2)
    if k == 0:
        return float((far[0] + frr[0]) / 2), float(t[0])
    # diff[k-1] < 0 < diff[k]
    w = -diff[k - 1] / (diff[k] - diff[k - 1])
    f = far[k - 1] + w * (far[k] - far[k - 1])
    r = frr[k - 1] + w * (frr[k] - frr[k - 1])
    return float((f + r) / 2), float(t[k - 1] + w * (t[k] - t[k - 1]))


def compute_di(scores) -> float:
    """Decidability index |mu_g - mu_i| / sqrt((var_g + var_i) / 2), sample variances."""
    s = _as_scoreset(scores)
    if s.genuine.size < 2 or s.imposter.size < 2:
        raise UndefinedDIError("decidability index needs at least 2 genuine and 2 imposter scores")
    pooled = (np.var(s.genuine, ddof=1) + np.var(s.imposter, ddof=1)) / 2
    if pooled == 0:
        raise UndefinedDIError("both score sets have zero variance")
    return float(abs(s.genuine.mean() - s.imposter.mean()) / np.sqrt(pooled))


def cmc(ranks: Sequence[int], gallery_size: int) -> np.ndarray:
    """Cumulative match characteristic.

    ``ranks`` holds the 1-based rank of the true subject for every probe;
    entry ``k - 1`` of the result is the fraction of probes ranked within
    the top ``k``.
    """
    r = np.asarray(ranks, dtype=int)
    if r.size == 0:
        raise ArgumentError("no identification results")
    if gallery_size < 1 or r.min() < 1 or r.max() > gallery_size:
        raise ArgumentError("ranks must lie in 1..gallery_size")
    hits = np.bincount(r, minlength=gallery_size + 1)[1:]
    return np.cumsum(hits) / r.size


def cmc_from_results(results, true_ids: Sequence) -> np.ndarray:
    """CMC from ``IdentificationResult`` objects and the probes' true subjects."""
    results = list(results)
    if not results:
        raise ArgumentError("no identification results")
    if len(results) != len(true_ids):
        raise ArgumentError("one true subject id is needed per result")
    size = len(results[0].ranking)
    return cmc([res.rank_of(sid) for res, sid in zip(results, true_ids)], size)


def recognition_index(curve: np.ndarray, rank: int = 1) -> float:
    """Fraction of probes identified within ``rank`` (rank 1 gives m / M)."""
    if not 1 <= rank <= len(curve):
        raise ArgumentError(f"rank must be in 1..{len(curve)}")
    return float(curve[rank - 1])


# -- unlinkability -----------------------------------------------------------

@dataclass(frozen=True)
class UnlinkabilityReport:
    bin_edges: np.ndarray
    bin_centers: np.ndarray
    mated_density: np.ndarray
    nonmated_density: np.ndarray
    d_local: np.ndarray  # P(H_m | s) - P(H_nm | s) per bin, in [-1, 1]
    d_sys: float

    def to_dict(self) -> dict:
        return {
            "d_sys": self.d_sys,
            "bin_edges": self.bin_edges.tolist(),
            "bin_centers": self.bin_centers.tolist(),
            "mated_density": self.mated_density.tolist(),
            "nonmated_density": self.nonmated_density.tolist(),
            "d_local": self.d_local.tolist(),
        }


def unlinkability_analysis(mated, nonmated, bins: int = 100) -> UnlinkabilityReport:
    """Score-wise linkability and its global aggregate.

    Densities are normalized histograms over equal-width bins spanning both
    score sets.  With equal priors the per-bin linkability is
    ``(p_m - p_nm) / (p_m + p_nm)`` (0 where both vanish) and the global
    measure integrates its positive part against the mated density.
    """
    m = np.asarray(mated, dtype=np.float64).ravel()
    nm = np.asarray(nonmated, dtype=np.float64).ravel()
    if m.size == 0 or nm.size == 0:
        raise ArgumentError("mated and non-mated score sets must be non-empty")
    if bins < 1:
        raise ArgumentError("bins must be positive")
    lo = min(m.min(), nm.min())
    hi = max(m.max(), nm.max())
    with np.errstate(divide="ignore", over="ignore"):
        degenerate = not np.isfinite(bins / (hi - lo)) if hi > lo else True
    if degenerate:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    width = np.diff(edges)
    # per-bin probability masses; the bin width cancels in D
    qm = np.histogram(m, bins=edges)[0] / m.size
    qnm = np.histogram(nm, bins=edges)[0] / nm.size
    total = qm + qnm
    d = np.divide(qm - qnm, total, out=np.zeros_like(total), where=total > 0)
    d = np.clip(d, -1.0, 1.0)
    d_sys = float(np.sum(np.maximum(d, 0.0) * qm))
    return UnlinkabilityReport(edges, (edges[:-1] + edges[1:]) / 2, qm / width, qnm / width, d,
                               min(max(d_sys, 0.0), 1.0))
