"""Round-based verification/identification protocol and linkage score generation."""

from __future__ import annotations

import json
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from .datasets import Dataset, SplitProtocol, split
from .errors import ProtocolError
from .evaluation import (ScoreSet, cmc, compute_di, compute_eer, far_frr_curve,
                         recognition_index, unlinkability_analysis)
from .features import FilterBankConfig, build_filter_bank, extract_features
from .keyspace import KeySet, generate_key_set
from .matching import best_score
from .template import ProtectedTemplate, generate_template

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProtocolConfig:
    case: str = "worst"  # "worst": one key set shared by all subjects; "best": one per subject
    verification_ns: tuple[int, ...] = (20, 20, 20, 25, 25)
    identification_ns: tuple[int, ...] = (15, 15, 15, 20, 20)
    master_seed: int = 0
    num_thresholds: int = 2001
    scale_factor: float = 100.0
    jobs: int = 1

    def validate(self) -> None:
        if self.case not in ("worst", "best"):
            raise ProtocolError(f"case must be 'worst' or 'best', got {self.case!r}")
        if not self.verification_ns and not self.identification_ns:
            raise ProtocolError("protocol has no rounds")
        if any(n < 2 for n in (*self.verification_ns, *self.identification_ns)):
            raise ProtocolError("every round needs n >= 2")

    def descriptor(self) -> dict:
        d = asdict(self)
        d.pop("jobs")
        d["verification_ns"] = list(self.verification_ns)
        d["identification_ns"] = list(self.identification_ns)
        return d


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("CBT_JOBS", "1")))
    except ValueError:
        return 1


def _round_key_set(n: int, l: int, seed_parts) -> KeySet:
    with warnings.catch_warnings():
        # n outside 15..30 is allowed in experiments
        warnings.simplefilter("ignore")
        return generate_key_set(n, l, seed=list(seed_parts))


class _Enroller:
    """Feature vectors for every sample, with a template cache per key set."""

    def __init__(self, features: dict, jobs: int):
        self.features = features
        self.jobs = max(1, jobs)
        self._cache: dict = {}

    def templates(self, items, key_for) -> list[ProtectedTemplate]:
        todo = [it for it in items if (key_for(it).key_id, it) not in self._cache]

        def work(it):
            return generate_template(self.features[it], key_for(it))

        if self.jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.jobs) as pool:
                made = list(pool.map(work, todo))
        else:
            made = [work(it) for it in todo]
        for it, t in zip(todo, made):
            self._cache[(key_for(it).key_id, it)] = t
        return [self._cache[(key_for(it).key_id, it)] for it in items]


@dataclass
class EvalReport:
    protocol: dict
    dataset: dict
    verification_rounds: list = field(default_factory=list)
    identification_rounds: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    cmc: list = field(default_factory=list)
    genuine_scores: list = field(default_factory=list)
    imposter_scores: list = field(default_factory=list)

    @property
    def eer(self):
        return self.summary.get("eer_mean")

    @property
    def di(self):
        return self.summary.get("di_mean")

    @property
    def ri(self):
        return self.summary.get("ri_mean")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _mean_sd(values) -> tuple[float | None, float | None]:
    v = [x for x in values if x is not None]
    if not v:
        return None, None
    arr = np.asarray(v, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0


def _score_range(scores: ScoreSet) -> tuple[float, float]:
    both = np.concatenate([scores.genuine, scores.imposter])
    lo, hi = float(both.min()), float(both.max())
    if hi <= lo:
        hi = lo + 1e-12 + abs(lo) * 1e-9
    # the top threshold sits above every score so the curve reaches FRR = 0
    pad = (hi - lo) * 1e-6
    return max(0.0, lo - pad), hi + pad


def verification_scores(train: Dataset, test: Dataset, enroller: _Enroller, keys: dict) -> ScoreSet:
    """Genuine and imposter best-of-enrolled scores for one round.

    ``keys`` maps subject id to the key set stored on that subject's token.
    A probe is always transformed with the key set of the person presenting
    it; in the worst case every subject holds the same key set.
    """
    ids = train.subject_ids
    enrolled = {}
    for s in train.subjects:
        items = [(s.subject_id, smp) for smp in s.sample_ids]
        enrolled[s.subject_id] = enroller.templates(items, lambda it: keys[it[0]])
    genuine, imposter = [], []
    for s in test.subjects:
        items = [(s.subject_id, smp) for smp in s.sample_ids]
        probes = enroller.templates(items, lambda it: keys[it[0]])
        for q in probes:
            for claimed in ids:
                score = best_score(q, enrolled[claimed])
                (genuine if claimed == s.subject_id else imposter).append(score)
    return ScoreSet.of(genuine, imposter)


def identification_ranks(train: Dataset, test: Dataset, enroller: _Enroller, key: KeySet) -> list[int]:
    ids = train.subject_ids
    gallery = {s.subject_id: enroller.templates([(s.subject_id, smp) for smp in s.sample_ids], lambda it: key)
               for s in train.subjects}
    ranks = []
    for s in test.subjects:
        for q in enroller.templates([(s.subject_id, smp) for smp in s.sample_ids], lambda it: key):
            scored = sorted((best_score(q, gallery[sid]), sid) for sid in ids)
            ranks.append(1 + [sid for _, sid in scored].index(s.subject_id))
    return ranks


def compute_features(ds: Dataset, bank, scale_factor: float, jobs: int = 1) -> dict:
    items = [(sub, smp) for sub, smp, _ in ds.samples()]
    images = [img for _, _, img in ds.samples()]

    def work(img):
        return extract_features(img, bank, scale_factor)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            feats = list(pool.map(work, images))
    else:
        feats = [work(img) for img in images]
    return dict(zip(items, feats))


def run_protocol(dataset: Dataset, split_protocol: SplitProtocol, config: ProtocolConfig | None = None,
                 bank_config: FilterBankConfig | None = None) -> EvalReport:
    """Enroll the training split and score the test split over several key rounds.

    Each round draws fresh key sets from ``(master_seed, round, n)``, so a
    verification and an identification round with the same index and ``n``
    reuse the same keys and templates.  Identification always uses the
    shared key set.  Round results are aggregated as mean and sample
    standard deviation.
    """
    config = config or ProtocolConfig()
    config.validate()
    train, test = split(dataset, split_protocol)
    bank_config = bank_config or FilterBankConfig(image_side=dataset.side)
    if bank_config.image_side != dataset.side:
        raise ProtocolError(f"filter bank side {bank_config.image_side} does not match dataset side {dataset.side}")
    bank = build_filter_bank(bank_config)
    l = bank_config.feature_length

    feats = compute_features(train, bank, config.scale_factor, config.jobs)
    feats.update(compute_features(test, bank, config.scale_factor, config.jobs))
    enroller = _Enroller(feats, config.jobs)

    report = EvalReport(
        protocol={**config.descriptor(), "split": asdict(split_protocol), "filter_bank": asdict(bank_config)},
        dataset={"modality": dataset.modality, "provenance": dataset.provenance,
                 "subjects": len(train), "side": dataset.side},
    )
    all_gen, all_imp = [], []
    for r, n in enumerate(config.verification_ns):
        shared = _round_key_set(n, l, (config.master_seed, r, n))
        if config.case == "worst":
            keys = {sid: shared for sid in train.subject_ids}
        else:
            keys = {sid: _round_key_set(n, l, (config.master_seed, r, n, k + 1))
                    for k, sid in enumerate(train.subject_ids)}
        scores = verification_scores(train, test, enroller, keys)
        lo, hi = _score_range(scores)
        eer, thr = compute_eer(far_frr_curve(scores, config.num_thresholds, lo, hi))
        di = compute_di(scores)
        logger.info("verification round %d (n=%d): eer=%.4f di=%.3f", r + 1, n, eer, di)
        report.verification_rounds.append({
            "round": r + 1, "n": n, "key_id": shared.key_id if config.case == "worst" else None,
            "eer": eer, "eer_threshold": thr, "di": di,
            "genuine_mean": float(scores.genuine.mean()), "imposter_mean": float(scores.imposter.mean()),
            "genuine_count": int(scores.genuine.size), "imposter_count": int(scores.imposter.size),
        })
        all_gen.extend(scores.genuine.tolist())
        all_imp.extend(scores.imposter.tolist())

    curves = []
    for r, n in enumerate(config.identification_ns):
        key = _round_key_set(n, l, (config.master_seed, r, n))
        curve = cmc(identification_ranks(train, test, enroller, key), len(train))
        ri = recognition_index(curve, 1)
        logger.info("identification round %d (n=%d): ri=%.4f", r + 1, n, ri)
        report.identification_rounds.append({"round": r + 1, "n": n, "key_id": key.key_id,
                                             "ri": ri, "cmc": curve.tolist()})
        curves.append(curve)

    s = report.summary
    s["eer_mean"], s["eer_sd"] = _mean_sd(v["eer"] for v in report.verification_rounds)
    s["eer_threshold_mean"], _ = _mean_sd(v["eer_threshold"] for v in report.verification_rounds)
    s["di_mean"], s["di_sd"] = _mean_sd(v["di"] for v in report.verification_rounds)
    s["ri_mean"], s["ri_sd"] = _mean_sd(v["ri"] for v in report.identification_rounds)
    if curves:
        report.cmc = np.mean(curves, axis=0).tolist()
    report.genuine_scores = all_gen
    report.imposter_scores = all_imp
    return report


def linkage_scores(dataset: Dataset, n: int = 15, seed: int = 0, scale_factor: float = 100.0,
                   bank_config: FilterBankConfig | None = None, jobs: int = 1):
    """Mated and non-mated scores for the unlinkability analysis.

    Every sample is protected with its own key set.  Mated pairs are two
    different samples of one subject; non-mated pairs take the first sample
    of two different subjects.
    """
    if len(dataset) < 2:
        raise ProtocolError("unlinkability analysis needs at least 2 subjects")
    bank_config = bank_config or FilterBankConfig(image_side=dataset.side)
    bank = build_filter_bank(bank_config)
    l = bank_config.feature_length
    feats = compute_features(dataset, bank, scale_factor, jobs)
    order = list(feats)
    keys = {it: _round_key_set(n, l, (seed, k + 1)) for k, it in enumerate(order)}
    enroller = _Enroller(feats, jobs)
    temps = dict(zip(order, enroller.templates(order, lambda it: keys[it])))

    mated, nonmated = [], []
    for s in dataset.subjects:
        for a, b in combinations(s.sample_ids, 2):
            mated.append(best_score(temps[(s.subject_id, a)], [temps[(s.subject_id, b)]]))
    for s, t in combinations(dataset.subjects, 2):
        nonmated.append(best_score(temps[(s.subject_id, s.sample_ids[0])], [temps[(t.subject_id, t.sample_ids[0])]]))
    if not mated:
        raise ProtocolError("mated pairs need subjects with at least 2 samples")
    return np.asarray(mated), np.asarray(nonmated)


def run_unlinkability(dataset: Dataset, n: int = 15, seed: int = 0, bins: int = 100, **kwargs):
    mated, nonmated = linkage_scores(dataset, n=n, seed=seed, **kwargs)
    return unlinkability_analysis(mated, nonmated, bins), mated, nonmated
