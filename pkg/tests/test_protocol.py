import numpy as np
import pytest

from cbt.datasets import SplitProtocol, synth_generate
from cbt.errors import ProtocolError
from cbt.protocol import ProtocolConfig, linkage_scores, run_protocol, run_unlinkability

SMALL = dict(side=33)


def _run(sigma, shift, seed=1, **cfg):
    ds = synth_generate(6, 4, sigma, seed=seed, max_shift=shift, **SMALL)
    config = ProtocolConfig(**{"verification_ns": (15,), "identification_ns": (15,), "master_seed": 3, **cfg})
    return run_protocol(ds, SplitProtocol(2, 2), config)


def test_noise_free_is_perfect():
    rep = _run(0.0, 0)
    assert rep.eer == 0.0
    assert rep.ri == 1.0
    assert all(g == 0.0 for g in rep.genuine_scores)
    assert rep.cmc[-1] == 1.0


def test_report_structure_and_counts():
    rep = _run(0.02, 1, verification_ns=(15, 16), identification_ns=(15,))
    assert len(rep.verification_rounds) == 2 and len(rep.identification_rounds) == 1
    r = rep.verification_rounds[0]
    assert r["genuine_count"] == 6 * 2 and r["imposter_count"] == 6 * 2 * 5
    assert rep.summary["eer_sd"] >= 0
    assert rep.protocol["case"] == "worst" and rep.protocol["verification_ns"] == [15, 16]
    # same round index and n -> same key set in both tasks
    assert rep.verification_rounds[0]["key_id"] == rep.identification_rounds[0]["key_id"]


def test_worst_case_shares_key_and_best_case_does_not(monkeypatch):
    import cbt.protocol as proto
    used = []
    real = proto.verification_scores

    def spy(train, test, enroller, keys):
        used.append({sid: k.key_id for sid, k in keys.items()})
        return real(train, test, enroller, keys)

    monkeypatch.setattr(proto, "verification_scores", spy)
    _run(0.02, 1, case="worst", identification_ns=())
    _run(0.02, 1, case="best", identification_ns=())
    worst, best = used
    assert len(set(worst.values())) == 1
    assert len(set(best.values())) == len(best)


def test_deterministic_report():
    assert _run(0.02, 1).to_json() == _run(0.02, 1).to_json()


def test_jobs_do_not_change_results():
    assert _run(0.02, 1, jobs=1).to_json() == _run(0.02, 1, jobs=3).to_json()


def test_protocol_errors():
    ds = synth_generate(3, 3, 0.0, seed=0, max_shift=0, **SMALL)
    with pytest.raises(ProtocolError):
        run_protocol(ds, SplitProtocol(2, 2), ProtocolConfig(verification_ns=(15,), identification_ns=()))
    with pytest.raises(ProtocolError):
        run_protocol(ds, SplitProtocol(1, 1), ProtocolConfig(case="average"))
    with pytest.raises(ProtocolError):
        run_protocol(ds, SplitProtocol(1, 1), ProtocolConfig(verification_ns=(1,)))


def test_linkage_scores_counts():
    ds = synth_generate(4, 3, 0.02, seed=2, **SMALL)
    mated, nonmated = linkage_scores(ds, n=15, seed=1)
    assert mated.size == 4 * 3 and nonmated.size == 6
    assert np.all((mated >= 0) & (mated <= 1))
    rep, _, _ = run_unlinkability(ds, n=15, seed=1, bins=10)
    assert 0 <= rep.d_sys <= 1
