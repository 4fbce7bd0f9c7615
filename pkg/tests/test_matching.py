import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cbt.errors import ArgumentError, DegenerateTemplateError, IncomparableTemplateError
from cbt.matching import cosine_dissimilarity, identify, verify
from cbt.template import ProtectedTemplate


def T(*values):
    v = np.asarray(values, dtype=float)
    n = int(round((1 + math.sqrt(1 + 8 * v.size)) / 2))
    return ProtectedTemplate(v, n, "k", 100)


def test_identical_is_zero():
    a = T(3.0, 1.0, 4.0)
    assert cosine_dissimilarity(a, a) == 0.0


def test_orthogonal_is_one():
    assert cosine_dissimilarity([1.0, 0.0], [0.0, 1.0]) == 1.0


def test_hand_value():
    assert cosine_dissimilarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-15)
    assert cosine_dissimilarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.29289, abs=1e-5)


def test_dimension_mismatch():
    with pytest.raises(IncomparableTemplateError):
        cosine_dissimilarity(T(1.0), T(1.0, 2.0, 3.0))


def test_zero_template():
    with pytest.raises(DegenerateTemplateError):
        cosine_dissimilarity(T(0.0, 0.0, 0.0), T(1.0, 2.0, 3.0))


nonneg = arrays(np.float64, 10, elements=st.floats(0, 1e6, allow_nan=False))


@settings(max_examples=200)
@given(nonneg, nonneg, st.floats(1e-3, 1e3))
def test_score_properties(a, b, alpha):
    if not a.any() or not b.any():
        return
    s = cosine_dissimilarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(cosine_dissimilarity(b, a), abs=1e-15)
    assert cosine_dissimilarity(alpha * a, b) == pytest.approx(s, abs=1e-12)


def test_verify_accepts_below_threshold():
    q = T(1.0, 0.0, 0.0)
    close = T(1.0, 0.0, 0.0)
    d = verify(q, [close], 0.45)
    assert d.accepted and d.best_score == 0.0 and d.threshold == 0.45


def test_verify_strict_boundary():
    q = [1.0, 0.0]
    other = [1.0, 1.0]
    s = cosine_dissimilarity(q, other)
    assert not verify(q, [other], threshold=s).accepted
    assert verify(q, [other], threshold=s + 1e-12).accepted


def test_verify_uses_minimum():
    q = [1.0, 0.0]
    d = verify(q, [[0.0, 1.0], [1.0, 0.1], [1.0, 1.0]], 0.45)
    assert d.best_score == pytest.approx(cosine_dissimilarity(q, [1.0, 0.1]))
    assert d.accepted


def test_verify_self_any_positive_threshold():
    q = T(0.5, 0.25, 2.0)
    assert verify(q, [q], threshold=1e-12).accepted


def test_verify_empty():
    with pytest.raises(ArgumentError):
        verify(T(1.0), [], 0.5)


def test_identify_ranking_and_ties():
    q = np.array([1.0, 0.0])
    # angles chosen so that scores are A: 0.2, B: 0.1, C: 0.4
    def at(score):
        c = 1 - score
        return np.array([c, math.sqrt(1 - c * c)])
    res = identify(q, {"A": [at(0.2)], "B": [at(0.1), at(0.9)], "C": [at(0.4)]})
    assert [sid for sid, _ in res.ranking] == ["B", "A", "C"]
    assert [s for _, s in res.ranking] == pytest.approx([0.1, 0.2, 0.4])
    tie = identify(q, {"z": [at(0.3)], "a": [at(0.3)]})
    assert [sid for sid, _ in tie.ranking] == ["a", "z"]


def test_identify_exact_enrolled_is_rank_one():
    q = T(1.0, 2.0, 3.0)
    res = identify(q, {"x": [T(3.0, 2.0, 1.0)], "me": [q], "y": [T(1.0, 1.0, 1.0)]})
    assert res.best == ("me", 0.0)
    assert res.rank_of("me") == 1
    assert sorted(sid for sid, _ in res.ranking) == ["me", "x", "y"]


def test_identify_errors():
    with pytest.raises(ArgumentError):
        identify(T(1.0), {})
    with pytest.raises(IncomparableTemplateError):
        identify(T(1.0), {"a": [T(1.0, 2.0, 3.0)]})
