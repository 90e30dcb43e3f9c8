import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import geometric_sum
from ultraregular.errors import InconclusiveError, ParameterError
from ultraregular.regsets import (RegularClass, check_r4, classify_exponents, witness_r1, witness_r2,
                                  witness_r3)

R = RegularClass


def test_r1_examples():
    w = witness_r1(R.affine(1, 0), k=2, kprime=3)
    assert np.allclose(w.output[:5], np.arange(5) + 5)
    assert w.verify()
    w = witness_r1(R.bounded(4), k=1, kprime=0)
    assert np.allclose(w.output, 4) and w.verify()
    w = witness_r1(R.zero(), k=0, kprime=2)
    assert w.output_class == R.bounded(2) and w.escalated
    assert np.allclose(w.output, 2)


def test_r2_r3_examples():
    w = witness_r3(R.affine(1, 0), R.affine(2, 1))
    assert w.output_class == R.affine(2, 1)
    # exhaustive split-sum check up to l1 + l2 <= 64
    N1, N2 = np.arange(65.0), 2 * np.arange(65.0) + 1
    for n in range(65):
        assert max(N1[l] + N2[n - l] for l in range(n + 1)) <= w.output[n] + 1e-12
    assert witness_r2(R.bounded(3), R.bounded(5)).output_class == R.bounded(5)
    assert witness_r3(R.zero(), R.zero()).output_class == R.zero()


def test_r4_closed_form_matches_geometric_series():
    for cls in (R.bounded(3.0), R.zero()):
        v = check_r4(cls, None, 0.5, [0.3, 0.1, 0.03, 0.01])
        assert v.holds
        assert abs(v.L - geometric_sum(0.5)) <= 1e-12
        assert np.allclose(v.Nstar, cls.b)


def test_r4_affine_fails():
    v = check_r4(R.affine(1, 0), None, 0.5, [0.3, 0.1, 0.01])
    assert not v.holds and v.eps_fail >= 0.01
    assert not check_r4(R.affine(1, 0), None, 0.5, [0.01]).holds
    with pytest.raises(InconclusiveError):
        check_r4(R.affine(1, 0), None, 0.5, [0.9, 0.8])
    with pytest.raises(ParameterError):
        check_r4(R.zero(), None, 1.5, [0.1])


def test_classify_exponents_examples():
    assert classify_exponents([0.02, -0.01, 0.03, 0.0]) == R.zero()
    c = classify_exponents([3.0, 3.05, 2.98, 3.01])
    assert c.kind == "bounded" and c.b == pytest.approx(3.0, abs=0.1)
    c = classify_exponents([1.0, 2.02, 2.97, 4.01])
    # orders start at 0, so N_m ~ m + 1
    assert c.kind == "affine" and c.a == pytest.approx(1.0, abs=0.05) and c.b == pytest.approx(1.0, abs=0.05)
    assert classify_exponents([0, 1, 8, 27, 64]).kind == "full"
    with pytest.raises(ParameterError):
        classify_exponents([1.0, 2.0])


def test_record_roundtrip():
    for c in (R.zero(), R.bounded(2.5), R.affine(1, 1), R.full()):
        assert R.from_record(c.to_record()) == c
    with pytest.raises(ParameterError):
        R("affine", -1.0, 0.0)
    with pytest.raises(ParameterError):
        R("nonsense")


classes = st.one_of(
    st.just(R.zero()),
    st.builds(R.bounded, st.floats(0, 10)),
    st.builds(R.affine, st.floats(0.1, 4), st.floats(0, 10)),
)


@settings(max_examples=60, deadline=None)
@given(classes, st.integers(0, 6), st.floats(0, 5))
def test_r1_witness_dominates(cls, k, kp):
    w = witness_r1(cls, k=k, kprime=kp)
    assert w.verify()
    N = cls.representative(w.m_max + k)
    assert np.all(N[k : k + w.m_max + 1] + kp <= w.output + 1e-9)


@settings(max_examples=60, deadline=None)
@given(classes, classes)
def test_r2_r3_witnesses_dominate(c1, c2):
    for w in (witness_r2(c1, c2), witness_r3(c1, c2)):
        assert w.verify()
        assert c1.join(c2).rank <= w.output_class.rank


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-0.5, 8), min_size=4, max_size=9), st.floats(0.0, 3.0))
def test_classify_monotone_under_uniform_shift(N, shift):
    a = classify_exponents(N)
    b = classify_exponents(np.asarray(N) + shift)
    assert a.rank <= b.rank


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 8), st.floats(0.05, 0.95))
def test_r4_bounded_always_holds(b, h):
    v = check_r4(R.bounded(b), None, h, [0.5, 0.1, 0.02])
    assert v.holds and v.L == pytest.approx(1 / (1 - h), rel=1e-12)
