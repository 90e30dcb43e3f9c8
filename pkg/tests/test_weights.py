import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_assoc, ln_factorial_sum
from ultraregular.errors import CertificateError, ParameterError
from ultraregular.weights import (WeightSequence, associated_function, check_h1, check_h2, check_h2prime,
                                  check_h3prime, check_komatsu_h2, from_log_values, from_values, make_gevrey,
                                  minimal_ultradiff_constant, recover_moments, validate_ultradiff_coefficients)


def test_gevrey_values():
    assert make_gevrey(1, 32).values[3] == pytest.approx(6.0)
    assert make_gevrey(2, 32).values[3] == pytest.approx(36.0)


def test_gevrey_log_values_match_summed_log_factorials():
    W = make_gevrey(2, 200)
    assert W.ln_values[200] == pytest.approx(2 * ln_factorial_sum(200), rel=1e-13)
    assert math.isfinite(W.ln_values[200])


def test_sequence_validation():
    with pytest.raises(ParameterError):
        from_values([2.0, 3.0, 4.0])
    with pytest.raises(ParameterError):
        from_values([1.0])
    with pytest.raises(ParameterError):
        make_gevrey(-1.0, 8)


def test_record_roundtrip():
    W = make_gevrey(1.5, 40)
    V = WeightSequence.from_record(W.to_record())
    assert np.allclose(V.ln_values, W.ln_values)
    C = from_values([1, 2, 5, 20])
    assert np.allclose(WeightSequence.from_record(C.to_record()).ln_values, C.ln_values)


def test_h1_examples():
    ok, bad = check_h1(make_gevrey(2, 200))
    assert ok and bad is None
    ok, bad = check_h1(from_values([1, 2, 3]))
    assert not ok and bad == 1
    assert check_h1(from_values([1, 1, 1, 1]))[0]


def test_h2_examples():
    c = check_h2(make_gevrey(1, 200), np.array([2.0]))
    assert c is not None and c.H == 2.0 and c.A == pytest.approx(1.0)
    assert check_h2(from_log_values([p * p for p in range(61)])) is None
    c = check_h2(from_values([1.0] * 10))
    assert (c.A, c.H) == (1.0, 1.0)


def test_h2prime_examples():
    assert check_h2prime(make_gevrey(2, 200)) is not None
    c = check_h2prime(from_values([1.0] * 10))
    assert (c.A, c.H) == (1.0, 1.0)
    # exp(p^2): ratio M_{p+1}/M_p = e^{2p+1} = e (e^2)^p, so constants exist
    c = check_h2prime(from_log_values([p * p for p in range(61)]))
    assert c is not None
    assert c.A == pytest.approx(math.e)
    assert c.H == pytest.approx(7.66082624558859, rel=1e-9)  # frozen: first grid H >= e^2


def test_h3prime_examples():
    v = check_h3prime(make_gevrey(2, 200))
    assert v.verdict == "converges" and v.r == pytest.approx(2.0, abs=0.05)
    v = check_h3prime(make_gevrey(1, 200))
    assert v.verdict == "diverges" and v.r == pytest.approx(1.0, abs=0.05)
    v = check_h3prime(from_values([1.0] * 100))
    assert v.verdict == "diverges" and abs(v.r) < 0.05


def test_associated_function_examples():
    assert associated_function(make_gevrey(2, 64))(1.0) == 0.0
    T = associated_function(make_gevrey(1, 64))
    assert T(math.e) == pytest.approx(2 - math.log(2), abs=1e-12)
    assert int(T.argmax_p(math.e)) in (1, 2)  # tie: e^1/1! = e^2/2!
    W = make_gevrey(2, 5000)
    ratio = associated_function(W)(1e6) / 2e3
    assert 0.93 <= ratio <= 1.0
    assert ratio == pytest.approx(brute_assoc(W.ln_values, 1e6)[0] / 2e3, abs=1e-12)


def test_associated_function_domain():
    T = associated_function(make_gevrey(2, 64))
    with pytest.raises(Exception):
        T(np.array([0.0]))
    ev = T.evaluate(np.array([1e30]))
    assert not ev.certified[0]
    with pytest.raises(CertificateError):
        T.eval(np.array([1e30]), require_certificate=True)


def test_recover_moments_examples():
    T = associated_function(make_gevrey(2, 512))
    assert recover_moments(T, 0).ln_value == pytest.approx(0.0, abs=1e-12)
    r = recover_moments(T, 10)
    assert r.certified
    assert r.ln_value == pytest.approx(2 * math.lgamma(11), rel=1e-9)
    bad = recover_moments(associated_function(from_values([1, 2, 3])), 1)
    assert abs(bad.ln_value - math.log(2)) > 1e-3


def test_komatsu_examples():
    W = make_gevrey(1, 32768)
    c = check_h2(W)
    assert check_komatsu_h2(associated_function(W), c.A, c.H, np.geomspace(1, 1e4, 1000)).holds
    T2 = associated_function(make_gevrey(2, 4096))
    bad = check_komatsu_h2(T2, 1.0, 1.01, np.geomspace(1, 1e4, 1000))
    assert not bad.holds and bad.worst_margin < 0 and bad.t_worst > 100
    low = check_komatsu_h2(T2, 1.0, 1.01, np.geomspace(1e-3, 1, 50))
    assert low.holds


def test_ultradiff_coefficients():
    W = make_gevrey(2, 64)
    exact = {k: 1 / math.factorial(k) ** 2 for k in range(20)}
    assert validate_ultradiff_coefficients(W, exact, 1.0, 1.0)
    assert not validate_ultradiff_coefficients(W, {k: 1.0 for k in range(6)}, 1.0, 1.0)
    assert not validate_ultradiff_coefficients(W, {0: 1.0, 1: 1.0, 2: 1.0}, 1.0, 1.0)
    assert validate_ultradiff_coefficients(W, {0: 1.0, 1: 1.0}, 1.0, 1.0)
    c = minimal_ultradiff_constant(W, {k: 1 / math.factorial(k) ** 2.5 for k in range(60)}, 0.5)
    assert math.isfinite(c) and c > 0
    assert c == pytest.approx(3.265986323710904, rel=1e-9)  # frozen scan result


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 3.0))
def test_gevrey_always_log_convex(sigma):
    assert check_h1(make_gevrey(sigma, 120))[0]


@st.composite
def log_convex(draw):
    n = draw(st.integers(4, 40))
    steps = sorted(draw(st.lists(st.floats(-3, 8), min_size=n, max_size=n)))
    return from_log_values(np.concatenate([[0.0], np.cumsum(steps)]))


@settings(max_examples=50, deadline=None)
@given(log_convex(), st.floats(-3, 3))
def test_assoc_matches_brute_force(W, lt):
    T = associated_function(W)
    t = 10.0 ** lt
    ev = T.evaluate(np.array([t]))
    if ev.certified[0]:
        assert ev.value[0] == pytest.approx(brute_assoc(W.ln_values, t)[0], abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(log_convex())
def test_recover_moments_roundtrip_on_log_convex(W):
    T = associated_function(W)
    for p in range(W.P // 2 + 1):
        r = recover_moments(T, p, np.geomspace(1e-4, 1e6, 4000))
        if r.certified:
            assert r.ln_value == pytest.approx(W.ln_values[p], abs=1e-6 * max(1.0, abs(W.ln_values[p])))


@settings(max_examples=40, deadline=None)
@given(st.floats(1.2, 3.0), st.lists(st.floats(0.0, 40.0), min_size=1, max_size=5))
def test_assoc_monotone_and_inverse(sigma, ds):
    T = associated_function(make_gevrey(sigma, 512))
    ts = np.geomspace(0.1, 1e4, 300)
    v = T(ts)
    assert np.all(np.diff(v) >= -1e-12)
    d = np.asarray(ds)
    t, cert = T.inverse(d)
    assert np.all(cert)
    assert np.all(T(t) >= d - 1e-9)
    assert np.all(T(t * (1 - 1e-9)) <= d + 1e-6)
