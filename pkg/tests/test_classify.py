import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bump_derivative_sups, lacunary_derivative_sups
from ultraregular import suite
from ultraregular.bumps import Mollifier, gevrey_bump
from ultraregular.classify import (classify_net, em_decision, fit_exponents, pseudolocality_probe, scan,
                                   singsupp, theorem_gmb_check, window_centers, window_radius, window_sigma)
from ultraregular.config import DEFAULT
from ultraregular.errors import ParameterError
from ultraregular.nets import DiffOp, Grid, add, delta, embed_constant, mollify, scale, zero_net
from ultraregular.regsets import RegularClass
from ultraregular.weights import make_gevrey

R = RegularClass


@pytest.fixture(scope="module")
def sin_fine(ladder):
    # windows of radius 0.39 need ~2^15 cells for their own derivatives to be resolved
    return embed_constant(np.sin, Grid.box(-math.pi, math.pi, 2 ** 15), ladder, periodic=True, label="sin")


@pytest.fixture(scope="module")
def sin_coarse(ladder):
    return embed_constant(np.sin, Grid.box(-math.pi, math.pi, 4096), ladder, periodic=True, label="sin")


def test_scan_table_and_csv(delta1):
    sc = scan(delta1, m_max=3)
    assert sc.table.shape == (4, 10)
    lines = sc.to_csv().splitlines()
    assert lines[0] == "order,epsilon,sup_norm" and len(lines) == 41
    assert float(lines[1].split(",")[1]) == pytest.approx(0.3)


def test_delta_slopes(delta1):
    f = fit_exponents(scan(delta1, m_max=3))
    assert np.allclose(f.slopes, [1, 2, 3, 4], atol=0.01)
    assert f.fit_eps.size == 5 and f.fit_eps[-1] == pytest.approx(0.02)
    assert np.all(f.residuals < 1e-3)


def test_sin_slopes_zero(sin_coarse):
    f = fit_exponents(scan(sin_coarse))
    assert np.all(np.abs(f.slopes) < 1e-6)


def test_zero_net_scan(grid1, ladder):
    sc = scan(zero_net(grid1, ladder), m_max=2)
    assert sc.table.max() == 0.0
    rep = classify_net(zero_net(grid1, ladder))
    assert rep.regular_class == R.zero() and rep.null


def test_classify_examples(delta1, grid1, ladder, W2):
    rep = classify_net(delta1, W2)
    assert rep.regular_class.kind == "affine"
    assert rep.regular_class.a == pytest.approx(1.0, abs=0.05)
    assert rep.regular_class.b == pytest.approx(1.0, abs=0.05)
    assert rep.ultra.passed and rep.ultra.shift == 1
    assert rep.member_of(R.affine(1, 1)) and not rep.member_of(R.bounded(1))
    inv = classify_net(suite.inv_eps_bump(grid1, ladder), W2)
    assert inv.regular_class.kind == "bounded" and inv.regular_class.b == pytest.approx(1.0, abs=0.05)
    assert np.allclose(inv.fit.slopes, 1.0, atol=0.01)


def test_record_has_no_negative_zero(delta1, W2):
    rec = classify_net(delta1, W2).to_record()
    flat = rec["slopes"] + rec["intercepts"] + rec["residuals"]
    assert all(math.copysign(1.0, v) > 0 for v in flat if v == 0)


def test_em_decision_margins_and_nulls(W2):
    ln_sup = np.log(bump_derivative_sups(6))
    v = em_decision(ln_sup, W2)
    assert v.passed and v.resolved
    assert v.margins == pytest.approx({4: 0.2894189, 5: 0.3612189, 6: 0.3841835}, abs=1e-6)
    null = em_decision([-np.inf] * 7, W2)
    assert null.passed and null.reason == "null"
    few = em_decision(ln_sup[:3], W2)
    assert not few.passed


def test_gmb_check_bump(grid1, ladder, W2):
    b = embed_constant(lambda x: gevrey_bump(x), grid1, ladder)
    c = theorem_gmb_check(b, W2, bump_derivative_sups(6))
    assert c.route_net and c.route_direct and c.agree
    assert c.report.ultra.margins[4] == pytest.approx(c.direct.margins[4], abs=1e-5)


def test_gmb_check_lacunary(ladder, W2):
    lac = embed_constant(suite.lacunary_series, suite.lacunary_grid(), ladder, periodic=True)
    c = theorem_gmb_check(lac, W2, lacunary_derivative_sups(6))
    assert not c.route_net and not c.route_direct and c.agree
    assert c.report.ultra.margins[6] <= -0.5


def test_gmb_check_sin(sin_coarse):
    for M in (make_gevrey(1, 64), make_gevrey(2, 64)):
        c = theorem_gmb_check(sin_coarse, M, np.ones(7))
        assert c.route_net and c.route_direct
    with pytest.raises(ParameterError):
        theorem_gmb_check(scale(sin_coarse, 1.0, 1.0), make_gevrey(2, 64))


def test_window_helpers(delta1, W2):
    w = DEFAULT.windows
    assert window_radius(delta1, w) == pytest.approx(0.25)
    c = window_centers(delta1, 0.25, w)
    assert c.shape == (27, 1)
    assert np.allclose(c[:, 0], -c[::-1, 0])  # symmetric about the origin
    assert np.any(c[:, 0] == 0.0)
    assert window_sigma(W2, w) == 2.0
    assert window_sigma(None, w) == w.sigma


def test_singsupp_delta(delta1, W2):
    s = singsupp(delta1, W2, R.bounded(1))
    assert s.points.size > 0
    assert np.all(np.abs(s.points) <= s.radius + 1e-12)
    assert singsupp(delta1, W2, R.affine(1, 1)).points.size == 0


def test_singsupp_separates_delta_from_bump(grid1, ladder, W2):
    u = add(mollify(delta(-1.0), Mollifier(), grid1, ladder),
            embed_constant(lambda x: gevrey_bump((x - 1) / 0.4), grid1, ladder))
    s = singsupp(u, W2, R.bounded(1))
    assert s.points.size > 0
    assert np.all(np.abs(s.points + 1.0) <= s.radius + 1e-12)


def test_singsupp_sin_empty(sin_fine, W2):
    assert singsupp(sin_fine, W2, R.bounded(0)).points.size == 0


def test_singsupp_canned(canned, W2):
    by = {c.name: c.net for c in canned}
    for name in ("bump", "inv_eps_bump"):
        assert singsupp(by[name], W2, R.bounded(1)).points.size == 0
    s = singsupp(by["heaviside_cut"], W2, R.bounded(1))
    assert np.all(np.abs(s.points) <= s.radius + 1e-12)


def test_pseudolocality_derivative_of_cut_heaviside(grid1, ladder, W2):
    h = suite.heaviside_cut(grid1, ladder)
    p = pseudolocality_probe(DiffOp.d(0, 1, 1), h, W2, R.bounded(1))
    assert p.forward
    assert p.singsupp_u.points.size > 0
    rec = p.to_record()
    assert rec["forward_holds"] is True
    q = pseudolocality_probe(DiffOp.identity(1), h, W2, R.bounded(1))
    assert q.forward and q.reverse


def test_pseudolocality_sin(sin_fine, W2):
    p = pseudolocality_probe(DiffOp.d(0, 1, 1), sin_fine, W2, R.zero())
    assert p.forward and p.reverse
    assert p.singsupp_Pu.points.size == 0


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 4.0))
def test_em_decision_invariant_under_constant_factor(c):
    # multiplying f by c adds ln c to every order: the trend offset absorbs it
    W = make_gevrey(2, 64)
    base = np.log(bump_derivative_sups(6))
    a = em_decision(base, W)
    b = em_decision(base + math.log(c), W)
    assert a.passed == b.passed
    for m in a.margins:
        assert a.margins[m] == pytest.approx(b.margins[m], abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-2.0, 2.0))
def test_slopes_shift_by_eps_power(p, c0):
    g = Grid.box(-2, 2, 4096)
    L = suite.ladder()
    b = embed_constant(lambda x: gevrey_bump(x / 0.8), g, L)
    f0 = fit_exponents(scan(b, m_max=2))
    f1 = fit_exponents(scan(scale(b, math.exp(c0), -p), m_max=2))
    assert np.allclose(f1.slopes - f0.slopes, p, atol=1e-9)
