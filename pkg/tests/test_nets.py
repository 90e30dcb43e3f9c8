import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import Z_BUMP, bump_derivative_sups, loglog_slope
from ultraregular import suite
from ultraregular.bumps import Mollifier, gevrey_bump
from ultraregular.errors import CompatibilityError, GeometryError, ParameterError, TruncationError
from ultraregular.nets import (DiffOp, EpsilonLadder, Grid, Net, add, apply_diffop, apply_ultradiffop, crop,
                               delta, delta_sheet, derivative, derivative_sup_table, embed_constant, heaviside,
                               mollify, multiply, scale, smooth, synthesize, zero_net)
from ultraregular.weights import make_gevrey, minimal_ultradiff_constant


@pytest.fixture(scope="module")
def trig_grid():
    return Grid.box(-math.pi, math.pi, 4096)


@pytest.fixture(scope="module")
def sin_net(trig_grid, ladder):
    return embed_constant(np.sin, trig_grid, ladder, periodic=True, label="sin")


def test_grid_and_ladder_validation():
    with pytest.raises(ParameterError):
        Grid.box(0, 1, 1000)
    with pytest.raises(ParameterError):
        Grid.box(0, 1, 256, dim=3)
    with pytest.raises(ParameterError):
        EpsilonLadder.span(0.3, 0.02, 4)
    with pytest.raises(GeometryError):
        EpsilonLadder.span(0.3, 0.01, 8).validate_for(Grid.box(-1, 1, 256))
    L = EpsilonLadder.span(0.3, 0.02, 10)
    assert L.values[0] == pytest.approx(0.3) and L.eps_min == pytest.approx(0.02)
    assert EpsilonLadder.from_record(L.to_record()) == L


def test_embed_constant_slices_identical(sin_net):
    assert np.all(sin_net.samples == sin_net.samples[0])
    assert np.abs(sin_net.samples).max(axis=1) == pytest.approx(np.ones(10), abs=1e-6)


def test_zero_net(trig_grid, ladder):
    z = zero_net(trig_grid, ladder)
    assert z.is_zero and not z.samples.any()


def test_mollified_delta_value_at_center(delta1, grid1, ladder):
    i0 = grid1.index_of(0, 0.0)
    expect = math.exp(-1) / Z_BUMP / ladder.values
    assert np.allclose(delta1.samples[:, i0], expect, rtol=1e-12)


def test_mollified_heaviside_half_at_jump(grid1, ladder):
    u = mollify(heaviside(0.0), Mollifier(), grid1, ladder)
    assert np.allclose(u.samples[:, grid1.index_of(0, 0.0)], 0.5, atol=1e-12)
    assert np.allclose(u.samples[:, grid1.index_of(0, 1.0)], 1.0)


def test_mollified_smooth_error_orders(trig_grid, ladder):
    e = ladder.values
    x = trig_grid.axis(0)
    err = {}
    for q in (1, 2):
        u = mollify(smooth(np.sin, "sin"), Mollifier(q=q), trig_grid, ladder, periodic=True)
        err[q] = np.abs(u.samples - np.sin(x)).max(axis=1)
    # q = 1 leaves the second moment: error ~ C eps^2
    assert loglog_slope(e, err[1]) == pytest.approx(-2.0, abs=0.05)
    assert np.all(err[1] <= 0.08 * e ** 2)
    # vanishing second moment pushes the error to eps^4
    assert loglog_slope(e, err[2]) == pytest.approx(-4.0, abs=0.1)
    assert np.all(err[2] <= err[1])


def test_synthesize_scaling(grid1, ladder):
    b = synthesize(lambda x, e: gevrey_bump(x) / e, grid1, ladder, "bump/eps")
    top = np.abs(b.samples).max(axis=1)
    assert np.allclose(top * ladder.values, math.exp(-1))


def test_algebra(delta1, grid1, ladder):
    z = zero_net(grid1, ladder)
    assert np.array_equal(add(delta1, z).samples, delta1.samples)
    i0 = grid1.index_of(0, 0.0)
    sq = multiply(delta1, delta1)
    phi0 = math.exp(-1) / Z_BUMP
    assert np.allclose(sq.samples[:, i0], phi0 ** 2 / ladder.values ** 2, rtol=1e-12)
    s = scale(delta1, 2.0, 1.0)
    assert np.allclose(s.samples[:, i0], 2 * phi0)
    other = Grid.box(-2, 2, 1024)
    with pytest.raises(CompatibilityError):
        add(delta1, zero_net(other, ladder))


def test_crossed_sheet_product_is_point_singular():
    a = suite.delta_sheet_2d(0)
    b = suite.delta_sheet_2d(1)
    p = multiply(a, b)
    g = p.grid
    j = p.ladder.count - 1
    s = p.samples[j]
    i0 = g.index_of(0, 0.0)
    # peak at the origin, scaling like eps^-2
    assert np.unravel_index(np.argmax(s), s.shape) == (i0, i0)
    assert s[i0, i0] == pytest.approx((math.exp(-1) / Z_BUMP / p.eps[j]) ** 2, rel=1e-10)
    # vanishes away from both sheets
    assert s[g.index_of(0, 0.3), g.index_of(1, 0.3)] == 0.0


def test_derivative_of_sin(sin_net, trig_grid):
    d = derivative(sin_net, 1)
    assert np.abs(d.samples - np.cos(trig_grid.axis(0))).max() < 1e-11


def test_delta_derivative_scaling_oracle(delta1, ladder):
    S = derivative_sup_table(delta1, 6)
    sups = bump_derivative_sups(6)
    e = ladder.values
    for m in range(7):
        # grid sampling of the sup: relative error below 1e-2 up to order 6
        assert np.allclose(S[m], e ** (-1 - m) * sups[m], rtol=1e-2)
    for m in range(4):
        assert np.allclose(S[m], e ** (-1 - m) * sups[m], rtol=2e-3)


def test_operator_examples(delta1, sin_net, trig_grid, ladder):
    assert np.array_equal(apply_diffop(DiffOp.identity(1), delta1).samples, delta1.samples)
    d2 = apply_diffop(DiffOp.d(0, 1, 2), delta1)
    top = np.abs(d2.samples).max(axis=1)
    assert loglog_slope(ladder.values[5:], top[5:]) == pytest.approx(3.0, abs=0.01)
    P = DiffOp(((lambda x: 1 + x * x, (1,)),), "(1+x^2) d")
    r = apply_diffop(P, sin_net)
    x = trig_grid.axis(0)
    assert np.abs(r.samples - (1 + x * x) * np.cos(x)).max() < 1e-10
    assert np.all(r.samples == r.samples[0])


def test_ultradiff_identity_and_sin(delta1, sin_net, trig_grid):
    W = make_gevrey(2, 512)
    net, cert = apply_ultradiffop({0: 1.0}, delta1, W, 0.5, 1.0)
    assert cert.G == 0 and max(cert.tails) == 0.0
    assert np.array_equal(net.samples, delta1.samples)
    coeffs = {k: 1 / math.factorial(k) ** 2.5 for k in range(40)}
    c = minimal_ultradiff_constant(W, coeffs, 0.5)
    net, cert = apply_ultradiffop(coeffs, sin_net, W, 0.5, c)
    assert cert.G <= 6 and max(cert.tails) < 1e-8
    x = trig_grid.axis(0)
    ref = sum(coeffs[k] * np.sin(x + k * math.pi / 2) for k in range(cert.G + 1))
    assert np.abs(net.samples - ref).max() < 1e-12
    # the full sum differs from the truncation by at most the certified tail
    full = sum(coeffs[k] * np.sin(x + k * math.pi / 2) for k in range(40))
    assert np.abs(net.samples[0] - full).max() <= max(cert.tails)


def test_ultradiff_delta_never_uncertified(delta1):
    W = make_gevrey(2, 512)
    coeffs = {k: 1 / math.factorial(k) ** 2.5 for k in range(40)}
    c = minimal_ultradiff_constant(W, coeffs, 0.5)
    with pytest.raises(TruncationError):
        apply_ultradiffop(coeffs, delta1, W, 0.5, c)
    with pytest.raises(ParameterError):
        apply_ultradiffop(coeffs, delta1, W, 0.5, c / 2)


def test_ringing_detected(grid1, ladder):
    edge = embed_constant(lambda x: np.exp(-x * x), grid1, ladder)
    with pytest.raises(GeometryError):
        derivative(edge, 1)


def test_save_load_and_csv(tmp_path, delta1):
    path = tmp_path / "net.npz"
    delta1.save(path)
    back = Net.load(path)
    assert np.array_equal(back.samples, delta1.samples)
    assert back.provenance == delta1.provenance
    g = Grid.box(-1, 1, 256)
    n = embed_constant(lambda x: x, g, EpsilonLadder.span(0.3, 0.05, 6))
    lines = n.slice_csv(0).splitlines()
    assert lines[0] == "x,value" and len(lines) == 257


def test_crop_keeps_values(delta1):
    c = crop(delta1, (0.0,), 0.4)
    assert c.grid.count[0] < delta1.grid.count[0]
    assert np.abs(c.samples).max() == pytest.approx(np.abs(delta1.samples).max())


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 40), st.floats(-2, 2)), min_size=1, max_size=5), st.integers(1, 4))
def test_spectral_derivative_exact_on_trig_polys(terms, m):
    g = Grid.box(-math.pi, math.pi, 256)
    L = EpsilonLadder.span(0.3, 0.1, 6)
    f = lambda x: sum(c * np.cos(k * x) for k, c in terms)
    ref = sum(c * k ** m * np.cos(k * g.axis(0) + m * math.pi / 2) for k, c in terms)
    u = embed_constant(f, g, L, periodic=True)
    d = derivative(u, m)
    scale_ = max(1.0, np.abs(ref).max())
    assert np.abs(d.samples[0] - ref).max() <= 1e-9 * scale_


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.1, 3.0))
def test_mollified_delta_mass_and_linearity(x0, c):
    g = Grid.box(-2, 2, 4096)
    L = EpsilonLadder.span(0.3, 0.02, 6)
    u = mollify(delta(x0), Mollifier(), g, L)
    mass = u.samples.sum(axis=1) * g.dx
    assert np.allclose(mass, 1.0, atol=1e-9)
    v = scale(u, c)
    assert np.allclose(derivative(v, 1).samples, c * derivative(u, 1).samples, atol=1e-9 * c / L.eps_min ** 2)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.2, 0.2))
def test_delta_sheet_integrates_to_one_across(cx):
    g = Grid.box(-0.64, 0.64, 256, dim=2)
    L = EpsilonLadder.span(0.3, 0.02, 6)
    u = mollify(delta_sheet(0, cx), Mollifier(), g, L, periodic=(False, True))
    line = u.samples[:, :, 100].sum(axis=1) * g.spacing[0]
    # rectangle rule over a bump 2 eps wide: exact only once eps spans many cells
    fine = L.values >= 8 * g.dx
    assert np.allclose(line[fine], 1.0, atol=1e-5)
    assert np.allclose(line, 1.0, atol=1e-2)
