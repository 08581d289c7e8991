"""Edge symbols: twisted estimates, Sobolev norms, and the extension family."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wedgecheck import ConeGrid
from wedgecheck.edgesym import (
    EXTENSION_CUTOFF,
    MetricBracket,
    TruncationWarning,
    angle_bracket,
    boundary_limit_errors,
    boundary_symbol,
    collar_trace_coefficients,
    cutoff_point_symbol,
    cutoff_potential_symbol,
    cutoff_symbol_derivative_check,
    edge_lincomb,
    edge_project,
    edge_sobolev_norm,
    extension_apply,
    extension_symbol,
    leibniz_remainder_check,
    multiplier_symbol,
    normal_family_symbol,
    op_apply,
    random_edge_function,
    symbol_estimate_check,
    twisted_homog_check,
)
from wedgecheck.errors import ConfigurationError
from wedgecheck.mellin import REFERENCE_CUTOFF

# the frozen extension fixture shared with the acceptance battery
EXT_BRACKET = MetricBracket(g11=400.0)
EXT_GRID = ConeGrid(2e-4, 2.0, 160)


# ---------------------------------------------------------------------------
# brackets


def test_bracket_plateau_and_asymptote():
    br = MetricBracket()
    npt.assert_array_equal(br.bracket(np.array([0.0, 0.3, -0.9, 1.0])), 1.0)
    for r in (2.0, 5.0, -17.0):
        npt.assert_allclose(br.bracket(r), abs(r), rtol=1e-14)
    assert br.bracket(1.5) >= 1.0


def test_bracket_metric_weighting():
    br = MetricBracket(g11=400.0)
    # sqrt(g) eta = 20 eta is already past the onset at eta = 0.5
    npt.assert_allclose(br.eta(0.5), 10.0, rtol=1e-14)
    npt.assert_allclose(br.eta(-0.5), 10.0, rtol=1e-14)
    assert br.eta(0.0) == 1.0


def test_bracket_derivative_closed_form():
    assert cutoff_symbol_derivative_check(MetricBracket(), REFERENCE_CUTOFF) <= 1e-8


def test_bracket_rejects_bad_metric():
    with pytest.raises(ConfigurationError):
        MetricBracket(g11=-1.0)
    with pytest.raises(ConfigurationError):
        MetricBracket(r0=0.0)


@given(st.floats(-50.0, 50.0), st.floats(0.1, 30.0))
@settings(max_examples=60, deadline=None)
def test_bracket_properties(r, g11):
    br = MetricBracket(g11=g11)
    v = br.bracket(r)
    assert v >= 1.0 - 1e-12
    npt.assert_allclose(br.bracket(-r), v, rtol=1e-12)
    assert br.eta(r) == br.bracket(np.sqrt(g11) * r)


# ---------------------------------------------------------------------------
# symbol estimates


def test_cutoff_point_symbol_is_negligible():
    # omega(x0 [eta]) at frozen x0 = 0.1 dies once [eta] > 10: every
    # derivative family fits any negative order over |eta| in [10, 1e3]
    a = cutoff_point_symbol(MetricBracket(), REFERENCE_CUTOFF, 0.1, order=-4.0)
    rep = symbol_estimate_check(a, max_order=2, etas=np.geomspace(10.0, 1e3, 13))
    assert rep.passed
    assert all(e.slope == float("-inf") for e in rep.entries)


def test_cutoff_potential_symbol_order():
    grid = ConeGrid(2e-4, 2.0, 48)
    a = cutoff_potential_symbol(MetricBracket(), REFERENCE_CUTOFF, grid)
    rep = symbol_estimate_check(a, max_order=1, etas=np.geomspace(10.0, 1e3, 9))
    assert rep.passed
    npt.assert_allclose(rep.entry(0, 0).slope, -0.5, atol=0.05)


def test_boundary_symbol_fits_order_zero(dbar):
    grid = ConeGrid(2e-4, 2.0, 48)
    a = boundary_symbol(dbar, grid)
    assert a.order == 0.0
    rep = symbol_estimate_check(a, max_order=1, etas=np.geomspace(10.0, 1e3, 9))
    assert rep.passed
    npt.assert_allclose(rep.entry(0, 0).slope, 0.0, atol=1e-6)
    npt.assert_allclose(rep.entry(0, 1).slope, -1.0, atol=1e-3)


def test_normal_family_symbol_fits_order_one(dbar):
    grid = ConeGrid(2e-4, 2.0, 48)
    a = normal_family_symbol(dbar, grid)
    assert a.order == 1.0
    rep = symbol_estimate_check(a, max_order=1, etas=np.geomspace(10.0, 1e3, 9))
    assert rep.passed
    npt.assert_allclose(rep.entry(0, 0).slope, 1.0, atol=1e-6)


@pytest.mark.parametrize("builder", [boundary_symbol, normal_family_symbol])
def test_symbol_twisted_homogeneity(dbar, builder):
    grid = ConeGrid(2e-4, 2.0, 48)
    assert twisted_homog_check(builder(dbar, grid)) <= 1e-8


def test_extension_symbol_homogeneity(dbar_trace):
    a = extension_symbol(dbar_trace, EXT_BRACKET, grid=EXT_GRID)
    assert twisted_homog_check(a) <= 1e-8
    rep = symbol_estimate_check(a, max_order=1, etas=np.geomspace(10.0, 1e3, 9))
    assert rep.passed


def test_leibniz_remainder_decays():
    # op(a1)op(a2) - op(sum of partial products) drops by N orders
    m1 = multiplier_symbol(lambda y, eta: np.cos(y) * angle_bracket(eta),
                           order=1.0)
    m2 = multiplier_symbol(lambda y, eta: np.sin(2 * y) / angle_bracket(eta),
                           order=-1.0)
    rep = leibniz_remainder_check(m1, m2, N=1)
    assert rep.passed


# ---------------------------------------------------------------------------
# edge functions and Sobolev norms


def test_sobolev_norm_is_the_multiplier_norm():
    rng = np.random.default_rng(3)
    for trial in range(20):
        band = int(rng.integers(3, 12))
        u = random_edge_function(band, dim=1, seed=100 + trial, decay=0.8)
        s = float(rng.uniform(-1.5, 2.5))
        direct = np.sqrt(2 * np.pi * sum(
            angle_bracket(float(n)) ** (2 * s) * np.sum(np.abs(u.mode(n)) ** 2)
            for n in u.modes))
        npt.assert_allclose(edge_sobolev_norm(u, s), direct, rtol=1e-10)


def test_multiplier_application_is_diagonal():
    m = multiplier_symbol(lambda y, eta: 1.0 / angle_bracket(eta), order=-1.0)
    u = random_edge_function(6, dim=1, seed=5)
    v = op_apply(m, u)
    for n in u.modes:
        npt.assert_allclose(v.mode(n), u.mode(n) / angle_bracket(float(n)),
                            rtol=1e-12)


def test_edge_project_round_trip():
    u = random_edge_function(5, dim=2, seed=9)
    ys = 2 * np.pi * np.arange(32) / 32
    back = edge_project(u.values(ys), 5)
    npt.assert_allclose(back.coeffs, u.coeffs, atol=1e-12)


def test_edge_project_warns_on_tail():
    u = random_edge_function(6, dim=1, seed=11)
    ys = 2 * np.pi * np.arange(32) / 32
    with pytest.warns(TruncationWarning):
        edge_project(u.values(ys), 3)


def test_edge_lincomb_aligns_bands():
    u = random_edge_function(2, dim=1, seed=1)
    v = random_edge_function(4, dim=1, seed=2)
    w = edge_lincomb(2.0, u, -1.0j, v)
    assert w.band == 4
    for n in range(-4, 5):
        npt.assert_allclose(w.mode(n), 2.0 * u.mode(n) - 1.0j * v.mode(n))


# ---------------------------------------------------------------------------
# the extension operator on the collar


def _collar(trace, band=16, seed=7):
    f = random_edge_function(band, dim=trace.dim, seed=seed, decay=0.5)
    return extension_apply(f, trace, EXT_BRACKET, cutoff=EXTENSION_CUTOFF,
                           grid=EXT_GRID)


def test_extension_support_is_exact(dbar_trace):
    collar = _collar(dbar_trace)
    assert collar.c0 == EXTENSION_CUTOFF.hi
    assert collar.support_defect() == 0.0


def test_extension_boundary_limits(dbar_trace):
    collar = _collar(dbar_trace)
    errs = boundary_limit_errors(collar)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-3
    # frozen regression values for the reference fixture
    npt.assert_allclose(errs, [1.3845277211405262, 0.761267655807161,
                               3.3071285336095754e-06], rtol=1e-6)


def test_extension_trace_round_trip(dbar_trace):
    collar = _collar(dbar_trace)
    fhat, residual = collar_trace_coefficients(collar)
    assert residual <= 1e-10
    npt.assert_allclose(fhat, collar.f.coeffs, atol=1e-6)


def test_extension_round_trip_rank_two(jordan_trace):
    collar = _collar(jordan_trace, band=8, seed=3)
    fhat, residual = collar_trace_coefficients(collar)
    npt.assert_allclose(fhat, collar.f.coeffs, atol=1e-6)
    assert residual <= 1e-8


def test_extension_apply_validates_shapes(dbar_trace):
    from wedgecheck.errors import ShapeError
    with pytest.raises(ShapeError):
        extension_apply(np.zeros((4, 1)), dbar_trace, EXT_BRACKET,
                        grid=EXT_GRID)  # even mode axis
    f = random_edge_function(8, dim=dbar_trace.dim, seed=0)
    with pytest.warns(TruncationWarning):
        extension_apply(f, dbar_trace, EXT_BRACKET, grid=EXT_GRID, band=4)
