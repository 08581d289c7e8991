"""Fiber discretization, radial grids, and the dilation group."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wedgecheck import ConeGrid, build_fiber
from wedgecheck.errors import ConfigurationError, ShapeError
from wedgecheck.fiber import (
    cone_function,
    cone_inner,
    cone_norm,
    dilation_matrix,
    fiber_derivative_matrix,
    fiber_inner,
    kappa_apply,
    mode_multiplication_matrix,
)


def test_point_fiber_layout():
    fib = build_fiber("point", 3)
    assert fib.kind == "point"
    assert fib.n_slots == 1 and fib.dim == 3
    assert fib.slot_weight == 1.0
    npt.assert_allclose(fib.theta_weights.sum(), 1.0)


def test_circle_fiber_layout():
    fib = build_fiber("circle", 2, modes=3)
    assert fib.n_slots == 7 and fib.dim == 14
    npt.assert_array_equal(fib.mode_index, np.arange(-3, 4))
    assert fib.slot(0) == 3 and fib.slot(-3) == 0
    # fiber measure is the full circle, split between angle and slot pictures
    npt.assert_allclose(fib.theta_weights.sum(), 2.0 * np.pi)
    npt.assert_allclose(fib.slot_weight, 2.0 * np.pi)


def test_build_fiber_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        build_fiber("point", 0)
    with pytest.raises(ConfigurationError):
        build_fiber("torus", 1)


def test_fiber_inner_parseval():
    # coefficient pairing must equal the angle-space integral
    fib = build_fiber("circle", 1, modes=2)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(fib.dim) + 1j * rng.standard_normal(fib.dim)
    v = rng.standard_normal(fib.dim) + 1j * rng.standard_normal(fib.dim)
    ip = fiber_inner(fib, u, v)
    uth = fib.eval_at_theta(u)[:, 0]
    vth = fib.eval_at_theta(v)[:, 0]
    direct = np.sum(fib.theta_weights * uth * np.conj(vth))
    npt.assert_allclose(ip, direct, rtol=1e-12)


def test_mode_multiplication_against_pointwise_product():
    # multiply a band-2 coefficient by a band-1 symbol inside a band-4
    # truncation: no aliasing, so the matrix must reproduce the product
    fib = build_fiber("circle", 2, modes=4)
    rng = np.random.default_rng(1)
    table = {m: rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
             for m in (-1, 0, 1)}
    M = mode_multiplication_matrix(fib, table)

    c = np.zeros(fib.dim, dtype=complex)
    for m in range(-2, 3):
        s = fib.slot(m)
        c[2 * s:2 * s + 2] = rng.standard_normal(2) + 1j * rng.standard_normal(2)

    prod = fib.eval_at_theta(M @ c)
    a_theta = np.zeros((fib.theta.size, 2, 2), dtype=complex)
    for m, block in table.items():
        a_theta += np.exp(1j * m * fib.theta)[:, None, None] * block
    direct = np.einsum("tij,tj->ti", a_theta, fib.eval_at_theta(c))
    npt.assert_allclose(prod, direct, atol=1e-12)


def test_mode_multiplication_rejects_bad_blocks():
    fib = build_fiber("circle", 2, modes=1)
    with pytest.raises(ShapeError):
        mode_multiplication_matrix(fib, {0: np.eye(3)})
    point = build_fiber("point", 1)
    with pytest.raises(ConfigurationError):
        mode_multiplication_matrix(point, {1: np.eye(1)})


def test_fiber_derivative_is_mode_diagonal():
    fib = build_fiber("circle", 2, modes=2)
    D = fiber_derivative_matrix(fib)
    expected = np.kron(np.diag(np.arange(-2, 3).astype(float)), np.eye(2))
    npt.assert_array_equal(D, expected)


@given(st.integers(min_value=-3, max_value=3))
@settings(max_examples=20, deadline=None)
def test_mode_multiplication_shift_matrix(m):
    # multiplication by e^{im theta} is the slot shift by m
    fib = build_fiber("circle", 1, modes=3)
    M = mode_multiplication_matrix(fib, {m: np.eye(1)})
    for kp in fib.mode_index:
        e = np.zeros(fib.dim)
        e[fib.slot(kp)] = 1.0
        out = M @ e
        k = kp + m
        if abs(k) <= fib.modes:
            expect = np.zeros(fib.dim)
            expect[fib.slot(k)] = 1.0
            npt.assert_array_equal(out, expect)
        else:
            npt.assert_array_equal(out, np.zeros(fib.dim))


# ---------------------------------------------------------------------------
# radial grid


def test_grid_log_derivative_on_powers():
    grid = ConeGrid(1e-3, 2.0, 48)
    for s in (0.0, 1.0, -0.5, 2.0):
        vals = grid.nodes ** s
        npt.assert_allclose(grid.diff_log @ vals, s * vals,
                            rtol=1e-9, atol=1e-9)


def test_grid_quadrature_exactness():
    grid = ConeGrid(1e-3, 2.0, 64)
    a, b = grid.x_lo, grid.x_max
    npt.assert_allclose(grid.w_dx @ grid.nodes, (b ** 2 - a ** 2) / 2.0,
                        rtol=1e-12)
    npt.assert_allclose(grid.w_dx @ np.exp(-grid.nodes),
                        np.exp(-a) - np.exp(-b), rtol=1e-10)


def test_grid_rejects_bad_bounds():
    with pytest.raises(ConfigurationError):
        ConeGrid(0.0, 1.0, 16)
    with pytest.raises(ConfigurationError):
        ConeGrid(2.0, 1.0, 16)


def test_cone_inner_against_closed_form():
    grid = ConeGrid(1e-4, 40.0, 120)
    fib = build_fiber("point", 1)
    u = cone_function(grid, fib, lambda x: np.exp(-x))
    # int_0^inf e^{-2x} dx = 1/2, up to the truncated ends
    exact = 0.5 * (np.exp(-2 * grid.x_lo) - np.exp(-2 * grid.x_max))
    npt.assert_allclose(cone_inner(u, u), exact, rtol=1e-9)


def test_kappa_is_unitary_and_a_group():
    grid = ConeGrid(1e-4, 60.0, 160)
    fib = build_fiber("point", 1)
    u = cone_function(grid, fib, lambda x: x * np.exp(-x))
    n0 = cone_norm(u)
    for rho in (2.0, 5.0, 0.5):
        nk = cone_norm(kappa_apply(u, rho))
        npt.assert_allclose(nk, n0, rtol=1e-6)
    # round trip; kappa_{1/2} samples below x_lo for x < 2 x_lo, so compare
    # only where both dilations stay on the grid
    back = kappa_apply(kappa_apply(u, 2.0), 0.5)
    mid = (grid.nodes >= 4 * grid.x_lo) & (grid.nodes <= grid.x_max / 4)
    npt.assert_allclose(back.values[mid], u.values[mid], atol=1e-8 * n0)


def test_kappa_rejects_nonpositive_rho():
    grid = ConeGrid(1e-3, 2.0, 16)
    fib = build_fiber("point", 1)
    u = cone_function(grid, fib, lambda x: np.exp(-x))
    with pytest.raises(ConfigurationError):
        kappa_apply(u, 0.0)


def test_dilation_matrix_matches_kappa_apply():
    grid = ConeGrid(1e-4, 60.0, 120)
    fib = build_fiber("point", 2)
    u = cone_function(grid, fib, lambda x: [np.exp(-x), x * np.exp(-2 * x)])
    K = dilation_matrix(grid, 3.0, dim=2)
    direct = (K @ u.values.ravel()).reshape(grid.n, 2)
    npt.assert_allclose(direct, kappa_apply(u, 3.0).values, atol=1e-10)
