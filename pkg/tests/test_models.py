"""Closed-form properties of the catalog operators."""

import numpy as np
import numpy.testing as npt
import pytest

from wedgecheck import build_model
from wedgecheck.models import MODEL_BUILDERS, PAULI_X, PAULI_Y, PAULI_Z


def test_catalog_is_complete():
    assert set(MODEL_BUILDERS) == {"dbar", "dirac", "rotating_dirac",
                                   "jordan", "weight_line", "shifted_root"}
    with pytest.raises(KeyError):
        build_model("laplace")


def test_pauli_triple():
    for s in (PAULI_X, PAULI_Y, PAULI_Z):
        npt.assert_array_equal(s @ s, np.eye(2))
        npt.assert_array_equal(s, s.conj().T)
    npt.assert_array_equal(PAULI_X @ PAULI_Y + PAULI_Y @ PAULI_X,
                           np.zeros((2, 2)))
    npt.assert_array_equal(PAULI_X @ PAULI_Z + PAULI_Z @ PAULI_X,
                           np.zeros((2, 2)))


def test_dbar_symbol_modulus(dbar):
    rng = np.random.default_rng(0)
    for _ in range(8):
        xi, eta = rng.standard_normal(2)
        s = dbar.symbol(xi, eta)
        npt.assert_allclose(np.abs(s[0, 0]), np.hypot(xi, eta), rtol=1e-12)


def test_dirac_symbol_squares_to_the_metric(dirac):
    rng = np.random.default_rng(1)
    for _ in range(8):
        xi, eta, zeta = rng.standard_normal(3)
        s = dirac.symbol(xi, np.array([eta]), zeta)
        npt.assert_allclose(s @ s, (xi ** 2 + eta ** 2 + zeta ** 2) * np.eye(2),
                            atol=1e-12)


def test_rotating_dirac_stays_clifford():
    op = build_model("rotating_dirac")
    rng = np.random.default_rng(2)
    for y in (0.0, 0.9, 2.5):
        ax = op.a_x.at_theta(0.0, y)
        af = op.a_fiber.at_theta(0.0, y)
        ae = op.a_edge[0].at_theta(0.0, y)
        for a, b in ((ax, af), (ax, ae), (af, ae)):
            npt.assert_allclose(a @ b + b @ a, np.zeros((2, 2)), atol=1e-14)
        xi, eta, zeta = rng.standard_normal(3)
        s = op.symbol(xi, np.array([eta]), zeta, y=y)
        npt.assert_allclose(s @ s, (xi ** 2 + eta ** 2 + zeta ** 2) * np.eye(2),
                            atol=1e-12)


def test_rotating_dirac_speed_parameter():
    op = build_model("rotating_dirac", speed=2)
    npt.assert_allclose(op.a_x.at_theta(0.0, np.pi / 2), -PAULI_X, atol=1e-14)


def test_jordan_zeroth_order_is_nilpotent(jordan):
    N = jordan.a_zero.at_theta(0.0)
    npt.assert_array_equal(N @ N, np.zeros((2, 2)))
    assert np.linalg.matrix_rank(N) == 1


def test_adjoint_is_an_involution(dbar, dirac):
    for op in (dbar, dirac):
        back = op.adjoint().adjoint()
        for field, orig in (("a_x", op.a_x), ("a_zero", op.a_zero)):
            npt.assert_allclose(getattr(back, field).at_theta(0.3),
                                orig.at_theta(0.3), atol=1e-14)
