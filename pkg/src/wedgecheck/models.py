"""Canonical example operators with closed-form reference data.

Every model here has hand-checkable spectral data; the test suite freezes
those values as oracles.  All operators are first order in model-edge form

    A = x^{-1}( a_x xD_x + sum_j a_{y_j} xD_{y_j} + a_theta D_theta + a_0 ).
"""

from __future__ import annotations

import numpy as np

from .fiber import build_fiber
from .indicial import WedgeOp

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def dbar_model() -> WedgeOp:
    """A = D_x + i D_y on the half-plane collar (point fiber).

    Indicial pencil P(sigma) = sigma: boundary spectrum {0} with
    multiplicity 1, trace space spanned by the constant, g-matrix [1/2].
    The cone kernel at edge covariable eta is spanned by e^{eta x} for
    eta < 0 and trivial for eta > 0.
    """
    fib = build_fiber("point", 1)
    return WedgeOp(fib, [[1.0]], ([[1.0j]],), [[0.0]], name="dbar")


def dirac_model(modes: int = 2) -> WedgeOp:
    """Dirac-type operator on a cone over the circle, rank 2.

    x(A at eta) = S1 xD_x + S2 D_theta + (x eta) S3 with the anticommuting
    Hermitian triple S1 = sigma_x (radial), S2 = sigma_z (fiber),
    S3 = sigma_y (edge).  Per fiber mode k the indicial pencil is
    sigma S1 + k S2 with det = -(sigma^2 + k^2): roots +-ik, so the strip
    spectrum is {0} with multiplicity 2 (two chains from mode 0) and the
    principal wedge symbol has |det| = (xi^2 + eta^2 + zeta^2) on the
    sphere (Clifford relations).
    """
    fib = build_fiber("circle", 2, modes=modes)
    return WedgeOp(fib, PAULI_X, (PAULI_Y,), np.zeros((2, 2)),
                   a_fiber=PAULI_Z, name="dirac")


def rotating_dirac_model(modes: int = 2, speed: int = 1) -> WedgeOp:
    """Dirac model conjugated by the edge-periodic rotation exp(i y speed S3 / 2).

    The radial and fiber coefficients rotate in the (S1, S2) plane while
    the edge coefficient S3 is fixed; every pencil along the edge is
    isospectral to the constant Dirac model (conjugation by a unitary),
    which tests y-dependent coefficient plumbing against closed forms.
    """
    fib = build_fiber("circle", 2, modes=modes)

    def a_x(y):
        return np.cos(speed * y) * PAULI_X + np.sin(speed * y) * PAULI_Z

    def a_fiber(y):
        return np.cos(speed * y) * PAULI_Z - np.sin(speed * y) * PAULI_X

    return WedgeOp(fib, a_x, (PAULI_Y,), np.zeros((2, 2)),
                   a_fiber=a_fiber, name="rotating dirac")


def jordan_model() -> WedgeOp:
    """Point fiber, rank 2, nilpotent zeroth order term.

    Pencil P(sigma) = I sigma + [[0,1],[0,0]]: a single length-2 Jordan
    chain at sigma = 0, so the trace space contains a log x element and
    the g-matrix is a 2x2 Jordan block with both eigenvalues 1/2.
    """
    fib = build_fiber("point", 2)
    return WedgeOp(fib, np.eye(2), (1.0j * np.eye(2),),
                   np.array([[0.0, 1.0], [0.0, 0.0]]), name="jordan")


def weight_line_model() -> WedgeOp:
    """Scalar model ([1], [-0.5i]): indicial root exactly on Im sigma = 1/2.

    boundary_spectrum must refuse it (weight-line violation).
    """
    fib = build_fiber("point", 1)
    return WedgeOp(fib, [[1.0]], ([[1.0j]],), [[-0.5j]], name="weight line violator")


def shifted_root_model() -> WedgeOp:
    """Scalar model with the indicial root below the strip.

    P(sigma) = sigma + 0.8i has its root at sigma = -0.8i, so the trace
    space is empty while the cone kernel at eta > 0 (edge coefficient -i)
    is spanned by x^{0.8} e^{-eta x}: the minimal domain fails injectivity
    (N' = 1 > dim spanned traces = 0).
    """
    fib = build_fiber("point", 1)
    return WedgeOp(fib, [[1.0]], ([[-1.0j]],), [[0.8j]], name="shifted root")


MODEL_BUILDERS = {
    "dbar": dbar_model,
    "dirac": dirac_model,
    "rotating_dirac": rotating_dirac_model,
    "jordan": jordan_model,
    "weight_line": weight_line_model,
    "shifted_root": shifted_root_model,
}


def build_model(name: str, **kwargs) -> WedgeOp:
    if name not in MODEL_BUILDERS:
        raise KeyError(f"unknown model {name!r}; have {sorted(MODEL_BUILDERS)}")
    return MODEL_BUILDERS[name](**kwargs)
