"""Shared fixtures: model operators and their boundary data, built once."""

import numpy as np
import pytest

from wedgecheck import (
    assemble_pencil,
    boundary_spectrum,
    build_model,
    build_trace_space,
    kernel_bundle_sweep,
)

SWEEP_ETAS = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)


def _trace(op):
    return build_trace_space(boundary_spectrum(assemble_pencil(op)))


@pytest.fixture(scope="session")
def dbar():
    return build_model("dbar")


@pytest.fixture(scope="session")
def dbar_trace(dbar):
    return _trace(dbar)


@pytest.fixture(scope="session")
def dbar_adj_trace(dbar):
    return _trace(dbar.adjoint())


@pytest.fixture(scope="session")
def dbar_sweep(dbar):
    return kernel_bundle_sweep(dbar, np.asarray(SWEEP_ETAS))


@pytest.fixture(scope="session")
def dirac():
    return build_model("dirac")


@pytest.fixture(scope="session")
def dirac_trace(dirac):
    return _trace(dirac)


@pytest.fixture(scope="session")
def dirac_sweep(dirac):
    return kernel_bundle_sweep(dirac, np.asarray(SWEEP_ETAS))


@pytest.fixture(scope="session")
def jordan():
    return build_model("jordan")


@pytest.fixture(scope="session")
def jordan_trace(jordan):
    return _trace(jordan)


@pytest.fixture(scope="session")
def jordan_adj_trace(jordan):
    return _trace(jordan.adjoint())
