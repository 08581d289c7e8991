"""Acceptance battery: the nine primary criteria, one pass/fail line each.

Every criterion prints exactly one summary line; tolerances and runtime
budgets are stated inline next to the checks that enforce them.
"""

import functools
import os
import subprocess
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest

from oracles import (
    det_root_oracle,
    mellin_entire_tail,
    mellin_quadrature,
    root_sort_key,
)
from wedgecheck import (
    ConeGrid,
    RectContour,
    assemble_pencil,
    boundary_spectrum,
    build_model,
    build_trace_space,
    cone_symbol,
    green_pairing,
    identity_boundary,
    identity_projection,
    kernel_bundle_sweep,
    kernel_equivariance,
    kernel_max,
    lopatinskii_check,
    mellin_singular,
    run_condition_battery,
    skew_adjoint_residual,
    trace_rank,
    twisted_homogeneity_residual,
)
from wedgecheck.cli import main as cli_main
from wedgecheck.edgesym import (
    EXTENSION_CUTOFF,
    MetricBracket,
    angle_bracket,
    boundary_limit_errors,
    boundary_symbol,
    collar_trace_coefficients,
    cutoff_point_symbol,
    edge_sobolev_norm,
    extension_apply,
    random_edge_function,
    symbol_estimate_check,
)
from wedgecheck.indicial import TraceElement
from wedgecheck.mellin import REFERENCE_CUTOFF


def criterion(number, label):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kw):
            try:
                fn(*args, **kw)
            except BaseException:
                print("criterion {0} ({1}): FAIL".format(number, label))
                raise
            print("criterion {0} ({1}): PASS".format(number, label))
        return wrapper
    return deco


def _trace(op, y=0.0):
    return build_trace_space(boundary_spectrum(assemble_pencil(op, y)))


def _config_path(name):
    return str(resources.files("wedgecheck") / "configs" / name)


# ---------------------------------------------------------------------------


@criterion(1, "dbar end-to-end")
def test_criterion_1():
    t0 = time.perf_counter()
    op = build_model("dbar")

    spec = boundary_spectrum(assemble_pencil(op))
    assert len(spec.roots) == 1
    assert abs(spec.roots[0].sigma) <= 1e-10
    assert spec.roots[0].alg_mult == 1

    trace = build_trace_space(spec)
    assert trace.dim == 1
    assert np.max(np.abs(trace.g_matrix - [[0.5]])) <= 1e-12

    etas = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
    sweep = kernel_bundle_sweep(op, etas)
    sweep_adj = kernel_bundle_sweep(op.adjoint(), etas)
    dims = sweep.dims()
    npt.assert_array_equal(dims[:3], 1)     # component eta < 0
    npt.assert_array_equal(dims[3:], 0)     # component eta > 0
    for rec, rec_a in zip(sweep.records, sweep_adj.records):
        assert rec.dim_kernel + rec_a.dim_kernel == trace.dim == 1

    naive = lopatinskii_check(sweep, trace, identity_boundary(trace),
                              identity_projection(trace.dim))
    assert not naive.passed          # B = Pi = identity is NOT elliptic

    battery = run_condition_battery(op, eta_samples=etas, aps_auto=True)
    assert battery.passed and battery.exit_code == 0
    assert battery.find("9.5").passed    # APS-style projection IS elliptic

    assert time.perf_counter() - t0 <= 5.0


@criterion(2, "Green pairing")
def test_criterion_2():
    t0 = time.perf_counter()
    op = build_model("dbar")
    trace, trace_adj = _trace(op), _trace(op.adjoint())

    pm = green_pairing(trace, trace_adj)
    # classical half-line Green formula: beta(u, v) = i u(0) conj(v(0));
    # both trace bases are the constant 1
    u0 = trace.elements[0].coeffs[0, 0]
    v0 = trace_adj.elements[0].coeffs[0, 0]
    exact = 1j * u0 * np.conj(v0)
    assert abs(pm.matrix[0, 0] - exact) <= 1e-10
    assert abs(exact - 1j) == 0.0

    quad = green_pairing(trace, trace_adj, mode="quadrature")
    assert np.max(np.abs(quad.matrix - pm.matrix)) <= 1e-8

    rects = [RectContour(-0.6, 0.6, -0.2, 0.2),
             RectContour(-1.5, 0.9, -0.4, 0.3),
             RectContour(-0.4, 0.4, -0.45, 0.45)]
    mats = [green_pairing(trace, trace_adj, mode="quadrature",
                          contour=c).matrix for c in rects]
    for m in mats[1:]:
        assert np.max(np.abs(m - mats[0])) <= 1e-8

    jordan = build_model("jordan")
    pm_j = green_pairing(_trace(jordan), _trace(jordan.adjoint()))
    assert skew_adjoint_residual(pm_j) <= 1e-8

    assert time.perf_counter() - t0 <= 2.0


@criterion(3, "twisted homogeneity and equivariance")
def test_criterion_3():
    t0 = time.perf_counter()
    dbar = build_model("dbar")
    dirac = build_model("dirac")

    for op in (dbar, dirac):
        for eta in (-1.0, 1.0):
            for rho in (2.0, 5.0):
                assert twisted_homogeneity_residual(op, eta, rho) <= 1e-8

    for op, eta in ((dbar, -1.0), (dirac, -1.0), (dirac, 1.0)):
        for rho in (2.0, 5.0):
            out = kernel_equivariance(op, eta, rho)
            assert out["dim_1"] == out["dim_2"]
            assert out["kernel_angle"] <= 1e-6      # kappa_rho K(eta) = K(rho eta)
            assert out["trace_angle"] <= 1e-6       # coords transported by rho^g

    assert time.perf_counter() - t0 <= 10.0


@criterion(4, "Dirac kernel bundle over the cosphere")
def test_criterion_4():
    t0 = time.perf_counter()
    op = build_model("dirac")

    # indicial roots against the brute-force per-mode determinant oracle
    oracle = sorted(det_root_oracle(op), key=root_sort_key)
    spec = boundary_spectrum(assemble_pencil(op))
    got = sorted(np.concatenate([[r.sigma] * r.alg_mult for r in spec.roots]),
                 key=root_sort_key)
    assert len(oracle) == len(got)
    assert np.max(np.abs(np.asarray(oracle) - np.asarray(got))) <= 1e-8

    # 64 covector samples, 32 per cosphere component
    half = np.geomspace(0.5, 2.0, 32)
    etas = np.concatenate([-half[::-1], half])
    sweep = kernel_bundle_sweep(op, etas)
    sweep_adj = kernel_bundle_sweep(op.adjoint(), etas)

    dims = sweep.dims()
    assert set(dims[:32]) == {1} and set(dims[32:]) == {1}

    # bundle continuity proxy: adjacent principal angles within components
    within = np.delete(sweep.trace_jumps, 31)   # index 31 crosses the sign
    assert np.max(within) <= 0.05

    # minimal-domain injectivity and maximal-domain surjectivity everywhere
    for rec, rec_a in zip(sweep.records, sweep_adj.records):
        assert rec.trace_rank == rec.dim_kernel
        assert rec_a.trace_rank == rec_a.dim_kernel

    assert time.perf_counter() - t0 <= 60.0


@criterion(5, "Mellin singular parts")
def test_criterion_5():
    for level in (0, 1, 2):
        rng = np.random.default_rng(20 + level)
        sigma0 = 0.3 - 0.1j
        coeffs = rng.standard_normal((level + 1, 2)) \
            + 1j * rng.standard_normal((level + 1, 2))
        el = TraceElement(sigma0, level, 0, coeffs)
        sp = mellin_singular(el)
        for k in range(5):   # 5 off-pole probes per log level
            sigma = sigma0 + 1.0j + 0.7 * (k - 2)
            direct = mellin_quadrature(el, REFERENCE_CUTOFF, sigma)
            tail = mellin_entire_tail(el, REFERENCE_CUTOFF, sigma)
            assert np.max(np.abs(direct - tail - sp(sigma))) <= 1e-8


@criterion(6, "extension operator")
def test_criterion_6():
    t0 = time.perf_counter()
    trace = _trace(build_model("dbar"))
    bracket = MetricBracket(g11=400.0)
    grid = ConeGrid(2e-4, 2.0, 160)
    f = random_edge_function(16, dim=trace.dim, seed=7, decay=0.5)
    collar = extension_apply(f, trace, bracket, cutoff=EXTENSION_CUTOFF,
                             grid=grid)

    assert collar.support_defect() == 0.0           # vanishes beyond x = c0

    errs = boundary_limit_errors(collar, eps=(1e-1, 1e-2, 1e-3))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-3

    fhat, _ = collar_trace_coefficients(collar)
    assert np.max(np.abs(fhat - f.coeffs)) <= 1e-6  # mode-wise round trip

    assert time.perf_counter() - t0 <= 10.0


@criterion(7, "symbol estimates and edge norms")
def test_criterion_7():
    etas = np.geomspace(10.0, 1.0e3, 13)

    # frozen-radius cutoff profile: satisfies estimates of order <= -4
    a = cutoff_point_symbol(MetricBracket(), REFERENCE_CUTOFF, 0.1, order=-4.0)
    rep = symbol_estimate_check(a, max_order=2, etas=etas)
    assert rep.passed

    # the complete first-order boundary symbols are order 0 between the
    # dilation-action value spaces
    grid = ConeGrid(2e-4, 2.0, 48)
    for name in ("dbar", "dirac"):
        b = boundary_symbol(build_model(name), grid)
        assert b.order == 0.0
        rep = symbol_estimate_check(b, max_order=1,
                                    etas=np.geomspace(10.0, 1.0e3, 9))
        assert rep.passed

    # trivial-action edge Sobolev norm == the Fourier-multiplier formula
    rng = np.random.default_rng(6)
    for trial in range(20):
        band = int(rng.integers(2, 14))
        u = random_edge_function(band, dim=int(rng.integers(1, 3)),
                                 seed=300 + trial, decay=0.8)
        s = float(rng.uniform(-2.0, 2.0))
        direct = np.sqrt(2 * np.pi * sum(
            angle_bracket(float(n)) ** (2 * s) * np.sum(np.abs(u.mode(n)) ** 2)
            for n in u.modes))
        assert abs(edge_sobolev_norm(u, s) - direct) <= 1e-10 * direct


@criterion(8, "adjoint pencil identity")
def test_criterion_8():
    rng = np.random.default_rng(8)
    sigmas = rng.standard_normal(10) + 1j * rng.standard_normal(10) * 0.4
    for name in ("dbar", "dirac", "rotating_dirac", "jordan", "weight_line",
                 "shifted_root"):
        op = build_model(name)
        for y in ((0.0, 0.9) if name == "rotating_dirac" else (0.0,)):
            pen = assemble_pencil(op, y)
            pen_adj = assemble_pencil(op.adjoint(), y)
            for sigma in sigmas:
                expected = pen(np.conj(sigma)).conj().T
                assert np.max(np.abs(pen.adjoint()(sigma) - expected)) <= 1e-12
                assert np.max(np.abs(pen_adj(sigma) - expected)) <= 1e-12

    # surjectivity condition vs the closed-form adjoint kernels of dbar:
    # ker A*(eta) = span e^{-eta x}, admissible only for eta > 0
    op = build_model("dbar")
    adj = op.adjoint()
    spec_a = boundary_spectrum(assemble_pencil(adj))
    trace_a = build_trace_space(spec_a)
    for eta, expected_dim in ((-1.0, 0), (1.0, 1)):
        kb = kernel_max(cone_symbol(adj, eta), spectrum=spec_a, trace=trace_a)
        assert kb.dim_kernel == expected_dim
        assert trace_rank(kb) == expected_dim   # adjoint traces stay injective
    battery = run_condition_battery(op, eta_samples=(-1.0, 1.0))
    rows = battery.find("9.3").data["rows"]
    assert [r["adj_dim_kernel"] for r in rows] == [0, 1]
    assert all(r["surjective"] for r in rows)


@criterion(9, "driver determinism and grid invariance")
def test_criterion_9(tmp_path, capsys):
    # a weight-line violation exits 1 and names condition (9.2)
    proc = subprocess.run(
        [sys.executable, "-m", "wedgecheck.cli", "check", "--config",
         _config_path("weight_line.toml")],
        capture_output=True, text=True, env=dict(os.environ))
    assert proc.returncode == 1
    assert "(9.2)" in proc.stdout + proc.stderr

    # identical configs give byte-identical reports
    blobs = []
    for tag in ("a", "b"):
        out_dir = tmp_path / tag
        code = cli_main(["check", "--config", _config_path("dirac.toml"),
                         "--out", str(out_dir)])
        capsys.readouterr()
        assert code == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(out_dir.iterdir())})
    assert blobs[0] == blobs[1]

    # doubling radial nodes and Fourier modes moves no dimension or verdict
    # criterion 1: the dbar battery
    op = build_model("dbar")
    base = run_condition_battery(op, aps_auto=True)
    fine = run_condition_battery(op, aps_auto=True,
                                 sweep_kw={"n_window": 96})
    assert [e.passed for e in fine.entries] == [e.passed for e in base.entries]
    assert fine.trace_dim == base.trace_dim
    assert fine.sweep.dims().tolist() == base.sweep.dims().tolist()

    # criterion 2: doubled contour resolution leaves the pairing verdict
    trace, trace_adj = _trace(op), _trace(op.adjoint())
    pm = green_pairing(trace, trace_adj)
    from wedgecheck import default_contour
    fine_contour = default_contour([el.sigma for el in trace.elements],
                                   n_edge=240)
    quad = green_pairing(trace, trace_adj, mode="quadrature",
                         contour=fine_contour)
    assert np.max(np.abs(quad.matrix - pm.matrix)) <= 1e-8

    # criteria 3 and 4: Dirac with doubled fiber modes and radial nodes
    dirac_fine = build_model("dirac", modes=4)
    for rho in (2.0, 5.0):
        assert twisted_homogeneity_residual(dirac_fine, 1.0, rho) <= 1e-8
    oracle = sorted(det_root_oracle(dirac_fine), key=root_sort_key)
    spec = boundary_spectrum(assemble_pencil(dirac_fine))
    got = sorted(np.concatenate([[r.sigma] * r.alg_mult for r in spec.roots]),
                 key=root_sort_key)
    assert np.max(np.abs(np.asarray(oracle) - np.asarray(got))) <= 1e-8
    assert spec.trace_dimension() == 2      # same strip data as modes = 2

    half = np.geomspace(0.5, 2.0, 4)
    etas = np.concatenate([-half[::-1], half])
    sweep = kernel_bundle_sweep(dirac_fine, etas, n_window=96)
    sweep_adj = kernel_bundle_sweep(dirac_fine.adjoint(), etas, n_window=96)
    assert set(sweep.dims()) == {1} and set(sweep_adj.dims()) == {1}
    for rec, rec_a in zip(sweep.records, sweep_adj.records):
        assert rec.trace_rank == rec.dim_kernel
        assert rec_a.trace_rank == rec_a.dim_kernel
