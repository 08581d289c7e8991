"""Ellipticity battery: w-ellipticity, Lopatinskii verdicts, reports."""

import numpy as np
import numpy.testing as npt
import pytest

from wedgecheck import (
    WedgeOp,
    aps_projection_construct,
    atiyah_bott_rank_report,
    build_fiber,
    build_model,
    cosphere_covectors,
    identity_boundary,
    identity_projection,
    kernel_isomorphism_boundary,
    lopatinskii_check,
    report_emit,
    run_condition_battery,
    w_ellipticity_check,
)
from wedgecheck.checker import RANK_NOTE, BoundarySampler
from wedgecheck.errors import ShapeError


# ---------------------------------------------------------------------------
# w-ellipticity over the cosphere


@pytest.mark.parametrize("name", ["dbar", "dirac", "jordan"])
def test_model_symbols_are_elliptic(name):
    rep = w_ellipticity_check(build_model(name))
    assert rep.passed
    # all three have |det symbol| = |covector| on the sphere
    npt.assert_allclose(rep.min_singular, 1.0, rtol=1e-10)


def test_characteristic_symbol_fails():
    # a_x = a_edge = 1: the symbol xi + eta vanishes on the anti-diagonal
    fib = build_fiber("point", 1)
    op = WedgeOp(fib, [[1.0]], ([[1.0]],), [[0.0]])
    rep = w_ellipticity_check(op)
    assert not rep.passed
    assert rep.min_singular <= 1e-6
    assert "covector" in rep.summary()


def test_cosphere_covectors_are_unit(dbar, dirac):
    for op in (dbar, dirac):
        cov = cosphere_covectors(op, 40)
        npt.assert_allclose(np.linalg.norm(cov, axis=1), 1.0, rtol=1e-12)
        d = cov.shape[1]
        npt.assert_array_equal(cov[:2 * d],
                               np.vstack([np.eye(d), -np.eye(d)]))


# ---------------------------------------------------------------------------
# boundary samplers and the Lopatinskii test


def test_boundary_sampler_validates_shapes(dbar_trace):
    with pytest.raises(ShapeError):
        BoundarySampler(base={1.0: np.eye(2), -1.0: np.eye(3)},
                        g_matrix=dbar_trace.g_matrix,
                        a_matrix=np.zeros((2, 2)))


def test_identity_boundary_is_structural_failure(dbar, dbar_sweep, dbar_trace):
    # B = Pi = identity asks a rank-1 target of a rank-0 kernel on eta > 0:
    # dimension mismatch, not a quantitative degeneracy
    verdict = lopatinskii_check(dbar_sweep, dbar_trace,
                                identity_boundary(dbar_trace),
                                identity_projection(dbar_trace.dim))
    assert not verdict.passed
    assert verdict.structural_failure
    assert "NOT elliptic" in verdict.summary()
    assert any(not r.passed for r in verdict.records)


def test_aps_construction_is_elliptic(dbar, dbar_sweep, dbar_trace):
    proj = aps_projection_construct(dbar_sweep, dbar_trace)
    verdict = lopatinskii_check(dbar_sweep, dbar_trace,
                                identity_boundary(dbar_trace), proj)
    assert verdict.passed
    npt.assert_allclose(
        min(r.min_singular for r in verdict.records if np.isfinite(r.min_singular)),
        1.1928013503537625, rtol=1e-6)
    # the scaling law holds to round-off at every sample
    assert max(r.scaling_residual for r in verdict.records) <= 1e-10


def test_kernel_isomorphism_boundary_is_elliptic(dirac, dirac_sweep,
                                                 dirac_trace):
    bc = kernel_isomorphism_boundary(dirac_sweep, dirac_trace)
    verdict = lopatinskii_check(dirac_sweep, dirac_trace, bc)
    assert verdict.passed
    assert not verdict.structural_failure
    assert max(r.scaling_residual for r in verdict.records) <= 1e-10


def test_classical_dirac_condition(dirac, dirac_sweep, dirac_trace):
    # B = [1, 1] restricts to an isomorphism on both kernel lines (e1 and e2)
    b = np.array([[1.0, 1.0]], dtype=complex)
    bc = BoundarySampler(base={1.0: b, -1.0: b},
                         g_matrix=dirac_trace.g_matrix,
                         a_matrix=np.zeros((1, 1)), name="sum trace")
    verdict = lopatinskii_check(dirac_sweep, dirac_trace, bc)
    assert verdict.passed
    npt.assert_allclose(
        min(r.min_singular for r in verdict.records), 0.3364828, rtol=1e-5)


def test_rank_report_wording(dbar_sweep):
    rep = atiyah_bott_rank_report(dbar_sweep)
    assert rep.constant           # constant on each component
    assert not rep.equal          # 1 on eta < 0 vs 0 on eta > 0
    assert rep.note == RANK_NOTE
    assert "Rank equality is necessary, not sufficient." in rep.table()


# ---------------------------------------------------------------------------
# the full battery


def test_dbar_battery_passes(dbar):
    battery = run_condition_battery(dbar, aps_auto=True)
    assert battery.passed and battery.exit_code == 0
    assert [e.tag for e in battery.entries] == ["9.1", "9.2", "9.3", "9.5"]
    assert all(e.passed for e in battery.entries)
    assert battery.find("9.2").data["margin"] == pytest.approx(0.5)
    assert battery.summary_lines()[-1] == "overall: PASS"
    for line in battery.summary_lines():
        if line.startswith("condition"):
            assert ": PASS -- " in line


def test_weight_line_battery_reports_9_2():
    battery = run_condition_battery(build_model("weight_line"))
    assert not battery.passed and battery.exit_code == 1
    entry = battery.find("9.2")
    assert not entry.passed
    assert entry.line().startswith("condition (9.2) weight-line clearance: FAIL -- ")
    # conditions depending on the spectrum are not emitted
    with pytest.raises(KeyError):
        battery.find("9.3")


def test_shifted_root_battery_fails_9_3():
    battery = run_condition_battery(build_model("shifted_root"))
    assert battery.exit_code == 1
    entry = battery.find("9.3")
    assert not entry.passed
    assert "N'=1 (trace rank 0)" in entry.detail


def test_battery_reports_are_byte_identical(tmp_path, dbar):
    from pathlib import Path
    out = []
    for tag in ("a", "b"):
        battery = run_condition_battery(dbar, aps_auto=True)
        paths = [Path(p) for p in report_emit(battery, tmp_path / tag)]
        out.append({p.name: p.read_bytes() for p in paths})
    assert out[0].keys() == out[1].keys()
    for name in out[0]:
        assert out[0][name] == out[1][name], name


def test_dbar_spectrum_csv_row(tmp_path, dbar):
    battery = run_condition_battery(dbar)
    report_emit(battery, tmp_path)
    lines = (tmp_path / "spectrum.csv").read_text().strip().splitlines()
    assert len(lines) == 2  # header + the single root
    assert lines[1] == "0.000000000000e+00,0.000000000000e+00,1,1"
