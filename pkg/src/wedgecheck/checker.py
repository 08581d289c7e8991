"""Ellipticity condition battery and boundary-condition verdicts.

Every hypothesis a first-order wedge operator must satisfy to be Fredholm
is checked here mechanically: invertibility of the principal symbol over the
cosphere (9.1), weight-line clearance of the boundary spectrum (9.2),
injectivity on the minimal domain / surjectivity on the maximal domain of
the normal family (9.3), and the boundary-condition isomorphism (9.5) in
both its classical Shapiro-Lopatinskii form and the projection (APS-type)
generalization.  Reports are plain dataclasses; :func:`report_emit` writes
them as byte-stable JSON and CSV so identical runs diff clean.

Boundary symbols are handled through small sampler objects that carry their
own twisted-homogeneity data: a base matrix per cosphere component, the
order, a generator ``a`` of the dilation action on the boundary bundle, and
the trace-space generator ``g``.  The extension law off the unit cosphere is

    sigma(B)(rho*eta) = rho^mu * rho^a @ sigma(B)(eta) @ rho^(-g),

which is the unique reading compatible with how kernel traces transport
(coordinates of kappa_rho u are rho^g times those of u); with it the
restricted Lopatinskii matrix is exactly scale invariant once frames are
transported, and that invariance is what ``scaling_residual`` measures.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (ConfigurationError, ExtractionError, ShapeError,
                     WedgecheckError, WeightLineError)
from .fiber import CIRCLE
from .indicial import (BoundarySpectrum, TraceSpace, WedgeOp, assemble_pencil,
                       boundary_spectrum, build_trace_space)
from .mellin import trace_gram
from .cone import SweepResult, kernel_bundle_sweep

__all__ = [
    "WEllipticityReport", "w_ellipticity_check",
    "ConditionEntry", "BatteryReport", "run_condition_battery",
    "BoundarySampler", "ProjectionSampler", "identity_boundary",
    "kernel_isomorphism_boundary", "aps_projection_construct",
    "LopatinskiiRecord", "LopatinskiiVerdict", "lopatinskii_check",
    "RankReport", "atiyah_bott_rank_report", "report_emit",
]

RANK_NOTE = "Rank equality is necessary, not sufficient."


# ---------------------------------------------------------------------------
# (9.1) principal symbol invertibility


def cosphere_covectors(op: WedgeOp, n: int = 96) -> np.ndarray:
    """Deterministic unit covectors (xi, eta_1..eta_q, zeta) for sampling.

    Dimension 2 uses equispaced angles, dimension 3 a Fibonacci lattice,
    higher dimensions a seeded Gaussian cloud in general position.
    """
    d = 1 + op.edge_dim + (1 if op.fiber.kind == CIRCLE else 0)
    if d == 2:
        ang = 2.0 * math.pi * np.arange(n) / n
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
    elif d == 3:
        k = np.arange(n) + 0.5
        phi = math.pi * (3.0 - math.sqrt(5.0)) * k
        z = 1.0 - 2.0 * k / n
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    else:
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((n, d))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
    # make sure the coordinate directions themselves are probed
    pts = np.vstack([np.eye(d), -np.eye(d), pts])
    return pts


@dataclass
class WEllipticityReport:
    """Smallest singular value of the wedge principal symbol over a sample set."""

    min_singular: float
    worst: dict
    tolerance: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return bool(self.min_singular >= self.tolerance)

    def summary(self) -> str:
        head = "min singular value {0:.6e} over {1} samples (tolerance {2:.1e})".format(
            self.min_singular, self.n_samples, self.tolerance)
        if self.passed:
            return head
        w = self.worst
        return head + "; degenerate at covector (xi={0:.4f}, eta={1}, zeta={2:.4f}), " \
            "theta={3:.4f}, y={4:.4f}".format(w["xi"], w["eta"], w["zeta"],
                                              w["theta"], w["y"])


def w_ellipticity_check(op: WedgeOp, *, n_covectors: int = 96,
                        y_samples=(0.0,), n_theta: int = None,
                        tolerance: float = 1e-6) -> WEllipticityReport:
    """Sample the principal symbol on the unit cosphere and record the worst point.

    The symbol at a boundary covector (xi, eta, zeta) and fiber angle theta is
    the pointwise matrix a_x*xi + sum_j a_{y_j}*eta_j + a_theta*zeta; the check
    passes when its smallest singular value stays above ``tolerance`` over
    covectors x fiber angles x edge samples.
    """
    circle = op.fiber.kind == CIRCLE
    if n_theta is None:
        n_theta = max(4 * op.fiber.modes + 4, 12) if circle else 1
    thetas = 2.0 * math.pi * np.arange(n_theta) / n_theta if circle else np.array([0.0])
    pts = cosphere_covectors(op, n_covectors)
    q = op.edge_dim

    best = math.inf
    worst = {}
    count = 0
    for y in y_samples:
        for p in pts:
            xi = p[0]
            eta = p[1:1 + q]
            zeta = p[1 + q] if circle else 0.0
            for th in thetas:
                M = op.symbol(xi, eta, zeta, y=y, theta=th)
                s = np.linalg.svd(M, compute_uv=False)[-1]
                count += 1
                if s < best:
                    best = float(s)
                    worst = {"xi": float(xi), "eta": [float(e) for e in eta],
                             "zeta": float(zeta), "theta": float(th), "y": float(y)}
    return WEllipticityReport(min_singular=best, worst=worst,
                              tolerance=tolerance, n_samples=count)


# ---------------------------------------------------------------------------
# boundary-condition samplers


def _orthonormal_kernel_basis(traces: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Basis of span(traces), orthonormal in the Gram metric H = L L^H."""
    if traces.size == 0:
        return np.zeros((L.shape[0], 0), dtype=complex)
    Q, R = np.linalg.qr(L.conj().T @ traces)
    return np.linalg.solve(L.conj().T, Q)


def _power(gen: np.ndarray, rho: float) -> np.ndarray:
    return sla.expm(math.log(rho) * np.asarray(gen, dtype=complex))


@dataclass
class BoundarySampler:
    """Boundary symbol sigma(B): trace coordinates -> boundary bundle.

    ``base[+1]`` and ``base[-1]`` are the values on the two unit-cosphere
    components; off the unit sphere the sampler extends by the declared
    twisted-homogeneity law of order ``order`` with bundle action generator
    ``a_matrix`` and trace action generator ``g_matrix``.
    """

    base: dict
    g_matrix: np.ndarray
    a_matrix: np.ndarray
    order: float = 0.0
    name: str = "B"

    def __post_init__(self):
        shapes = {np.asarray(v).shape for v in self.base.values()}
        if len(shapes) != 1:
            raise ShapeError("boundary symbol values differ in shape across "
                             "cosphere components: {0}".format(sorted(shapes)))
        self.base = {s: np.asarray(v, dtype=complex) for s, v in self.base.items()}
        self.g_matrix = np.asarray(self.g_matrix, dtype=complex)
        self.a_matrix = np.asarray(self.a_matrix, dtype=complex)
        rows, cols = next(iter(self.base.values())).shape
        if cols != self.g_matrix.shape[0]:
            raise ShapeError("boundary symbol has {0} columns but the trace "
                             "space has dimension {1}".format(cols, self.g_matrix.shape[0]))
        if rows != self.a_matrix.shape[0]:
            raise ShapeError("boundary symbol has {0} rows but the bundle "
                             "action generator is {1}x{1}".format(rows, self.a_matrix.shape[0]))

    @property
    def dim_target(self) -> int:
        return next(iter(self.base.values())).shape[0]

    def __call__(self, eta) -> np.ndarray:
        eta = float(np.atleast_1d(np.asarray(eta, dtype=float))[0])
        if eta == 0.0:
            raise ConfigurationError("boundary symbols live on the cosphere; eta = 0")
        sign = 1 if eta > 0 else -1
        rho = abs(eta)
        out = self.base[sign]
        if rho != 1.0:
            out = rho ** self.order * _power(self.a_matrix, rho) @ out \
                @ _power(self.g_matrix, 1.0 / rho)
        return out


@dataclass
class ProjectionSampler:
    """Idempotent boundary projection sigma(Pi), extended by conjugation.

    Values off the unit cosphere are rho^a q rho^(-a) with the bundle action
    generator ``a_matrix`` (for trace-space projections this is g_matrix, so
    the extension has twisted-homogeneity degree zero).
    """

    base: dict
    a_matrix: np.ndarray
    ranks: dict
    name: str = "Pi"

    def __post_init__(self):
        self.base = {s: np.asarray(v, dtype=complex) for s, v in self.base.items()}
        self.a_matrix = np.asarray(self.a_matrix, dtype=complex)

    @property
    def dim(self) -> int:
        return next(iter(self.base.values())).shape[0]

    def rank(self, eta) -> int:
        eta = float(np.atleast_1d(np.asarray(eta, dtype=float))[0])
        return self.ranks[1 if eta > 0 else -1]

    def __call__(self, eta) -> np.ndarray:
        eta = float(np.atleast_1d(np.asarray(eta, dtype=float))[0])
        if eta == 0.0:
            raise ConfigurationError("projection symbols live on the cosphere; eta = 0")
        sign = 1 if eta > 0 else -1
        rho = abs(eta)
        q = self.base[sign]
        if rho != 1.0:
            S = _power(self.a_matrix, rho)
            q = S @ q @ np.linalg.inv(S)
        return q


def identity_boundary(trace: TraceSpace) -> BoundarySampler:
    """B = identity on trace coordinates (boundary bundle = trace bundle).

    With bundle action generator a = g the identity is twisted homogeneous
    of degree zero, so the sampler is exactly the identity at every eta.
    """
    n = trace.dim
    return BoundarySampler(base={1: np.eye(n), -1: np.eye(n)},
                           g_matrix=trace.g_matrix, a_matrix=trace.g_matrix,
                           order=0.0, name="identity")


def identity_projection(dim: int) -> ProjectionSampler:
    return ProjectionSampler(base={1: np.eye(dim), -1: np.eye(dim)},
                             a_matrix=np.zeros((dim, dim)),
                             ranks={1: dim, -1: dim}, name="identity")


def _component_records(sweep: SweepResult) -> dict:
    comps = {}
    for rec in sweep.records:
        eta = float(np.atleast_1d(rec.eta)[0])
        comps.setdefault(1 if eta > 0 else -1, []).append(rec)
    return comps


def _unit_record(records: list):
    return min(records, key=lambda r: abs(abs(float(np.atleast_1d(r.eta)[0])) - 1.0))


def kernel_isomorphism_boundary(sweep: SweepResult, trace: TraceSpace) -> BoundarySampler:
    """A classical boundary condition realizing the isomorphism K -> G_0.

    Takes the Gram-adjoint of an orthonormal kernel basis on each cosphere
    component, so sigma(B) restricted to K is an isometry.  Only exists when
    the kernel rank is the same on every component (the rank obstruction);
    otherwise no single boundary bundle works and this raises.
    """
    comps = _component_records(sweep)
    dims = {s: {r.dim_kernel for r in recs} for s, recs in comps.items()}
    for s, ds in dims.items():
        if len(ds) != 1:
            raise ExtractionError(
                "kernel rank jumps across the eta{0}0 cosphere component: {1}".format(
                    "<" if s < 0 else ">", sorted(ds)))
    flat = {s: next(iter(ds)) for s, ds in dims.items()}
    if len(set(flat.values())) != 1:
        raise ConfigurationError(
            "kernel ranks {0} differ across cosphere components; no classical "
            "boundary bundle can be isomorphic to both".format(flat))
    H = trace_gram(trace)
    L = np.linalg.cholesky(H + 1e-14 * np.eye(H.shape[0]))
    base = {}
    for s, recs in comps.items():
        B_K = _orthonormal_kernel_basis(_unit_record(recs).traces, L)
        base[s] = B_K.conj().T @ H
    n_out = next(iter(flat.values()))
    return BoundarySampler(base=base, g_matrix=trace.g_matrix,
                           a_matrix=np.zeros((n_out, n_out)), order=0.0,
                           name="kernel-isomorphism")


# ---------------------------------------------------------------------------
# APS-type projection construction


def aps_projection_construct(sweep: SweepResult, trace: TraceSpace, *,
                             idem_tolerance: float = 1e-10,
                             range_tolerance: float = 1e-6) -> ProjectionSampler:
    """Orthogonal projection onto the kernel bundle, in the trace inner product.

    At the unit sample of each cosphere component q is the Gram-orthogonal
    projection onto the kernel traces; off the unit sphere it extends by
    conjugation with rho^g (twisted homogeneity of degree zero).  The result
    is validated at every sweep sample: q must be idempotent to
    ``idem_tolerance`` and its range must match the sampled kernel fiber.
    A kernel rank jump within a component makes the bundle ill-defined and
    raises.
    """
    if trace.dim == 0:
        raise ConfigurationError("empty trace space: no boundary data to project")
    H = trace_gram(trace)
    comps = _component_records(sweep)
    base, ranks = {}, {}
    for s, recs in comps.items():
        dims = {r.dim_kernel for r in recs}
        if len(dims) != 1:
            raise ExtractionError(
                "kernel rank jumps across the eta{0}0 cosphere component "
                "({1}); cannot construct a projection boundary condition".format(
                    "<" if s < 0 else ">", sorted(dims)))
        rec = _unit_record(recs)
        K = rec.traces
        if rec.dim_kernel == 0:
            q = np.zeros((trace.dim, trace.dim), dtype=complex)
        else:
            G = K.conj().T @ H @ K
            q = K @ np.linalg.solve(G, K.conj().T @ H)
        base[s] = q
        ranks[s] = rec.dim_kernel
    sampler = ProjectionSampler(base=base, a_matrix=trace.g_matrix,
                                ranks=ranks, name="aps")

    for s, recs in comps.items():
        for rec in recs:
            eta = float(np.atleast_1d(rec.eta)[0])
            q = sampler(eta)
            idem = np.linalg.norm(q @ q - q, 2)
            if idem > idem_tolerance:
                raise ExtractionError(
                    "projection at eta={0:.4f} fails idempotency: "
                    "|q^2 - q| = {1:.3e}".format(eta, idem))
            if rec.dim_kernel:
                K = rec.traces
                defect = np.linalg.norm(q @ K - K, 2) / np.linalg.norm(K, 2)
                if defect > range_tolerance:
                    raise ExtractionError(
                        "projection range misses the kernel fiber at "
                        "eta={0:.4f}: relative defect {1:.3e}".format(eta, defect))
    return sampler


# ---------------------------------------------------------------------------
# (9.5) Lopatinskii / generalized APS verdict


@dataclass
class LopatinskiiRecord:
    eta: float
    dim_kernel: int
    dim_range: int
    min_singular: float
    cond: float
    scaling_residual: float
    passed: bool
    reason: str = ""


@dataclass
class LopatinskiiVerdict:
    """Per-sample boundary-condition verdict along the unit cosphere."""

    records: list
    iso_tolerance: float
    boundary_name: str
    projection_name: str

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def structural_failure(self) -> bool:
        return any("rank mismatch" in r.reason for r in self.records)

    def failing(self) -> list:
        return [r for r in self.records if not r.passed]

    def summary(self) -> str:
        if self.passed:
            worst = min((r.min_singular for r in self.records), default=math.inf)
            return "elliptic boundary condition (B={0}, Pi={1}): min singular " \
                "value {2:.6e} across {3} samples".format(
                    self.boundary_name, self.projection_name, worst, len(self.records))
        bad = self.failing()[0]
        why = bad.reason or "min singular value {0:.3e} below {1:.1e}".format(
            bad.min_singular, self.iso_tolerance)
        return "NOT elliptic (B={0}, Pi={1}): at eta={2:.4f} {3}".format(
            self.boundary_name, self.projection_name, bad.eta, why)


def lopatinskii_check(sweep: SweepResult, trace: TraceSpace,
                      boundary: BoundarySampler,
                      projection: ProjectionSampler = None, *,
                      iso_tolerance: float = 1e-6,
                      rho_check: float = 2.0) -> LopatinskiiVerdict:
    """Decide whether sigma(Pi) sigma(B) restricted to the kernel bundle is an
    isomorphism onto the range of sigma(Pi).

    At each sweep sample the kernel traces are orthonormalized in the trace
    Gram metric and the restricted map is expressed in an orthonormal basis
    of range sigma(Pi); the sample passes when the matrix is square with
    smallest singular value at least ``iso_tolerance``.  A rank mismatch is a
    structural failure: the verdict is NOT elliptic, with the dimensions in
    the record.  Homogeneity consistency is checked by re-evaluating at
    rho_check * eta and transporting all frames through the declared laws,
    which must reproduce the same matrix.
    """
    if trace.dim and boundary.g_matrix.shape[0] != trace.dim:
        raise ShapeError("boundary sampler was built for trace dimension {0}, "
                         "sweep has {1}".format(boundary.g_matrix.shape[0], trace.dim))
    if projection is not None and projection.dim != boundary.dim_target:
        raise ShapeError("projection acts on dimension {0} but the boundary "
                         "symbol maps into dimension {1}".format(
                             projection.dim, boundary.dim_target))
    H = trace_gram(trace) if trace.dim else np.zeros((0, 0))
    L = np.linalg.cholesky(H + 1e-14 * np.eye(H.shape[0])) if trace.dim else H

    records = []
    for rec in sweep.records:
        eta = float(np.atleast_1d(rec.eta)[0])
        B_K = _orthonormal_kernel_basis(rec.traces, L) if trace.dim else \
            np.zeros((0, 0), dtype=complex)
        Bmat = boundary(eta)
        if projection is None:
            P = np.eye(boundary.dim_target)
            U_r = np.eye(boundary.dim_target)
            rank_p = boundary.dim_target
        else:
            P = projection(eta)
            rank_p = projection.rank(eta)
            U, _, _ = np.linalg.svd(P)
            U_r = U[:, :rank_p]
        M = U_r.conj().T @ P @ Bmat @ B_K
        n_k = B_K.shape[1]

        if rank_p != n_k:
            records.append(LopatinskiiRecord(
                eta=eta, dim_kernel=n_k, dim_range=rank_p,
                min_singular=0.0, cond=math.inf, scaling_residual=0.0,
                passed=False,
                reason="rank mismatch: dim K = {0}, rank Pi = {1}".format(n_k, rank_p)))
            continue
        if n_k == 0:
            records.append(LopatinskiiRecord(
                eta=eta, dim_kernel=0, dim_range=0, min_singular=math.inf,
                cond=1.0, scaling_residual=0.0, passed=True))
            continue

        sv = np.linalg.svd(M, compute_uv=False)
        min_sv = float(sv[-1])
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf

        # transport every frame to rho*eta through the declared laws;
        # the represented matrix must come back unchanged (up to rho^mu)
        rho = rho_check
        K_rho = _power(trace.g_matrix, rho) @ B_K
        S = _power(boundary.a_matrix, rho)
        U_rho = S @ U_r
        P_rho = projection(rho * eta) if projection is not None else P
        M_rho = np.linalg.pinv(U_rho) @ P_rho @ boundary(rho * eta) @ K_rho
        M_back = rho ** (-boundary.order) * M_rho
        scaling = float(np.linalg.norm(M_back - M, 2) /
                        max(np.linalg.norm(M, 2), 1e-300))

        ok = min_sv >= iso_tolerance and scaling <= 1e-6
        reason = ""
        if min_sv < iso_tolerance:
            reason = "below isomorphism tolerance"
        elif scaling > 1e-6:
            reason = "homogeneity law violated: transport residual {0:.3e}".format(scaling)
        records.append(LopatinskiiRecord(
            eta=eta, dim_kernel=n_k, dim_range=rank_p, min_singular=min_sv,
            cond=cond, scaling_residual=scaling, passed=ok, reason=reason))

    return LopatinskiiVerdict(records=records, iso_tolerance=iso_tolerance,
                              boundary_name=boundary.name,
                              projection_name=projection.name if projection else "identity")


# ---------------------------------------------------------------------------
# rank obstruction table


@dataclass
class RankReport:
    """Kernel rank per cosphere component, with the topological caveat."""

    components: dict
    constant: dict
    equal: bool
    note: str = RANK_NOTE

    def table(self) -> str:
        lines = ["component   dim K   constant"]
        for label in sorted(self.components):
            lines.append("{0:<11} {1:<7} {2}".format(
                label, self.components[label], "yes" if self.constant[label] else "NO"))
        lines.append("rank condition: {0}  ({1})".format(
            "pass" if self.equal else "FAIL", self.note))
        return "\n".join(lines)


def atiyah_bott_rank_report(sweep: SweepResult) -> RankReport:
    """Tabulate kernel dimensions per cosphere component.

    Equal ranks across components are necessary for a classical (Pi = I)
    elliptic boundary condition to exist; the report carries the caveat
    verbatim since equality alone does not produce one.
    """
    comps = _component_records(sweep)
    dims, const = {}, {}
    for s, recs in comps.items():
        label = "eta<0" if s < 0 else "eta>0"
        ds = [r.dim_kernel for r in recs]
        dims[label] = ds[0]
        const[label] = len(set(ds)) == 1
    equal = len(set(dims.values())) == 1 and all(const.values())
    return RankReport(components=dims, constant=const, equal=equal)


# ---------------------------------------------------------------------------
# condition battery


@dataclass
class ConditionEntry:
    tag: str
    name: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return "condition ({0}) {1}: {2} -- {3}".format(
            self.tag, self.name, "PASS" if self.passed else "FAIL", self.detail)


@dataclass
class BatteryReport:
    """Aggregated checklist with the raw sub-reports kept for emission."""

    entries: list
    ellipticity: WEllipticityReport = None
    spectra: dict = None
    sweep: SweepResult = None
    sweep_adjoint: SweepResult = None
    trace_dim: int = 0
    rank_report: RankReport = None
    verdict: LopatinskiiVerdict = None
    operator_name: str = ""

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def find(self, tag: str) -> ConditionEntry:
        for e in self.entries:
            if e.tag == tag:
                return e
        raise KeyError(tag)

    def summary_lines(self) -> list:
        lines = [e.line() for e in self.entries]
        lines.append("overall: {0}".format("PASS" if self.passed else "FAIL"))
        return lines


def run_condition_battery(op: WedgeOp, *, y_samples=(0.0,), eta_samples=None,
                          boundary: BoundarySampler = None,
                          projection: ProjectionSampler = None,
                          aps_auto: bool = False,
                          w_tolerance: float = 1e-6,
                          iso_tolerance: float = 1e-6,
                          weight_tolerance: float = 1e-8,
                          n_covectors: int = 96,
                          sweep_kw: dict = None) -> BatteryReport:
    """Run the full hypothesis checklist on one wedge operator.

    Conditions (9.1) symbol invertibility, (9.2) weight-line clearance and
    (9.3) minimal-domain injectivity / maximal-domain surjectivity are always
    checked; (9.5) is appended when a boundary condition is supplied or when
    ``aps_auto`` asks for the projection constructed from the kernel bundle.
    Mathematical findings become failed entries (exit code 1); malformed
    inputs still raise.
    """
    if eta_samples is None:
        eta_samples = (-2.0, -1.0, 1.0, 2.0)
    eta_samples = [float(e) for e in eta_samples]
    if any(e == 0.0 for e in eta_samples):
        raise ConfigurationError("eta = 0 is not on the cosphere")
    sweep_kw = dict(sweep_kw or {})
    entries = []

    # --- (9.1) principal symbol invertibility over the cosphere
    ell = w_ellipticity_check(op, n_covectors=n_covectors,
                              y_samples=y_samples, tolerance=w_tolerance)
    entries.append(ConditionEntry(
        tag="9.1", name="wedge symbol ellipticity", passed=ell.passed,
        detail=ell.summary(),
        data={"min_singular": ell.min_singular, "worst": ell.worst,
              "tolerance": ell.tolerance, "n_samples": ell.n_samples}))

    # --- (9.2) boundary spectrum clears the weight line at every edge sample
    spectra = {}
    margin = math.inf
    failures = []
    for y in y_samples:
        try:
            spec = boundary_spectrum(assemble_pencil(op, y),
                                     weight_line_tol=weight_tolerance)
            spectra[float(y)] = spec
            margin = min(margin, spec.weight_line_margin)
        except WeightLineError as exc:
            failures.append((float(y), str(exc)))
    if failures:
        y0, msg = failures[0]
        entries.append(ConditionEntry(
            tag="9.2", name="weight-line clearance", passed=False,
            detail="{0} (edge sample y={1:.4f})".format(msg, y0),
            data={"failures": [{"y": y, "message": m} for y, m in failures]}))
    else:
        dims = {y: s.trace_dimension() for y, s in spectra.items()}
        entries.append(ConditionEntry(
            tag="9.2", name="weight-line clearance", passed=True,
            detail="strip roots clear the weight lines by {0:.4f} at all {1} "
                   "edge samples; dim T = {2}".format(
                       margin, len(spectra), sorted(set(dims.values()))),
            data={"margin": margin,
                  "trace_dims": {repr(y): d for y, d in dims.items()}}))

    sweep = sweep_adj = None
    rank_rep = None
    trace_dim = 0
    verdict = None

    if not failures:
        # --- (9.3) normal family: injective traces and surjective adjoint traces
        y0 = float(y_samples[0])
        trace_dim = spectra[y0].trace_dimension()
        sweep = kernel_bundle_sweep(op, eta_samples, y=y0, **sweep_kw)
        sweep_adj = kernel_bundle_sweep(op.adjoint(), eta_samples, y=y0, **sweep_kw)
        rows = []
        ok_93 = True
        for rec, rec_a in zip(sweep.records, sweep_adj.records):
            eta = float(np.atleast_1d(rec.eta)[0])
            inj = rec.trace_rank == rec.dim_kernel
            surj = rec_a.trace_rank == rec_a.dim_kernel
            ident = rec.dim_kernel + rec_a.dim_kernel == trace_dim
            ok_93 = ok_93 and inj and surj and ident
            rows.append({"eta": eta, "dim_kernel": rec.dim_kernel,
                         "trace_rank": rec.trace_rank,
                         "adj_dim_kernel": rec_a.dim_kernel,
                         "adj_trace_rank": rec_a.trace_rank,
                         "injective": inj, "surjective": surj,
                         "rank_identity": ident})
        bad = [r for r in rows if not (r["injective"] and r["surjective"]
                                       and r["rank_identity"])]
        if ok_93:
            detail = "trace map injective on ker, adjoint likewise, and " \
                "N' + N'* = dim T = {0} at all {1} covectors".format(
                    trace_dim, len(rows))
        else:
            b = bad[0]
            detail = "failure at eta={0:.4f}: N'={1} (trace rank {2}), " \
                "N'*={3} (trace rank {4}), dim T={5}".format(
                    b["eta"], b["dim_kernel"], b["trace_rank"],
                    b["adj_dim_kernel"], b["adj_trace_rank"], trace_dim)
        entries.append(ConditionEntry(
            tag="9.3", name="normal family domain conditions", passed=ok_93,
            detail=detail, data={"rows": rows, "trace_dim": trace_dim}))
        rank_rep = atiyah_bott_rank_report(sweep)

        # --- (9.5) boundary condition verdict, when one is configured
        if boundary is not None or projection is not None or aps_auto:
            trace0 = build_trace_space(spectra[y0])
            if aps_auto and projection is None:
                projection = aps_projection_construct(sweep, trace0)
            if boundary is None:
                boundary = identity_boundary(trace0)
            verdict = lopatinskii_check(sweep, trace0, boundary, projection,
                                        iso_tolerance=iso_tolerance)
            entries.append(ConditionEntry(
                tag="9.5", name="boundary condition isomorphism",
                passed=verdict.passed, detail=verdict.summary(),
                data={"records": [vars(r).copy() for r in verdict.records]}))

    return BatteryReport(entries=entries, ellipticity=ell, spectra=spectra,
                         sweep=sweep, sweep_adjoint=sweep_adj,
                         trace_dim=trace_dim, rank_report=rank_rep,
                         verdict=verdict, operator_name=op.name)


# ---------------------------------------------------------------------------
# report emission


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return "{0:.12e}".format(x)


def _jsonable(obj):
    """Plain JSON payload: numpy collapses to lists, non-finite to strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else _fmt(x)
    if isinstance(obj, (np.complexfloating, complex)):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _spectrum_rows(spec: BoundarySpectrum) -> list:
    rows = []
    for r in spec.strip_roots:
        rows.append((r.sigma.real, r.sigma.imag, r.alg_mult, len(r.chains)))
    rows.sort(key=lambda t: (t[1], t[0]))
    return rows


def _battery_payload(battery: BatteryReport) -> dict:
    payload = {
        "operator": battery.operator_name,
        "passed": battery.passed,
        "exit_code": battery.exit_code,
        "conditions": [{"tag": e.tag, "name": e.name, "passed": e.passed,
                        "detail": e.detail, "data": _jsonable(e.data)}
                       for e in battery.entries],
    }
    if battery.spectra:
        payload["spectrum"] = {
            repr(y): {
                "weight_line_margin": s.weight_line_margin,
                "trace_dim": s.trace_dimension(),
                "strip_roots": [{"re": r.sigma.real, "im": r.sigma.imag,
                                 "alg_mult": r.alg_mult, "geo_mult": r.geo_mult,
                                 "n_chains": len(r.chains)}
                                for r in s.strip_roots],
            } for y, s in battery.spectra.items()}
    if battery.sweep is not None:
        payload["kernel_sweep"] = {
            "etas": [float(np.atleast_1d(r.eta)[0]) for r in battery.sweep.records],
            "dims": [r.dim_kernel for r in battery.sweep.records],
            "adjoint_dims": [r.dim_kernel for r in battery.sweep_adjoint.records],
            "trace_jumps": battery.sweep.trace_jumps,
        }
    if battery.rank_report is not None:
        rr = battery.rank_report
        payload["rank_report"] = {"components": rr.components,
                                  "constant": rr.constant,
                                  "equal": rr.equal, "note": rr.note}
    if battery.verdict is not None:
        v = battery.verdict
        payload["lopatinskii"] = {
            "passed": v.passed, "structural_failure": v.structural_failure,
            "iso_tolerance": v.iso_tolerance, "boundary": v.boundary_name,
            "projection": v.projection_name,
            "records": [vars(r).copy() for r in v.records]}
    return _jsonable(payload)


def report_emit(battery: BatteryReport, out_dir, formats=("json", "csv")) -> list:
    """Write the battery as report.json plus plot-data CSVs.

    Output is deterministic byte-for-byte for a fixed battery: keys are
    sorted, floats use a fixed scientific format, newlines are '\\n', and
    nothing time- or path-dependent is embedded.
    """
    written = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        if "json" in formats:
            path = os.path.join(out_dir, "report.json")
            payload = _battery_payload(battery)
            with io.open(path, "w", newline="\n") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
                fh.write("\n")
            written.append(path)
        if "csv" in formats:
            if battery.spectra:
                path = os.path.join(out_dir, "spectrum.csv")
                y0 = sorted(battery.spectra)[0]
                with io.open(path, "w", newline="\n") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["re", "im", "alg_mult", "n_chains"])
                    for re_, im_, am, nc in _spectrum_rows(battery.spectra[y0]):
                        w.writerow([_fmt(re_), _fmt(im_), am, nc])
                written.append(path)
            if battery.sweep is not None:
                path = os.path.join(out_dir, "kernel_dims.csv")
                with io.open(path, "w", newline="\n") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["eta", "dim_kernel", "trace_rank",
                                "adj_dim_kernel", "adj_trace_rank"])
                    for rec, rec_a in zip(battery.sweep.records,
                                          battery.sweep_adjoint.records):
                        eta = float(np.atleast_1d(rec.eta)[0])
                        w.writerow([_fmt(eta), rec.dim_kernel, rec.trace_rank,
                                    rec_a.dim_kernel, rec_a.trace_rank])
                written.append(path)
            if battery.verdict is not None:
                path = os.path.join(out_dir, "lopatinskii.csv")
                with io.open(path, "w", newline="\n") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["eta", "dim_kernel", "dim_range",
                                "min_singular", "cond"])
                    for r in battery.verdict.records:
                        w.writerow([_fmt(r.eta), r.dim_kernel, r.dim_range,
                                    _fmt(r.min_singular), _fmt(r.cond)])
                written.append(path)
    except OSError as exc:
        raise WedgecheckError("could not write report to {0}: {1}".format(out_dir, exc))
    return written
