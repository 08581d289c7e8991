"""Command line interface.

Subcommands mirror the pipeline: ``spectrum``, ``trace``, ``pairing``,
``kernel`` and ``sweep`` expose the model objects one at a time, ``check``
runs the full ellipticity condition battery, ``symbols`` runs the
operator-valued symbol estimates and the extension rehearsal.

Exit codes: 0 everything requested passed, 1 a mathematical condition
failed (reported, not crashed), 2 the configuration or invocation is
invalid.  The only environment knob is WEDGECHECK_WORKERS (worker count
for per-covector sweeps).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import checker
from .checker import (_fmt, _jsonable, aps_projection_construct,
                      report_emit, run_condition_battery)
from .config import ProblemConfig, load_config
from .cone import (SweepRecord, SweepResult, _weighted_angles, cone_symbol,
                   kernel_bundle_sweep, kernel_max, trace_rank)
from .errors import ConfigurationError, WedgecheckError, WeightLineError
from .fiber import ConeGrid
from .indicial import assemble_pencil, boundary_spectrum, build_trace_space
from .mellin import green_pairing, skew_adjoint_residual, trace_gram
from . import edgesym

__all__ = ["main"]


def _workers() -> int:
    raw = os.environ.get("WEDGECHECK_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(
            "WEDGECHECK_WORKERS must be an integer, got {0!r}".format(raw))
    if n < 1:
        raise ConfigurationError("WEDGECHECK_WORKERS must be >= 1")
    return n


def _write_json(obj, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _formats(args):
    if getattr(args, "format", None):
        return (args.format,)
    return ("json", "csv")


def _outdir(args, cfg: ProblemConfig):
    out = getattr(args, "out", None)
    if out is None and cfg.output is not None:
        out = cfg.output.get("out_dir")
    if out is not None:
        os.makedirs(out, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    return cfg, cfg.build_operator()


def _spectrum_at(cfg: ProblemConfig, op, y: float):
    return boundary_spectrum(assemble_pencil(op, y),
                             weight_line_tol=cfg.tolerances["weight_line"])


def _sweep(op, etas, y, workers, **kw) -> SweepResult:
    """kernel_bundle_sweep, fanned out over a thread pool when asked."""
    if workers <= 1:
        return kernel_bundle_sweep(op, etas, y=y, **kw)
    spectrum = boundary_spectrum(assemble_pencil(op, y))
    trace = build_trace_space(spectrum)

    def one(eta):
        kb = kernel_max(cone_symbol(op, eta, y), trace=trace, **kw)
        return SweepRecord(eta=np.atleast_1d(np.asarray(eta, float)),
                           dim_kernel=kb.dim_kernel, trace_rank=trace_rank(kb),
                           min_rate=kb.splitting.min_rate, traces=kb.traces,
                           ode_residual=kb.ode_residual)

    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(one, etas))
    jumps = np.zeros(max(len(records) - 1, 0))
    if trace.dim:
        H = trace_gram(trace)
        L = np.linalg.cholesky(H + 1e-14 * np.eye(H.shape[0]))
        for i in range(len(records) - 1):
            a, b = records[i], records[i + 1]
            if a.dim_kernel != b.dim_kernel:
                jumps[i] = math.pi / 2.0
            elif a.dim_kernel and a.traces.size:
                jumps[i] = _weighted_angles(L.conj().T @ a.traces,
                                            L.conj().T @ b.traces,
                                            np.ones(a.traces.shape[0]))
    return SweepResult(records=records, trace_jumps=jumps)


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(args) -> int:
    cfg, op = _load(args)
    payload = {}
    for y in cfg.grids["y_samples"]:
        spec = _spectrum_at(cfg, op, y)
        rows = []
        print("strip roots at y = {0}:".format(y))
        for r in spec.strip_roots:
            print("  sigma = {0:+.12e}{1:+.12e}j   alg mult {2}, geo mult {3}, "
                  "chains {4}".format(r.sigma.real, r.sigma.imag, r.alg_mult,
                                      r.geo_mult, len(r.chains)))
            rows.append({"re": r.sigma.real, "im": r.sigma.imag,
                         "alg_mult": r.alg_mult, "geo_mult": r.geo_mult,
                         "n_chains": len(r.chains)})
        print("  weight-line margin {0:.6f}, dim T = {1}".format(
            spec.weight_line_margin, spec.trace_dimension()))
        payload[repr(float(y))] = {"strip_roots": rows,
                                   "weight_line_margin": spec.weight_line_margin,
                                   "trace_dim": spec.trace_dimension()}
    out = _outdir(args, cfg)
    if out:
        fmts = _formats(args)
        if "json" in fmts:
            _write_json(payload, os.path.join(out, "spectrum.json"))
        if "csv" in fmts:
            y0 = float(cfg.grids["y_samples"][0])
            rows = [( _fmt(r["re"]), _fmt(r["im"]),
                      str(r["alg_mult"]), str(r["n_chains"]))
                    for r in payload[repr(y0)]["strip_roots"]]
            _write_csv(os.path.join(out, "spectrum.csv"),
                       ("re", "im", "alg_mult", "n_chains"), rows)
    return 0


def cmd_trace(args) -> int:
    cfg, op = _load(args)
    y0 = float(cfg.grids["y_samples"][0])
    trace = build_trace_space(_spectrum_at(cfg, op, y0))
    print("trace space dimension {0} (basis residual {1:.3e})".format(
        trace.dim, trace.residual))
    elements = []
    for el in trace.elements:
        print("  sigma = {0:+.6f}{1:+.6f}j  chain {2}  log level {3}".format(
            el.sigma.real, el.sigma.imag, el.chain_id, el.level))
        elements.append({"re": el.sigma.real, "im": el.sigma.imag,
                         "chain": el.chain_id, "level": el.level})
    out = _outdir(args, cfg)
    if out:
        _write_json({"dim": trace.dim, "residual": trace.residual,
                     "elements": elements, "g_matrix": trace.g_matrix},
                    os.path.join(out, "trace.json"))
    return 0


def cmd_pairing(args) -> int:
    cfg, op = _load(args)
    y0 = float(cfg.grids["y_samples"][0])
    trace = build_trace_space(_spectrum_at(cfg, op, y0))
    trace_adj = build_trace_space(_spectrum_at(cfg, op.adjoint(), y0))
    pm = green_pairing(trace, trace_adj, mode="residue")
    print("Green pairing matrix beta ({0} x {1}), residue calculus:".format(
        trace.dim, trace_adj.dim))
    for row in pm.matrix:
        print("  [" + "  ".join("{0:+.10e}{1:+.10e}j".format(v.real, v.imag)
                                for v in row) + "]")
    skew = skew_adjoint_residual(pm)
    print("skew-adjointness residual {0:.3e}".format(skew))
    payload = {"matrix": pm.matrix, "skew_residual": skew, "mode": "residue"}
    code = 0
    if args.oracle:
        pm_q = green_pairing(trace, trace_adj, mode="quadrature")
        dev = float(np.max(np.abs(pm.matrix - pm_q.matrix))) if pm.matrix.size else 0.0
        ok = dev <= 1e-8
        print("quadrature cross-check deviation {0:.3e}: {1}".format(
            dev, "PASS" if ok else "FAIL"))
        payload["quadrature_deviation"] = dev
        code = 0 if ok else 1
    out = _outdir(args, cfg)
    if out:
        _write_json(payload, os.path.join(out, "pairing.json"))
    return code


def cmd_kernel(args) -> int:
    cfg, op = _load(args)
    if args.eta is None:
        raise ConfigurationError("kernel needs --eta")
    eta = float(args.eta)
    if eta == 0.0:
        raise ConfigurationError("eta = 0 is not on the cosphere")
    y0 = float(cfg.grids["y_samples"][0])
    kw = cfg.sweep_kwargs()
    kb = kernel_max(cone_symbol(op, eta, y0), **kw)
    print("kernel at eta = {0}: N' = {1}, trace rank {2}, min decay rate "
          "{3:.4f}".format(eta, kb.dim_kernel, trace_rank(kb), kb.splitting.min_rate))
    print("  matching residual {0:.3e}, propagation residual {1:.3e}".format(
        kb.fit_residual, kb.ode_residual))
    payload = {"eta": eta, "dim_kernel": kb.dim_kernel,
               "trace_rank": trace_rank(kb), "min_rate": kb.splitting.min_rate,
               "fit_residual": kb.fit_residual, "ode_residual": kb.ode_residual,
               "traces": kb.traces}
    code = 0
    if args.oracle:
        fine = dict(kw)
        fine["n_window"] = 2 * kw["n_window"]
        fine["n_terms"] = kw["n_terms"] + 10
        kb2 = kernel_max(cone_symbol(op, eta, y0), **fine)
        ok = kb2.dim_kernel == kb.dim_kernel
        print("refined cross-check: N' = {0}: {1}".format(
            kb2.dim_kernel, "PASS" if ok else "FAIL"))
        payload["refined_dim_kernel"] = kb2.dim_kernel
        code = 0 if ok else 1
    out = _outdir(args, cfg)
    if out:
        _write_json(payload, os.path.join(out, "kernel.json"))
    return code


def cmd_sweep(args) -> int:
    cfg, op = _load(args)
    y0 = float(cfg.grids["y_samples"][0])
    if args.samples:
        half = max(args.samples // 2, 1)
        mags = np.geomspace(0.5, 2.0, half)
        etas = np.concatenate([-mags[::-1], mags])
    else:
        etas = np.asarray(cfg.grids["eta_samples"], dtype=float)
    kw = cfg.sweep_kwargs()
    workers = _workers()
    sweep = _sweep(op, etas, y0, workers, **kw)
    sweep_adj = _sweep(op.adjoint(), etas, y0, workers, **kw)
    trace_dim = _spectrum_at(cfg, op, y0).trace_dimension()

    rows, records = [], []
    all_ok = True
    for i, (rec, rec_a) in enumerate(zip(sweep.records, sweep_adj.records)):
        eta = float(np.atleast_1d(rec.eta)[0])
        gap = float(sweep.trace_jumps[i - 1]) if i else 0.0
        inj = rec.trace_rank == rec.dim_kernel
        surj = rec_a.trace_rank == rec_a.dim_kernel
        ident = rec.dim_kernel + rec_a.dim_kernel == trace_dim
        all_ok = all_ok and inj and surj and ident
        records.append({"eta": eta, "dim_kernel": rec.dim_kernel,
                        "adj_dim_kernel": rec_a.dim_kernel, "gap": gap,
                        "injective": inj, "surjective": surj,
                        "rank_identity": ident})
        rows.append((_fmt(eta), str(rec.dim_kernel), str(rec_a.dim_kernel),
                     _fmt(gap), str(int(inj)), str(int(surj)), str(int(ident))))
    print("kernel bundle sweep over {0} covectors (workers {1}):".format(
        len(records), workers))
    print("  dims N' = {0}".format([r["dim_kernel"] for r in records]))
    print("  dims N'* = {0}".format([r["adj_dim_kernel"] for r in records]))
    print("  max adjacent principal angle {0:.4e}".format(
        float(np.max(sweep.trace_jumps)) if len(sweep.trace_jumps) else 0.0))
    print("  conditions: {0}".format("PASS" if all_ok else "FAIL"))
    out = _outdir(args, cfg)
    if out:
        fmts = _formats(args)
        if "json" in fmts:
            _write_json({"records": records, "trace_dim": trace_dim},
                        os.path.join(out, "sweep.json"))
        if "csv" in fmts:
            _write_csv(os.path.join(out, "sweep.csv"),
                       ("eta", "n_prime", "n_prime_adj", "gap",
                        "injective", "surjective", "rank_identity"), rows)
    return 0 if all_ok else 1


def cmd_check(args) -> int:
    cfg, op = _load(args)
    kind = cfg.boundary_kind()
    boundary = projection = None
    if kind == "classical":
        y0 = float(cfg.grids["y_samples"][0])
        trace0 = build_trace_space(_spectrum_at(cfg, op, y0))
        boundary = cfg.build_boundary(trace0)
        projection = cfg.build_projection()
    battery = run_condition_battery(op, boundary=boundary,
                                    projection=projection,
                                    aps_auto=(kind == "aps"),
                                    **cfg.battery_kwargs())
    for line in battery.summary_lines():
        print(line)
    out = _outdir(args, cfg)
    if out:
        formats = _formats(args)
        if cfg.output is not None and "formats" in cfg.output and \
                getattr(args, "format", None) is None:
            formats = tuple(cfg.output["formats"])
        for path in report_emit(battery, out, formats=formats):
            print("wrote {0}".format(path))
    return battery.exit_code


def cmd_symbols(args) -> int:
    cfg, op = _load(args)
    n_grid = 48 * cfg.refine
    grid = ConeGrid(2e-4, 2.0, n_grid)
    code = 0
    if args.action == "estimate":
        p = edgesym.boundary_symbol(op, grid)
        a = edgesym.normal_family_symbol(op, grid)
        etas = np.geomspace(10.0, 1e3, 9)
        rep_p = edgesym.symbol_estimate_check(p, max_order=1, etas=etas)
        rep_a = edgesym.symbol_estimate_check(a, max_order=1, etas=etas)
        payload = {}
        for name, rep in (("boundary_symbol", rep_p), ("normal_family", rep_a)):
            print("{0}: order {1}, fitted slopes:".format(name, rep.mu))
            for e in rep.entries:
                print("  D_y^{0} d_eta^{1}: slope {2:+.4f} (bound {3:+.4f})".format(
                    e.alpha, e.beta, e.slope, e.bound))
            print("  estimate check: {0}".format("PASS" if rep.passed else "FAIL"))
            payload[name] = {"order": rep.mu, "passed": rep.passed,
                             "entries": [{"alpha": e.alpha, "beta": e.beta,
                                          "slope": e.slope, "bound": e.bound}
                                         for e in rep.entries]}
            code = code or (0 if rep.passed else 1)
    elif args.action == "homog":
        a = edgesym.normal_family_symbol(op, grid)
        p = edgesym.boundary_symbol(op, grid)
        res_a = edgesym.twisted_homog_check(a)
        res_p = edgesym.twisted_homog_check(p)
        ok = res_a <= 1e-8 and res_p <= 1e-8
        print("twisted homogeneity residuals: normal family {0:.3e}, "
              "boundary symbol {1:.3e}: {2}".format(res_a, res_p,
                                                    "PASS" if ok else "FAIL"))
        payload = {"normal_family": res_a, "boundary_symbol": res_p,
                   "passed": ok}
        code = 0 if ok else 1
    else:  # extend
        y0 = float(cfg.grids["y_samples"][0])
        trace = build_trace_space(_spectrum_at(cfg, op, y0))
        if trace.dim == 0:
            raise ConfigurationError("empty trace space: nothing to extend")
        bracket = edgesym.MetricBracket(g11=400.0)
        egrid = ConeGrid(2e-4, 2.0, 160)
        f = edgesym.random_edge_function(16, dim=trace.dim, seed=7, decay=0.5)
        collar = edgesym.extension_apply(f, trace, bracket, grid=egrid)
        errs = edgesym.boundary_limit_errors(collar)
        support = collar.support_defect()
        coeffs, resid = edgesym.collar_trace_coefficients(collar)
        round_trip = float(np.max(np.abs(coeffs - f.coeffs)))
        decreasing = bool(np.all(np.diff(errs) < 0))
        ok = decreasing and errs[-1] <= 1e-3 and support == 0.0 \
            and round_trip <= 1e-6
        print("extension rehearsal (band 16):")
        print("  boundary-limit errors {0}".format([float(e) for e in errs]))
        print("  support defect beyond c0 = {0}: {1}".format(collar.c0, support))
        print("  trace round-trip max mode error {0:.3e} (fit residual {1:.3e})".format(
            round_trip, resid))
        print("  extension check: {0}".format("PASS" if ok else "FAIL"))
        payload = {"errors": errs, "support_defect": support,
                   "round_trip": round_trip, "passed": ok}
        code = 0 if ok else 1
    out = _outdir(args, cfg)
    if out:
        _write_json(payload, os.path.join(out, "symbols_{0}.json".format(args.action)))
    return code


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wedgecheck",
        description="Ellipticity checks for first-order wedge operators on a "
                    "model edge: boundary spectrum, trace spaces, Green "
                    "pairing, kernel bundles, symbol estimates, and the full "
                    "condition battery.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, eta=False, samples=False, oracle=False, fmt=False):
        p.add_argument("--config", required=True, help="problem config (TOML)")
        p.add_argument("--out", help="directory for JSON/CSV artifacts")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"),
                           help="restrict artifacts to one format")
        if eta:
            p.add_argument("--eta", type=float, help="edge covector")
        if samples:
            p.add_argument("--samples", type=int,
                           help="number of sweep samples (split over both "
                                "cosphere components)")
        if oracle:
            p.add_argument("--oracle", action="store_true",
                           help="enable quadrature/refinement cross-checks")

    p = sub.add_parser("spectrum", help="boundary spectrum in the strip")
    common(p, fmt=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("trace", help="trace space basis and dilation generator")
    common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("pairing", help="Green pairing matrix")
    common(p, oracle=True)
    p.set_defaults(func=cmd_pairing)

    p = sub.add_parser("kernel", help="maximal-domain kernel at one covector")
    common(p, eta=True, oracle=True)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("sweep", help="kernel bundle sweep over the cosphere")
    common(p, samples=True, fmt=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="full condition battery")
    common(p, fmt=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("symbols", help="operator-valued symbol checks")
    p.add_argument("action", choices=("estimate", "homog", "extend"))
    common(p)
    p.set_defaults(func=cmd_symbols)

    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WeightLineError as exc:
        print("condition (9.2) weight-line clearance: FAIL -- {0}".format(exc),
              file=sys.stderr)
        return 1
    except ConfigurationError as exc:
        print("config error: {0}".format(exc), file=sys.stderr)
        return 2
    except WedgecheckError as exc:
        print("error: {0}".format(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
