"""Problem configuration: parsing, validation, deterministic emission.

The on-disk format is TOML with sections [fiber], [operator],
[boundary_condition], [grids], [tolerances] and an optional [output].
Matrices are nested arrays of [re, im] pairs, row-major.  A coefficient is
either one constant matrix or a Fourier table keyed by the mode index —
``fiber_modes`` for dependence on the fiber angle, ``edge_modes`` for
dependence on the edge variable (the edge is a circle, so a table of edge
modes is again a finite Fourier series).

Parsing normalizes all numbers to floats (and mode keys to canonical
integer strings), so parse -> emit -> parse is the identity and two configs
are equal iff their emitted documents are byte-identical.  Validation
failures raise ConfigurationError, which the CLI maps to exit code 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import tomli

from .errors import ConfigurationError
from .fiber import CIRCLE, POINT, build_fiber
from .indicial import CoefficientField, WedgeOp

__all__ = ["ProblemConfig", "parse_config", "load_config", "emit_config",
           "save_config"]

_GRID_DEFAULTS = {
    "y_samples": [0.0],
    "eta_samples": [-2.0, -1.0, 1.0, 2.0],
    "n_covectors": 96,
    "n_window": 48,
    "n_terms": 45,
    "refine": 1,
}

_TOL_DEFAULTS = {
    "ellipticity": 1e-6,
    "iso": 1e-6,
    "weight_line": 1e-8,
    "rank": 1e-6,
}

_SECTIONS = ("fiber", "operator", "boundary_condition", "grids",
             "tolerances", "output")


def _fail(where: str, msg: str):
    raise ConfigurationError("config [{0}]: {1}".format(where, msg))


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        _fail(where, "expected a number, got {0!r}".format(x))
    return float(x)


def _integer(x, where: str, minimum: int = 0) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        _fail(where, "expected an integer, got {0!r}".format(x))
    if x < minimum:
        _fail(where, "must be >= {0}, got {1}".format(minimum, x))
    return int(x)


def _matrix(raw, where: str, shape=None) -> list:
    """Normalize a nested [re, im] array to lists of float pairs."""
    if not isinstance(raw, list) or not raw:
        _fail(where, "expected a non-empty array of rows")
    rows = []
    width = None
    for i, row in enumerate(raw):
        if not isinstance(row, list) or not row:
            _fail(where, "row {0} is not a non-empty array".format(i))
        if width is None:
            width = len(row)
        elif len(row) != width:
            _fail(where, "rows have differing lengths")
        out_row = []
        for j, pair in enumerate(row):
            if not isinstance(pair, list) or len(pair) != 2:
                _fail(where, "entry ({0},{1}) must be a [re, im] pair".format(i, j))
            out_row.append([_number(pair[0], where), _number(pair[1], where)])
        rows.append(out_row)
    if shape is not None and (len(rows), width) != shape:
        _fail(where, "expected a {0}x{1} matrix, got {2}x{3}".format(
            shape[0], shape[1], len(rows), width))
    return rows


def matrix_array(raw_matrix) -> np.ndarray:
    rows = [[complex(p[0], p[1]) for p in row] for row in raw_matrix]
    return np.array(rows, dtype=complex)


def matrix_raw(M) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in M]


def _mode_table(raw, where: str, shape) -> dict:
    if not isinstance(raw, dict) or not raw:
        _fail(where, "expected a table of mode-indexed matrices")
    out = {}
    for key, val in raw.items():
        try:
            mode = int(key)
        except (TypeError, ValueError):
            _fail(where, "mode key {0!r} is not an integer".format(key))
        out[str(mode)] = _matrix(val, "{0}.{1}".format(where, key), shape)
    return out


def _coefficient(raw, where: str, rank: int):
    """Normalize one operator coefficient (matrix or Fourier table)."""
    shape = (rank, rank)
    if isinstance(raw, list):
        return _matrix(raw, where, shape)
    if isinstance(raw, dict):
        keys = set(raw)
        if not keys or not keys <= {"fiber_modes", "edge_modes"}:
            _fail(where, "a coefficient table holds 'fiber_modes' or "
                         "'edge_modes', got {0}".format(sorted(keys)))
        if len(keys) != 1:
            _fail(where, "give either fiber_modes or edge_modes, not both")
        kind = next(iter(keys))
        return {kind: _mode_table(raw[kind], "{0}.{1}".format(where, kind), shape)}
    _fail(where, "expected a matrix or a mode table")


def _check_keys(sec: dict, allowed, where: str):
    extra = set(sec) - set(allowed)
    if extra:
        _fail(where, "unknown keys {0}; allowed: {1}".format(
            sorted(extra), sorted(allowed)))


@dataclass
class ProblemConfig:
    """Normalized problem description; plain data, equality by value."""

    fiber: dict
    operator: dict
    boundary_condition: dict = None
    grids: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: dict = None

    # -- builders -----------------------------------------------------------

    @property
    def rank(self) -> int:
        return self.fiber["rank"]

    @property
    def refine(self) -> int:
        return self.grids["refine"]

    def build_fiber(self):
        modes = self.fiber.get("modes", 0)
        if self.fiber["kind"] == CIRCLE:
            modes = modes * self.refine
        return build_fiber(self.fiber["kind"], rank=self.rank, modes=modes)

    def _field(self, raw) -> CoefficientField:
        rank = self.rank
        if isinstance(raw, list):
            return CoefficientField(matrix_array(raw), rank)
        if "fiber_modes" in raw:
            table = {int(k): matrix_array(v) for k, v in raw["fiber_modes"].items()}
            return CoefficientField(table, rank)
        table = {int(k): matrix_array(v) for k, v in raw["edge_modes"].items()}

        def fun(y, table=table):
            acc = 0.0
            for k, M in table.items():
                acc = acc + np.exp(1j * k * y) * M
            return acc

        return CoefficientField(fun, rank)

    def build_operator(self) -> WedgeOp:
        op = self.operator
        return WedgeOp(
            fiber=self.build_fiber(),
            a_x=self._field(op["a_x"]),
            a_edge=tuple(self._field(c) for c in op["a_edge"]),
            a_zero=self._field(op["a_zero"]),
            a_fiber=self._field(op["a_fiber"]) if "a_fiber" in op else None,
            name=op.get("name", ""),
        )

    def sweep_kwargs(self) -> dict:
        return {"n_window": self.grids["n_window"] * self.refine,
                "n_terms": self.grids["n_terms"],
                "rank_tol": self.tolerances["rank"]}

    def battery_kwargs(self) -> dict:
        return {"y_samples": tuple(self.grids["y_samples"]),
                "eta_samples": tuple(self.grids["eta_samples"]),
                "w_tolerance": self.tolerances["ellipticity"],
                "iso_tolerance": self.tolerances["iso"],
                "weight_tolerance": self.tolerances["weight_line"],
                "n_covectors": self.grids["n_covectors"],
                "sweep_kw": self.sweep_kwargs()}

    def boundary_kind(self) -> str:
        if self.boundary_condition is None:
            return "none"
        return self.boundary_condition["kind"]

    def build_boundary(self, trace):
        """BoundarySampler for a classical boundary condition, if declared."""
        from .checker import BoundarySampler
        bc = self.boundary_condition
        if bc is None or bc["kind"] != "classical":
            return None
        b_plus = matrix_array(bc["b_plus"])
        b_minus = matrix_array(bc["b_minus"])
        if b_plus.shape[1] != trace.dim:
            raise ConfigurationError(
                "config [boundary_condition]: b matrices have {0} columns but "
                "the trace space has dimension {1}".format(b_plus.shape[1], trace.dim))
        n_out = b_plus.shape[0]
        if "a_generator" in bc:
            a_gen = matrix_array(bc["a_generator"])
        else:
            a_gen = np.zeros((n_out, n_out))
        return BoundarySampler(base={1: b_plus, -1: b_minus},
                               g_matrix=trace.g_matrix, a_matrix=a_gen,
                               order=bc.get("order", 0.0), name="config")

    def build_projection(self):
        """Explicit ProjectionSampler from pi matrices, if declared."""
        from .checker import ProjectionSampler
        bc = self.boundary_condition
        if bc is None or "pi_plus" not in bc:
            return None
        p_plus = matrix_array(bc["pi_plus"])
        p_minus = matrix_array(bc["pi_minus"])
        n = p_plus.shape[0]
        if "pi_generator" in bc:
            a_gen = matrix_array(bc["pi_generator"])
        else:
            a_gen = np.zeros((n, n))
        ranks = {}
        for s, P in ((1, p_plus), (-1, p_minus)):
            sv = np.linalg.svd(P, compute_uv=False)
            ranks[s] = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if sv.size else 1.0)))
        return ProjectionSampler(base={1: p_plus, -1: p_minus},
                                 a_matrix=a_gen, ranks=ranks, name="config")


# ---------------------------------------------------------------------------
# parsing


def parse_config(text: str) -> ProblemConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError("config is not valid TOML: {0}".format(exc))
    _check_keys(doc, _SECTIONS, "document")
    for required in ("fiber", "operator"):
        if required not in doc:
            _fail("document", "missing required section [{0}]".format(required))

    # [fiber]
    raw = doc["fiber"]
    _check_keys(raw, ("kind", "rank", "modes"), "fiber")
    kind = raw.get("kind")
    if kind not in (POINT, CIRCLE):
        _fail("fiber", "kind must be 'point' or 'circle', got {0!r}".format(kind))
    rank = _integer(raw.get("rank", 0), "fiber.rank", minimum=1)
    fiber = {"kind": kind, "rank": rank}
    if kind == CIRCLE:
        fiber["modes"] = _integer(raw.get("modes", 0), "fiber.modes", minimum=1)
    elif "modes" in raw and raw["modes"] != 0:
        _fail("fiber", "a point fiber has no Fourier modes")

    # [operator]
    raw = doc["operator"]
    _check_keys(raw, ("name", "a_x", "a_edge", "a_zero", "a_fiber"), "operator")
    operator = {}
    if "name" in raw:
        if not isinstance(raw["name"], str):
            _fail("operator.name", "expected a string")
        operator["name"] = raw["name"]
    for key in ("a_x", "a_zero"):
        if key not in raw:
            _fail("operator", "missing coefficient {0}".format(key))
        operator[key] = _coefficient(raw[key], "operator.{0}".format(key), rank)
    if "a_edge" not in raw or not isinstance(raw["a_edge"], list) or not raw["a_edge"]:
        _fail("operator", "a_edge must be a non-empty array of coefficients")
    operator["a_edge"] = [
        _coefficient(c, "operator.a_edge[{0}]".format(j), rank)
        for j, c in enumerate(raw["a_edge"])]
    if kind == CIRCLE:
        if "a_fiber" not in raw:
            _fail("operator", "circle fibers need the tangential coefficient a_fiber")
        operator["a_fiber"] = _coefficient(raw["a_fiber"], "operator.a_fiber", rank)
    elif "a_fiber" in raw:
        _fail("operator", "point fibers carry no tangential coefficient")

    # [boundary_condition]
    boundary = None
    if "boundary_condition" in doc:
        raw = doc["boundary_condition"]
        _check_keys(raw, ("kind", "b_plus", "b_minus", "a_generator", "order",
                          "pi_plus", "pi_minus", "pi_generator"),
                    "boundary_condition")
        bkind = raw.get("kind")
        if bkind not in ("aps", "classical"):
            _fail("boundary_condition",
                  "kind must be 'aps' or 'classical', got {0!r}".format(bkind))
        boundary = {"kind": bkind}
        if bkind == "classical":
            for key in ("b_plus", "b_minus"):
                if key not in raw:
                    _fail("boundary_condition", "classical kind needs {0}".format(key))
                boundary[key] = _matrix(raw[key], "boundary_condition." + key)
            if len(boundary["b_plus"]) != len(boundary["b_minus"]) or \
                    len(boundary["b_plus"][0]) != len(boundary["b_minus"][0]):
                _fail("boundary_condition", "b_plus and b_minus differ in shape")
            n_out = len(boundary["b_plus"])
            if "a_generator" in raw:
                boundary["a_generator"] = _matrix(
                    raw["a_generator"], "boundary_condition.a_generator",
                    (n_out, n_out))
            if "order" in raw:
                boundary["order"] = _number(raw["order"], "boundary_condition.order")
            if ("pi_plus" in raw) != ("pi_minus" in raw):
                _fail("boundary_condition", "give both pi_plus and pi_minus or neither")
            if "pi_plus" in raw:
                boundary["pi_plus"] = _matrix(
                    raw["pi_plus"], "boundary_condition.pi_plus", (n_out, n_out))
                boundary["pi_minus"] = _matrix(
                    raw["pi_minus"], "boundary_condition.pi_minus", (n_out, n_out))
                if "pi_generator" in raw:
                    boundary["pi_generator"] = _matrix(
                        raw["pi_generator"], "boundary_condition.pi_generator",
                        (n_out, n_out))
        else:
            extra = set(raw) - {"kind"}
            if extra:
                _fail("boundary_condition",
                      "aps kind takes no further keys, got {0}".format(sorted(extra)))

    # [grids]
    grids = dict(_GRID_DEFAULTS)
    if "grids" in doc:
        raw = doc["grids"]
        _check_keys(raw, _GRID_DEFAULTS, "grids")
        for key in ("y_samples", "eta_samples"):
            if key in raw:
                if not isinstance(raw[key], list) or not raw[key]:
                    _fail("grids." + key, "expected a non-empty array of numbers")
                grids[key] = [_number(v, "grids." + key) for v in raw[key]]
        for key in ("n_covectors", "n_window", "n_terms", "refine"):
            if key in raw:
                grids[key] = _integer(raw[key], "grids." + key, minimum=1)
    grids["y_samples"] = [float(v) for v in grids["y_samples"]]
    grids["eta_samples"] = [float(v) for v in grids["eta_samples"]]
    if any(e == 0.0 for e in grids["eta_samples"]):
        _fail("grids.eta_samples", "eta = 0 is not on the cosphere")

    # [tolerances]
    tolerances = dict(_TOL_DEFAULTS)
    if "tolerances" in doc:
        raw = doc["tolerances"]
        _check_keys(raw, _TOL_DEFAULTS, "tolerances")
        for key in raw:
            val = _number(raw[key], "tolerances." + key)
            if val <= 0:
                _fail("tolerances." + key, "must be positive")
            tolerances[key] = val

    # [output]
    output = None
    if "output" in doc:
        raw = doc["output"]
        _check_keys(raw, ("out_dir", "formats"), "output")
        output = {}
        if "out_dir" in raw:
            if not isinstance(raw["out_dir"], str):
                _fail("output.out_dir", "expected a string path")
            output["out_dir"] = raw["out_dir"]
        if "formats" in raw:
            fmts = raw["formats"]
            if not isinstance(fmts, list) or \
                    not set(fmts) <= {"json", "csv"} or not fmts:
                _fail("output.formats", "expected a non-empty subset of ['json','csv']")
            output["formats"] = list(fmts)

    cfg = ProblemConfig(fiber=fiber, operator=operator,
                        boundary_condition=boundary, grids=grids,
                        tolerances=tolerances, output=output)
    # surface coefficient-shape problems at parse time
    cfg.build_operator()
    return cfg


def load_config(path) -> ProblemConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError("cannot read config {0}: {1}".format(path, exc))
    return parse_config(text)


# ---------------------------------------------------------------------------
# deterministic emission


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return repr(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigurationError("cannot emit value {0!r}".format(v))


def _emit_coefficient(lines, subs, section: str, key: str, coeff):
    if isinstance(coeff, list):
        lines.append("{0} = {1}".format(key, _toml_value(coeff)))
    else:
        kind = next(iter(coeff))
        body = ["[{0}.{1}.{2}]".format(section, key, kind)]
        for mode in sorted(coeff[kind], key=int):
            body.append('"{0}" = {1}'.format(mode, _toml_value(coeff[kind][mode])))
        subs.append("\n".join(body))


def _inline_coefficient(coeff) -> str:
    if isinstance(coeff, list):
        return _toml_value(coeff)
    kind = next(iter(coeff))
    inner = ", ".join('"{0}" = {1}'.format(m, _toml_value(coeff[kind][m]))
                      for m in sorted(coeff[kind], key=int))
    return "{{{0} = {{{1}}}}}".format(kind, inner)


def emit_config(cfg: ProblemConfig) -> str:
    """Canonical text form; emit(parse(emit(cfg))) == emit(cfg) bytewise."""
    blocks = []

    lines = ["[fiber]"]
    lines.append("kind = {0}".format(_toml_value(cfg.fiber["kind"])))
    lines.append("rank = {0}".format(_toml_value(cfg.fiber["rank"])))
    if "modes" in cfg.fiber:
        lines.append("modes = {0}".format(_toml_value(cfg.fiber["modes"])))
    blocks.append("\n".join(lines))

    lines = ["[operator]"]
    subs = []
    if "name" in cfg.operator:
        lines.append("name = {0}".format(_toml_value(cfg.operator["name"])))
    _emit_coefficient(lines, subs, "operator", "a_x", cfg.operator["a_x"])
    edge = cfg.operator["a_edge"]
    lines.append("a_edge = [{0}]".format(
        ", ".join(_inline_coefficient(c) for c in edge)))
    _emit_coefficient(lines, subs, "operator", "a_zero", cfg.operator["a_zero"])
    if "a_fiber" in cfg.operator:
        _emit_coefficient(lines, subs, "operator", "a_fiber", cfg.operator["a_fiber"])
    blocks.append("\n".join(lines))
    blocks.extend(subs)

    if cfg.boundary_condition is not None:
        bc = cfg.boundary_condition
        lines = ["[boundary_condition]"]
        lines.append("kind = {0}".format(_toml_value(bc["kind"])))
        for key in ("b_plus", "b_minus", "a_generator", "order",
                    "pi_plus", "pi_minus", "pi_generator"):
            if key in bc:
                lines.append("{0} = {1}".format(key, _toml_value(bc[key])))
        blocks.append("\n".join(lines))

    lines = ["[grids]"]
    for key in ("y_samples", "eta_samples", "n_covectors", "n_window",
                "n_terms", "refine"):
        lines.append("{0} = {1}".format(key, _toml_value(cfg.grids[key])))
    blocks.append("\n".join(lines))

    lines = ["[tolerances]"]
    for key in sorted(cfg.tolerances):
        lines.append("{0} = {1}".format(key, _toml_value(cfg.tolerances[key])))
    blocks.append("\n".join(lines))

    if cfg.output is not None:
        lines = ["[output]"]
        for key in ("out_dir", "formats"):
            if key in cfg.output:
                lines.append("{0} = {1}".format(key, _toml_value(cfg.output[key])))
        blocks.append("\n".join(lines))

    return "\n\n".join(blocks) + "\n"


def save_config(cfg: ProblemConfig, path):
    try:
        with open(path, "w") as fh:
            fh.write(emit_config(cfg))
    except OSError as exc:
        raise ConfigurationError("cannot write config {0}: {1}".format(path, exc))
