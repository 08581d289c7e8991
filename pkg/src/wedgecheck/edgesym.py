"""Twisted operator-valued symbols over a circle edge.

The edge is the unit circle (one edge covariable eta); edge functions are
finite Fourier series with values in a discretized space H, either plain
coefficient slots or radial-grid x fiber data on the model cone.  Symbols
a(y, eta) act between two such spaces, each carrying a group action: the
trivial one, the normalized dilation (kappa_rho u)(x) = rho^{1/2} u(rho x),
or the matrix action rho^G generated by a trace-space g-matrix.

Symbol estimates are checked in the twisted sense: the quantity fitted
against <eta> = sqrt(1 + eta^2) is

    || kappa~_<eta>^{-1} (D_y^alpha d_eta^beta a)(y, eta) kappa_<eta> ||

with the operator norm taken between the weighted discrete value spaces.
Symbols built here carry a closed-form conjugator for the twist whenever
one exists (dilation of a multiplication operator just moves the profile),
so the checks are not limited by resampling error; generic symbols fall
back to numerically dilated action matrices.

The smoothed covariable bracket [.] and the cutoff-profile extension
operator u(x, y) = sum_eta e^{i y eta} omega(x [eta]_y) fhat(eta) live here
as well, together with its support, boundary-limit, and round-trip checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConfigurationError,
    DifferentiationError,
    ExtractionError,
    ShapeError,
)
from .fiber import ConeGrid, FiberModel, dilation_matrix
from .indicial import TraceSpace, WedgeOp
from .mellin import Cutoff

#: default extension profile; vanishing for arguments >= 1/2 makes the
#: support bound c0 = 1/2 exact.
EXTENSION_CUTOFF = Cutoff(0.25, 0.5)


def angle_bracket(eta):
    """<eta> = sqrt(1 + |eta|^2), the Sobolev weight (not the smoothed bracket)."""
    return np.sqrt(1.0 + np.square(np.asarray(eta, dtype=float)))


def edge_nodes(n: int) -> np.ndarray:
    """n equispaced angles on the edge circle."""
    return 2.0 * np.pi * np.arange(n) / n


class TruncationWarning(UserWarning):
    """Input had Fourier content beyond the requested band."""


# ---------------------------------------------------------------------------
# smoothed covariable bracket


@dataclass(frozen=True)
class MetricBracket:
    """Edge metric and the smoothed bracket [r].

    ``g11`` is the (inverse-)metric coefficient g^{11}(y) on the circle
    edge, a positive constant or a callable of y.  The bracket is the
    smooth function with [r] = 1 for |r| <= r0/2 and [r] = |r| for
    |r| >= r0 (blended monotonically in between, so [r] >= 1 everywhere),
    and the metric-weighted covariable is [eta]_y = [sqrt(g^{11}(y)) eta].
    """

    g11: object = 1.0
    r0: float = 2.0

    def __post_init__(self):
        if self.r0 <= 0.0:
            raise ConfigurationError("bracket onset r0 must be positive")
        if not callable(self.g11) and float(self.g11) <= 0.0:
            raise ConfigurationError("edge metric must be positive")

    def _blend(self) -> Cutoff:
        return Cutoff(0.5 * self.r0, self.r0)

    def metric(self, y: float = 0.0) -> float:
        g = self.g11(y) if callable(self.g11) else self.g11
        g = float(g)
        if g <= 0.0:
            raise ConfigurationError(f"edge metric not positive at y = {y}")
        return g

    def bracket(self, r):
        """[r]: even, smooth, >= 1, equal to |r| beyond the onset."""
        s = np.abs(np.asarray(r, dtype=float))
        w = self._blend()(s)
        out = w + (1.0 - w) * s
        return out if out.shape else float(out)

    def bracket_derivative(self, r):
        """d[r]/dr (odd; identically 0 below the inner plateau)."""
        r = np.asarray(r, dtype=float)
        s = np.abs(r)
        blend = self._blend()
        w = blend(s)
        dw = blend.derivative(s)
        h = (1.0 - w) + (1.0 - s) * dw
        out = np.sign(r) * h
        return out if out.shape else float(out)

    def eta(self, eta, y: float = 0.0):
        """[eta]_y = [sqrt(g^{11}(y)) eta]."""
        return self.bracket(np.sqrt(self.metric(y)) * np.asarray(eta, dtype=float))

    def eta_derivative(self, eta, y: float = 0.0):
        """d [eta]_y / d eta."""
        root = np.sqrt(self.metric(y))
        return self.bracket_derivative(root * np.asarray(eta, dtype=float)) * root


# ---------------------------------------------------------------------------
# group actions on discretized value spaces


class TrivialAction:
    """kappa_rho = identity."""

    def __init__(self, dim: int):
        self.dim = dim

    def matrix(self, rho: float) -> np.ndarray:
        return np.eye(self.dim)


class DilationAction:
    """Normalized dilation on radial-grid data, by spectral resampling.

    Resampling is exact for data smooth in log x away from the grid ends;
    symbols that admit a closed-form conjugation should carry it instead of
    relying on these matrices.
    """

    def __init__(self, grid: ConeGrid, channels: int = 1):
        self.grid = grid
        self.channels = channels

    @property
    def dim(self) -> int:
        return self.grid.n * self.channels

    def matrix(self, rho: float) -> np.ndarray:
        return dilation_matrix(self.grid, rho, self.channels)


class GeneratorAction:
    """Matrix action rho^G = expm(log(rho) G) on a finite coordinate space."""

    def __init__(self, generator: np.ndarray):
        self.generator = np.asarray(generator, dtype=complex)
        if self.generator.ndim != 2 or self.generator.shape[0] != self.generator.shape[1]:
            raise ShapeError("action generator must be a square matrix")

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def matrix(self, rho: float) -> np.ndarray:
        return sla.expm(np.log(rho) * self.generator)


def cone_weights(grid: ConeGrid, fiber: FiberModel = None, channels: int = None) -> np.ndarray:
    """Quadrature weights of the discrete cone space (radial nodes x slots)."""
    if fiber is not None:
        per = np.full(fiber.dim, fiber.slot_weight)
    elif channels is not None:
        per = np.ones(channels)
    else:
        raise ConfigurationError("need a fiber model or a channel count")
    return np.kron(grid.w_dx, per)


def weighted_opnorm(M: np.ndarray, w_tgt: np.ndarray, w_src: np.ndarray) -> float:
    """Operator norm between weighted-l2 spaces: ||W_t^(1/2) M W_s^(-1/2)||_2."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (w_tgt.size, w_src.size):
        raise ShapeError(
            f"matrix shape {M.shape} does not match value-space dimensions "
            f"({w_tgt.size}, {w_src.size})"
        )
    scaled = np.sqrt(w_tgt)[:, None] * M / np.sqrt(w_src)[None, :]
    return float(np.linalg.norm(scaled, 2))


# ---------------------------------------------------------------------------
# twisted symbols


@dataclass
class TwistedSymbol:
    """Operator-valued symbol a(y, eta) with group actions on both sides.

    ``evaluator(y, eta)`` returns the matrix of a(y, eta); ``conjugator(y,
    eta, rho)``, when present, returns kappa~_rho^{-1} a(y, eta) kappa_rho
    in closed form (used by the estimate and homogeneity checks; the
    fallback multiplies by the action matrices).  ``order`` is the nominal
    symbol order mu.
    """

    evaluator: object
    order: float
    src_action: object
    tgt_action: object
    src_weights: np.ndarray
    tgt_weights: np.ndarray
    conjugator: object = None
    name: str = ""

    def __post_init__(self):
        self.src_weights = np.asarray(self.src_weights, dtype=float)
        self.tgt_weights = np.asarray(self.tgt_weights, dtype=float)
        if np.any(self.src_weights <= 0.0) or np.any(self.tgt_weights <= 0.0):
            raise ConfigurationError("value-space weights must be positive")

    @property
    def src_dim(self) -> int:
        return self.src_weights.size

    @property
    def tgt_dim(self) -> int:
        return self.tgt_weights.size

    def _checked(self, M, where: str) -> np.ndarray:
        M = np.asarray(M, dtype=complex)
        if M.shape != (self.tgt_dim, self.src_dim):
            raise ShapeError(
                f"symbol {self.name or '<anonymous>'} returned shape {M.shape} "
                f"at {where}, expected {(self.tgt_dim, self.src_dim)}"
            )
        if not np.all(np.isfinite(np.abs(M))):
            raise ConfigurationError(
                f"symbol {self.name or '<anonymous>'} is not finite at {where}"
            )
        return M

    def __call__(self, y: float, eta: float) -> np.ndarray:
        return self._checked(self.evaluator(y, eta), f"(y, eta) = ({y}, {eta})")

    def twisted(self, y: float, eta: float, rho: float) -> np.ndarray:
        """kappa~_rho^{-1} a(y, eta) kappa_rho."""
        if rho == 1.0:
            return self(y, eta)
        if self.conjugator is not None:
            return self._checked(
                self.conjugator(y, eta, rho), f"(y, eta, rho) = ({y}, {eta}, {rho})"
            )
        return (
            self.tgt_action.matrix(1.0 / rho) @ self(y, eta) @ self.src_action.matrix(rho)
        )

    def homog_transport(self, y: float, eta: float, rho: float) -> np.ndarray:
        """kappa~_rho a(y, eta) kappa_rho^{-1} (the homogeneity transport)."""
        return self.twisted(y, eta, 1.0 / rho)

    def opnorm(self, M: np.ndarray) -> float:
        return weighted_opnorm(M, self.tgt_weights, self.src_weights)


def multiplier_symbol(func, order: float, dim: int = 1, name: str = "") -> TwistedSymbol:
    """Symbol with trivial actions; ``func(y, eta)`` scalar or (dim, dim)."""

    def ev(y, eta):
        v = np.asarray(func(y, eta), dtype=complex)
        if v.ndim == 0:
            return complex(v) * np.eye(dim)
        return v

    w = np.ones(dim)
    act = TrivialAction(dim)
    return TwistedSymbol(ev, order, act, act, w, w,
                         conjugator=lambda y, eta, rho: ev(y, eta), name=name)


def cutoff_point_symbol(bracket: MetricBracket, cutoff: Cutoff, x0: float,
                        order: float = -4.0) -> TwistedSymbol:
    """omega(x0 [eta]_y) at a frozen radius, as a scalar symbol.

    The frozen-radius restriction of the cutoff profile vanishes once
    [eta]_y leaves the cutoff support, so it satisfies estimates of every
    order; ``order`` sets the nominal bound the estimate checker tests.
    """
    if x0 <= 0.0:
        raise ConfigurationError("frozen radius must be positive")
    return multiplier_symbol(
        lambda y, eta: cutoff(x0 * bracket.eta(eta, y)),
        order, dim=1, name=f"cutoff profile at x0 = {x0}")


def cutoff_potential_symbol(bracket: MetricBracket, cutoff: Cutoff,
                            grid: ConeGrid, channels: int = 1) -> TwistedSymbol:
    """Multiplication by omega(x [eta]_y) as a map slots -> cone data.

    With the dilation action on the target this is a symbol of order -1/2:
    the twisted profile rho^{-1/2} omega((x/rho) [eta]_y) has L^2(dx) norm
    ~ [eta]_y^{-1/2}.
    """
    eye = np.eye(channels)

    def build(y, eta, xs, scale):
        prof = cutoff(xs * bracket.eta(eta, y))
        return scale * np.kron(prof[:, None], eye).astype(complex)

    return TwistedSymbol(
        lambda y, eta: build(y, eta, grid.nodes, 1.0),
        -0.5,
        TrivialAction(channels),
        DilationAction(grid, channels),
        np.ones(channels),
        cone_weights(grid, channels=channels),
        conjugator=lambda y, eta, rho: build(y, eta, grid.nodes / rho, rho ** -0.5),
        name="cutoff potential symbol",
    )


def _op_blocks(op: WedgeOp, y: float):
    if op.edge_dim != 1:
        raise ConfigurationError("edge symbols here use a single edge covariable")
    M_A, M_B, M_C = op.matrices(y)
    return M_A, M_B, M_C[0]


def boundary_symbol(op: WedgeOp, grid: ConeGrid) -> TwistedSymbol:
    """Complete first-order boundary symbol p(y, eta) = x(A at covariable eta).

    p = a_x xD_x + (fiber part + a_0) + (x eta) a_y, discretized on the
    radial grid.  Between cone spaces with the dilation action it is a
    symbol of order 0: conjugation moves the lone x factor to x/rho.
    """
    n, d = grid.n, op.fiber.dim
    xdx = -1j * grid.diff_log
    eye = np.eye(n)
    cache = {}

    def blocks(y):
        if y not in cache:
            cache[y] = _op_blocks(op, y)
        return cache[y]

    def build(y, eta, xfac):
        M_A, M_B, M_C1 = blocks(y)
        return (np.kron(xdx, M_A) + np.kron(eye, M_B)
                + eta * np.kron(np.diag(xfac), M_C1))

    w = cone_weights(grid, fiber=op.fiber)
    act = DilationAction(grid, d)
    return TwistedSymbol(
        lambda y, eta: build(y, eta, grid.nodes),
        0.0, act, act, w, w,
        conjugator=lambda y, eta, rho: build(y, eta, grid.nodes / rho),
        name="complete boundary symbol",
    )


def normal_family_symbol(op: WedgeOp, grid: ConeGrid) -> TwistedSymbol:
    """Normal family A_wedge(y, eta) on the radial grid.

    A_wedge = x^{-1}(a_x xD_x + fiber part + a_0) + eta a_y, twisted
    homogeneous of degree 1: A_wedge(y, rho eta) =
    rho kappa_rho A_wedge(y, eta) kappa_rho^{-1} exactly.
    """
    n, d = grid.n, op.fiber.dim
    xdx = -1j * grid.diff_log
    eye = np.eye(n)
    cache = {}

    def blocks(y):
        if y not in cache:
            cache[y] = _op_blocks(op, y)
        return cache[y]

    def build(y, eta, invx):
        M_A, M_B, M_C1 = blocks(y)
        return (np.kron(np.diag(invx) @ xdx, M_A) + np.kron(np.diag(invx), M_B)
                + eta * np.kron(eye, M_C1))

    w = cone_weights(grid, fiber=op.fiber)
    act = DilationAction(grid, d)
    return TwistedSymbol(
        lambda y, eta: build(y, eta, 1.0 / grid.nodes),
        1.0, act, act, w, w,
        conjugator=lambda y, eta, rho: build(y, eta, rho / grid.nodes),
        name="normal family",
    )


def extension_symbol(trace: TraceSpace, bracket: MetricBracket,
                     cutoff: Cutoff = EXTENSION_CUTOFF,
                     grid: ConeGrid = None) -> TwistedSymbol:
    """Extension normal family: trace coordinates tau -> omega(x [eta]_y) tau.

    Source coordinates carry the rho^{g_matrix} action (the cone dilation
    restricted to the trace space); with mu = 0 the homogeneity identity
    holds exactly above the bracket onset.
    """
    if grid is None:
        raise ConfigurationError("extension symbol needs a radial grid")
    fdim, dimT = trace.pencil.dim, trace.dim
    T = trace.evaluate(grid.nodes)  # (n, fdim, dimT)

    def asmat(Tx, prof):
        return (Tx * prof[:, None, None]).reshape(grid.n * fdim, dimT)

    def ev(y, eta):
        return asmat(T, cutoff(grid.nodes * bracket.eta(eta, y)))

    def conj(y, eta, rho):
        xs = grid.nodes / rho
        prof = cutoff(xs * bracket.eta(eta, y))
        return rho ** -0.5 * asmat(trace.evaluate(xs), prof) @ trace.kappa_matrix(rho)

    return TwistedSymbol(
        ev, 0.0,
        GeneratorAction(trace.g_matrix),
        DilationAction(grid, fdim),
        np.ones(dimT),
        cone_weights(grid, channels=fdim),
        conjugator=conj,
        name="extension normal family",
    )


# ---------------------------------------------------------------------------
# finite differences of symbol families


def _central_fd(f, x: float, h: float):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def _richardson_fd(f, x: float, order: int, h: float):
    """order-th derivative of matrix-valued f at x; Richardson-extrapolated
    central differences (error O(h^4) per level)."""
    if order == 0:
        return f(x)
    if order == 1:
        coarse = _central_fd(f, x, h)
        fine = _central_fd(f, x, 0.5 * h)
        out = (4.0 * fine - coarse) / 3.0
    else:
        g = lambda t: _richardson_fd(f, t, order - 1, h)
        coarse = _central_fd(g, x, h)
        fine = _central_fd(g, x, 0.5 * h)
        out = (4.0 * fine - coarse) / 3.0
    if not np.all(np.isfinite(np.abs(np.asarray(out, dtype=complex)))):
        raise DifferentiationError(
            f"finite differences of order {order} broke down at {x}")
    return out


def _twisted_derivative(a: TwistedSymbol, y: float, eta: float,
                        alpha: int, beta: int, rho: float,
                        rel_step: float = 1e-4) -> np.ndarray:
    """kappa~_rho^{-1} (D_y^alpha d_eta^beta a)(y, eta) kappa_rho.

    The twist at fixed rho commutes with differentiation, so differencing
    the conjugated family is exact in the same order.
    """
    h_eta = rel_step * max(abs(eta), 1.0)
    h_y = rel_step

    def in_eta(yy):
        if beta == 0:
            return a.twisted(yy, eta, rho)
        return _richardson_fd(lambda e: a.twisted(yy, e, rho), eta, beta, h_eta)

    if alpha == 0:
        return in_eta(y)
    d = _richardson_fd(in_eta, y, alpha, h_y)
    return (-1j) ** alpha * d


def _fit_slope(etas: np.ndarray, norms: np.ndarray, window: np.ndarray):
    """LSQ slope of log(norm) vs log<eta> inside the window; -inf if the
    symbol vanishes there."""
    keep = window & (norms > 1e-250)
    if keep.sum() < 2:
        return float("-inf")
    lx = np.log(angle_bracket(etas[keep]))
    ly = np.log(norms[keep])
    A = np.stack([np.ones_like(lx), lx], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(coef[1])


@dataclass
class SymbolEstimateEntry:
    alpha: int
    beta: int
    slope: float
    bound: float
    passed: bool
    norms: np.ndarray = field(repr=False, default=None)


@dataclass
class SymbolEstimateReport:
    name: str
    mu: float
    slope_tolerance: float
    etas: np.ndarray
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, alpha: int, beta: int) -> SymbolEstimateEntry:
        for e in self.entries:
            if e.alpha == alpha and e.beta == beta:
                return e
        raise KeyError((alpha, beta))

    def summary(self) -> str:
        lines = [f"symbol estimates for {self.name or '<anonymous>'} (mu = {self.mu})"]
        for e in self.entries:
            lines.append(
                f"  alpha={e.alpha} beta={e.beta}: slope {e.slope:+.4f} "
                f"vs bound {e.bound:+.4f} -> {'pass' if e.passed else 'FAIL'}")
        return "\n".join(lines)


def symbol_estimate_check(a: TwistedSymbol, mu: float = None, max_order: int = 2,
                          etas: np.ndarray = None, y_samples=(0.0,),
                          slope_tolerance: float = 0.1,
                          rel_step: float = 1e-4) -> SymbolEstimateReport:
    """Fit twisted-norm growth of D_y^alpha d_eta^beta a for all
    |alpha| + |beta| <= max_order against the bound <eta>^(mu - |beta|).

    Norms are fitted over the top decade of the sampled |eta| range; an
    entry passes when its fitted slope is <= mu - beta + slope_tolerance.
    A family that vanishes identically on the window gets slope -inf.
    """
    if mu is None:
        mu = a.order
    if etas is None:
        etas = np.geomspace(10.0, 1.0e3, 13)
    etas = np.asarray(etas, dtype=float)
    window = etas >= etas.max() / 10.0 * (1.0 - 1e-12)

    entries = []
    for alpha in range(max_order + 1):
        for beta in range(max_order + 1 - alpha):
            norms = np.empty(etas.size)
            for i, eta in enumerate(etas):
                rho = float(angle_bracket(eta))
                norms[i] = max(
                    a.opnorm(_twisted_derivative(a, y, eta, alpha, beta, rho, rel_step))
                    for y in y_samples)
            slope = _fit_slope(etas, norms, window)
            bound = mu - beta + slope_tolerance
            entries.append(SymbolEstimateEntry(
                alpha, beta, slope, bound, bool(slope <= bound), norms))
    return SymbolEstimateReport(a.name, mu, slope_tolerance, etas, entries)


def twisted_homog_check(a: TwistedSymbol, mu: float = None, samples=None,
                        rhos=(2.0, 5.0), y_samples=(0.0,)) -> float:
    """Max relative defect of a(y, rho eta) = rho^mu kappa~_rho a(y, eta) kappa_rho^{-1}.

    Samples must sit above the homogeneity onset of any brackets involved
    (|eta| and rho |eta| beyond which [.] = |.|).
    """
    if mu is None:
        mu = a.order
    if samples is None:
        samples = (2.0, 5.0, 11.0, -2.0, -5.0, -11.0)
    worst = 0.0
    for y in y_samples:
        for eta in samples:
            for rho in rhos:
                lhs = a(y, rho * eta)
                rhs = rho ** mu * a.homog_transport(y, eta, rho)
                denom = a.opnorm(lhs)
                if denom == 0.0:
                    continue
                worst = max(worst, a.opnorm(lhs - rhs) / denom)
    return worst


def cutoff_symbol_derivative_check(bracket: MetricBracket, cutoff: Cutoff,
                                   x_samples=None, eta_samples=None,
                                   y_samples=(0.0,), rel_step: float = 1e-5) -> float:
    """Compare finite differences of omega(x [eta]_y) with the closed forms.

    x d/dx omega(x[eta]_y) = (x[eta]_y) omega'(x[eta]_y) and
    d/deta omega(x[eta]_y) = x omega'(x[eta]_y) d[eta]_y/deta.
    Returns the worst deviation, relative to max(1, |closed form|).
    """
    if x_samples is None:
        x_samples = np.geomspace(0.02, 2.0, 9)
    if eta_samples is None:
        eta_samples = (0.0, 0.7, 1.6, 3.0, 8.0, -2.5)
    worst = 0.0
    for y in y_samples:
        for eta in eta_samples:
            br = bracket.eta(eta, y)
            dbr = bracket.eta_derivative(eta, y)
            for x in x_samples:
                arg = x * br
                closed_x = arg * cutoff.derivative(arg)
                h = rel_step
                fd_x = _richardson_fd(
                    lambda t: np.asarray(cutoff(x * np.exp(t) * br), dtype=complex),
                    0.0, 1, h).real
                worst = max(worst, abs(fd_x - closed_x) / max(1.0, abs(closed_x)))

                closed_e = x * cutoff.derivative(arg) * dbr
                h_e = rel_step * max(abs(eta), 1.0)
                fd_e = _richardson_fd(
                    lambda e: np.asarray(cutoff(x * bracket.eta(e, y)), dtype=complex),
                    eta, 1, h_e).real
                worst = max(worst, abs(fd_e - closed_e) / max(1.0, abs(closed_e)))
    return worst


# ---------------------------------------------------------------------------
# edge functions and Sobolev norms


@dataclass
class EdgeFunction:
    """Finite Fourier series on the edge circle with vector values.

    ``coeffs[n + band]`` is the coefficient of e^{i n y}; ``weights`` are
    the value-space quadrature weights and ``action`` the group action used
    by default in twisted norms.
    """

    band: int
    coeffs: np.ndarray
    weights: np.ndarray = None
    action: object = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim == 1:
            self.coeffs = self.coeffs[:, None]
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] != 2 * self.band + 1:
            raise ShapeError(
                f"expected {2 * self.band + 1} mode rows, got {self.coeffs.shape[0]}")
        if self.weights is None:
            self.weights = np.ones(self.coeffs.shape[1])
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.size != self.coeffs.shape[1]:
            raise ShapeError("weight vector does not match value dimension")
        if self.action is None:
            self.action = TrivialAction(self.coeffs.shape[1])

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.band, self.band + 1)

    def mode(self, n: int) -> np.ndarray:
        if abs(n) > self.band:
            return np.zeros(self.dim, dtype=complex)
        return self.coeffs[n + self.band]

    def values(self, y) -> np.ndarray:
        """Evaluate at edge points; shape (len(y), dim)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        phases = np.exp(1j * np.outer(y, self.modes))
        return phases @ self.coeffs

    def copy(self) -> "EdgeFunction":
        return EdgeFunction(self.band, self.coeffs.copy(), self.weights.copy(),
                            self.action)


def edge_lincomb(cu: complex, u: EdgeFunction, cv: complex, v: EdgeFunction) -> EdgeFunction:
    """cu*u + cv*v with band alignment (value spaces must match)."""
    if u.dim != v.dim:
        raise ShapeError("edge functions have different value dimensions")
    band = max(u.band, v.band)
    coeffs = np.zeros((2 * band + 1, u.dim), dtype=complex)
    coeffs[band - u.band:band + u.band + 1] += cu * u.coeffs
    coeffs[band - v.band:band + v.band + 1] += cv * v.coeffs
    return EdgeFunction(band, coeffs, u.weights, u.action)


def edge_project(samples: np.ndarray, band: int, weights=None, action=None,
                 tail_tol: float = 1e-13) -> EdgeFunction:
    """Project equispaced edge samples onto modes -band..band (DFT).

    Warns with the relative discarded tail mass when the samples carry
    content beyond the band.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2:
        raise ShapeError("expected samples of shape (n_y, dim)")
    n_y = samples.shape[0]
    if n_y < 2 * band + 1:
        raise ConfigurationError(
            f"{n_y} samples cannot resolve band {band} (need >= {2 * band + 1})")
    F = np.fft.fft(samples, axis=0) / n_y
    coeffs = np.zeros((2 * band + 1, samples.shape[1]), dtype=complex)
    for n in range(-band, band + 1):
        coeffs[n + band] = F[n % n_y]
    total = float(np.sum(np.abs(F) ** 2))
    kept = float(np.sum(np.abs(coeffs) ** 2))
    if total > 0.0:
        tail = max(total - kept, 0.0) / total
        if tail > tail_tol:
            warnings.warn(
                f"input truncated to band {band}: relative tail mass {tail:.3e}",
                TruncationWarning, stacklevel=2)
    return EdgeFunction(band, coeffs, weights, action)


def random_edge_function(band: int, dim: int = 1, seed: int = 0, decay: float = 1.0,
                         weights=None, action=None) -> EdgeFunction:
    """Deterministic random band-limited edge function (mode decay optional)."""
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((2 * band + 1, dim)) \
        + 1j * rng.standard_normal((2 * band + 1, dim))
    envelope = decay ** np.abs(np.arange(-band, band + 1, dtype=float))
    coeffs *= envelope[:, None]
    return EdgeFunction(band, coeffs, weights, action)


def edge_sobolev_norm(u: EdgeFunction, s: float, action=None) -> float:
    """Abstract edge Sobolev norm of order s.

    ||u||^2 = 2 pi sum_n <n>^{2s} || kappa_<n>^{-1} u_n ||_H^2 with the
    value-space norm taken from the weights; the 2 pi matches the plain
    L^2(circle x H) norm at s = 0 with the trivial action.
    """
    act = action if action is not None else u.action
    total = 0.0
    for n in u.modes:
        c = u.mode(n)
        if not np.any(c):
            continue
        rho = float(angle_bracket(n))
        v = act.matrix(1.0 / rho) @ c
        total += rho ** (2.0 * s) * float(np.real(np.sum(u.weights * np.abs(v) ** 2)))
    return float(np.sqrt(2.0 * np.pi * total))


def op_apply(a: TwistedSymbol, u: EdgeFunction, out_band: int = None,
             n_y: int = None) -> EdgeFunction:
    """Apply op(a): (op(a)u)(y) = sum_n e^{iny} a(y, n) u_n.

    The result is re-expanded on modes -out_band..out_band from equispaced
    samples; out_band must dominate the band of the product (input band
    plus the y-band of the symbol), which holds for the band-limited
    symbols used here.
    """
    if u.dim != a.src_dim:
        raise ShapeError("edge function does not match the symbol source space")
    if out_band is None:
        out_band = u.band + 8
    if n_y is None:
        n_y = 2 * out_band + 1
    ys = edge_nodes(n_y)
    v = np.zeros((n_y, a.tgt_dim), dtype=complex)
    for n in u.modes:
        c = u.mode(n)
        if not np.any(c):
            continue
        for j, yj in enumerate(ys):
            v[j] += np.exp(1j * n * yj) * (a(yj, n) @ c)
    F = np.fft.fft(v, axis=0) / n_y
    coeffs = np.zeros((2 * out_band + 1, a.tgt_dim), dtype=complex)
    for m in range(-out_band, out_band + 1):
        coeffs[m + out_band] = F[m % n_y]
    return EdgeFunction(out_band, coeffs, a.tgt_weights, a.tgt_action)


# ---------------------------------------------------------------------------
# Leibniz (composition) remainder


def leibniz_partial_symbol(a1: TwistedSymbol, a2: TwistedSymbol, N: int,
                           rel_step: float = 1e-4) -> TwistedSymbol:
    """sum_{alpha < N} (1/alpha!) (d_eta^alpha a1)(D_y^alpha a2) as a symbol."""
    if a1.src_dim != a2.tgt_dim:
        raise ShapeError("symbols are not composable")

    def ev(y, eta):
        total = a1(y, eta) @ a2(y, eta)
        fac = 1.0
        for al in range(1, N):
            fac *= al
            h_eta = rel_step * max(abs(eta), 1.0)
            d1 = _richardson_fd(lambda e: a1(y, e), eta, al, h_eta)
            d2 = (-1j) ** al * _richardson_fd(lambda t: a2(t, eta), y, al, rel_step)
            total += (d1 @ d2) / fac
        return total

    return TwistedSymbol(ev, a1.order + a2.order, a2.src_action, a1.tgt_action,
                         a2.src_weights, a1.tgt_weights,
                         name=f"leibniz sum N={N} of ({a1.name}, {a2.name})")


@dataclass
class LeibnizReport:
    freqs: np.ndarray
    residuals: np.ndarray
    fitted_order: float
    bound: float
    tolerance: float
    zero_remainder: bool

    @property
    def passed(self) -> bool:
        return self.zero_remainder or self.fitted_order <= self.bound + self.tolerance


def leibniz_remainder_check(a1: TwistedSymbol, a2: TwistedSymbol, N: int = 1,
                            freqs=(8, 16, 32, 64, 128), profile=None,
                            s: float = 0.0, tolerance: float = 0.2,
                            pad: int = 8) -> LeibnizReport:
    """Decay of op(a1)op(a2)u - op(leibniz sum)u on single-mode inputs.

    For u = e^{iky} h the remainder norm (target W^s norm, per unit input
    norm) is fitted against log<k>; the fitted order is compared with
    mu1 + mu2 - N.  Remainders at round-off level are reported as
    identically zero (the trivial cases: a2 y-independent or a1
    eta-independent at N = 1).
    """
    c = leibniz_partial_symbol(a1, a2, N)
    if profile is None:
        profile = np.ones(a2.src_dim, dtype=complex)
    profile = np.asarray(profile, dtype=complex)
    unit = np.sqrt(2.0 * np.pi * float(np.real(np.sum(a2.src_weights * np.abs(profile) ** 2))))

    freqs = np.asarray(freqs, dtype=int)
    residuals = np.empty(freqs.size)
    scales = np.empty(freqs.size)
    for i, k in enumerate(freqs):
        coeffs = np.zeros((2 * k + 1, a2.src_dim), dtype=complex)
        coeffs[2 * k] = profile  # mode +k
        u = EdgeFunction(k, coeffs, a2.src_weights, a2.src_action)
        mid = op_apply(a2, u, out_band=k + pad)
        w1 = op_apply(a1, mid, out_band=k + 2 * pad)
        w2 = op_apply(c, u, out_band=k + 2 * pad)
        r = edge_lincomb(1.0, w1, -1.0, w2)
        residuals[i] = edge_sobolev_norm(r, s, action=a1.tgt_action) / unit
        scales[i] = edge_sobolev_norm(w1, s, action=a1.tgt_action) / unit
    zero = bool(np.all(residuals <= 1e-12 * max(scales.max(), 1.0)))
    if zero:
        fitted = float("-inf")
    else:
        keep = residuals > 1e-250
        lx = np.log(angle_bracket(freqs[keep].astype(float)))
        ly = np.log(residuals[keep])
        A = np.stack([np.ones_like(lx), lx], axis=1)
        coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
        fitted = float(coef[1])
    return LeibnizReport(freqs, residuals, fitted, a1.order + a2.order - N,
                         tolerance, zero)


# ---------------------------------------------------------------------------
# extension operator on the model collar


@dataclass
class CollarFunction:
    """u(x, y, .) = sum_n e^{iny} omega(x [n]_y) fhat(n) . trace basis at x.

    Stored by its data (trace coefficients per mode); evaluation is exact
    at any (x, y), so the support bound x < c0 holds identically.
    """

    trace: TraceSpace
    bracket: MetricBracket
    cutoff: Cutoff
    grid: ConeGrid
    f: EdgeFunction

    @property
    def c0(self) -> float:
        return self.cutoff.hi

    @property
    def band(self) -> int:
        return self.f.band

    def profile(self, x, n: int, y: float = 0.0) -> np.ndarray:
        """omega(x [n]_y) for mode n."""
        return self.cutoff(np.asarray(x, dtype=float) * self.bracket.eta(float(n), y))

    def values(self, x, y) -> np.ndarray:
        """Evaluate; shape (len(y), len(x), fiber dim)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        T = self.trace.evaluate(x)  # (nx, fdim, dimT)
        base = np.einsum("xfd,nd->nxf", T, self.f.coeffs)
        modes = self.f.modes
        out = np.zeros((y.size, x.size, self.trace.pencil.dim), dtype=complex)
        for j, yj in enumerate(y):
            brackets = np.array([self.bracket.eta(float(n), yj) for n in modes])
            profs = self.cutoff(np.outer(x, brackets))        # (nx, nmodes)
            phases = np.exp(1j * modes * yj)                  # (nmodes,)
            out[j] = np.einsum("xn,n,nxf->xf", profs, phases, base)
        return out

    def support_defect(self, n_x: int = 48, n_y: int = 24, x_hi: float = None) -> float:
        """max |u| sampled strictly beyond x = c0 (exactly 0 by construction)."""
        if x_hi is None:
            x_hi = max(4.0 * self.c0, self.grid.x_max)
        xs = np.linspace(self.c0 * (1.0 + 1e-12), x_hi, n_x)
        ys = edge_nodes(n_y)
        return float(np.max(np.abs(self.values(xs, ys))))


def extension_apply(f, trace: TraceSpace, bracket: MetricBracket,
                    cutoff: Cutoff = None, grid: ConeGrid = None,
                    band: int = None) -> CollarFunction:
    """Extend a band-limited trace section into the collar.

    f: EdgeFunction with trace coordinates as values (dim = trace.dim) or a
    raw (2 band + 1, trace.dim) coefficient array.  The result vanishes
    identically for x > c0 = cutoff.hi; requesting a band below the input
    band truncates with a warning reporting the discarded tail mass.
    """
    if cutoff is None:
        cutoff = EXTENSION_CUTOFF
    if grid is None:
        raise ConfigurationError("extension needs a radial grid")
    if not isinstance(f, EdgeFunction):
        arr = np.asarray(f, dtype=complex)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape[0] % 2 == 0:
            raise ShapeError("mode axis must have odd length (modes -b..b)")
        f = EdgeFunction((arr.shape[0] - 1) // 2, arr)
    if f.dim != trace.dim:
        raise ShapeError(
            f"trace section has {f.dim} components, trace space has {trace.dim}")
    if band is not None and band < f.band:
        total = float(np.sum(np.abs(f.coeffs) ** 2))
        kept = float(np.sum(np.abs(f.coeffs[f.band - band:f.band + band + 1]) ** 2))
        tail = 0.0 if total == 0.0 else max(total - kept, 0.0) / total
        warnings.warn(
            f"input truncated to band {band}: relative tail mass {tail:.3e}",
            TruncationWarning, stacklevel=2)
        f = EdgeFunction(band, f.coeffs[f.band - band:f.band + band + 1],
                         f.weights, f.action)
    return CollarFunction(trace, bracket, cutoff, grid, f)


def boundary_limit_errors(collar: CollarFunction, eps=(1e-1, 1e-2, 1e-3),
                          n_y: int = 512) -> np.ndarray:
    """sup_y |u(eps, y) - f(y) . trace basis at eps| for each eps.

    The profile omega(x [n]_y) -> 1 as x -> 0, so these errors decrease to
    0; they measure how much of the band the cutoff has already released
    at radius eps.
    """
    ys = edge_nodes(n_y)
    F = collar.f.values(ys)  # (n_y, dimT)
    errs = np.empty(len(eps))
    for i, e in enumerate(eps):
        U = collar.values([float(e)], ys)[:, 0, :]          # (n_y, fdim)
        T = collar.trace.evaluate([float(e)])[0]            # (fdim, dimT)
        target = F @ T.T
        errs[i] = float(np.max(np.linalg.norm(U - target, axis=1)))
    return errs


def collar_trace_coefficients(collar: CollarFunction):
    """Recover the mode coefficients of the extended trace section.

    Uses radial nodes deep enough that every mode profile is exactly 1
    (x [n]_y <= the cutoff plateau), where the collar function is exactly
    the band-limited sum of trace basis functions; a DFT over the edge and
    a least-squares solve against the basis then return fhat mode by mode.
    """
    trace, grid, f = collar.trace, collar.grid, collar.f
    n_y = 2 * f.band + 1
    ys = edge_nodes(n_y)
    worst = max(
        collar.bracket.eta(float(n), y) for n in f.modes for y in ys)
    window = grid.nodes * worst <= collar.cutoff.lo
    if not np.any(window):
        raise ExtractionError(
            "no radial nodes inside the flat cutoff window; need x_lo <= "
            f"{collar.cutoff.lo / worst:.3e}")
    xw = grid.nodes[window]
    U = collar.values(xw, ys)                               # (n_y, nw, fdim)
    Fm = np.fft.fft(U, axis=0) / n_y
    T = trace.evaluate(xw).reshape(xw.size * trace.pencil.dim, trace.dim)
    out = np.zeros((2 * f.band + 1, trace.dim), dtype=complex)
    resid = 0.0
    for n in f.modes:
        rhs = Fm[n % n_y].reshape(-1)
        sol, *_ = np.linalg.lstsq(T, rhs, rcond=None)
        out[n + f.band] = sol
        r = np.linalg.norm(T @ sol - rhs)
        resid = max(resid, r / max(np.linalg.norm(rhs), 1e-300))
    return out, resid
