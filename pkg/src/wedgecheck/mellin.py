"""Mellin singular parts and the boundary Green pairing.

For a cut-off trace element omega(x) x^{i sigma0} log^l(x) v the Mellin
transform

    (omega u)^(sigma) = int_0^inf omega(x) u(x) x^{-i sigma} dx/x

extends meromorphically with a single pole at sigma0; its principal part is

    sum_{k=1}^{l+1} c_k / (i(sigma0 - sigma))^k ,   c_k = (-1)^{k-1}(k-1)! u_{k-1},

independent of the cutoff.  The Green pairing of trace spaces of A and A* is
the contour integral

    beta(u, v) = (1/2pi) oint (P(sigma) hat u(sigma), hat v(conj sigma))_Z dsigma

over a counterclockwise rectangle around the strip part of the boundary
spectrum.  Residue mode evaluates it from the closed-form singular parts;
quadrature mode integrates the full (cutoff-dependent) transforms along the
rectangle, which must agree: the difference of integrands is entire.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import ContourError, ShapeError
from .indicial import IndicialPencil, TraceElement, TraceSpace


# ---------------------------------------------------------------------------
# cutoffs


def _bump(t):
    """exp(-1/t) for t > 0, else 0; the C-infinity transition kernel."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


@dataclass(frozen=True)
class Cutoff:
    """Smooth monotone cutoff: 1 on [0, lo], 0 on [hi, inf)."""

    lo: float = 0.5
    hi: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s = (x - self.lo) / (self.hi - self.lo)
        up = _bump(1.0 - s)
        down = _bump(s)
        with np.errstate(invalid="ignore"):
            w = up / (up + down)
        w = np.where(s <= 0.0, 1.0, w)
        w = np.where(s >= 1.0, 0.0, w)
        return w if w.shape else float(w)

    def derivative(self, x):
        """Closed-form d omega/dx (zero outside the transition band)."""
        x = np.asarray(x, dtype=float)
        s = (x - self.lo) / (self.hi - self.lo)
        up = _bump(1.0 - s)
        down = _bump(s)
        # d bump(t)/dt = bump(t)/t^2
        with np.errstate(invalid="ignore", divide="ignore"):
            dup = -up / np.square(1.0 - s)
            ddn = down / np.square(s)
            d = (dup * down - up * ddn) / np.square(up + down)
        d = np.where((s <= 0.0) | (s >= 1.0), 0.0, d)
        d = d / (self.hi - self.lo)
        return d if d.shape else float(d)


REFERENCE_CUTOFF = Cutoff(0.5, 1.0)


# ---------------------------------------------------------------------------
# singular parts


@dataclass
class SingularPart:
    """Principal part sum_k coeffs[k-1] / (i(sigma0 - sigma))^k (vector valued)."""

    sigma0: complex
    coeffs: np.ndarray  # (order, dim)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0]

    def __call__(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=complex)
        base = 1.0 / (1j * (self.sigma0 - sigma))
        out = np.zeros(sigma.shape + (self.coeffs.shape[1],), dtype=complex)
        for k in range(1, self.order + 1):
            out += np.multiply.outer(base ** k, self.coeffs[k - 1])
        return out

    def conj_reflected(self) -> "SingularPart":
        """sigma -> conj(self(conj sigma)) as a new principal part.

        conj(1/(i(s0 - conj sigma))^k) = (-1)^k / (i(conj s0 - sigma))^k, so
        the reflected part has pole conj(s0) and coefficients
        (-1)^k conj(c_k).
        """
        signs = (-1.0) ** np.arange(1, self.order + 1)
        return SingularPart(np.conj(self.sigma0), signs[:, None] * np.conj(self.coeffs))


def mellin_singular(element: TraceElement) -> SingularPart:
    """Principal part of the Mellin transform of a cut-off trace element.

    Oracle identity fixing the constants: int_0^1 x^{s-1} log^l x dx =
    (-1)^l l! / s^{l+1} with s = i(sigma0 - sigma).
    """
    order = element.level + 1
    coeffs = np.empty((order, element.coeffs.shape[1]), dtype=complex)
    fac = 1.0
    for k in range(1, order + 1):
        if k > 1:
            fac *= k - 1
        coeffs[k - 1] = (-1.0) ** (k - 1) * fac * element.coeffs[k - 1]
    return SingularPart(element.sigma, coeffs)


# ---------------------------------------------------------------------------
# contours


def _gauss_panel(a: complex, b: complex, n: int):
    """Gauss-Legendre nodes/weights along the straight segment a -> b."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x.astype(complex), half * w.astype(complex)


@dataclass
class RectContour:
    """Counterclockwise rectangle [re_lo, re_hi] x [im_lo, im_hi] in sigma."""

    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float
    n_edge: int = 120

    def __post_init__(self):
        if not (self.re_lo < self.re_hi and self.im_lo < self.im_hi):
            raise ContourError("degenerate contour rectangle")

    def corners(self):
        return (
            complex(self.re_lo, self.im_lo),
            complex(self.re_hi, self.im_lo),
            complex(self.re_hi, self.im_hi),
            complex(self.re_lo, self.im_hi),
        )

    def quadrature(self):
        """Nodes and weights for oint f(sigma) dsigma, counterclockwise."""
        c = self.corners()
        nodes, weights = [], []
        for a, b in zip(c, c[1:] + c[:1]):
            z, w = _gauss_panel(a, b, self.n_edge)
            nodes.append(z)
            weights.append(w)
        return np.concatenate(nodes), np.concatenate(weights)

    def contains(self, sigma: complex, margin: float = 0.0) -> bool:
        return (self.re_lo + margin < sigma.real < self.re_hi - margin
                and self.im_lo + margin < sigma.imag < self.im_hi - margin)

    def validate_poles(self, poles, margin: float = 1e-3):
        for p in poles:
            if not self.contains(p, margin):
                raise ContourError(
                    f"pole {p} is not inside the contour with margin {margin}"
                )


def default_contour(poles, n_edge: int = 120) -> RectContour:
    """Rectangle inside the strip separating the given poles from the weight lines."""
    poles = list(poles)
    if not poles:
        return RectContour(-1.0, 1.0, -0.25, 0.25, n_edge)
    res = [p.real for p in poles]
    ims = [p.imag for p in poles]
    if max(ims) >= 0.5 or min(ims) <= -0.5:
        raise ContourError("pole outside the open strip |Im sigma| < 1/2")
    return RectContour(
        re_lo=min(res) - 0.75,
        re_hi=max(res) + 0.75,
        im_lo=0.5 * (min(ims) - 0.5),
        im_hi=0.5 * (max(ims) + 0.5),
        n_edge=n_edge,
    )


# ---------------------------------------------------------------------------
# Green pairing


def _entire_correction(element: TraceElement, cutoff: Cutoff, sigmas: np.ndarray,
                       conj_data: bool, n_panel: int = 96) -> np.ndarray:
    """Cutoff-dependent entire part of the Mellin transform at the nodes.

    E(sigma) = int (omega(x) - 1_{x<=1}) u(x) x^{-i sigma} dx/x over the
    region where the bracket is nonzero ([cutoff.lo, max(cutoff.hi, 1)]).
    With conj_data=True the integrand uses conj(u(x)) and x^{+i sigma}
    (the reflected second-slot factor).
    """
    breaks = sorted({cutoff.lo, min(cutoff.hi, 1.0), 1.0, cutoff.hi})
    out = np.zeros((sigmas.size, element.coeffs.shape[1]), dtype=complex)
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a <= 1e-15:
            continue
        t, w = np.polynomial.legendre.leggauss(n_panel)
        ta, tb = math.log(a), math.log(b)
        tt = 0.5 * (ta + tb) + 0.5 * (tb - ta) * t
        ww = 0.5 * (tb - ta) * w
        x = np.exp(tt)
        vals = element.evaluate(x)  # (n_panel, dim)
        bracket = cutoff(x) - (x <= 1.0)
        if conj_data:
            vals = np.conj(vals)
            phases = np.exp(1j * np.outer(sigmas, tt))
        else:
            phases = np.exp(-1j * np.outer(sigmas, tt))
        out += np.einsum("st,t,td->sd", phases, ww * bracket, vals)
    return out


@dataclass
class PairingMatrix:
    """Green pairing matrix B[j, k] = beta(t_j, t*_k); second slot conjugate linear."""

    matrix: np.ndarray
    trace: TraceSpace
    trace_adj: TraceSpace
    mode: str
    contour: RectContour | None = None

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


def _pole_set(trace: TraceSpace, trace_adj: TraceSpace, tol: float = 1e-8):
    poles = [el.sigma for el in trace.elements]
    poles += [np.conj(el.sigma) for el in trace_adj.elements]
    out = []
    for p in poles:
        if not any(abs(p - q) < tol for q in out):
            out.append(complex(p))
    return out


def green_pairing(trace: TraceSpace, trace_adj: TraceSpace, *,
                  mode: str = "residue",
                  contour: RectContour | None = None,
                  cutoff: Cutoff = REFERENCE_CUTOFF,
                  cutoff_adj: Cutoff | None = None,
                  n_circle: int = 64) -> PairingMatrix:
    """Pairing matrix between a trace space and the adjoint trace space.

    residue mode sums residues of the closed-form rational integrand over
    small circles (cutoff free); quadrature mode integrates the full
    transforms (singular part + numerically integrated entire correction
    from the actual cutoffs) along the rectangle.
    """
    if trace.dim == 0 or trace_adj.dim == 0:
        return PairingMatrix(np.zeros((trace.dim, trace_adj.dim), dtype=complex),
                             trace, trace_adj, mode, contour)
    pencil = trace.pencil
    weight = trace.pencil.fiber.slot_weight
    cutoff_adj = cutoff_adj or cutoff
    S = [mellin_singular(el) for el in trace.elements]
    R = [mellin_singular(el).conj_reflected() for el in trace_adj.elements]
    poles = _pole_set(trace, trace_adj)

    def integrand(sig_nodes: np.ndarray, with_entire: bool) -> np.ndarray:
        """f[s, j, k] at the nodes; entire corrections only in quadrature mode."""
        n = sig_nodes.size
        U = np.stack([sp(sig_nodes) for sp in S], axis=-1)   # (n, dim, nu)
        V = np.stack([rp(sig_nodes) for rp in R], axis=-1)   # (n, dim, nv)
        if with_entire:
            EU = np.stack(
                [_entire_correction(el, cutoff, sig_nodes, conj_data=False)
                 for el in trace.elements], axis=-1)
            EV = np.stack(
                [_entire_correction(el, cutoff_adj, sig_nodes, conj_data=True)
                 for el in trace_adj.elements], axis=-1)
            U = U + EU
            V = V + EV
        PU = np.einsum("ab,sbj->saj", pencil.M_A, U) * sig_nodes[:, None, None] \
            + np.einsum("ab,sbj->saj", pencil.M_B, U)
        return weight * np.einsum("saj,sak->sjk", PU, V)

    if mode == "residue":
        total = np.zeros((trace.dim, trace_adj.dim), dtype=complex)
        for p in poles:
            dist = [abs(p - q) for q in poles if abs(p - q) > 1e-12]
            dist.append(abs(p.imag - 0.5))
            dist.append(abs(p.imag + 0.5))
            radius = 0.45 * min(dist)
            ang = 2.0 * np.pi * np.arange(n_circle) / n_circle
            z = p + radius * np.exp(1j * ang)
            f = integrand(z, with_entire=False)
            # Res = (1/2pi i) oint f = (radius / n) sum f(z) e^{i ang}
            res = (radius / n_circle) * np.einsum(
                "s,sjk->jk", np.exp(1j * ang), f)
            total += res
        return PairingMatrix(1j * total, trace, trace_adj, mode, None)

    if mode == "quadrature":
        contour = contour or default_contour(poles)
        contour.validate_poles(poles)
        nodes, wts = contour.quadrature()
        f = integrand(nodes, with_entire=True)
        mat = np.einsum("s,sjk->jk", wts, f) / (2.0 * np.pi)
        return PairingMatrix(mat, trace, trace_adj, mode, contour)

    raise ShapeError(f"unknown pairing mode {mode!r}")


# ---------------------------------------------------------------------------
# structural checks on the pairing


def skew_adjoint_residual(pm: PairingMatrix) -> float:
    """Residual of beta(x d/dx u, v) + beta(u, x d/dx v) = 0 in matrix form.

    With X, X* the matrices of x d/dx on the two trace spaces this is
    ||X^T B + B conj(X*)|| / ||B||.
    """
    B = pm.matrix
    X = pm.trace.g_matrix - 0.5 * np.eye(pm.trace.dim)
    Xa = pm.trace_adj.g_matrix - 0.5 * np.eye(pm.trace_adj.dim)
    num = np.linalg.norm(X.T @ B + B @ np.conj(Xa), 2)
    den = max(np.linalg.norm(B, 2), 1e-300)
    return float(num / den)


def pairing_nondegenerate(pm: PairingMatrix, tol: float = 1e-10) -> tuple:
    """(is nondegenerate, smallest/largest singular value)."""
    if pm.matrix.size == 0 or pm.matrix.shape[0] != pm.matrix.shape[1]:
        return False, 0.0, 0.0
    sv = pm.singular_values()
    ok = bool(sv[-1] > tol * max(sv[0], 1.0))
    return ok, float(sv[-1]), float(sv[0])


def g_adjoint_spectrum_mismatch(pm: PairingMatrix) -> float:
    """Distance between the pairing-adjoint of g and 1 - conj(g) spectra.

    The adjoint of g = x d/dx + 1/2 with respect to beta acts on the adjoint
    trace space; its matrix is conj(B^{-1} G^T B), and its spectrum must
    match that of I - G* (the complementary weight pattern).  Returns the
    largest matched eigenvalue distance.
    """
    B = pm.matrix
    if B.shape[0] != B.shape[1] or B.size == 0:
        raise ShapeError("g-adjoint check needs a square nondegenerate pairing")
    G = pm.trace.g_matrix
    Ga = pm.trace_adj.g_matrix
    sharp = np.conj(np.linalg.solve(B, G.T @ B))
    lhs = np.linalg.eigvals(sharp)
    rhs = np.linalg.eigvals(np.eye(Ga.shape[0]) - Ga)
    cost = np.abs(lhs[:, None] - rhs[None, :])
    rr, cc = linear_sum_assignment(cost)
    return float(cost[rr, cc].max())


def _powlog_moments(s: complex, pmax: int, cutoff: Cutoff, n_panel: int = 96):
    """I_p(s) = int_0^inf cutoff(x)^2 x^s log^p x dx for p = 0..pmax.

    Closed form on [0, lo] where the cutoff is 1, via the recurrence
    F_p = c^{s+1} log^p c / (s+1) - p F_{p-1} / (s+1); Gauss-Legendre on the
    smooth descent [lo, hi].  Needs Re s > -1.
    """
    if s.real <= -1.0 + 1e-12:
        raise ContourError(f"moment integral diverges at the tip: Re s = {s.real}")
    c = cutoff.lo
    out = np.empty(pmax + 1, dtype=complex)
    F = c ** (s + 1.0) / (s + 1.0)
    out[0] = F
    logc = math.log(c)
    for p in range(1, pmax + 1):
        F = (c ** (s + 1.0) * logc ** p - p * F) / (s + 1.0)
        out[p] = F
    t, w = np.polynomial.legendre.leggauss(n_panel)
    x = 0.5 * (cutoff.lo + cutoff.hi) + 0.5 * (cutoff.hi - cutoff.lo) * t
    ww = 0.5 * (cutoff.hi - cutoff.lo) * w * cutoff(x) ** 2
    lx = np.log(x)
    xs = x.astype(complex) ** s
    for p in range(pmax + 1):
        out[p] += np.sum(ww * xs * lx ** p)
    return out


def trace_gram(trace: TraceSpace, cutoff: Cutoff = REFERENCE_CUTOFF,
               n_panel: int = 96) -> np.ndarray:
    """Gram matrix of the cut-off trace basis in L^2(dx) x L^2(Z).

    (u, v) = int_0^inf (cutoff(x) u(x), cutoff(x) v(x))_Z dx; the plain dx
    measure makes every product of strip elements integrable at the tip.
    """
    n = trace.dim
    H = np.zeros((n, n), dtype=complex)
    weight = trace.pencil.fiber.slot_weight
    for j, ej in enumerate(trace.elements):
        for k, ek in enumerate(trace.elements):
            s = 1j * (ej.sigma - np.conj(ek.sigma))
            pmax = ej.level + ek.level
            mom = _powlog_moments(s, pmax, cutoff, n_panel)
            acc = 0.0 + 0.0j
            for l in range(ej.level + 1):
                for m in range(ek.level + 1):
                    acc += np.dot(ej.coeffs[l], np.conj(ek.coeffs[m])) * mom[l + m]
            H[j, k] = weight * acc
    H = 0.5 * (H + H.conj().T)
    return H


def kappa_conjugation_residual(pm: PairingMatrix, rho: float) -> float:
    """Relative defect of beta(kappa_rho u, kappa_rho v) = rho beta(u, v).

    Since (kappa_rho u)^(sigma) = rho^{i sigma + 1/2} hat u(sigma), the two
    dilation phases cancel up to one factor of rho; in trace coordinates the
    identity reads (rho^G)^T B conj(rho^{G*}) = rho B.  It is the exponential
    form of the skew-adjointness relation and makes a good second oracle.
    """
    B = pm.matrix
    Ku = sla.expm(np.log(rho) * pm.trace.g_matrix)
    Kv = sla.expm(np.log(rho) * pm.trace_adj.g_matrix)
    lhs = Ku.T @ B @ np.conj(Kv)
    return float(np.linalg.norm(lhs - rho * B, 2) / max(np.linalg.norm(B, 2), 1e-300))
