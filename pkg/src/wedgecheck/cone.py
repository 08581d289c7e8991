"""Half-line cone symbols: decaying solutions, kernels, domain membership.

For a fixed edge covector eta != 0 the cone symbol is the half-line operator

    A(eta) u = x^{-1} (M_A xD_x + M_B + x M_C(eta)) u ,

a first-order system with a regular singular point at x = 0 and constant
coefficients at infinity.  Its maximal-domain kernel is computed by a
connection problem:

  * at infinity the decaying solutions span the stable invariant subspace of
    N1 = -i M_A^{-1} M_C(eta) (exponential dichotomy required);
  * that frame is propagated inward with a fourth-order Magnus integrator
    (two-point Gauss nodes, matrix exponentials, running re-orthonormalization
    with retroactive frame remixing of saved samples);
  * near zero every solution is matched against the Frobenius fundamental
    system x^{i sigma + k} (log-polynomial coefficients, resonance-corrected),
    whose exponent regions classify content as above / inside / below the
    admissible strip |Im sigma| < 1/2.

Membership in the maximal domain is the vanishing of all above-strip
coefficients; the strip coefficients are the trace of the solution in the
basis of the associated trace space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (ConvergenceError, DegenerateSymbolError, ExtractionError,
                     ResonanceError, ShapeError)
from .fiber import ConeGrid
from .indicial import (STRIP, BoundarySpectrum, IndicialPencil, TraceSpace, WedgeOp,
                       _chain_element, assemble_pencil, boundary_spectrum,
                       build_trace_space, _canonical_columns)
from .mellin import trace_gram


# ---------------------------------------------------------------------------
# the symbol as an ODE system


@dataclass
class ConeSymbol:
    """A(eta) at one edge point, in first-order form x u' = (N0 + x N1) u."""

    op: WedgeOp
    eta: np.ndarray
    y: float
    pencil: IndicialPencil
    M_Ceta: np.ndarray

    def __post_init__(self):
        self.M_A = self.pencil.M_A
        self.M_B = self.pencil.M_B
        M_A_inv = np.linalg.inv(self.M_A)
        self.N0 = -1j * (M_A_inv @ self.M_B)
        self.N1 = -1j * (M_A_inv @ self.M_Ceta)
        self.dim = self.M_A.shape[0]

    def ode_matrix(self, x: float) -> np.ndarray:
        return self.N0 / x + self.N1

    def apply_closed(self, x: np.ndarray, f, df) -> np.ndarray:
        """A(eta) on a test function with known derivative, evaluated exactly.

        f, df: callables x -> (dim,) arrays.  Returns (len(x), dim).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, self.dim), dtype=complex)
        for i, xi in enumerate(x):
            u, du = np.asarray(f(xi), complex), np.asarray(df(xi), complex)
            out[i] = (-1j * self.M_A @ du) + (self.M_B @ u) / xi + self.M_Ceta @ u
        return out

    def x_residual(self, grid: ConeGrid, values: np.ndarray) -> float:
        """Relative residual of the x-multiplied operator on sampled columns.

        Applies M_A xD_x + M_B + x M_C(eta) with spectral log-differentiation;
        the x factor keeps the scale finite at the tip.  values is
        (n_nodes, dim) or (n_nodes, dim, n_cols).
        """
        V = values if values.ndim == 3 else values[:, :, None]
        T1 = np.einsum("ab,nbk->nak", self.M_A, -1j *
                       np.einsum("nm,mbk->nbk", grid.diff_log, V))
        T2 = np.einsum("ab,nbk->nak", self.M_B, V)
        T3 = grid.nodes[:, None, None] * np.einsum("ab,nbk->nak", self.M_Ceta, V)
        num = np.linalg.norm((T1 + T2 + T3).ravel())
        den = sum(np.linalg.norm(T.ravel()) for T in (T1, T2, T3))
        return float(num / max(den, 1e-300))

    def adjoint(self) -> "ConeSymbol":
        """(A*)(eta): the cone symbol of the formal adjoint at the same eta."""
        return cone_symbol(self.op.adjoint(), self.eta, self.y)


def cone_symbol(op: WedgeOp, eta, y: float = 0.0) -> ConeSymbol:
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    pencil = assemble_pencil(op, y=y)
    M_Ceta = op.eta_matrix(eta, y=y)
    return ConeSymbol(op=op, eta=eta, y=y, pencil=pencil, M_Ceta=M_Ceta)


# ---------------------------------------------------------------------------
# behavior at infinity


@dataclass
class DecaySplitting:
    """Spectral splitting of N1 into decaying/growing directions at infinity."""

    rates: np.ndarray          # eigenvalues of N1
    basis: np.ndarray          # orthonormal basis of the stable subspace
    n_stable: int
    min_rate: float            # slowest decay rate min(-Re lambda) over stable


def decay_splitting(sym: ConeSymbol, degeneracy_tol: float = 1e-8) -> DecaySplitting:
    """Stable subspace of N1 via an ordered Schur form.

    Raises DegenerateSymbolError when some eigenvalue of N1 has vanishing
    real part relative to the matrix scale: the symbol then has no
    exponential dichotomy at infinity and the kernel problem is ill posed.
    """
    N1 = sym.N1
    scale = max(np.linalg.norm(N1, 2), 1e-300)
    lam = np.linalg.eigvals(N1)
    bad = np.abs(lam.real) < degeneracy_tol * scale
    if np.any(bad):
        raise DegenerateSymbolError(
            f"eta = {sym.eta}: eigenvalue {lam[bad][0]} of the tangential part "
            "has no exponential decay or growth at infinity"
        )
    T, Z, sdim = sla.schur(N1, output="complex", sort=lambda z: z.real < 0.0)
    n_stable = int(sdim)
    stable = lam[lam.real < 0.0]
    min_rate = float(-stable.real.max()) if n_stable else math.inf
    return DecaySplitting(rates=lam, basis=Z[:, :n_stable],
                          n_stable=n_stable, min_rate=min_rate)


# ---------------------------------------------------------------------------
# Magnus propagation


_GL_C1 = 0.5 - math.sqrt(3.0) / 6.0
_GL_C2 = 0.5 + math.sqrt(3.0) / 6.0


def magnus_propagate(sym: ConeSymbol, basis: np.ndarray, x_from: float, x_to: float,
                     save_xs=(), *, theta: float = 0.02, orth_every: int = 20):
    """Propagate solution columns of x u' = (N0 + x N1) u from x_from down to x_to.

    Works in t = log x where the system d/dt U = (N0 + e^t N1) U is regular;
    each step applies the fourth-order two-node Magnus exponential
    exp((A1+A2)/2 + sqrt(3)/12 [A2, A1]).  Columns are re-orthonormalized
    every orth_every steps; saved samples are right-multiplied by the inverse
    triangular factors so all returned values live in one common frame (the
    final one).  Returns (xs ascending, values (n_save, dim, n_cols), U_final).
    """
    if x_to >= x_from:
        raise ShapeError("inward propagation needs x_to < x_from")
    N0, N1 = sym.N0, sym.N1
    n0, n1 = np.linalg.norm(N0, 2), np.linalg.norm(N1, 2)
    xs = np.unique(np.asarray(save_xs, dtype=float))
    if xs.size and (xs[0] < x_to * (1 - 1e-12) or xs[-1] > x_from * (1 + 1e-12)):
        raise ShapeError("save points must lie inside the propagation range")
    t_saves = list(np.log(xs))           # ascending; pop() yields next (largest) first
    U = np.array(basis, dtype=complex, copy=True)
    m = U.shape[1]
    saved = []
    t, t_end = math.log(x_from), math.log(x_to)
    since_orth = 0

    def step_to(t_next):
        nonlocal U
        hh = t_next - t
        ta, tb = t + _GL_C1 * hh, t + _GL_C2 * hh
        A1 = hh * (N0 + math.exp(ta) * N1)
        A2 = hh * (N0 + math.exp(tb) * N1)
        omega = 0.5 * (A1 + A2) + (math.sqrt(3.0) / 12.0) * (A2 @ A1 - A1 @ A2)
        U = sla.expm(omega) @ U

    while t > t_end + 1e-14:
        h = theta / (n0 + math.exp(t) * n1 + 1e-300)
        h = min(h, 0.25)
        t_next = max(t - h, t_end)
        while t_saves and t_saves[-1] > t - 1e-14:
            t_saves.pop()            # save point at/above current t: record now
            saved.append(U.copy())
        if t_saves and t_saves[-1] > t_next:
            t_next = t_saves[-1]
        step_to(t_next)
        t = t_next
        since_orth += 1
        hit_save = bool(t_saves) and abs(t_saves[-1] - t) <= 1e-14
        if hit_save:
            t_saves.pop()
            saved.append(U.copy())
        if since_orth >= orth_every:
            Q, R = np.linalg.qr(U)
            U = Q
            if saved:
                Rinv = sla.solve_triangular(R, np.eye(m), lower=False)
                saved = [S @ Rinv for S in saved]
            since_orth = 0
    while t_saves:
        t_saves.pop()
        saved.append(U.copy())
    values = np.stack(saved[::-1], axis=0) if saved else np.zeros((0, U.shape[0], m))
    return xs, values, U


# ---------------------------------------------------------------------------
# Frobenius fundamental system at the tip


@dataclass
class FrobeniusSolution:
    """One fundamental solution x^{i sigma} sum_{k,j} c[k, j] x^k log^j x."""

    sigma: complex
    chain_id: int
    level: int
    region: str                 # "above" | "strip" | "below"
    coeffs: np.ndarray          # (n_terms + 1, deg + 1, dim)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = np.log(x)
        K, J, dim = self.coeffs.shape
        logs = np.stack([t ** j for j in range(J)], axis=1)      # (nx, J)
        out = np.zeros((x.size, dim), dtype=complex)
        xk = np.ones_like(x)
        for k in range(K):
            poly = logs @ self.coeffs[k]                         # (nx, dim)
            out += xk[:, None] * poly
            xk = xk * x
        return out * np.exp(1j * self.sigma * t)[:, None]


def _classify(sigma: complex) -> str:
    if sigma.imag >= STRIP[1]:
        return "above"
    if sigma.imag <= STRIP[0]:
        return "below"
    return "strip"


@dataclass
class FrobeniusSystem:
    """Complete fundamental system at the regular singular point x = 0.

    Solutions are ordered exactly like the spectrum (roots by (Re, Im),
    chains longest first, levels ascending), so the subsequence of strip
    solutions matches the trace-space basis element by element.
    """

    pencil: IndicialPencil
    spectrum: BoundarySpectrum
    solutions: list
    n_terms: int
    resonant: bool

    @property
    def n_solutions(self) -> int:
        return len(self.solutions)

    def indices(self, region: str) -> list:
        return [i for i, s in enumerate(self.solutions) if s.region == region]

    def matrix(self, x: np.ndarray) -> np.ndarray:
        """Values Phi with shape (len(x), dim, n_solutions)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, self.pencil.dim, self.n_solutions), dtype=complex)
        for i, sol in enumerate(self.solutions):
            out[:, :, i] = sol.evaluate(x)
        return out

    def tail_bound(self, x: float) -> float:
        """Relative size of the last retained series term at x (truncation gauge)."""
        worst = 0.0
        lx = abs(math.log(x))
        for sol in self.solutions:
            K = sol.coeffs.shape[0] - 1
            degs = np.array([np.linalg.norm(sol.coeffs[k]) *
                             max(lx, 1.0) ** (sol.coeffs.shape[1] - 1) * x ** k
                             for k in range(K + 1)])
            tot = degs.sum()
            if tot > 0:
                worst = max(worst, degs[-1] / tot)
        return worst


def _resonant_level_solve(Pk, M_A, M_Ceta, prev, deg_prev, raise_cap, dim,
                          sigma_k, rel_tol=1e-9):
    """Coefficients at a resonant series level as one block least-squares solve.

    Unknowns a_0..a_D stacked; equations P(sigma - ik) a_j - i(j+1) M_A a_{j+1}
    = -M_C a^{prev}_j.  The log degree D is raised until the system becomes
    consistent (kernel directions of P absorb the obstruction); min-norm
    fixes the remaining freedom deterministically.
    """
    rhs_cols = [-M_Ceta @ prev[j] for j in range(deg_prev + 1)]
    scale = max(max((np.linalg.norm(r) for r in rhs_cols), default=0.0), 1e-300)
    for D in range(deg_prev, deg_prev + raise_cap + 1):
        nb = D + 1
        A = np.zeros((nb * dim, nb * dim), dtype=complex)
        b = np.zeros(nb * dim, dtype=complex)
        for j in range(nb):
            A[j * dim:(j + 1) * dim, j * dim:(j + 1) * dim] = Pk
            if j + 1 < nb:
                A[j * dim:(j + 1) * dim, (j + 1) * dim:(j + 2) * dim] = \
                    -1j * (j + 1) * M_A
            if j <= deg_prev:
                b[j * dim:(j + 1) * dim] = rhs_cols[j]
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        if np.linalg.norm(A @ sol - b) <= rel_tol * scale:
            return sol.reshape(nb, dim), D
    raise ResonanceError(
        f"resonance at shifted root {sigma_k} cannot be resolved by raising "
        f"the log degree by {raise_cap}; the pencil data is degenerate"
    )


def frobenius_system(sym: ConeSymbol, spectrum: BoundarySpectrum = None, *,
                     n_terms: int = 45, resonance_tol: float = 1e-6) -> FrobeniusSystem:
    """Fundamental system of A(eta) u = 0 by the indicial recursion.

    Level k of the series for root sigma solves P(sigma - ik) a_{k,j} =
    i(j+1) M_A a_{k,j+1} - M_C(eta) a_{k-1,j}; when sigma - ik hits another
    root the level is resonant and handled by _resonant_level_solve.  The
    series has infinite radius (constant tangential part), n_terms only
    controls the truncation tail.
    """
    pencil = sym.pencil
    spectrum = spectrum or boundary_spectrum(pencil)
    M_A, M_Ceta, dim = sym.M_A, sym.M_Ceta, sym.dim
    root_sigmas = [r.sigma for r in spectrum.roots]
    alg_by_sigma = {r.sigma: r.alg_mult for r in spectrum.roots}
    resonant_any = False
    solutions = []
    for root in spectrum.roots:
        # resonance pattern of this root: shifted levels that land on roots
        res_levels = {}
        for k in range(1, n_terms + 1):
            s_k = root.sigma - 1j * k
            for rs in root_sigmas:
                if abs(rs - s_k) < resonance_tol:
                    res_levels[k] = alg_by_sigma[rs]
                    break
        lu_cache = {}
        for cid, chain in enumerate(root.chains):
            for level in range(len(chain)):
                seed = _chain_element(root.sigma, chain, level, cid).coeffs
                jcap = level + sum(res_levels.values()) + 1
                C = np.zeros((n_terms + 1, jcap + 1, dim), dtype=complex)
                C[0, :level + 1] = seed
                deg = level
                for k in range(1, n_terms + 1):
                    if k in res_levels:
                        resonant_any = True
                        Pk = pencil(root.sigma - 1j * k)
                        block, deg = _resonant_level_solve(
                            Pk, M_A, M_Ceta, C[k - 1], deg, res_levels[k],
                            dim, root.sigma - 1j * k)
                        C[k, :deg + 1] = block
                    else:
                        if k not in lu_cache:
                            lu_cache[k] = sla.lu_factor(pencil(root.sigma - 1j * k))
                        for j in range(deg, -1, -1):
                            rhs = -M_Ceta @ C[k - 1, j] + 1j * (j + 1) * M_A @ C[k, j + 1]
                            C[k, j] = sla.lu_solve(lu_cache[k], rhs)
                solutions.append(FrobeniusSolution(
                    sigma=root.sigma, chain_id=cid, level=level,
                    region=_classify(root.sigma), coeffs=C))
    return FrobeniusSystem(pencil=pencil, spectrum=spectrum, solutions=solutions,
                           n_terms=n_terms, resonant=resonant_any)


# ---------------------------------------------------------------------------
# maximal-domain kernel


@dataclass
class KernelBasis:
    """Kernel of A(eta) on the maximal domain, with traces and diagnostics."""

    sym: ConeSymbol
    spectrum: BoundarySpectrum
    trace_space: TraceSpace
    splitting: DecaySplitting
    frobenius: FrobeniusSystem | None
    dim_kernel: int
    combos: np.ndarray            # stable-frame combinations, (n_stable, N')
    grid: ConeGrid | None         # matching window grid
    values: np.ndarray            # kernel columns on the grid, (n, dim, N')
    traces: np.ndarray            # trace coordinates, (dim_trace, N')
    coeff_matrix: np.ndarray      # full fundamental coefficients, (n_sol, N')
    above_singulars: np.ndarray   # singular values deciding the membership rank
    fit_residual: float
    ode_residual: float
    x_max: float

    def sample(self, xs) -> np.ndarray:
        """Kernel column values at arbitrary points (fresh propagation pass)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if self.dim_kernel == 0:
            return np.zeros((xs.size, self.sym.dim, 0), dtype=complex)
        hi = max(xs.max(), self.grid.x_max)
        lo = min(xs.min(), self.grid.x_lo)
        x_from = max(self.x_max, 2.0 * hi)
        want = np.union1d(xs, self.grid.nodes)
        got_xs, vals, _ = magnus_propagate(self.sym, self.splitting.basis,
                                           x_from, lo, save_xs=want)
        # re-anchor the frame: fit this run's window values to the stored ones
        sel = np.isin(got_xs, self.grid.nodes)
        Anew = vals[sel].reshape(-1, self.splitting.n_stable)
        bold = self.values.reshape(-1, self.dim_kernel)
        C, *_ = np.linalg.lstsq(Anew, bold, rcond=None)
        out_sel = np.searchsorted(got_xs, xs)
        return np.einsum("nbs,sk->nbk", vals[out_sel], C)


def _empty_kernel(sym, spectrum, trace, splitting, x_max):
    dimT = trace.dim
    return KernelBasis(sym=sym, spectrum=spectrum, trace_space=trace,
                       splitting=splitting, frobenius=None, dim_kernel=0,
                       combos=np.zeros((splitting.n_stable, 0)), grid=None,
                       values=np.zeros((0, sym.dim, 0)),
                       traces=np.zeros((dimT, 0), dtype=complex),
                       coeff_matrix=np.zeros((0, 0)),
                       above_singulars=np.zeros(0), fit_residual=0.0,
                       ode_residual=0.0, x_max=x_max)


def kernel_max(sym: ConeSymbol, *, spectrum: BoundarySpectrum = None,
               trace: TraceSpace = None, n_terms: int = 45,
               n_window: int = 48, rank_tol: float = 1e-6,
               decay_target: float = 30.0, theta: float = 0.02) -> KernelBasis:
    """Kernel of the cone symbol on its maximal domain.

    Decaying solutions from infinity are matched against the Frobenius
    system on a window near the tip; combinations whose above-strip
    coefficients vanish (SVD nullspace at rank_tol) form the kernel.  Their
    strip coefficients are the trace coordinates.
    """
    spectrum = spectrum or boundary_spectrum(sym.pencil)
    trace = trace or build_trace_space(spectrum)
    splitting = decay_splitting(sym)
    x_max = max(decay_target / splitting.min_rate if splitting.n_stable else 1.0, 2.0)
    if splitting.n_stable == 0:
        return _empty_kernel(sym, spectrum, trace, splitting, x_max)

    frob = frobenius_system(sym, spectrum, n_terms=n_terms)
    # matching window: series and propagation both comfortable
    x_hi = min(0.4, 3.0 / max(np.linalg.norm(sym.N1, 2), 1e-8))
    while frob.tail_bound(x_hi) > 1e-11 and x_hi > 1e-3:
        x_hi *= 0.5
    x_lo = x_hi / 5.0
    grid = ConeGrid(x_lo, x_hi, n_window)
    x_max = max(x_max, 3.0 * x_hi)

    got_xs, V, _ = magnus_propagate(sym, splitting.basis, x_max, x_lo,
                                    save_xs=grid.nodes, theta=theta)
    order = np.searchsorted(got_xs, grid.nodes)
    V = V[order]                                     # align with grid.nodes

    Phi = frob.matrix(grid.nodes)                    # (n, dim, n_sol)
    w_row = np.sqrt(grid.w_dx * sym.pencil.fiber.slot_weight)
    A = (Phi * w_row[:, None, None]).reshape(-1, frob.n_solutions)
    B = (V * w_row[:, None, None]).reshape(-1, splitting.n_stable)
    s_col = np.linalg.norm(A, axis=0)
    s_col[s_col == 0.0] = 1.0
    Y, *_ = np.linalg.lstsq(A / s_col, B, rcond=None)     # scaled contents
    fit_res = float(np.linalg.norm((A / s_col) @ Y - B) /
                    max(np.linalg.norm(B), 1e-300))
    if fit_res > 1e-6:
        raise ConvergenceError(
            f"fundamental-system match failed: relative residual {fit_res:.2e}"
        )
    b_norm = np.linalg.norm(B, axis=0)
    b_norm[b_norm == 0.0] = 1.0
    content = Y / b_norm                              # (n_sol, n_stable)

    above = frob.indices("above")
    strip = frob.indices("strip")
    if above:
        M = content[above]
        _, sv, vh = np.linalg.svd(M)
        rank = int(np.sum(sv > rank_tol * max(1.0, sv[0] if sv.size else 1.0)))
        null_dim = splitting.n_stable - rank
        combos = vh[rank:].conj().T if null_dim else \
            np.zeros((splitting.n_stable, 0), dtype=complex)
    else:
        sv = np.zeros(0)
        combos = np.eye(splitting.n_stable, dtype=complex)
    if combos.shape[1] == 0:
        kb = _empty_kernel(sym, spectrum, trace, splitting, x_max)
        kb.frobenius = frob
        kb.above_singulars = sv
        kb.fit_residual = fit_res
        return kb
    combos = _canonical_columns(combos)

    values = np.einsum("nbs,sk->nbk", V, combos)
    nrm = np.sqrt(np.einsum("n,nbk,nbk->k", grid.w_dx, values, values.conj()).real
                  * sym.pencil.fiber.slot_weight)
    combos = combos / nrm
    values = values / nrm

    coeffs = (Y / s_col[:, None]) @ combos            # true fundamental coefficients
    traces = coeffs[strip] if strip else np.zeros((0, combos.shape[1]), dtype=complex)
    ode_res = sym.x_residual(grid, values)

    return KernelBasis(sym=sym, spectrum=spectrum, trace_space=trace,
                       splitting=splitting, frobenius=frob,
                       dim_kernel=combos.shape[1], combos=combos, grid=grid,
                       values=values, traces=np.asarray(traces),
                       coeff_matrix=coeffs, above_singulars=sv,
                       fit_residual=fit_res, ode_residual=ode_res, x_max=x_max)


def trace_rank(kernel: KernelBasis, iso_tol: float = 1e-7) -> int:
    """Rank of the trace map restricted to the kernel."""
    T = kernel.traces
    if T.size == 0:
        return 0
    sv = np.linalg.svd(T, compute_uv=False)
    return int(np.sum(sv > iso_tol * max(1.0, sv[0])))


# ---------------------------------------------------------------------------
# generic trace extraction


def trace_extract(xs: np.ndarray, values: np.ndarray, trace: TraceSpace, *,
                  n_smooth: int = 8, dedupe_tol: float = 1e-8):
    """Trace coordinates of a sampled conormal function near the tip.

    Fits values against the trace basis augmented with the below-strip chain
    elements and flat columns x^k e_i (k >= 1); collinear augmentation
    columns are dropped greedily so the trace coefficients stay identifiable.
    Returns (coefficients, relative fit residual).
    """
    xs = np.asarray(xs, dtype=float)
    vals = values.reshape(xs.size, -1)
    fdim = trace.pencil.dim
    if vals.shape[1] != fdim:
        raise ShapeError("values do not match the fiber dimension")
    cols, owners = [], []
    for el in trace.elements:
        cols.append(el.evaluate(xs))
        owners.append("trace")
    for root in trace.spectrum.roots:
        if root.in_strip() or root.sigma.imag > STRIP[0]:
            continue
        for cid, chain in enumerate(root.chains):
            for level in range(len(chain)):
                cols.append(_chain_element(root.sigma, chain, level, cid).evaluate(xs))
                owners.append("below")
    for k in range(1, n_smooth + 1):
        for i in range(fdim):
            c = np.zeros((xs.size, fdim), dtype=complex)
            c[:, i] = xs ** k
            cols.append(c)
            owners.append("smooth")
    # greedy de-duplication in priority order (trace first)
    kept, basis = [], []
    for idx, c in enumerate(cols):
        v = c.ravel().astype(complex)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        w = v / nv
        for q in basis:
            w = w - q * np.vdot(q, w)
        rem = np.linalg.norm(w)
        if rem <= (dedupe_tol if owners[idx] != "trace" else 1e-13):
            continue
        basis.append(w / rem)
        kept.append(idx)
    if not any(owners[i] == "trace" for i in kept) and trace.dim:
        raise ExtractionError("trace columns collapsed during de-duplication")
    A = np.stack([cols[i].ravel() for i in kept], axis=1)
    s = np.linalg.norm(A, axis=0)
    coef, *_ = np.linalg.lstsq(A / s, vals.ravel(), rcond=None)
    coef = coef / s
    resid = float(np.linalg.norm(A @ coef - vals.ravel()) /
                  max(np.linalg.norm(vals), 1e-300))
    out = np.zeros(trace.dim, dtype=complex)
    for pos, idx in enumerate(kept):
        if owners[idx] == "trace":
            out[idx] = coef[pos]
    return out, resid


# ---------------------------------------------------------------------------
# homogeneity and equivariance checks


def _default_test_function(dim: int, seed: int = 7):
    """Deterministic smooth decaying vector test function with derivative."""
    rng = np.random.default_rng(seed)
    c0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    c1 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    a = 0.7

    def f(x):
        return (c0 + c1 * x) * math.exp(-a * x)

    def df(x):
        return (c1 - a * (c0 + c1 * x)) * math.exp(-a * x)

    return f, df


def twisted_homogeneity_residual(op: WedgeOp, eta, rho: float, *, y: float = 0.0,
                                 xs=None, test=None) -> float:
    """Defect of A(rho eta) kappa_rho = rho kappa_rho A(eta) on test data.

    Both sides are evaluated in closed form (no grids, no interpolation), so
    the residual isolates the algebraic wiring of the symbol family.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    s1 = cone_symbol(op, eta, y)
    s2 = cone_symbol(op, rho * eta, y)
    xs = np.asarray(xs if xs is not None else np.geomspace(0.05, 5.0, 25))
    f, df = test or _default_test_function(s1.dim)
    sq = math.sqrt(rho)
    kf = lambda x: sq * np.asarray(f(rho * x))
    kdf = lambda x: sq * rho * np.asarray(df(rho * x))
    lhs = s2.apply_closed(xs, kf, kdf)
    av = s1.apply_closed(rho * xs, f, df)
    rhs = rho * sq * av
    scale = max(np.linalg.norm(lhs.ravel()), np.linalg.norm(rhs.ravel()), 1e-300)
    return float(np.linalg.norm((lhs - rhs).ravel()) / scale)


def _weighted_angles(A: np.ndarray, B: np.ndarray, w: np.ndarray) -> float:
    """Largest principal angle between column spans in the weighted metric."""
    if A.shape[1] == 0 and B.shape[1] == 0:
        return 0.0
    if A.shape[1] != B.shape[1]:
        return math.pi / 2.0
    sw = np.sqrt(w)
    ang = sla.subspace_angles(A * sw[:, None], B * sw[:, None])
    return float(ang.max()) if ang.size else 0.0


def kernel_equivariance(op: WedgeOp, eta, rho: float, *, y: float = 0.0,
                        xs=None, **kw) -> dict:
    """Dilation equivariance of the kernel bundle: kappa_rho K(eta) = K(rho eta).

    Compares (i) kernel value subspaces on a common grid (largest principal
    angle, dx-weighted) and (ii) trace subspaces transported with rho^G
    (Gram-weighted angle).  Returns a dict of diagnostics.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    k1 = kernel_max(cone_symbol(op, eta, y), **kw)
    k2 = kernel_max(cone_symbol(op, rho * eta, y), **kw)
    out = {"dim_1": k1.dim_kernel, "dim_2": k2.dim_kernel,
           "kernel_angle": math.pi / 2.0, "trace_angle": math.pi / 2.0}
    if k1.dim_kernel != k2.dim_kernel:
        return out
    if k1.dim_kernel == 0:
        out["kernel_angle"] = 0.0
        out["trace_angle"] = 0.0
        return out
    if xs is None:
        lo = max(k1.grid.x_lo / rho, k1.grid.x_lo, k2.grid.x_lo)
        hi = min(k1.grid.x_max / rho, k1.grid.x_max, k2.grid.x_max)
        if hi <= lo:
            lo, hi = k2.grid.x_lo, k2.grid.x_max
        xs = np.geomspace(lo, hi, 24)
    xs = np.asarray(xs, dtype=float)
    # (kappa_rho u)(x) = sqrt(rho) u(rho x)
    V1 = math.sqrt(rho) * k1.sample(rho * xs)
    V2 = k2.sample(xs)
    w = np.gradient(xs)
    w_full = np.repeat(w, op.fiber.dim)
    out["kernel_angle"] = _weighted_angles(
        V1.reshape(xs.size * op.fiber.dim, -1),
        V2.reshape(xs.size * op.fiber.dim, -1), w_full)
    T1 = k1.trace_space.kappa_matrix(rho) @ k1.traces
    T2 = k2.traces
    if T1.shape[0]:
        H = trace_gram(k1.trace_space)
        L = np.linalg.cholesky(H + 1e-14 * np.eye(H.shape[0]))
        r1 = np.linalg.matrix_rank(T1, tol=1e-9)
        r2 = np.linalg.matrix_rank(T2, tol=1e-9)
        if r1 == r2 == T1.shape[1]:
            out["trace_angle"] = _weighted_angles(L.conj().T @ T1, L.conj().T @ T2,
                                                  np.ones(T1.shape[0]))
        else:
            out["trace_angle"] = 0.0 if r1 == r2 else math.pi / 2.0
    else:
        out["trace_angle"] = 0.0
    return out


# ---------------------------------------------------------------------------
# bundle sweep along the edge covariable


@dataclass
class SweepRecord:
    eta: np.ndarray
    dim_kernel: int
    trace_rank: int
    min_rate: float
    traces: np.ndarray
    ode_residual: float


@dataclass
class SweepResult:
    records: list
    trace_jumps: np.ndarray   # principal angle between consecutive trace spans

    def dims(self) -> np.ndarray:
        return np.array([r.dim_kernel for r in self.records])


def kernel_bundle_sweep(op: WedgeOp, etas, *, y: float = 0.0, **kw) -> SweepResult:
    """Kernel data along a path of edge covectors, with continuity gauges.

    For consecutive samples with equal kernel dimension the largest principal
    angle between the trace subspaces (Gram metric) measures how smoothly the
    kernel bundle turns; dimension jumps are reported as right-angle entries.
    """
    records = []
    trace = None
    L = None
    for eta in etas:
        sym = cone_symbol(op, eta, y)
        if trace is None:
            spectrum = boundary_spectrum(sym.pencil)
            trace = build_trace_space(spectrum)
            if trace.dim:
                H = trace_gram(trace)
                L = np.linalg.cholesky(H + 1e-14 * np.eye(H.shape[0]))
        kb = kernel_max(sym, trace=trace, **kw)
        records.append(SweepRecord(eta=np.atleast_1d(np.asarray(eta, float)),
                                   dim_kernel=kb.dim_kernel,
                                   trace_rank=trace_rank(kb),
                                   min_rate=kb.splitting.min_rate,
                                   traces=kb.traces,
                                   ode_residual=kb.ode_residual))
    jumps = np.zeros(max(len(records) - 1, 0))
    for i in range(len(records) - 1):
        a, b = records[i], records[i + 1]
        if a.dim_kernel != b.dim_kernel:
            jumps[i] = math.pi / 2.0
        elif a.dim_kernel == 0 or a.traces.size == 0:
            jumps[i] = 0.0
        else:
            jumps[i] = _weighted_angles(L.conj().T @ a.traces,
                                        L.conj().T @ b.traces,
                                        np.ones(a.traces.shape[0]))
    return SweepResult(records=records, trace_jumps=jumps)
