"""Wedge operators, indicial pencils, boundary spectrum and trace spaces.

A first-order wedge operator in model-edge form is

    A = x^{-1} ( a_x (x D_x) + sum_j a_{y_j} (x D_{y_j}) + a_th D_theta + a_0 )

with D = -i d/dx and coefficient fields on the fiber (Fourier tables for a
circle fiber, plain matrices for a point fiber).  Freezing the coefficients
at the boundary x = 0 and conjugating by x^{i sigma} turns the radial part
into the linear matrix pencil

    P(sigma) = M_A sigma + M_B ,

whose singular points (the boundary spectrum) are the eigenvalues of
C = -M_A^{-1} M_B.  Jordan chains of C generate log-polynomial kernel
elements of the boundary operator; those with -1/2 < Im sigma < 1/2 span the
trace space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConfigurationError,
    ConvergenceError,
    ShapeError,
    WeightLineError,
    WEllipticityError,
)
from .fiber import (
    CIRCLE,
    POINT,
    ConeGrid,
    FiberModel,
    fiber_derivative_matrix,
    mode_multiplication_matrix,
)

STRIP = (-0.5, 0.5)  # Im sigma band whose roots carry trace data


def _as_table(data, rank: int) -> dict:
    """Normalize coefficient data to {mode: (rank, rank) complex array}."""
    if isinstance(data, dict):
        out = {}
        for m, block in data.items():
            block = np.asarray(block, dtype=complex)
            if block.shape == () and rank == 1:
                block = block.reshape(1, 1)
            if block.shape != (rank, rank):
                raise ShapeError(
                    f"coefficient block for mode {m}: shape {block.shape}, "
                    f"expected {(rank, rank)}"
                )
            out[int(m)] = block
        return out
    block = np.asarray(data, dtype=complex)
    if block.shape == () and rank == 1:
        block = block.reshape(1, 1)
    if block.shape != (rank, rank):
        raise ShapeError(f"coefficient matrix shape {block.shape}, expected {(rank, rank)}")
    return {0: block}


def _adjoint_table(table: dict) -> dict:
    """Fourier table of the pointwise conjugate transpose a(theta)^H."""
    return {-m: block.conj().T for m, block in table.items()}


def _derivative_table(table: dict) -> dict:
    """Fourier table of D_theta a = -i da/dtheta."""
    return {m: m * block for m, block in table.items() if m != 0}


class CoefficientField:
    """Coefficient of a wedge operator: constant or edge-dependent table.

    Wraps either a Fourier table {mode: (rank, rank)} or a callable
    y -> table for coefficients varying along the edge.
    """

    def __init__(self, data, rank: int):
        self.rank = rank
        if callable(data):
            self._fun = data
            self._table = None
        else:
            self._fun = None
            self._table = _as_table(data, rank)

    @property
    def constant(self) -> bool:
        return self._table is not None

    def table(self, y: float = 0.0) -> dict:
        if self._table is not None:
            return self._table
        return _as_table(self._fun(y), self.rank)

    def at_theta(self, theta: float, y: float = 0.0) -> np.ndarray:
        """Pointwise value a(y, theta) as a (rank, rank) matrix."""
        acc = np.zeros((self.rank, self.rank), dtype=complex)
        for m, block in self.table(y).items():
            acc += block * np.exp(1j * m * theta)
        return acc

    def adjoint(self) -> "CoefficientField":
        if self._table is not None:
            return CoefficientField(_adjoint_table(self._table), self.rank)
        fun = self._fun
        rank = self.rank
        return CoefficientField(lambda y: _adjoint_table(_as_table(fun(y), rank)), rank)


@dataclass
class WedgeOp:
    """First-order wedge operator in model-edge form (boundary data).

    a_x multiplies x D_x, a_edge[j] multiplies x D_{y_j}, a_fiber multiplies
    D_theta (circle fibers only), a_zero is the zeroth order term.  All
    coefficients are frozen at x = 0 (only boundary data enters the model
    objects); they may vary along the edge through callable fields.
    """

    fiber: FiberModel
    a_x: CoefficientField
    a_edge: tuple
    a_zero: CoefficientField
    a_fiber: CoefficientField | None = None
    name: str = ""

    def __post_init__(self):
        rank = self.fiber.rank
        if not isinstance(self.a_x, CoefficientField):
            self.a_x = CoefficientField(self.a_x, rank)
        self.a_edge = tuple(
            c if isinstance(c, CoefficientField) else CoefficientField(c, rank)
            for c in self.a_edge)
        if not isinstance(self.a_zero, CoefficientField):
            self.a_zero = CoefficientField(self.a_zero, rank)
        if self.a_fiber is not None and not isinstance(self.a_fiber, CoefficientField):
            self.a_fiber = CoefficientField(self.a_fiber, rank)
        if self.fiber.kind == POINT and self.a_fiber is not None:
            raise ConfigurationError("point fibers carry no tangential coefficient")
        if self.fiber.kind == CIRCLE and self.a_fiber is None:
            raise ConfigurationError("circle fibers need a tangential coefficient")
        if len(self.a_edge) < 1:
            raise ConfigurationError("need at least one edge direction")

    @property
    def edge_dim(self) -> int:
        return len(self.a_edge)

    @property
    def rank(self) -> int:
        return self.fiber.rank

    def matrices(self, y: float = 0.0):
        """Discretized (M_A, M_B, [M_C per edge direction]) at edge point y."""
        fib = self.fiber
        M_A = mode_multiplication_matrix(fib, self.a_x.table(y))
        M_B = mode_multiplication_matrix(fib, self.a_zero.table(y))
        if self.a_fiber is not None:
            M_B = M_B + mode_multiplication_matrix(fib, self.a_fiber.table(y)) \
                @ fiber_derivative_matrix(fib)
        M_C = [mode_multiplication_matrix(fib, c.table(y)) for c in self.a_edge]
        return M_A, M_B, M_C

    def eta_matrix(self, eta, y: float = 0.0) -> np.ndarray:
        """M_C(eta) = sum_j eta_j M_{C,j}."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        if eta.size != self.edge_dim:
            raise ShapeError(f"eta has {eta.size} components, edge dim is {self.edge_dim}")
        _, _, M_C = self.matrices(y)
        return sum(e * M for e, M in zip(eta, M_C))

    def symbol(self, xi: float, eta, zeta: float = 0.0,
               y: float = 0.0, theta: float = 0.0) -> np.ndarray:
        """Principal wedge symbol at covector (xi, eta, zeta), fiber angle theta."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        s = self.a_x.at_theta(theta, y) * xi
        for j, c in enumerate(self.a_edge):
            s = s + c.at_theta(theta, y) * eta[j]
        if self.a_fiber is not None:
            s = s + self.a_fiber.at_theta(theta, y) * zeta
        return s

    def adjoint(self) -> "WedgeOp":
        """Formal adjoint with respect to the x^{-1/2}L_b^2 pairing.

        Coefficient level: every field goes to its pointwise conjugate
        transpose; moving D_theta past a_fiber^H adds the commutator term
        (D_theta a_fiber^H) to the zeroth order part.
        """
        a_zero_adj = self.a_zero.adjoint()
        a_fiber_adj = None
        if self.a_fiber is not None:
            a_fiber_adj = self.a_fiber.adjoint()
            if self.a_fiber.constant and self.a_zero.constant:
                tab = dict(a_zero_adj.table())
                for m, block in _derivative_table(a_fiber_adj.table()).items():
                    tab[m] = tab.get(m, 0.0) + block
                a_zero_adj = CoefficientField(tab, self.rank)
            else:
                base_zero, base_fib, rank = self.a_zero, self.a_fiber, self.rank

                def fun(y, base_zero=base_zero, base_fib=base_fib, rank=rank):
                    tab = dict(_adjoint_table(base_zero.table(y)))
                    dt = _derivative_table(_adjoint_table(base_fib.table(y)))
                    for m, block in dt.items():
                        tab[m] = tab.get(m, 0.0) + block
                    return tab

                a_zero_adj = CoefficientField(fun, rank)
        return WedgeOp(
            fiber=self.fiber,
            a_x=self.a_x.adjoint(),
            a_edge=tuple(c.adjoint() for c in self.a_edge),
            a_zero=a_zero_adj,
            a_fiber=a_fiber_adj,
            name=self.name + "*" if self.name else "",
        )


@dataclass
class IndicialPencil:
    """Linear pencil P(sigma) = M_A sigma + M_B of the boundary operator."""

    M_A: np.ndarray
    M_B: np.ndarray
    fiber: FiberModel
    y: float = 0.0

    def __post_init__(self):
        self.M_A = np.asarray(self.M_A, dtype=complex)
        self.M_B = np.asarray(self.M_B, dtype=complex)
        n = self.M_A.shape[0]
        if self.M_A.shape != (n, n) or self.M_B.shape != (n, n):
            raise ShapeError("pencil matrices must be square and matched")

    @property
    def dim(self) -> int:
        return self.M_A.shape[0]

    def __call__(self, sigma: complex) -> np.ndarray:
        return self.M_A * sigma + self.M_B

    def companion(self) -> np.ndarray:
        """C = -M_A^{-1} M_B; its eigenvalues are the boundary spectrum."""
        return -np.linalg.solve(self.M_A, self.M_B)

    def adjoint(self) -> "IndicialPencil":
        """Pencil of the formal adjoint: P*(sigma) = P(conj sigma)^*.

        The fiber inner-product weight is a positive multiple of the
        identity in Fourier coordinates, so the adjoint is the plain
        conjugate transpose.
        """
        return IndicialPencil(self.M_A.conj().T, self.M_B.conj().T, self.fiber, self.y)


def assemble_pencil(op: WedgeOp, y: float = 0.0,
                    cond_limit: float = 1e10) -> IndicialPencil:
    """Build the indicial pencil at edge point y.

    Requires the conormal coefficient to be invertible (w-ellipticity in the
    direction dx); otherwise the first-order reduction to an eigenproblem is
    impossible and WEllipticityError is raised.
    """
    M_A, M_B, _ = op.matrices(y)
    sv = np.linalg.svd(M_A, compute_uv=False)
    if sv[-1] <= 0.0 or sv[0] / sv[-1] > cond_limit:
        raise WEllipticityError(
            "leading coefficient M_A is numerically singular "
            f"(condition {np.inf if sv[-1] == 0 else sv[0] / sv[-1]:.2e}); "
            "the operator is not w-elliptic in the conormal direction"
        )
    return IndicialPencil(M_A, M_B, op.fiber, y)


# ---------------------------------------------------------------------------
# boundary spectrum


@dataclass
class Root:
    """One point of the boundary spectrum with its Jordan data.

    chains: list of Jordan chains; chain c = [v_0, ..., v_{L}] satisfies
    (C - sigma) v_0 = 0 and (C - sigma) v_j = v_{j-1}.
    """

    sigma: complex
    alg_mult: int
    geo_mult: int
    chains: list

    @property
    def max_chain(self) -> int:
        return max(len(c) for c in self.chains)

    def in_strip(self, strip=STRIP) -> bool:
        return strip[0] < self.sigma.imag < strip[1]


@dataclass
class BoundarySpectrum:
    """Clustered boundary spectrum of an indicial pencil."""

    pencil: IndicialPencil
    roots: list
    weight_line_margin: float

    @property
    def strip_roots(self) -> list:
        return [r for r in self.roots if r.in_strip()]

    def trace_dimension(self) -> int:
        return sum(r.alg_mult for r in self.strip_roots)


def _nullspace(M: np.ndarray, rank_tol: float, scale: float):
    u, s, vh = np.linalg.svd(M)
    thr = rank_tol * max(scale, 1e-300)
    null_dim = int(np.sum(s <= thr))
    if null_dim == 0:
        return np.zeros((M.shape[1], 0), dtype=complex)
    return vh[M.shape[1] - null_dim:].conj().T


def _canonical_columns(B: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(B), aligned with coordinates.

    Column-pivoted QR of the orthogonal projector picks basis vectors that
    hug the standard axes whenever the subspace allows it (a full nullspace
    yields exactly the standard basis), then each vector's largest component
    is rotated to the positive real axis.  Removes eigen-solver arbitrariness
    so repeated runs and neighboring edge samples get comparable frames.
    """
    if B.shape[1] == 0:
        return B
    Q0, _ = np.linalg.qr(B)
    proj = Q0 @ Q0.conj().T
    q, r, _ = sla.qr(proj, pivoting=True, mode="economic")
    Q = q[:, : B.shape[1]]
    for k in range(Q.shape[1]):
        i = int(np.argmax(np.abs(Q[:, k])))
        phase = Q[i, k] / abs(Q[i, k])
        Q[:, k] /= phase
    return Q


def _cluster(values: np.ndarray, tol: float):
    """Group eigenvalues whose mutual distance is below tol (union-find)."""
    n = values.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def boundary_spectrum(pencil: IndicialPencil, *,
                      cluster_tol: float = 1e-6,
                      rank_tol: float = 1e-7,
                      weight_line_tol: float = 1e-8,
                      on_weight_line: str = "raise") -> BoundarySpectrum:
    """Eigenvalues of C = -M_A^{-1}M_B with Jordan chains, clustered.

    Checks the weight-line clearance: no root may sit on Im sigma = +-1/2
    within weight_line_tol.  on_weight_line is "raise" (WeightLineError) or
    "flag" (record the margin and continue).
    """
    C = pencil.companion()
    n = C.shape[0]
    eigvals = np.linalg.eigvals(C)
    scale = max(np.max(np.abs(eigvals)), np.linalg.norm(C, 2), 1.0)

    roots = []
    for group in _cluster(eigvals, cluster_tol):
        sigma = complex(np.mean(eigvals[group]))
        alg = len(group)
        N = C - sigma * np.eye(n)
        # nullspace filtration dims and bases
        kers = []
        Np = np.eye(n, dtype=complex)
        dims = [0]
        p = 0
        while dims[-1] < alg:
            p += 1
            if p > alg:
                raise ConvergenceError(
                    f"Jordan filtration at sigma = {sigma} did not reach the "
                    f"algebraic multiplicity {alg}; root clustering and rank "
                    "tolerances are inconsistent"
                )
            Np = Np @ N
            K = _nullspace(Np, rank_tol, scale ** p)
            kers.append(K)
            dims.append(K.shape[1])
        pmax = p
        dims.append(dims[-1])  # d_{pmax+1} = d_pmax

        chains = []
        for grade in range(pmax, 0, -1):
            want = (dims[grade] - dims[grade - 1]) - (dims[grade + 1] - dims[grade])
            if want <= 0:
                continue
            K = kers[grade - 1]
            # project out lower filtration and images of higher chains
            obstacles = []
            if grade >= 2:
                obstacles.append(kers[grade - 2])
            if grade < pmax:
                obstacles.append(N @ kers[grade])
            cand = K.copy()
            if obstacles:
                O = np.hstack(obstacles)
                Qo, _ = np.linalg.qr(O)
                cand = cand - Qo @ (Qo.conj().T @ cand)
            q, r, piv = sla.qr(cand, pivoting=True, mode="economic")
            gens = _canonical_columns(q[:, :want]) if grade == 1 else q[:, :want]
            for k in range(want):
                g = gens[:, k]
                chain = [g]
                for _ in range(grade - 1):
                    chain.append(N @ chain[-1])
                chain = chain[::-1]  # chain[0] is the eigenvector
                nrm = np.linalg.norm(chain[0])
                if nrm == 0.0:
                    raise ConvergenceError(f"degenerate chain at sigma = {sigma}")
                chain = [v / nrm for v in chain]
                i = int(np.argmax(np.abs(chain[0])))
                phase = chain[0][i] / abs(chain[0][i])
                chain = [v / phase for v in chain]
                chains.append(chain)
        geo = len(chains)
        # order: longest chain first, deterministic
        chains.sort(key=lambda c: -len(c))
        roots.append(Root(sigma=sigma, alg_mult=alg, geo_mult=geo, chains=chains))

    roots.sort(key=lambda r: (round(r.sigma.real, 9), round(r.sigma.imag, 9)))

    margin = min(
        (min(abs(r.sigma.imag - 0.5), abs(r.sigma.imag + 0.5)) for r in roots),
        default=np.inf,
    )
    if margin <= weight_line_tol and on_weight_line == "raise":
        bad = min(roots, key=lambda r: min(abs(r.sigma.imag - 0.5), abs(r.sigma.imag + 0.5)))
        raise WeightLineError(bad.sigma, margin, weight_line_tol)
    return BoundarySpectrum(pencil=pencil, roots=roots, weight_line_margin=float(margin))


# ---------------------------------------------------------------------------
# trace space


@dataclass
class TraceElement:
    """Log-polynomial kernel element u = sum_j coeffs[j] x^{i sigma} log^j x."""

    sigma: complex
    level: int           # chain level l (top log power)
    chain_id: int        # which chain of the root
    coeffs: np.ndarray   # (level + 1, fiber dim)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = np.log(x)
        powers = np.exp(1j * self.sigma * t)
        vals = np.zeros((x.size, self.coeffs.shape[1]), dtype=complex)
        for j in range(self.level + 1):
            vals += np.outer(powers * t ** j, self.coeffs[j])
        return vals

    def xdx(self) -> "TraceElement":
        """x d/dx applied coefficient-wise; stays in the same trace space."""
        c = self.coeffs
        out = 1j * self.sigma * c.copy()
        out[:-1] += (np.arange(1, self.level + 1)[:, None]) * c[1:]
        return TraceElement(self.sigma, self.level, self.chain_id, out)


@dataclass
class TraceSpace:
    """Basis of log-polynomial kernel elements for the strip roots.

    Elements are grouped by root (in spectrum order), then chain, then
    level; g_matrix is the matrix of x d/dx + 1/2 in this basis.
    """

    pencil: IndicialPencil
    spectrum: BoundarySpectrum
    elements: list
    g_matrix: np.ndarray
    residual: float

    @property
    def dim(self) -> int:
        return len(self.elements)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Basis values, shape (len(x), fiber dim, dim)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((x.size, self.pencil.dim, self.dim), dtype=complex)
        for k, el in enumerate(self.elements):
            out[:, :, k] = el.evaluate(x)
        return out

    def kappa_matrix(self, rho: float) -> np.ndarray:
        """Action of the dilation group on trace coordinates: rho^{g_matrix}."""
        return sla.expm(np.log(rho) * self.g_matrix)


def _chain_element(sigma: complex, chain: list, level: int, chain_id: int) -> TraceElement:
    """Log-polynomial solution seeded by chain[:level+1].

    u = x^{i sigma} sum_{j=0}^{level} (i^j / j!) v_{level-j} log^j x solves
    (M_A xD_x + M_B) u = 0 when (C - sigma) v_j = v_{j-1}; the factorial
    constants are fixed by that recursion and revalidated by the residual
    oracle below.
    """
    dim = chain[0].size
    coeffs = np.zeros((level + 1, dim), dtype=complex)
    fac = 1.0
    for j in range(level + 1):
        if j > 0:
            fac *= j
        coeffs[j] = (1j ** j / fac) * chain[level - j]
    return TraceElement(sigma, level, chain_id, coeffs)


def _grid_residual(pencil: IndicialPencil, elements: list) -> float:
    """Largest relative residual of (M_A xD_x + M_B) e on a fine radial grid."""
    grid = ConeGrid(1e-2, 1.0, 96)
    worst = 0.0
    for el in elements:
        vals = el.evaluate(grid.nodes)
        xdx = -1j * (grid.diff_log @ vals)
        res = xdx @ pencil.M_A.T + vals @ pencil.M_B.T
        scale = np.linalg.norm(vals) * max(1.0, abs(el.sigma)) * np.linalg.norm(pencil.M_A, 2) \
            + np.linalg.norm(vals) * np.linalg.norm(pencil.M_B, 2)
        worst = max(worst, np.linalg.norm(res) / max(scale, 1e-300))
    return worst


def build_trace_space(spectrum: BoundarySpectrum, *,
                      oracle_tol: float = 1e-8) -> TraceSpace:
    """Assemble the trace space from the strip part of the spectrum.

    Every basis element is checked to annihilate the discretized boundary
    operator (spectral differentiation on a fine grid) to oracle_tol; a
    violation means the chain data is inconsistent and raises.
    """
    pencil = spectrum.pencil
    elements = []
    for root in spectrum.strip_roots:
        for cid, chain in enumerate(root.chains):
            for level in range(len(chain)):
                elements.append(_chain_element(root.sigma, chain, level, cid))

    residual = _grid_residual(pencil, elements) if elements else 0.0
    if residual > oracle_tol:
        raise ConvergenceError(
            f"trace basis residual {residual:.3e} exceeds {oracle_tol:.1e}; "
            "Jordan chain data does not solve the boundary operator"
        )

    g = _g_matrix(elements, pencil.dim)
    return TraceSpace(pencil=pencil, spectrum=spectrum, elements=elements,
                      g_matrix=g, residual=residual)


def _element_key(el: TraceElement):
    return (round(el.sigma.real, 8), round(el.sigma.imag, 8))


def _g_matrix(elements: list, fdim: int) -> np.ndarray:
    """Matrix of g = x d/dx + 1/2 in the trace basis.

    The basis splits by root; within a root the action is computed on raw
    log-power coefficient tables and re-expressed in the basis by least
    squares (exact: the span is invariant).
    """
    dim = len(elements)
    G = np.zeros((dim, dim), dtype=complex)
    by_root = {}
    for k, el in enumerate(elements):
        by_root.setdefault(_element_key(el), []).append(k)
    for idxs in by_root.values():
        lmax = max(elements[k].level for k in idxs)

        def vec(el: TraceElement) -> np.ndarray:
            v = np.zeros(((lmax + 1), fdim), dtype=complex)
            v[: el.level + 1] = el.coeffs
            return v.ravel()

        basis = np.column_stack([vec(elements[k]) for k in idxs])
        images = np.column_stack([vec(elements[k].xdx()) for k in idxs])
        block, res, *_ = np.linalg.lstsq(basis, images, rcond=None)
        G[np.ix_(idxs, idxs)] = block
    return G + 0.5 * np.eye(dim)
