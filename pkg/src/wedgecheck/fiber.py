"""Model fiber geometry and the radial (cone) discretization.

The model edge fibration is Z^wedge x Y -> Y with Z either a single point or a
circle.  Functions on the open cone Z^wedge = (0, inf) x Z are represented by
their values at radial collocation nodes and, along a circle fiber, by Fourier
coefficients (modes -n..n).  All inner products are linear in the first slot
and conjugate linear in the second.

Radial discretization: Chebyshev collocation in t = log x on [log x_lo,
log x_max].  This makes the dilation group act by a shift in t (resampling is
spectrally accurate for functions smooth in t), x d/dx is the spectral
derivative in t, and Clenshaw-Curtis weights give exponentially convergent
quadrature for analytic integrands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError

POINT = "point"
CIRCLE = "circle"


def _chebyshev_block(n_nodes: int):
    """Nodes, Clenshaw-Curtis weights, differentiation matrix on [-1, 1].

    Returns arrays in *ascending* node order.  Standard Chebyshev-Gauss-
    Lobatto construction; weights integrate polynomials of degree n_nodes-1
    exactly and analytic functions to spectral accuracy.
    """
    if n_nodes < 2:
        raise ConfigurationError("radial grid needs at least 2 nodes")
    N = n_nodes - 1
    j = np.arange(n_nodes)
    theta = np.pi * j / N
    x = np.cos(theta)  # descending

    # differentiation matrix (descending order)
    c = np.ones(n_nodes)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n_nodes))
    D -= np.diag(D.sum(axis=1))

    # Clenshaw-Curtis weights
    w = np.zeros(n_nodes)
    ii = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4 * k * k - 1)
        v -= np.cos(N * theta[ii]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4 * k * k - 1)
    w[ii] = 2.0 * v / N

    # barycentric weights for CGL nodes
    lam = np.ones(n_nodes)
    lam[0] = lam[-1] = 0.5
    lam *= (-1.0) ** j

    # flip to ascending
    return x[::-1].copy(), w[::-1].copy(), D[::-1, ::-1].copy(), lam[::-1].copy()


@dataclass
class FiberModel:
    """Discretized model fiber Z (point or circle) with a coefficient bundle.

    Attributes
    ----------
    kind : str
        ``"point"`` or ``"circle"``.
    rank : int
        Rank of the coefficient bundle over the fiber.
    modes : int
        Fourier truncation n (modes -n..n).  0 for a point fiber.
    mode_index : ndarray
        Mode labels per Fourier slot, shape (n_slots,).
    theta : ndarray
        Fiber quadrature nodes (equispaced angles; a single 0.0 for a point).
    theta_weights : ndarray
        Positive quadrature weights realizing the fiber measure
        (sum = 2*pi for a circle, 1 for a point).
    slot_weight : float
        Inner-product weight per Fourier slot (Parseval factor).
    """

    kind: str
    rank: int
    modes: int
    mode_index: np.ndarray = field(repr=False, default=None)
    theta: np.ndarray = field(repr=False, default=None)
    theta_weights: np.ndarray = field(repr=False, default=None)
    slot_weight: float = 1.0

    @property
    def n_slots(self) -> int:
        return self.mode_index.size

    @property
    def dim(self) -> int:
        """Total discretized fiber dimension (slots times bundle rank)."""
        return self.n_slots * self.rank

    def slot(self, mode: int) -> int:
        """Storage slot of a Fourier mode."""
        return int(mode) + self.modes

    def eval_at_theta(self, coef: np.ndarray) -> np.ndarray:
        """Evaluate a Fourier coefficient vector at the fiber angles.

        coef has shape (..., dim); returns shape (..., n_theta, rank).
        """
        c = np.asarray(coef, dtype=complex)
        blocks = c.reshape(c.shape[:-1] + (self.n_slots, self.rank))
        phases = np.exp(1j * np.outer(self.theta, self.mode_index))
        return np.einsum("tk,...kr->...tr", phases, blocks)

    def weight_vector(self) -> np.ndarray:
        """Inner-product weights per coefficient slot, shape (dim,)."""
        return np.full(self.dim, self.slot_weight)


def build_fiber(kind: str, rank: int, modes: int = 0) -> FiberModel:
    if rank < 1:
        raise ConfigurationError("bundle rank must be >= 1")
    if kind == POINT:
        if modes != 0:
            raise ConfigurationError("a point fiber has no Fourier modes")
        return FiberModel(
            kind=POINT,
            rank=rank,
            modes=0,
            mode_index=np.array([0]),
            theta=np.array([0.0]),
            theta_weights=np.array([1.0]),
            slot_weight=1.0,
        )
    if kind == CIRCLE:
        if modes < 1:
            raise ConfigurationError("a circle fiber needs modes >= 1")
        n_theta = 2 * modes + 1
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        return FiberModel(
            kind=CIRCLE,
            rank=rank,
            modes=modes,
            mode_index=np.arange(-modes, modes + 1),
            theta=theta,
            theta_weights=np.full(n_theta, 2.0 * np.pi / n_theta),
            slot_weight=2.0 * np.pi,
        )
    raise ConfigurationError(f"unknown fiber kind {kind!r}")


def fiber_inner(fiber: FiberModel, u: np.ndarray, v: np.ndarray) -> complex:
    """L^2(Z) pairing of coefficient vectors; conjugate linear in v."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape[-1] != fiber.dim or v.shape[-1] != fiber.dim:
        raise ShapeError("fiber vector length does not match fiber.dim")
    return complex(fiber.slot_weight * np.sum(u * np.conj(v), axis=-1))


def mode_multiplication_matrix(fiber: FiberModel, table: dict) -> np.ndarray:
    """Matrix of multiplication by sum_m T[m] e^{i m theta} on coefficients.

    ``table`` maps Fourier mode -> (rank, rank) matrix.  The result couples
    slot k' into slot k through T[k - k'].  Modes outside the truncation are
    dropped (aliasing-free projection of the product).
    """
    r = fiber.rank
    M = np.zeros((fiber.dim, fiber.dim), dtype=complex)
    for m, block in table.items():
        block = np.asarray(block, dtype=complex)
        if block.shape != (r, r):
            raise ShapeError(
                f"coefficient block for mode {m} has shape {block.shape}, "
                f"expected {(r, r)}"
            )
        if fiber.kind == POINT:
            if m != 0:
                raise ConfigurationError("point fiber tables may only use mode 0")
            M += block
            continue
        for kp in fiber.mode_index:
            k = kp + m
            if -fiber.modes <= k <= fiber.modes:
                i, j = fiber.slot(k), fiber.slot(kp)
                M[i * r:(i + 1) * r, j * r:(j + 1) * r] += block
    return M


def fiber_derivative_matrix(fiber: FiberModel) -> np.ndarray:
    """Matrix of D_theta = -i d/dtheta on coefficients (diag of mode index)."""
    return np.kron(np.diag(fiber.mode_index.astype(float)), np.eye(fiber.rank)).astype(complex)


@dataclass
class ConeGrid:
    """Radial collocation grid on [x_lo, x_max], Chebyshev in t = log x.

    ``w_dx`` are quadrature weights for integrals against dx (the gamma = 1/2
    cone measure on radial functions), ``diff_log`` is the matrix of x d/dx.
    ``scheme`` tags the connection-problem method the grid is meant for.
    """

    x_lo: float
    x_max: float
    n: int
    scheme: str = "collocation"
    nodes: np.ndarray = field(repr=False, default=None)
    log_nodes: np.ndarray = field(repr=False, default=None)
    w_dx: np.ndarray = field(repr=False, default=None)
    diff_log: np.ndarray = field(repr=False, default=None)
    _bary: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not (0.0 < self.x_lo < self.x_max):
            raise ConfigurationError("need 0 < x_lo < x_max")
        a, b = np.log(self.x_lo), np.log(self.x_max)
        y, w, D, lam = _chebyshev_block(self.n)
        self.log_nodes = 0.5 * (a + b) + 0.5 * (b - a) * y
        self.nodes = np.exp(self.log_nodes)
        self.w_dx = 0.5 * (b - a) * w * self.nodes
        self.diff_log = D * (2.0 / (b - a))
        self._bary = lam

    def interpolate(self, values: np.ndarray, x_new: np.ndarray,
                    below: str = "clamp", above: str = "zero") -> np.ndarray:
        """Barycentric evaluation of grid data at new radial points.

        values: (n, ...) nodal data; x_new: (m,).  Points above x_max map to
        `above` behavior ("zero" assumes decay beyond the grid), points below
        x_lo to `below` ("clamp" holds the innermost value, for data smooth
        at the origin; "zero" for data vanishing there).
        """
        values = np.asarray(values, dtype=complex)
        if values.shape[0] != self.n:
            raise ShapeError("nodal data does not match the grid")
        x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
        t_new = np.empty_like(x_new)
        inside = (x_new >= self.x_lo) & (x_new <= self.x_max)
        t_new[inside] = np.log(x_new[inside])
        out = np.zeros((x_new.size,) + values.shape[1:], dtype=complex)

        t = self.log_nodes
        tq = t_new[inside]
        diff = tq[:, None] - t[None, :]
        exact_q, exact_j = np.nonzero(np.abs(diff) < 1e-14 * max(1.0, abs(t[-1] - t[0])))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = self._bary[None, :] / diff
        if exact_q.size:
            ratio[exact_q, :] = 0.0
            ratio[exact_q, exact_j] = 1.0
        denom = ratio.sum(axis=1)
        out[inside] = np.tensordot(ratio, values, axes=(1, 0)) / denom.reshape(
            (-1,) + (1,) * (values.ndim - 1)
        )

        lo = x_new < self.x_lo
        if np.any(lo):
            if below == "clamp":
                out[lo] = values[0]
            elif below == "zero":
                out[lo] = 0.0
            else:
                raise ConfigurationError(f"unknown below-range policy {below!r}")
        hi = x_new > self.x_max
        if np.any(hi):
            if above == "zero":
                out[hi] = 0.0
            elif above == "clamp":
                out[hi] = values[-1]
            else:
                raise ConfigurationError(f"unknown above-range policy {above!r}")
        return out

    def resample_matrix(self, x_new: np.ndarray) -> np.ndarray:
        """Matrix form of `interpolate` (rows = new points)."""
        return self.interpolate(np.eye(self.n), np.asarray(x_new, dtype=float))

    def refine(self, factor: int = 2) -> "ConeGrid":
        return ConeGrid(self.x_lo, self.x_max, factor * self.n, scheme=self.scheme)


@dataclass
class ConeFunction:
    """Function on the model cone: radial nodes x fiber coefficient slots."""

    grid: ConeGrid
    fiber: FiberModel
    values: np.ndarray  # (grid.n, fiber.dim) complex

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n, self.fiber.dim):
            raise ShapeError(
                f"cone data has shape {self.values.shape}, expected "
                f"{(self.grid.n, self.fiber.dim)}"
            )

    def copy(self) -> "ConeFunction":
        return ConeFunction(self.grid, self.fiber, self.values.copy())


def cone_function(grid: ConeGrid, fiber: FiberModel, f) -> ConeFunction:
    """Sample a callable f(x) -> (fiber.dim,) on the grid."""
    vals = np.array([np.broadcast_to(np.asarray(f(x), dtype=complex), (fiber.dim,))
                     for x in grid.nodes])
    return ConeFunction(grid, fiber, vals)


def cone_inner(u: ConeFunction, v: ConeFunction) -> complex:
    """x^{-1/2}L_b^2 pairing = integral over (0,inf) of (u,v)_Z dx."""
    if u.grid is not v.grid and not np.array_equal(u.grid.nodes, v.grid.nodes):
        raise ShapeError("cone functions live on different grids")
    pointwise = u.fiber.slot_weight * np.sum(u.values * np.conj(v.values), axis=1)
    return complex(np.dot(u.grid.w_dx, pointwise))


def cone_norm(u: ConeFunction) -> float:
    return float(np.sqrt(max(cone_inner(u, u).real, 0.0)))


def kappa_apply(u: ConeFunction, rho: float, below: str = "clamp") -> ConeFunction:
    """Normalized dilation (kappa_rho u)(x, z) = rho^{1/2} u(rho x, z).

    Unitary on x^{-1/2}L_b^2.  Resampling is spectral interpolation in log x;
    beyond the outer grid end the function is taken to vanish (grids are
    sized so that admissible data has decayed below round-off there).
    """
    if rho <= 0.0:
        raise ConfigurationError("dilation parameter must be positive")
    vals = u.grid.interpolate(u.values, rho * u.grid.nodes, below=below)
    return ConeFunction(u.grid, u.fiber, np.sqrt(rho) * vals)


def dilation_matrix(grid: ConeGrid, rho: float, dim: int = 1) -> np.ndarray:
    """kappa_rho as a matrix on nodal data (n*dim, n*dim)."""
    S = grid.resample_matrix(rho * grid.nodes)
    K = np.sqrt(rho) * S
    if dim == 1:
        return K
    return np.kron(K, np.eye(dim))
