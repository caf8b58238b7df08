"""Schroedinger representation, Weyl transform and twisted convolution.

``pi_lambda(x, u) phi(xi) = exp(i lambda (x.xi + x.u/2)) phi(xi + u)``.

Matrix elements of ``pi_lambda(x, u)`` in the Hermite basis are entire in
``(x, u)``; :func:`weyl_operators` evaluates them exactly (no truncation of the
operator itself, only of the index range) through the ladder recurrence of
``exp(beta a^+ - gamma a)``, so complex arguments give the holomorphic
extension directly. :func:`weyl_operator` with ``method="expm"`` instead
exponentiates the truncated generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import expm

from .hermite import (
    HermiteBasis,
    QuadratureGrid,
    annihilation_matrix,
    creation_matrix,
)

__all__ = [
    "GridFunction",
    "plancherel_factor",
    "inversion_factor",
    "rep_generator",
    "weyl_operator",
    "weyl_operators",
    "weyl_traces",
    "weyl_transform",
    "weyl_inverse",
    "twisted_convolution",
    "twisted_translation",
    "symplectic_fourier",
    "euclidean_fourier",
    "weyl_correspondence_monomial",
]

Evaluator = Callable[[np.ndarray], np.ndarray]

# entries per batch of weyl matrices; keeps peak memory around 100 MB
_BATCH_ENTRIES = 4_000_000


def plancherel_factor(n: int, lam: float) -> float:
    """(2 pi / |lambda|)^n, the ratio ||pi(g)||_HS^2 / ||g||_2^2."""
    return (2.0 * math.pi / abs(lam)) ** n


def inversion_factor(n: int, lam: float) -> float:
    """(2 pi)^{-n} |lambda|^n in g(z) = c tr(pi(z)^* pi(g))."""
    return 1.0 / plancherel_factor(n, lam)


def _split(points: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    points = np.asarray(points)
    points = points.reshape(-1, 2 * n)
    return points[:, :n], points[:, n:]


def _weyl_1d(K: int, lam: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Batch of (K+1)x(K+1) matrices of the one-axis pi_lambda(x, u)."""
    if lam < 0:
        x = -x
    s = math.sqrt(abs(lam) / 2.0)
    beta = s * (1j * x - u)
    gamma = -s * (1j * x + u)
    N = len(x)
    D = np.empty((N, K + 1, K + 1), dtype=complex)
    row = np.exp(-0.5 * beta * gamma)
    D[:, 0, 0] = row
    for k in range(1, K + 1):
        D[:, 0, k] = D[:, 0, k - 1] * (-gamma) / math.sqrt(k)
    sq = np.sqrt(np.arange(K + 1))
    b = beta[:, None]
    for m in range(K):
        nxt = b * D[:, m, :]
        nxt[:, 1:] += sq[1:] * D[:, m, :-1]
        D[:, m + 1, :] = nxt / math.sqrt(m + 1)
    return D


def weyl_operators(basis: HermiteBasis, points: np.ndarray) -> np.ndarray:
    """Matrices of pi_lambda(x, u) at each row of ``points`` = (x, u) in C^{2n}.

    Returns shape (N, d, d).
    """
    x, u = _split(np.asarray(points, dtype=complex), basis.n)
    idx = basis.index_array
    out = None
    for j in range(basis.n):
        Dj = _weyl_1d(basis.K, basis.lam, x[:, j], u[:, j])
        Dj = Dj[:, idx[:, j][:, None], idx[:, j][None, :]]
        out = Dj if out is None else out * Dj
    return out


def _batches(N: int, per_item: int):
    step = max(1, _BATCH_ENTRIES // max(per_item, 1))
    for start in range(0, N, step):
        yield slice(start, min(N, start + step))


def weyl_traces(basis: HermiteBasis, points: np.ndarray, X: np.ndarray) -> np.ndarray:
    """tr(pi_lambda(p) X) for every row p of ``points``."""
    points = np.asarray(points, dtype=complex).reshape(-1, 2 * basis.n)
    XT = np.asarray(X).T
    out = np.empty(len(points), dtype=complex)
    for sl in _batches(len(points), basis.d ** 2):
        P = weyl_operators(basis, points[sl])
        out[sl] = np.einsum("nij,ij->n", P, XT)
    return out


def rep_generator(basis: HermiteBasis, a, b) -> np.ndarray:
    """Truncated matrix of i lambda a.Xi + b.D, the generator of s -> pi(s a, s b)."""
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    G = np.zeros((basis.d, basis.d), dtype=complex)
    for j in range(1, basis.n + 1):
        A, Ad = annihilation_matrix(basis, j), creation_matrix(basis, j)
        xi = (A + Ad) / (2.0 * basis.abs_lam)
        dx = (A - Ad) / 2.0
        G += 1j * basis.lam * a[j - 1] * xi + b[j - 1] * dx
    return G


def weyl_operator(basis: HermiteBasis, a, b, method: str = "exact") -> np.ndarray:
    """pi_lambda(a, b) on the truncated basis.

    ``"exact"`` returns the compression of the true operator; ``"expm"`` the
    exponential of the truncated generator (scaling and squaring with Pade).
    Both accept complex (a, b).
    """
    if method == "exact":
        p = np.concatenate([np.atleast_1d(a), np.atleast_1d(b)]).astype(complex)
        return weyl_operators(basis, p[None, :])[0]
    if method == "expm":
        return expm(rep_generator(basis, a, b))
    raise ValueError(f"unknown method {method!r}")


@dataclass
class GridFunction:
    """Samples of a function on R^{2n} over a quadrature grid.

    ``evaluator`` (vectorised over rows of an (N, 2n) array) is used for
    off-grid values; without it values are interpolated with separable cubic
    splines and ``degraded`` is set.
    """

    grid: QuadratureGrid
    values: np.ndarray
    evaluator: Evaluator | None = None
    degraded: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.size,):
            raise ValueError("values must align with grid nodes")

    @classmethod
    def from_function(cls, grid: QuadratureGrid, fn: Evaluator) -> "GridFunction":
        return cls(grid, fn(grid.nodes), evaluator=fn)

    def at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points)
        if self.evaluator is not None:
            return np.asarray(self.evaluator(points), dtype=complex)
        if not self.grid.axes:
            raise ValueError("grid has no tensor axes; cannot interpolate")
        self.degraded = True
        shape = self.grid.shape
        kw = dict(method="cubic", bounds_error=False, fill_value=0.0)
        re = RegularGridInterpolator(self.grid.axes, self.values.real.reshape(shape), **kw)
        im = RegularGridInterpolator(self.grid.axes, self.values.imag.reshape(shape), **kw)
        return re(points) + 1j * im(points)

    def l2_norm_sq(self) -> float:
        return float(np.dot(self.grid.weights, np.abs(self.values) ** 2))


def _n_of(grid: QuadratureGrid) -> int:
    if grid.m % 2:
        raise ValueError("grid dimension must be 2n")
    return grid.m // 2


def weyl_transform(basis: HermiteBasis, f: GridFunction) -> np.ndarray:
    """pi_lambda(f) = int f(x, u) pi_lambda(x, u) dx du by quadrature."""
    if f.grid.m != 2 * basis.n:
        raise ValueError(f"grid dimension {f.grid.m} != 2n = {2 * basis.n}")
    wf = f.grid.weights * f.values
    out = np.zeros((basis.d, basis.d), dtype=complex)
    for sl in _batches(f.grid.size, basis.d ** 2):
        P = weyl_operators(basis, f.grid.nodes[sl])
        out += np.tensordot(wf[sl], P, axes=(0, 0))
    return out


def weyl_inverse(basis: HermiteBasis, T: np.ndarray, points: np.ndarray) -> np.ndarray:
    """g(p) = (2 pi)^{-n} |lambda|^n tr(pi(-p) T), the inverse Weyl transform."""
    points = np.asarray(points, dtype=complex).reshape(-1, 2 * basis.n)
    return inversion_factor(basis.n, basis.lam) * weyl_traces(basis, -points, T)


def _symplectic(points: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    """Im(z . conj(w)) = u.a - x.b for z = (x, u), w = (a, b); shape (len(points), len(w))."""
    x, u = points[:, :n], points[:, n:]
    a, b = w[:, :n], w[:, n:]
    return u @ a.T - x @ b.T


def _tconv_at(f: GridFunction, g: GridFunction, lam: float, points: np.ndarray) -> np.ndarray:
    grid = g.grid
    n = _n_of(grid)
    points = np.asarray(points).reshape(-1, 2 * n)
    wg = grid.weights * g.values
    out = np.empty(len(points), dtype=complex)
    for sl in _batches(len(points), grid.size):
        z = points[sl]
        shifted = (z[:, None, :] - grid.nodes[None, :, :]).reshape(-1, 2 * n)
        fv = f.at(shifted).reshape(len(z), grid.size)
        phase = np.exp(0.5j * lam * _symplectic(z, grid.nodes, n))
        out[sl] = (fv * phase) @ wg
    return out


def twisted_convolution(f: GridFunction, g: GridFunction, lam: float) -> GridFunction:
    """(f *_lambda g)(z) = int f(z - w) g(w) exp(i lambda/2 Im(z . conj w)) dw."""
    if f.grid is not g.grid and not np.array_equal(f.grid.nodes, g.grid.nodes):
        raise ValueError("twisted_convolution needs both functions on the same grid")

    def ev(points):
        return _tconv_at(f, g, lam, points)

    values = ev(g.grid.nodes)
    return GridFunction(g.grid, values, evaluator=ev, degraded=f.degraded)


def twisted_translation(a, b, f: GridFunction, lam: float) -> GridFunction:
    """tau_lambda(a, b) f(x, u) = f(x - a, u - b) exp(-i lambda/2 (u.a - x.b))."""
    n = _n_of(f.grid)
    shift = np.concatenate([np.atleast_1d(a), np.atleast_1d(b)]).astype(float)
    if shift.shape != (2 * n,):
        raise ValueError("translation must be a real point of R^{2n}")

    def ev(points):
        points = np.asarray(points).reshape(-1, 2 * n)
        phase = np.exp(-0.5j * lam * _symplectic(points, shift[None, :], n)[:, 0])
        return f.at(points - shift) * phase

    return GridFunction(f.grid, ev(f.grid.nodes), evaluator=ev, degraded=f.degraded)


def symplectic_fourier(f: GridFunction, lam: float) -> GridFunction:
    """F_lambda f = (2 pi)^{-n} f *_lambda 1.

    After the substitution w -> z - w the integral only needs f on the grid:
    (2 pi)^{-n} sum_j w_j f(w_j) exp(-i lambda/2 Im(z . conj w_j)).
    """
    grid = f.grid
    n = _n_of(grid)
    wf = grid.weights * f.values

    def ev(points):
        points = np.asarray(points).reshape(-1, 2 * n)
        out = np.empty(len(points), dtype=complex)
        for sl in _batches(len(points), grid.size):
            out[sl] = np.exp(-0.5j * lam * _symplectic(points[sl], grid.nodes, n)) @ wf
        return out * (2.0 * math.pi) ** -n

    return GridFunction(grid, ev(grid.nodes), evaluator=ev)


def euclidean_fourier(f: GridFunction, xi: np.ndarray, sign: int = -1) -> np.ndarray:
    """Unitary Fourier transform on R^m: (2 pi)^{-m/2} int f(r) exp(sign i r.xi) dr."""
    grid = f.grid
    xi = np.asarray(xi, dtype=float).reshape(-1, grid.m)
    wf = grid.weights * f.values
    out = np.empty(len(xi), dtype=complex)
    for sl in _batches(len(xi), grid.size):
        out[sl] = np.exp(sign * 1j * (xi[sl] @ grid.nodes.T)) @ wf
    return out * (2.0 * math.pi) ** (-grid.m / 2.0)


def weyl_correspondence_monomial(basis: HermiteBasis, p: int, q: int, i: int = 1, j: int = 2) -> np.ndarray:
    """W_lambda(z_i^p conj(z_j)^q) as a product of ladder matrices.

    lambda > 0 gives A_j^*(lambda)^q A_i(lambda)^p. For lambda < 0 the
    conjugation symmetry pi_{-lambda} = conj o pi_lambda o conj turns this into
    A_i^*(lambda)^p A_j(lambda)^q (Hermite functions are real). For n = 1 only
    pure powers are allowed.
    """
    if p < 0 or q < 0:
        raise ValueError("p, q must be nonnegative")
    if basis.n == 1:
        if p > 0 and q > 0:
            raise ValueError("n = 1 supports only z^p or conj(z)^q")
        i = j = 1
    elif i == j:
        raise ValueError("axes i and j must differ for n >= 2")
    mp = np.linalg.matrix_power
    if basis.lam > 0:
        return mp(creation_matrix(basis, j), q) @ mp(annihilation_matrix(basis, i), p)
    return mp(creation_matrix(basis, i), p) @ mp(annihilation_matrix(basis, j), q)
