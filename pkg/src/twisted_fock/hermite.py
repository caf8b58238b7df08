"""Hermite functions, truncated Hermite bases and the spectral calculus of H(lambda).

Operators on L^2(R^n) are represented by complex ``d x d`` numpy arrays in the
basis ``{Phi_alpha^lambda : |alpha| <= K}`` ordered graded-lexicographically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss

__all__ = [
    "HermiteBasis",
    "QuadratureGrid",
    "enumerate_indices",
    "hermite_functions_1d",
    "hermite_eval",
    "hermite_eval_grid",
    "gauss_hermite_grid",
    "creation_matrix",
    "annihilation_matrix",
    "hermite_hamiltonian",
    "spectral_projection",
    "hermite_semigroup",
    "spectral_multiplier",
]


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if lam == 0.0 or not np.isfinite(lam):
        raise ValueError("lambda must be a finite nonzero real (lambda != 0)")
    return lam


def enumerate_indices(n: int, K: int) -> list[tuple[int, ...]]:
    """All multi-indices in N^n with |alpha| <= K, graded-lex sorted."""
    if n < 1 or K < 0:
        raise ValueError(f"need n >= 1 and K >= 0, got n={n}, K={K}")
    out = []
    for k in range(K + 1):
        level = [a for a in product(range(k + 1), repeat=n) if sum(a) == k]
        out.extend(sorted(level))
    return out


@dataclass(frozen=True)
class HermiteBasis:
    """Truncated basis span{Phi_alpha^lambda : |alpha| <= K} of L^2(R^n)."""

    n: int
    lam: float
    K: int
    indices: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only n = 1 or n = 2 is supported")
        object.__setattr__(self, "lam", _check_lambda(self.lam))
        object.__setattr__(self, "indices", tuple(enumerate_indices(self.n, self.K)))

    @property
    def d(self) -> int:
        return len(self.indices)

    @property
    def abs_lam(self) -> float:
        return abs(self.lam)

    @cached_property
    def index_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=int).reshape(self.d, self.n)

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.index_array.sum(axis=1)

    @cached_property
    def position(self) -> dict[tuple[int, ...], int]:
        return {a: i for i, a in enumerate(self.indices)}

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Diagonal of H(lambda): (2|alpha| + n)|lambda|."""
        return (2.0 * self.degrees + self.n) * self.abs_lam

    def interior(self, margin: int = 1) -> np.ndarray:
        """Boolean mask of indices with |alpha| <= K - margin."""
        return self.degrees <= self.K - margin

    def level(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.degrees == k)

    def with_K(self, K: int) -> "HermiteBasis":
        return HermiteBasis(self.n, self.lam, K)

    def embed(self, other: "HermiteBasis", M: np.ndarray) -> np.ndarray:
        """Restrict or zero-pad a matrix given in ``other`` to this basis."""
        out = np.zeros((self.d, self.d), dtype=np.result_type(M, complex))
        keep = [(i, other.position[a]) for i, a in enumerate(self.indices) if a in other.position]
        if keep:
            mine, theirs = map(np.array, zip(*keep))
            out[np.ix_(mine, mine)] = M[np.ix_(theirs, theirs)]
        return out


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor quadrature rule on R^m with plain Lebesgue weights.

    ``axes`` keeps the per-axis nodes so rectilinear interpolation is possible;
    ``transform`` is the linear map applied to tensor nodes (identity for plain
    tensor grids).
    """

    nodes: np.ndarray
    weights: np.ndarray
    axes: tuple[np.ndarray, ...] = ()
    transform: np.ndarray | None = None

    def __post_init__(self):
        if self.nodes.ndim != 2 or len(self.nodes) != len(self.weights):
            raise ValueError("nodes must be (N, m) and match weights")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def m(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    def integrate(self, values: np.ndarray) -> complex:
        return complex(np.dot(self.weights, values))


def gauss_hermite_grid(lam: float, m: int, Q: int, scale: float = 1.0) -> QuadratureGrid:
    """Tensor Q-point Gauss-Hermite rule on R^m at the lambda length scale.

    Nodes are ``scale * t / sqrt|lambda|`` for the classical nodes ``t``; the
    Gaussian factor is divided out of the weights so the rule integrates plain
    ``f dx``. It is exact for ``poly(x) * exp(-|lambda| |x|^2 / scale^2)`` of
    per-axis degree below ``2Q``.
    """
    lam = _check_lambda(lam)
    if Q < 2:
        raise ValueError("Q must be >= 2")
    t, w = hermgauss(Q)
    h = scale / math.sqrt(abs(lam))
    x1 = h * t
    w1 = h * w * np.exp(t * t)
    mesh = np.meshgrid(*([x1] * m), indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=1)
    wmesh = np.meshgrid(*([w1] * m), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wmesh], axis=1), axis=1)
    return QuadratureGrid(nodes, weights, axes=tuple([x1] * m))


def hermite_functions_1d(K: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions Phi_0..Phi_K at x, shape (K+1, *x.shape).

    Uses the three-term recurrence for the normalised functions, which stays
    stable for degrees in the hundreds. Complex x is allowed.
    """
    x = np.asarray(x)
    out = np.empty((K + 1,) + x.shape, dtype=np.result_type(x, float))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if K >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, K):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def hermite_eval(alpha: Sequence[int], lam: float, x) -> float:
    """Phi_alpha^lambda(x) = |lambda|^{n/4} Phi_alpha(|lambda|^{1/2} x)."""
    lam = _check_lambda(lam)
    alpha = tuple(int(a) for a in alpha)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (len(alpha),):
        raise ValueError("x must have one coordinate per multi-index entry")
    s = math.sqrt(abs(lam))
    val = abs(lam) ** (len(alpha) / 4.0)
    for a, xj in zip(alpha, x):
        val *= hermite_functions_1d(a, np.array(s * xj))[a]
    return float(val)


def hermite_eval_grid(basis: HermiteBasis, points: np.ndarray) -> np.ndarray:
    """All basis functions at points of R^n, shape (d, N)."""
    points = np.asarray(points, dtype=float).reshape(-1, basis.n)
    s = math.sqrt(basis.abs_lam)
    per_axis = [hermite_functions_1d(basis.K, s * points[:, j]) for j in range(basis.n)]
    idx = basis.index_array
    out = np.full((basis.d, len(points)), basis.abs_lam ** (basis.n / 4.0))
    for j in range(basis.n):
        out *= per_axis[j][idx[:, j]]
    return out


def _axis(basis: HermiteBasis, j: int) -> int:
    if not 1 <= j <= basis.n:
        raise ValueError(f"axis must be in 1..{basis.n}, got {j}")
    return j - 1


def creation_matrix(basis: HermiteBasis, j: int) -> np.ndarray:
    """A_j^*(lambda) = -d/dx_j + |lambda| x_j; overflow past degree K is dropped."""
    ax = _axis(basis, j)
    A = np.zeros((basis.d, basis.d))
    for col, alpha in enumerate(basis.indices):
        up = list(alpha)
        up[ax] += 1
        row = basis.position.get(tuple(up))
        if row is not None:
            A[row, col] = math.sqrt((2 * alpha[ax] + 2) * basis.abs_lam)
    return A


def annihilation_matrix(basis: HermiteBasis, j: int) -> np.ndarray:
    """A_j(lambda) = d/dx_j + |lambda| x_j."""
    ax = _axis(basis, j)
    A = np.zeros((basis.d, basis.d))
    for col, alpha in enumerate(basis.indices):
        if alpha[ax] == 0:
            continue
        down = list(alpha)
        down[ax] -= 1
        A[basis.position[tuple(down)], col] = math.sqrt(2 * alpha[ax] * basis.abs_lam)
    return A


def hermite_hamiltonian(basis: HermiteBasis) -> np.ndarray:
    return np.diag(basis.eigenvalues)


def spectral_projection(basis: HermiteBasis, k: int) -> np.ndarray:
    """P_k(lambda): orthogonal projection onto the eigenspace |alpha| = k."""
    if not 0 <= k <= basis.K:
        raise ValueError(f"projection index k={k} outside 0..K={basis.K}")
    return np.diag((basis.degrees == k).astype(float))


def hermite_semigroup(basis: HermiteBasis, t: float) -> np.ndarray:
    """e^{-tH(lambda)}; negative t gives the (amplifying) inverse semigroup."""
    return np.diag(np.exp(-t * basis.eigenvalues))


def spectral_multiplier(basis: HermiteBasis, m: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """m(H(lambda)) = sum_k m((2k+n)|lambda|) P_k(lambda)."""
    vals = np.asarray(m(basis.eigenvalues))
    if vals.shape != (basis.d,):
        vals = np.array([m(e) for e in basis.eigenvalues])
    return np.diag(vals)
