"""Twisted Bergman/Fock spaces as computable objects.

Normalisations (all derived from the Weyl inversion constant, see
:func:`twisted_fock.weyl.inversion_factor`):

* ``G_t(M)(z, w) = c_inv p_{2t}(z, w)^{-1} tr(pi(-z, -w) e^{-tH} M e^{-tH})`` with
  ``c_inv = (2 pi)^{-n} |lambda|^n``, so that ``G_t(I) = 1`` and
  ``G_t^* F = e^{tH} pi(F p_{2t}) e^{tH}`` inverts ``G_t`` exactly.
* The Fock norm is ``||F||^2 = iso_t^{-1} int |F|^2 w_t dz dw`` with
  ``iso_t = (8 pi^2)^n sinh(2|lambda|t)^{3n} / |lambda|^{2n}``, which makes
  ``||G_t(M)|| = ||e^{-tH} M||_HS``.
* The kernel ``fock_kernel`` reproduces against the probability measure
  ``w_t dz dw / Z_t`` with ``Z_t = int w_t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import gammaln

from .hermite import HermiteBasis, QuadratureGrid, gauss_hermite_grid, hermite_semigroup
from .kernels import KernelParams, coth_scale, fock_kernel, fock_weight, heat_kernel, bergman_weight
from .weyl import (
    GridFunction,
    _batches,
    euclidean_fourier,
    inversion_factor,
    weyl_inverse,
    weyl_traces,
    weyl_transform,
)

__all__ = [
    "AdjointGuardError",
    "FockElement",
    "Cgrid",
    "make_cgrid",
    "isometry_normalizer",
    "reproducing_normalizer",
    "gauss_bargmann",
    "gauss_bargmann_adjoint",
    "segal_bargmann",
    "segal_bargmann_direct",
    "fock_norm",
    "fock_inner",
    "reproduce",
    "bergman_norm",
    "apply_U",
    "apply_U_star",
    "rotate_coefficients",
    "U_lambda_operator",
    "constant_element",
    "U_lambda",
    "FT_SIGN",
]

# sign of the exponent in the Euclidean Fourier transform used by U_{t,lambda};
# -1 is the choice for which the intertwining identity holds (checked in tests)
FT_SIGN = -1

ADJOINT_TOLERANCE = 1e-3


class AdjointGuardError(ValueError):
    """Raised when e^{tH} amplification of quadrature error exceeds tolerance."""


def isometry_normalizer(lam: float, t: float, n: int) -> float:
    return (8.0 * math.pi ** 2) ** n * math.sinh(2 * abs(lam) * t) ** (3 * n) / abs(lam) ** (2 * n)


def reproducing_normalizer(lam: float, t: float, n: int) -> float:
    """Z_t = int_{C^{2n}} w_t^lambda dz dw."""
    return (2.0 * math.pi) ** (2 * n) * (math.sinh(2 * abs(lam) * t) / abs(lam)) ** (2 * n)


@dataclass
class FockElement:
    """Entire function on C^{2n}, optionally carrying its operator-side symbol.

    ``gauss_q`` records the holomorphic Gaussian factor exp(-q (z^2 + w^2)) of
    the evaluator when known; it selects the quadrature scale for the adjoint.
    """

    basis: HermiteBasis
    t: float
    evaluator: Callable[[np.ndarray], np.ndarray]
    M: np.ndarray | None = None
    gauss_q: float | None = None
    label: str = ""
    coefficients: Callable[[int], tuple[np.ndarray, float]] | None = None
    _operators: dict = field(default_factory=dict, repr=False)

    @property
    def lam(self) -> float:
        return self.basis.lam

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def params(self) -> KernelParams:
        return KernelParams(self.lam, self.t, self.n)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=complex).reshape(-1, 2 * self.n)
        return np.asarray(self.evaluator(pts), dtype=complex)

    def operator(self, K_inner: int, Q: int = 64) -> np.ndarray:
        """Operator-side representative G_t^* F on the block |alpha| <= K_inner."""
        if self.M is not None and K_inner <= self.basis.K:
            return self.basis.with_K(K_inner).embed(self.basis, self.M)
        key = (K_inner, Q)
        if key not in self._operators:
            if self.coefficients is not None:
                self._operators[key] = _amplify(self, K_inner)
            else:
                self._operators[key] = gauss_bargmann_adjoint(self, K_inner, Q=Q)
        return self._operators[key]

    def onb_coefficients(self, K: int) -> tuple[np.ndarray, float]:
        """Coefficients y = e^{-tH} G_t^* F in the orthonormal basis G_t(e^{tH} E_ij).

        Returns ``(y, err)`` with ``err`` an entrywise (or scalar) error bound.
        """
        if self.coefficients is not None:
            return self.coefficients(K)
        if self.M is not None:
            inner = self.basis.with_K(K)
            y = hermite_semigroup(inner, self.t) @ inner.embed(self.basis, self.M)
            return y, 0.0
        raise ValueError("element carries no operator-side data")

    def derive(self, evaluator, **changes) -> "FockElement":
        return replace(self, evaluator=evaluator, _operators={}, **changes)


def gauss_bargmann(basis: HermiteBasis, M: np.ndarray, t: float = 0.5) -> FockElement:
    """G_t^lambda(M) as a FockElement."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (basis.d, basis.d):
        raise ValueError("M must be a d x d matrix in the given basis")
    S = hermite_semigroup(basis, t)
    X = S @ M @ S
    c = inversion_factor(basis.n, basis.lam)
    p2t = KernelParams(basis.lam, 2.0 * t, basis.n)

    def ev(points):
        return c * weyl_traces(basis, -points, X) / heat_kernel(p2t, points)

    q = 0.25 * (basis.abs_lam - coth_scale(basis.lam, 2.0 * t))
    return FockElement(basis, t, ev, M=M, gauss_q=q, label="G(M)")


def _amplify(F: FockElement, K_inner: int) -> np.ndarray:
    y, err = F.coefficients(K_inner)
    inner = F.basis.with_K(K_inner)
    S = np.exp(F.t * inner.eigenvalues)
    amp = float(np.max(S[:, None] * err))
    if amp > ADJOINT_TOLERANCE:
        raise AdjointGuardError(
            f"amplified coefficient error {amp:.2e} exceeds {ADJOINT_TOLERANCE:g} at K_inner={K_inner}"
        )
    return S[:, None] * y


def constant_element(basis: HermiteBasis, value: complex = 1.0, t: float = 0.5) -> FockElement:
    """The constant function, equal to G_t(value * I)."""
    ev = lambda pts: np.full(len(pts), value, dtype=complex)
    return FockElement(basis, t, ev, M=value * np.eye(basis.d, dtype=complex), gauss_q=0.25 * (basis.abs_lam - coth_scale(basis.lam, 2 * t)), label="const")


def _adjoint_grid(F: FockElement, Q: int) -> QuadratureGrid:
    L = F.basis.abs_lam
    k2 = coth_scale(F.lam, 2.0 * F.t)
    q = F.gauss_q if F.gauss_q is not None else 0.25 * (L - k2)
    decay = q + 0.25 * k2 + 0.25 * L
    if decay <= 0:
        raise AdjointGuardError("F p_{2t} does not decay on R^{2n}; adjoint undefined")
    return gauss_hermite_grid(F.lam, 2 * F.n, Q, scale=math.sqrt(L / decay))


def _adjoint_raw(F: FockElement, inner: HermiteBasis, Q: int) -> tuple[np.ndarray, float]:
    grid = _adjoint_grid(F, Q)
    p2t = heat_kernel(KernelParams(F.lam, 2.0 * F.t, F.n), grid.nodes)
    f0 = GridFunction(grid, F(grid.nodes) * p2t)
    # Weyl matrix entries are bounded by 1, so this bounds the summation roundoff
    floor = 16 * np.finfo(float).eps * float(grid.weights @ np.abs(f0.values))
    return weyl_transform(inner, f0), floor


def gauss_bargmann_adjoint(F: FockElement, K_inner: int, Q: int = 64, Q_check: int | None = None) -> np.ndarray:
    """G_t^* F = e^{tH} pi(F p_{2t} |_{R^{2n}}) e^{tH} on the block |alpha| <= K_inner.

    The raw error is estimated from a second rule with ``Q_check`` nodes
    (default Q - 8) together with a summation roundoff floor. It is amplified
    by e^{tH} on both sides and the call is rejected when the result exceeds
    1e-3.
    """
    inner = F.basis.with_K(K_inner)
    S = np.exp(F.t * inner.eigenvalues)
    scale = np.outer(S, S)
    P, floor = _adjoint_raw(F, inner, Q)
    if floor * scale.max() > ADJOINT_TOLERANCE:
        raise AdjointGuardError(
            f"roundoff floor {floor * scale.max():.2e} exceeds {ADJOINT_TOLERANCE:g} at K_inner={K_inner}"
        )
    P2, _ = _adjoint_raw(F, inner, Q_check or max(Q - 8, 2))
    err = float(np.max((np.abs(P - P2) + floor) * scale))
    if err > ADJOINT_TOLERANCE:
        raise AdjointGuardError(
            f"amplified quadrature error {err:.2e} exceeds {ADJOINT_TOLERANCE:g} at K_inner={K_inner}"
        )
    return P * scale


@dataclass(frozen=True)
class Cgrid:
    """Quadrature on C^{2n} = R^{4n}; real layout (Re z, Im z, Re w, Im w)."""

    grid: QuadratureGrid
    n: int

    @property
    def points(self) -> np.ndarray:
        r = self.grid.nodes
        n = self.n
        return np.concatenate([r[:, :n] + 1j * r[:, n:2 * n], r[:, 2 * n:3 * n] + 1j * r[:, 3 * n:]], axis=1)

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def integrate(self, values) -> complex:
        return complex(self.grid.weights @ values)


def _fock_quadratic_form(lam: float, t: float, n: int) -> np.ndarray:
    """Quadratic form of |exp(-|lam|(z^2+w^2)/4) / p_{2t}|^2 w_t on R^{4n}."""
    L = abs(lam)
    k2 = coth_scale(lam, 2.0 * t)
    I = np.eye(n)
    A = np.zeros((4 * n, 4 * n))
    X, Y, U, V = (slice(i * n, (i + 1) * n) for i in range(4))
    A[X, X] = L * I
    A[U, U] = L * I
    A[Y, Y] = (2 * k2 - L) * I
    A[V, V] = (2 * k2 - L) * I
    A[X, V] = A[V, X] = lam * I
    A[Y, U] = A[U, Y] = -lam * I
    return A


def make_cgrid(lam: float, t: float = 0.5, n: int = 1, Q: int = 24, spread: float = 1.0) -> Cgrid:
    """Gauss-Hermite rule on R^{4n} adapted to the Gaussian part of Fock integrands.

    With ``r = L xi`` and ``L = spread * sqrt(2) A^{-1/2}`` the factor
    exp(-r.A.r/2) becomes exp(-|xi|^2 / spread^2); integrands of the form
    polynomial x that factor are integrated exactly up to degree 2Q - 1.
    """
    A = _fock_quadratic_form(lam, t, n)
    evals, evecs = np.linalg.eigh(A)
    if np.any(evals <= 0):
        raise ValueError("Fock quadratic form is not positive definite")
    Lmap = spread * math.sqrt(2.0) * (evecs / np.sqrt(evals)) @ evecs.T
    tq, wq = hermgauss(Q)
    w1 = wq * np.exp(tq * tq)
    m = 4 * n
    mesh = np.stack(np.meshgrid(*([tq] * m), indexing="ij"), axis=-1).reshape(-1, m)
    wmesh = np.prod(np.stack(np.meshgrid(*([w1] * m), indexing="ij"), axis=-1).reshape(-1, m), axis=1)
    nodes = mesh @ Lmap.T
    weights = wmesh * abs(np.linalg.det(Lmap))
    return Cgrid(QuadratureGrid(nodes, weights, transform=Lmap), n)


def _cgrid_for(F: FockElement, cgrid: Cgrid | None) -> Cgrid:
    if cgrid is None:
        cgrid = make_cgrid(F.lam, F.t, F.n)
    return cgrid


def fock_inner(F: FockElement, G: FockElement, cgrid: Cgrid | None = None) -> complex:
    """<F, G> = iso_t^{-1} int F conj(G) w_t dz dw."""
    cgrid = _cgrid_for(F, cgrid)
    P = cgrid.points
    w = fock_weight(F.params, P)
    val = cgrid.integrate(F(P) * np.conj(G(P)) * w)
    return val / isometry_normalizer(F.lam, F.t, F.n)


def fock_norm(F: FockElement, cgrid: Cgrid | None = None) -> float:
    """Squared Fock norm ||F||^2."""
    cgrid = _cgrid_for(F, cgrid)
    P = cgrid.points
    val = cgrid.integrate(np.abs(F(P)) ** 2 * fock_weight(F.params, P))
    return float(val.real) / isometry_normalizer(F.lam, F.t, F.n)


def reproduce(F: FockElement, zw, cgrid: Cgrid | None = None) -> np.ndarray:
    """Z_t^{-1} int F(a, b) K((z, w), conj(a, b)) w_t(a, b) da db at each probe point."""
    cgrid = _cgrid_for(F, cgrid)
    P = cgrid.points
    fw = cgrid.weights * F(P) * fock_weight(F.params, P)
    zw = np.asarray(zw, dtype=complex).reshape(-1, 2 * F.n)
    out = np.array([fock_kernel(F.params, z[None, :], P) @ fw for z in zw])
    return out / reproducing_normalizer(F.lam, F.t, F.n)


def segal_bargmann(basis: HermiteBasis, f: GridFunction, t: float = 0.5) -> Callable[[np.ndarray], np.ndarray]:
    """B_{t,lambda} f via the trace formula c_inv tr(pi(-z, -w) pi(f) e^{-tH}).

    Returns an evaluator on C^{2n}.
    """
    X = weyl_transform(basis, f) @ hermite_semigroup(basis, t)
    c = inversion_factor(basis.n, basis.lam)

    def ev(points):
        return c * weyl_traces(basis, -np.asarray(points, dtype=complex), X)

    return ev


def segal_bargmann_direct(f: GridFunction, lam: float, t: float, points) -> np.ndarray:
    """B_{t,lambda} f(z, w) = int f(a, b) p_t(z - a, w - b) exp(-i lambda/2 (w.a - z.b)) da db.

    The heat kernel is entire, so complex (z, w) are evaluated in closed form.
    """
    grid = f.grid
    n = grid.m // 2
    kp = KernelParams(lam, t, n)
    points = np.asarray(points, dtype=complex).reshape(-1, 2 * n)
    wf = grid.weights * f.values
    a, b = grid.nodes[:, :n], grid.nodes[:, n:]
    out = np.empty(len(points), dtype=complex)
    for sl in _batches(len(points), grid.size):
        z, w = points[sl, :n], points[sl, n:]
        diff = points[sl][:, None, :] - grid.nodes[None, :, :]
        phase = np.exp(-0.5j * lam * (w @ a.T - z @ b.T))
        out[sl] = (heat_kernel(kp, diff) * phase) @ wf
    return out


def bergman_norm(F0: Callable[[np.ndarray], np.ndarray], lam: float, t: float, n: int = 1, cgrid: Cgrid | None = None) -> float:
    """int |F0|^2 W_t^lambda over C^{2n}."""
    cgrid = cgrid or make_cgrid(lam, t, n)
    P = cgrid.points
    return float(cgrid.integrate(np.abs(F0(P)) ** 2 * bergman_weight(KernelParams(lam, t, n), P)).real)


@lru_cache(maxsize=16)
def _rotation_transition(lam: float, t: float, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Expansion of the orthonormal functions G_t(e^{tH} E_ij) (one axis) in
    orthonormal monomials beta^p gamma^q, q = p - j + i.

    Returns ``T[p, i, j]`` and ``A[p, i, j]``, the sum of the magnitudes of
    the cancelling terms, used for the roundoff bound.
    """
    L = abs(lam)
    kap = coth_scale(lam, 2.0 * t)
    a = 0.5 * (kap / L - 1.0)
    log_db = math.log((kap - L) / (2.0 * L))
    log_dg = math.log((kap + L) / (2.0 * L))
    sh = math.sinh(2.0 * t * L)
    # c_inv (4 pi) sinh / |lam| for one axis, with the measure ratio Z_t / iso_t
    log_pref = math.log(2.0 * sh) - 0.5 * math.log(2.0 * sh)
    P = 2 * K + 80
    p = np.arange(P)[:, None, None]
    i = np.arange(K + 1)[None, :, None]
    j = np.arange(K + 1)[None, None, :]
    q = p - j + i
    valid = q >= 0
    qs = np.where(valid, q, 0)
    base = (0.5 * (gammaln(i + 1) + gammaln(j + 1)) - t * (2 * j + 1) * L + log_pref
            + 0.5 * (gammaln(p + 1) + gammaln(qs + 1) - p * log_db - qs * log_dg))
    T = np.zeros((P, K + 1, K + 1))
    A = np.zeros_like(T)
    for k in range(K + 1):
        l = p - j + k
        ok = valid & (l >= 0) & (k <= i) & (k <= j)
        if not ok.any():
            continue
        ls = np.where(ok, l, 0)
        if a > 0:
            la = ls * math.log(a)
        else:
            la = np.where(ls == 0, 0.0, -np.inf)
        lt = base - gammaln(k + 1) - gammaln(np.maximum(i - k, 0) + 1) - gammaln(np.maximum(j - k, 0) + 1) + la - gammaln(ls + 1)
        term = np.where(ok, np.exp(np.where(ok, lt, -np.inf)), 0.0)
        T += (-1.0) ** (j - k) * term
        A += term
    return T, A


def _rotation_matrix_1d(lam: float, t: float, K_out: int, K_in: int, power: int) -> tuple[np.ndarray, float]:
    """U^power on one axis as a tensor R[i', j', i, j] and an entrywise roundoff bound."""
    K = max(K_out, K_in)
    T, A = _rotation_transition(lam, t, K)
    P = T.shape[0]
    p = np.arange(P)[:, None, None]
    q = p - np.arange(K + 1)[None, None, :] + np.arange(K + 1)[None, :, None]
    phase = np.where(q >= 0, (-1j) ** ((power * (p + q)) % 4), 0.0)
    R = np.einsum("pab,pij->abij", T[:, :K_out + 1, :K_out + 1], phase[:, :K_in + 1, :K_in + 1] * T[:, :K_in + 1, :K_in + 1])
    # only monomials of equal charge j - i pair up
    a = np.arange(K_out + 1)
    b = np.arange(K_in + 1)
    mask = (a[None, :, None, None] - a[:, None, None, None]) == (b[None, None, None, :] - b[None, None, :, None])
    R *= mask
    eps = np.finfo(float).eps
    At, Tt = A[:, :K_out + 1, :K_out + 1], np.abs(T[:, :K_out + 1, :K_out + 1])
    Ai, Ti = A[:, :K_in + 1, :K_in + 1], np.abs(T[:, :K_in + 1, :K_in + 1])
    bound = eps * (np.einsum("pab,pij->abij", At, Ti) + np.einsum("pab,pij->abij", Tt, Ai)) * mask + eps * mask
    return R, bound


def _box(basis: HermiteBasis, y: np.ndarray) -> np.ndarray:
    """Scatter a (d, d) matrix into a tensor with one row and one column axis per coordinate."""
    K, n = basis.K, basis.n
    Y = np.zeros((K + 1,) * (2 * n), dtype=complex)
    idx = basis.index_array
    rows = np.repeat(idx, basis.d, axis=0)
    cols = np.tile(idx, (basis.d, 1))
    Y[tuple(rows.T) + tuple(cols.T)] = y.reshape(-1)
    return Y


def _unbox(basis: HermiteBasis, Y: np.ndarray) -> np.ndarray:
    idx = basis.index_array
    rows = np.repeat(idx, basis.d, axis=0)
    cols = np.tile(idx, (basis.d, 1))
    return Y[tuple(rows.T) + tuple(cols.T)].reshape(basis.d, basis.d)


def rotate_coefficients(basis_in: HermiteBasis, y: np.ndarray, t: float, K_out: int, power: int = 1) -> tuple[np.ndarray, float]:
    """Orthonormal-basis coefficients of U^power F from those of F.

    ``y`` holds the coefficients of F on ``basis_in``; the result lives on the
    block |alpha| <= K_out. The map is unitary, so no amplification occurs.
    """
    n = basis_in.n
    R, bound = _rotation_matrix_1d(basis_in.lam, t, K_out, basis_in.K, power)
    Y = _box(basis_in, y)
    Ya = np.abs(Y)
    if n == 1:
        Yp = np.einsum("abij,ij->ab", R, Y)
        E = np.einsum("abij,ij->ab", bound, Ya)
    else:
        Yp = np.einsum("acik,bdjl,ijkl->abcd", R, R, Y, optimize=True)
        Ra = np.abs(R)
        E = np.einsum("acik,bdjl,ijkl->abcd", bound, Ra + bound, Ya, optimize=True)
        E += np.einsum("acik,bdjl,ijkl->abcd", Ra, bound, Ya, optimize=True)
    out = basis_in.with_K(K_out)
    return _unbox(out, Yp), _unbox(out, E).real


def _rotated(F: FockElement, power: int, label: str) -> FockElement:
    sign = (-1j) ** (power % 4)
    ev = lambda pts: F(sign * pts)
    q = None if F.gauss_q is None else (-1) ** (power % 2) * F.gauss_q
    coeffs = None
    if F.M is not None or F.coefficients is not None:
        K_src = F.basis.K

        def coeffs(K_out, F=F):
            y, err0 = F.onb_coefficients(K_src)
            y2, err = rotate_coefficients(F.basis.with_K(K_src), y, F.t, K_out, power)
            return y2, err + err0

    return F.derive(ev, M=None, gauss_q=q, label=label, coefficients=coeffs)


def apply_U(F: FockElement) -> FockElement:
    """(U F)(z, w) = F(-i z, -i w).

    When F carries operator-side data the representative of UF is obtained
    exactly: U is diagonal, with eigenvalue (-i)^{p+q}, on orthonormal
    monomials beta^p gamma^q in the coordinates of the Weyl operators.
    """
    return _rotated(F, 1, f"U({F.label})")


def apply_U_star(F: FockElement) -> FockElement:
    """U^* F(z, w) = F(i z, i w)."""
    return _rotated(F, 3, f"U*({F.label})")


def U_lambda(f: GridFunction, lam: float, t: float = 0.5) -> GridFunction:
    """U_{t,lambda} f(x, u) = c^n fhat(c (x, u)), c = lambda coth(t lambda) / 2.

    ``fhat`` is the unitary Fourier transform on R^{2n} with exponent sign
    :data:`FT_SIGN`; the result carries a quadrature evaluator.
    """
    n = f.grid.m // 2
    c = 0.5 * coth_scale(lam, t)

    def ev(points):
        points = np.asarray(points, dtype=float).reshape(-1, 2 * n)
        return c ** n * euclidean_fourier(f, c * points, sign=FT_SIGN)

    return GridFunction(f.grid, ev(f.grid.nodes), evaluator=ev)


def U_lambda_operator(basis: HermiteBasis, M: np.ndarray, t: float = 0.5, grid: QuadratureGrid | None = None) -> np.ndarray:
    """Operator-side form of U_{t,lambda}: the M' with G_t(M') = U G_t(M).

    M' = e^{tH} pi(U_{t,lambda} f) where pi(f) = e^{-tH} M; computed by
    quadrature through the inverse Weyl transform, so it is reliable only on
    low blocks. :func:`apply_U` gives the exact representative.
    """
    if grid is None:
        grid = gauss_hermite_grid(basis.lam, 2 * basis.n, 48, scale=1.5)
    S = hermite_semigroup(basis, t)
    f = GridFunction(grid, weyl_inverse(basis, S @ M, grid.nodes))
    Uf = U_lambda(f, basis.lam, t)
    return np.exp(t * basis.eigenvalues)[:, None] * weyl_transform(basis, Uf)
