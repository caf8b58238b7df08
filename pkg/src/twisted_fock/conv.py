"""Convolution operators on the twisted Fock space and the uncertainty diagnostics.

S_phi F(z, w) = Z_t^{-1} int F(a, b) phi(z - conj a, w - conj b) K((z, w), (a, b)) w_t(a, b) da db

with ``K`` the Fock kernel, so that S_1 = I. Every operator has two
computation paths: quadrature of the defining integral over a
:class:`~twisted_fock.fock.Cgrid`, and the operator-side product
S_phi F = G(G^* F . G^* phi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .fock import (
    AdjointGuardError,
    Cgrid,
    FockElement,
    apply_U,
    apply_U_star,
    gauss_bargmann,
    make_cgrid,
    reproducing_normalizer,
)
from .hermite import HermiteBasis, gauss_hermite_grid, hermite_semigroup, spectral_projection
from .kernels import KernelParams, coth_scale, fock_kernel, fock_weight, heat_kernel, laguerre_special_hermite
from .weyl import inversion_factor, weyl_correspondence_monomial, weyl_operator, weyl_traces

__all__ = [
    "Symbol",
    "DeltaIndex",
    "NormTrace",
    "PLATEAU_TOL",
    "GROWTH_FACTOR",
    "rho_translation",
    "twisted_translation_complex",
    "apply_S",
    "apply_S_tilde",
    "algebra_convolve",
    "radial_symbol",
    "boundedness_diagnostic",
    "rotate",
    "radialize",
    "delta_component",
    "character",
    "u_action",
    "bilinear_forms",
    "ok_inner",
    "geller_constant",
    "geller_gamma_ratio",
    "geller_basis",
    "T_j_delta",
    "weight_bound_check",
    "WeightBound",
    "uncertainty_experiment",
    "UncertaintyReport",
    "pointwise_witness_ratio",
    "PRESETS",
    "preset_matrix",
]

PLATEAU_TOL = 0.05
GROWTH_FACTOR = 1.25


@dataclass
class Symbol:
    """A symbol phi together with its operator-side representative M = G^* phi."""

    phi: FockElement

    @classmethod
    def from_matrix(cls, basis: HermiteBasis, M: np.ndarray, t: float = 0.5) -> "Symbol":
        return cls(gauss_bargmann(basis, M, t))

    def matrix(self, K: int) -> np.ndarray:
        return self.phi.operator(K)

    def __call__(self, points) -> np.ndarray:
        return self.phi(points)


@dataclass(frozen=True)
class DeltaIndex:
    """Bigraded type (p, q); for n = 1 one of them must vanish."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("p, q must be nonnegative")

    def check(self, n: int) -> None:
        if n == 1 and self.p * self.q != 0:
            raise ValueError("for n = 1 the type must be (p, 0) or (0, q)")


def _as_symbol(phi) -> Symbol:
    return phi if isinstance(phi, Symbol) else Symbol(phi)


def _default_q(basis: HermiteBasis, t: float) -> float:
    return 0.25 * (basis.abs_lam - coth_scale(basis.lam, 2.0 * t))


def _points(zw, n: int) -> np.ndarray:
    return np.asarray(zw, dtype=complex).reshape(-1, 2 * n)


# translations


def rho_translation(point, F: FockElement) -> FockElement:
    """rho(a, b) F(z, w) = K((z, w), (a, b)) F(z - a, w - b), (a, b) real or complex."""
    ab = _points(point, F.n)
    params = F.params

    def ev(pts):
        return fock_kernel(params, pts, ab) * F(pts - ab)

    return F.derive(ev, M=None, coefficients=None, label=f"rho({F.label})")


def twisted_translation_complex(point, h, lam: float, n: int):
    """tau(a, b) h(z, w) = h(z - a, w - b) exp(-i lambda/2 (w.a - z.b)) for callable h."""
    ab = _points(point, n)

    def ev(pts):
        pts = _points(pts, n)
        z, w = pts[:, :n], pts[:, n:]
        a, b = ab[:, :n], ab[:, n:]
        phase = np.exp(-0.5j * lam * (w @ a.T - z @ b.T))[:, 0]
        return h(pts - ab) * phase

    return ev


# convolution operators


def _integral_operator(sym: Symbol, F: FockElement, sign: int, cgrid: Cgrid | None) -> FockElement:
    cgrid = cgrid or make_cgrid(F.lam, F.t, F.n)
    P = cgrid.points
    Pc = np.conj(P)
    fw = cgrid.weights * F(P) * fock_weight(F.params, P)
    fw = fw / reproducing_normalizer(F.lam, F.t, F.n)
    params = F.params

    def ev(pts):
        pts = _points(pts, F.n)
        out = np.empty(len(pts), dtype=complex)
        for m, z in enumerate(pts):
            out[m] = (sym.phi(z[None, :] + sign * Pc) * fock_kernel(params, z[None, :], P)) @ fw
        return out

    return F.derive(ev, M=None, coefficients=None, gauss_q=_default_q(F.basis, F.t), label="S(F)")


def apply_S(sym, F: FockElement, method: str = "algebraic", K: int | None = None, cgrid: Cgrid | None = None) -> FockElement:
    """S_phi F by the operator-side product (default) or by quadrature of the integral.

    ``K`` sets the truncation of the operator-side product; it defaults to the
    basis of F. Inadmissible levels raise :class:`AdjointGuardError`.
    """
    sym = _as_symbol(sym)
    if method == "integral":
        return _integral_operator(sym, F, -1, cgrid)
    if method != "algebraic":
        raise ValueError("method must be 'algebraic' or 'integral'")
    K = F.basis.K if K is None else K
    basis = F.basis.with_K(K)
    return gauss_bargmann(basis, F.operator(K) @ sym.matrix(K), F.t)


def apply_S_tilde(sym, F: FockElement, method: str = "algebraic", K: int | None = None, cgrid: Cgrid | None = None) -> FockElement:
    """S~_phi F = U^* S_{U phi} U F.

    The integral path uses phi(z + conj a) directly; the algebraic path goes
    through the exact operator-side U, truncated at level ``K`` (default: the
    largest level accepted by the adjoint guard).
    """
    sym = _as_symbol(sym)
    if method == "integral":
        return _integral_operator(sym, F, +1, cgrid)
    if method != "algebraic":
        raise ValueError("method must be 'algebraic' or 'integral'")
    Uphi, UF = Symbol(apply_U(sym.phi)), apply_U(F)
    if K is not None:
        return apply_U_star(apply_S(Uphi, UF, K=K))
    # the truncation error decays geometrically in K: use the largest admissible level
    for K in range(F.basis.K, 0, -2):
        try:
            return apply_U_star(apply_S(Uphi, UF, K=K))
        except AdjointGuardError:
            continue
    raise AdjointGuardError("no admissible truncation level for S~")


def algebra_convolve(F, phi, K: int | None = None) -> FockElement:
    """F *_lambda phi = S_phi F = G(G^* F . G^* phi); non-commutative."""
    F = F.phi if isinstance(F, Symbol) else F
    return apply_S(_as_symbol(phi), F, K=K)


def radial_symbol(lam: float, n: int, m_values, zw, t: float = 0.5) -> np.ndarray:
    """G_t(m(H)) through its Laguerre series.

    phi = c_inv p_{2t}^{-1} sum_k m_k e^{-2t(2k+n)|lambda|} phi_k, with
    ``m_values[k] = m((2k+n)|lambda|)`` and phi_k the dilated Laguerre functions.
    """
    params = KernelParams(lam, t, n)
    zw = _points(zw, n)
    L = abs(lam)
    total = np.zeros(len(zw), dtype=complex)
    for k, m in enumerate(m_values):
        total += m * math.exp(-2.0 * t * (2 * k + n) * L) * laguerre_special_hermite(params, k, zw)
    return inversion_factor(n, lam) * total / heat_kernel(params.at_time(2.0 * t), zw)


# boundedness


@dataclass
class NormTrace:
    """Spectral norms of truncated multipliers along increasing truncation levels."""

    K_list: tuple[int, ...]
    norms: tuple[float, ...]
    skipped: tuple[int, ...] = ()
    verdict: str = "inconclusive"

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.K_list, self.K_list[1:])):
            raise ValueError("truncation levels must increase strictly")

    @property
    def admissible(self) -> list[tuple[int, float]]:
        return [(K, v) for K, v in zip(self.K_list, self.norms) if np.isfinite(v)]

    @property
    def plateau_value(self) -> float:
        adm = self.admissible
        return adm[-1][1] if adm else float("nan")

    def growth_ratios(self) -> list[float]:
        vals = [v for _, v in self.admissible]
        return [b / a if a > 0 else float("inf") for a, b in zip(vals, vals[1:])]


def _classify(norms: Sequence[float]) -> str:
    vals = [v for v in norms if np.isfinite(v)]
    if len(vals) < 2:
        return "inconclusive"
    ratios = [b / a if a > 0 else float("inf") for a, b in zip(vals, vals[1:])]
    if abs(vals[-1] - vals[-2]) <= PLATEAU_TOL * max(vals[-2], 1e-300):
        return "bounded-consistent"
    if all(r > GROWTH_FACTOR for r in ratios):
        return "divergent"
    return "inconclusive"


def boundedness_diagnostic(phi, K_list: Sequence[int] = (8, 12, 16, 20)) -> NormTrace:
    """Spectral norms of G^* phi on the blocks |alpha| <= K for K in ``K_list``.

    Verdict "bounded-consistent" when the last two admissible levels differ by
    less than 5%, "divergent" when every step grows by more than 25%.
    Levels rejected by the adjoint guard are reported as skipped.
    """
    phi = phi.phi if isinstance(phi, Symbol) else phi
    norms, skipped = [], []
    for K in K_list:
        try:
            norms.append(float(np.linalg.norm(phi.operator(K), 2)))
        except AdjointGuardError:
            norms.append(float("nan"))
            skipped.append(K)
    return NormTrace(tuple(K_list), tuple(norms), tuple(skipped), _classify(norms))


# U(1) action (n = 1) and U(n) bilinear forms


def u_action(sigma, zw) -> np.ndarray:
    """sigma . (z, w) = (alpha z - beta w, beta z + alpha w) for sigma = alpha + i beta in U(n)."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=complex))
    n = sigma.shape[0]
    zw = _points(zw, n)
    al, be = sigma.real, sigma.imag
    z, w = zw[:, :n], zw[:, n:]
    return np.concatenate([z @ al.T - w @ be.T, z @ be.T + w @ al.T], axis=1)


def bilinear_forms(zw, ab, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """B1 = z.conj a + w.conj b, B2 = w.conj a - z.conj b and Q = Im(z.conj w)."""
    zw, ab = _points(zw, n), _points(ab, n)
    z, w = zw[:, :n], zw[:, n:]
    a, b = np.conj(ab[:, :n]), np.conj(ab[:, n:])
    B1 = np.sum(z * a + w * b, axis=1)
    B2 = np.sum(w * a - z * b, axis=1)
    Q = np.sum(z * np.conj(w), axis=1).imag
    return B1, B2, Q


def _require_n1(F: FockElement) -> None:
    if F.n != 1:
        raise ValueError("rotation averages are implemented for n = 1 only")


def rotate(F: FockElement, theta: float) -> FockElement:
    """R_sigma F(z, w) = F(sigma^{-1} . (z, w)) for sigma = e^{i theta} (n = 1).

    On the operator side this is M -> D M D^* with D = diag(e^{i sgn(lambda) k theta}).
    """
    _require_n1(F)
    inv = np.exp(-1j * theta)
    ev = lambda pts: F(u_action(inv, pts))
    M = None
    if F.M is not None:
        d = np.exp(1j * np.sign(F.lam) * F.basis.degrees * theta)
        M = d[:, None] * F.M * np.conj(d)[None, :]
    return F.derive(ev, M=M, coefficients=None, label=f"R({F.label})")


def character(delta: DeltaIndex, theta) -> np.ndarray:
    """chi_delta(e^{i theta}) = e^{-i p theta} for (p, 0) and e^{i q theta} for (0, q)."""
    return np.exp(1j * (delta.q - delta.p) * np.asarray(theta))


def _charge_mask(F: FockElement, delta: DeltaIndex) -> np.ndarray:
    deg = F.basis.degrees
    return np.sign(F.lam) * (deg[:, None] - deg[None, :]) == (delta.q - delta.p)


def delta_component(phi: FockElement, delta: DeltaIndex, nodes: int = 64) -> FockElement:
    """phi_delta = (2 pi)^{-1} int R_sigma phi chi_delta(sigma^{-1}) d theta, 64-point trapezoid."""
    _require_n1(phi)
    delta.check(1)
    thetas = 2.0 * math.pi * np.arange(nodes) / nodes
    weights = character(delta, -thetas) / nodes

    def ev(pts):
        pts = _points(pts, 1)
        out = np.zeros(len(pts), dtype=complex)
        for th, c in zip(thetas, weights):
            out += c * phi(u_action(np.exp(-1j * th), pts))
        return out

    M = None if phi.M is None else np.where(_charge_mask(phi, delta), phi.M, 0)
    return phi.derive(ev, M=M, coefficients=None, label=f"{phi.label}_delta")


def radialize(phi: FockElement, nodes: int = 64) -> FockElement:
    """phi^# = average of R_sigma phi; on the operator side M^# = sum_k P_k M P_k."""
    return _relabel(delta_component(phi, DeltaIndex(0, 0), nodes), f"{phi.label}^#")


def _relabel(F: FockElement, label: str) -> FockElement:
    F.label = label
    return F


# Geller basis


def _dim_level(n: int, k: int) -> int:
    return math.comb(k + n - 1, n - 1)


def ok_inner(basis: HermiteBasis, T: np.ndarray, S: np.ndarray, k: int) -> complex:
    """(T, S)_k = [k!(n-1)!/(k+n-1)!] sum_{|alpha|=k} (T Phi_alpha, S Phi_alpha)."""
    idx = basis.level(k)
    return complex(np.sum(np.conj(S[:, idx]) * T[:, idx])) / _dim_level(basis.n, k)


def _weyl_delta(basis: HermiteBasis, delta: DeltaIndex) -> np.ndarray:
    if basis.n == 1:
        delta.check(1)
    return weyl_correspondence_monomial(basis, delta.p, delta.q)


def geller_constant(basis: HermiteBasis, k: int, delta: DeltaIndex) -> float:
    """C_delta((2k+n)|lambda|) from (C_delta)^2 = (W(P^delta), W(P^delta))_k."""
    W = _weyl_delta(basis, delta)
    return math.sqrt(ok_inner(basis, W, W, k).real)


def _lowering(delta: DeltaIndex, lam: float) -> tuple[int, int]:
    """(lowering, raising) degrees of W(P^delta); lambda < 0 exchanges them."""
    return (delta.p, delta.q) if lam > 0 else (delta.q, delta.p)


def geller_gamma_ratio(n: int, k: int, delta: DeltaIndex, lam: float = 1.0) -> float:
    """C(k+1)^2 / C(k)^2 from the closed Gamma-function form (prefactor cancels)."""
    p, q = _lowering(delta, lam)
    return math.exp(
        gammaln(k + 1 + n + q) + gammaln(k - p + 1) + gammaln(k + 2) + gammaln(k + n)
        - gammaln(k + n + q) - gammaln(k - p + 2) - gammaln(k + 1) - gammaln(k + 1 + n)
    )


def geller_basis(basis: HermiteBasis, k: int, delta: DeltaIndex) -> tuple[np.ndarray, bool]:
    """HS-normalized S_{k}^delta = W(P^delta) P_k / (sqrt(dim E_k) C_delta).

    Returns ``(S, ok)``; ``ok`` is False (and S = 0) when k is below the
    lowering degree (p for lambda > 0, q for lambda < 0), where W(P^delta) P_k
    vanishes.
    """
    if k < _lowering(delta, basis.lam)[0] or k > basis.K:
        return np.zeros((basis.d, basis.d), dtype=complex), False
    W = _weyl_delta(basis, delta) @ spectral_projection(basis, k)
    C = geller_constant(basis, k, delta)
    if C == 0:
        return np.zeros((basis.d, basis.d), dtype=complex), False
    return W / (math.sqrt(_dim_level(basis.n, k)) * C), True


def T_j_delta(basis: HermiteBasis, T: np.ndarray, delta: DeltaIndex, margin: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """T^delta = sum_{p <= k} C^{-2} (T, W(P^delta))_k P_k over admissible k.

    Levels within ``margin`` (default p + q) of the truncation are dropped,
    since the ladder products lose mass there. Returns the diagonal operator
    and its per-level coefficients.
    """
    margin = delta.p + delta.q if margin is None else margin
    W = _weyl_delta(basis, delta)
    coeffs = np.zeros(basis.K + 1, dtype=complex)
    out = np.zeros((basis.d, basis.d), dtype=complex)
    for k in range(_lowering(delta, basis.lam)[0], basis.K - margin + 1):
        C2 = ok_inner(basis, W, W, k).real
        if C2 <= 0:
            continue
        coeffs[k] = ok_inner(basis, T, W, k) / C2
        out += coeffs[k] * spectral_projection(basis, k)
    return out, coeffs


@dataclass
class WeightBound:
    delta: DeltaIndex
    K_values: tuple[int, ...]
    norms: tuple[float, ...]

    @property
    def max(self) -> float:
        return max(self.norms)

    @property
    def spread(self) -> float:
        """Relative variation max/min - 1 across the truncation levels."""
        return max(self.norms) / min(self.norms) - 1.0

    @property
    def monotone_bounded(self) -> bool:
        return all(b >= a - 1e-12 for a, b in zip(self.norms, self.norms[1:])) and np.isfinite(self.max)


def weight_bound_check(n: int, lam: float, delta: DeltaIndex, K_values: Sequence[int] = (6, 8, 10, 12)) -> WeightBound:
    """Spectral norm of W(P^delta) H^{-(p+q)/2} on truncated bases."""
    norms = []
    r = 0.5 * (delta.p + delta.q)
    for K in K_values:
        basis = HermiteBasis(n, lam, K)
        W = _weyl_delta(basis, delta)
        norms.append(float(np.linalg.norm(W * basis.eigenvalues[None, :] ** -r, 2)))
    return WeightBound(delta, tuple(K_values), tuple(norms))


# uncertainty experiment


def _coherent(basis: HermiteBasis, x: float, u: float) -> np.ndarray:
    a = np.zeros(basis.n)
    b = np.zeros(basis.n)
    a[0], b[0] = x, u
    v = weyl_operator(basis, a, b)[:, 0]
    return v / np.linalg.norm(v)


def preset_matrix(name: str, basis: HermiteBasis) -> np.ndarray:
    """Named operator-side presets used by the experiments."""
    d = basis.d
    if name == "identity":
        return np.eye(d, dtype=complex)
    if name == "diag-m":
        k = basis.degrees
        return np.diag(3.0 * (-1.0) ** k / (k + 1)).astype(complex)
    if name == "rank-one":
        v = np.zeros(d, dtype=complex)
        v[0] = v[1] = 1 / math.sqrt(2)
        return 2.0 * np.outer(v, v.conj())
    if name == "rank-one-rotated":
        v = _coherent(basis, 0.6, 0.3)
        return np.outer(v, v.conj())
    if name == "laguerre-multiplier":
        return spectral_projection(basis, 2).astype(complex)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("identity", "diag-m", "rank-one", "rank-one-rotated", "laguerre-multiplier")


def pointwise_witness_ratio(basis: HermiteBasis, M: np.ndarray, Q: int = 32) -> float:
    """sup over a real grid of |g| / p_1, where g = U_lambda f *_lambda p_{1/2}, pi(f) = e^{-H/2} M.

    Uses g(x, u) = e^{-kappa r^2 / 2} c_inv tr(pi(i x, i u) e^{-H/2} M e^{-H/2}).
    """
    lam, n = basis.lam, basis.n
    S = hermite_semigroup(basis, 0.5)
    X = S @ M @ S
    grid = gauss_hermite_grid(lam, 2 * n, Q, scale=1.0)
    x = grid.nodes
    kap = coth_scale(lam, 1.0)
    r2 = np.sum(x * x, axis=1)
    g = np.exp(-0.5 * kap * r2) * inversion_factor(n, lam) * weyl_traces(basis, 1j * x, X)
    p1 = heat_kernel(KernelParams(lam, 1.0, n), x)
    return float(np.max(np.abs(g) / p1))


@dataclass
class UncertaintyReport:
    preset: str
    trace_phi: NormTrace
    trace_Uphi: NormTrace
    verdict: str
    op_norm: float
    witness_ratio: float
    spectral_C: tuple[float, ...] | None = None
    extra: dict = field(default_factory=dict)


def _verdict(a: NormTrace, b: NormTrace) -> str:
    pa = a.verdict == "bounded-consistent"
    pb = b.verdict == "bounded-consistent"
    if pa and pb:
        return "both-plateau"
    if pa != pb and (a.verdict == "divergent" or b.verdict == "divergent"):
        return "dichotomy"
    if a.verdict == b.verdict == "divergent":
        return "both-divergent"
    return "inconclusive"


def uncertainty_experiment(basis: HermiteBasis, M: np.ndarray, K_list: Sequence[int] = (8, 12, 16, 20), t: float = 0.5, preset: str = "custom") -> UncertaintyReport:
    """Norm traces of phi = G(M) and U phi, with the pointwise and spectral witnesses."""
    phi = gauss_bargmann(basis, M, t)
    Uphi = apply_U(phi)
    tr_phi = boundedness_diagnostic(phi, K_list)
    tr_U = boundedness_diagnostic(Uphi, K_list)
    commuting = np.allclose(M, np.diag(np.diag(M))) and _is_level_constant(basis, M)
    spectral = None
    if commuting:
        spectral = []
        for K in K_list:
            try:
                MU = Uphi.operator(K)
                spectral.append(float(np.max(np.abs(np.diag(MU))) ** 2))
            except AdjointGuardError:
                spectral.append(float("nan"))
        spectral = tuple(spectral)
    return UncertaintyReport(
        preset=preset,
        trace_phi=tr_phi,
        trace_Uphi=tr_U,
        verdict=_verdict(tr_phi, tr_U),
        op_norm=float(np.linalg.norm(M, 2)),
        witness_ratio=pointwise_witness_ratio(basis, M),
        spectral_C=spectral,
    )


def _is_level_constant(basis: HermiteBasis, M: np.ndarray) -> bool:
    diag = np.diag(M)
    return all(np.allclose(diag[basis.level(k)], diag[basis.level(k)][0]) for k in range(basis.K + 1))
