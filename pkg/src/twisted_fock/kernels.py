"""Closed-form heat kernels, Bergman/Fock weights and reproducing kernels.

Points of C^{2n} are complex arrays whose last axis holds (z_1..z_n, w_1..w_n);
points of R^{2n} use the same layout with real entries. Squares such as
``z^2 + w^2`` are holomorphic sums (no modulus) so every kernel extends to an
entire function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelParams",
    "coth_scale",
    "heat_kernel",
    "fock_weight",
    "bergman_weight",
    "bergman_kernel",
    "fock_kernel",
    "laguerre",
    "laguerre_special_hermite",
]


@dataclass(frozen=True)
class KernelParams:
    lam: float
    t: float
    n: int = 1

    def __post_init__(self):
        if self.lam == 0 or not math.isfinite(self.lam):
            raise ValueError("lambda must be nonzero")
        if not self.t > 0:
            raise ValueError("t must be positive")

    def at_time(self, t: float) -> "KernelParams":
        return KernelParams(self.lam, t, self.n)


def coth_scale(lam: float, t: float) -> float:
    """lambda coth(lambda t), even in lambda, tending to 1/t as lambda -> 0."""
    x = lam * t
    if abs(x) < 1e-8:
        return 1.0 / t + lam * x / 3.0
    return lam / math.tanh(x)


def _sinh_ratio(lam: float, t: float) -> float:
    """lambda / sinh(lambda t)."""
    x = lam * t
    if abs(x) < 1e-8:
        return 1.0 / t
    return lam / math.sinh(x)


def _pairs(y, v, n):
    y = np.asarray(y)
    if v is None:
        if y.shape[-1] != 2 * n:
            raise ValueError(f"expected trailing dimension 2n = {2 * n}")
        return y[..., :n], y[..., n:]
    return y, np.asarray(v)


def _sq(a):
    return np.sum(a * a, axis=-1)


def heat_kernel(params: KernelParams, y, v=None):
    """p_t^lambda(y, v) = (4 pi)^{-n} (lambda / sinh lambda t)^n exp(-lambda coth(lambda t)(y^2 + v^2)/4).

    ``y`` may hold full (y, v) points when ``v`` is omitted.
    """
    n = params.n
    y, v = _pairs(y, v, n)
    pref = (4.0 * math.pi) ** -n * _sinh_ratio(params.lam, params.t) ** n
    return pref * np.exp(-0.25 * coth_scale(params.lam, params.t) * (_sq(y) + _sq(v)))


def _im_zw(z, w):
    return np.sum(z * np.conj(w), axis=-1).imag


def fock_weight(params: KernelParams, zw):
    """w_t^lambda(z, w) = exp(lambda Im(z.conj w)) exp(-lambda coth(2 t lambda)(|z|^2 + |w|^2)/2)."""
    z, w = _pairs(zw, None, params.n)
    c2 = coth_scale(params.lam, 2.0 * params.t)
    return np.exp(params.lam * _im_zw(z, w) - 0.5 * c2 * (_sq(np.abs(z)) + _sq(np.abs(w))))


def bergman_weight(params: KernelParams, zw):
    """W_t^lambda(z, w) = 4^n exp(lambda Im(z.conj w)) p_{2t}^lambda(2 Im z, 2 Im w)."""
    z, w = _pairs(zw, None, params.n)
    p2t = heat_kernel(params.at_time(2.0 * params.t), 2.0 * z.imag, 2.0 * w.imag)
    return 4.0 ** params.n * np.exp(params.lam * _im_zw(z, w)) * p2t


def _twist(lam, z, w, a, b):
    """exp(-i lambda/2 (w.conj a - z.conj b))."""
    return np.exp(-0.5j * lam * (np.sum(w * np.conj(a), -1) - np.sum(z * np.conj(b), -1)))


def bergman_kernel(params: KernelParams, zw, ab):
    """K_t^lambda((z, w), conj(a, b)) = p_{2t}(z - conj a, w - conj b) exp(-i lambda/2 (w.conj a - z.conj b))."""
    n = params.n
    z, w = _pairs(np.asarray(zw, dtype=complex), None, n)
    a, b = _pairs(np.asarray(ab, dtype=complex), None, n)
    p2t = heat_kernel(params.at_time(2.0 * params.t), z - np.conj(a), w - np.conj(b))
    return p2t * _twist(params.lam, z, w, a, b)


def fock_kernel(params: KernelParams, zw, ab):
    """exp(lambda coth(2 t lambda)(z.conj a + w.conj b)/2) exp(-i lambda/2 (w.conj a - z.conj b))."""
    n = params.n
    z, w = _pairs(np.asarray(zw, dtype=complex), None, n)
    a, b = _pairs(np.asarray(ab, dtype=complex), None, n)
    c2 = coth_scale(params.lam, 2.0 * params.t)
    hol = np.sum(z * np.conj(a), -1) + np.sum(w * np.conj(b), -1)
    return np.exp(0.5 * c2 * hol) * _twist(params.lam, z, w, a, b)


def laguerre(k: int, alpha: float, x):
    """Generalised Laguerre polynomial L_k^alpha(x) by forward recurrence."""
    x = np.asarray(x)
    prev = np.ones_like(x, dtype=np.result_type(x, float))
    if k == 0:
        return prev
    cur = 1.0 + alpha - x
    for j in range(1, k):
        prev, cur = cur, ((2 * j + 1 + alpha - x) * cur - (j + alpha) * prev) / (j + 1)
    return cur


def laguerre_special_hermite(params: KernelParams, k: int, zw):
    """phi_{k,lambda}^{n-1} = L_k^{n-1}(|lambda| r^2 / 2) exp(-|lambda| r^2 / 4), r^2 = z^2 + w^2."""
    if k < 0:
        raise ValueError("k must be >= 0")
    zw = np.asarray(zw)
    r2 = np.sum(zw * zw, axis=-1)
    L = abs(params.lam)
    return laguerre(k, params.n - 1, 0.5 * L * r2) * np.exp(-0.25 * L * r2)
