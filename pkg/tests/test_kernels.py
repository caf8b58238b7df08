import math

import numpy as np
import pytest
from scipy.special import eval_genlaguerre

from twisted_fock.hermite import HermiteBasis, gauss_hermite_grid, spectral_projection
from twisted_fock.kernels import (
    KernelParams,
    bergman_kernel,
    bergman_weight,
    coth_scale,
    fock_kernel,
    fock_weight,
    heat_kernel,
    laguerre,
    laguerre_special_hermite,
)
from twisted_fock.weyl import GridFunction, plancherel_factor, twisted_convolution, weyl_transform

ZW = np.array([0.3 + 0.2j, -0.4 + 0.1j])
AB = np.array([0.1 - 0.5j, 0.2 + 0.3j])


class TestParams:
    def test_rejects_zero_lambda(self):
        with pytest.raises(ValueError, match="lambda"):
            KernelParams(0.0, 0.5)

    def test_rejects_nonpositive_t(self):
        with pytest.raises(ValueError):
            KernelParams(1.0, 0.0)

    def test_coth_scale_small_argument(self):
        # the series branch joins the closed form continuously
        assert coth_scale(1e-8, 0.5) == pytest.approx(2.0, rel=1e-15)
        assert coth_scale(2e-4, 0.5) == pytest.approx(2e-4 / math.tanh(1e-4), rel=1e-12)
        assert coth_scale(-0.7, 0.5) == coth_scale(0.7, 0.5)


class TestHeatKernel:
    def test_closed_form(self):
        y, v, lam, t = 0.3, -0.4, 1.0, 0.5
        expected = (lam / math.sinh(lam * t)) / (4 * math.pi) * math.exp(-lam / math.tanh(lam * t) * (y * y + v * v) / 4)
        assert heat_kernel(KernelParams(lam, t), np.array([y, v])) == pytest.approx(expected, rel=1e-14)
        assert heat_kernel(KernelParams(lam, t), np.array([y, v])) == pytest.approx(0.1333938818986669, rel=1e-14)

    def test_even_in_lambda(self):
        y = np.array([[0.2, 0.5, -0.1, 0.3]])
        assert heat_kernel(KernelParams(0.8, 0.4, 2), y) == pytest.approx(heat_kernel(KernelParams(-0.8, 0.4, 2), y))

    def test_euclidean_limit(self):
        y = np.array([0.7, -0.2])
        t = 0.3
        euclid = (4 * math.pi * t) ** -1 * math.exp(-np.sum(y * y) / (4 * t))
        assert heat_kernel(KernelParams(1e-9, t), y) == pytest.approx(euclid, rel=1e-12)

    @pytest.mark.parametrize("lam,t", [(1.0, 0.5), (-0.6, 1.2)])
    def test_total_mass(self, lam, t):
        # integral over R^2 is 1 / cosh(lambda t)
        g = gauss_hermite_grid(lam, 2, 40, scale=1.0)
        mass = g.integrate(heat_kernel(KernelParams(lam, t), g.nodes))
        assert mass == pytest.approx(1 / math.cosh(lam * t), rel=1e-10)

    def test_separate_arguments(self):
        P = KernelParams(1.0, 0.5, 2)
        y, v = np.array([0.1, 0.2]), np.array([-0.3, 0.4])
        assert heat_kernel(P, y, v) == pytest.approx(heat_kernel(P, np.concatenate([y, v])))

    def test_bad_trailing_dimension(self):
        with pytest.raises(ValueError):
            heat_kernel(KernelParams(1.0, 0.5, 2), np.zeros(3))

    def test_semigroup(self):
        lam = 1.0
        g = gauss_hermite_grid(lam, 2, 40)
        pt = GridFunction.from_function(g, lambda y: heat_kernel(KernelParams(lam, 0.4), y))
        ps = GridFunction.from_function(g, lambda y: heat_kernel(KernelParams(lam, 0.3), y))
        pts = np.array([[0.2, -0.3], [1.0, 0.5], [-0.8, 1.2]])
        lhs = twisted_convolution(pt, ps, lam).at(pts)
        np.testing.assert_allclose(lhs, heat_kernel(KernelParams(lam, 0.7), pts), atol=1e-8)


class TestFockKernels:
    P = KernelParams(1.0, 0.5, 1)

    def test_frozen_values(self):
        assert fock_weight(self.P, ZW) == pytest.approx(0.7356834905026757, rel=1e-14)
        assert bergman_weight(self.P, ZW) == pytest.approx(0.2272235346947182, rel=1e-14)
        assert fock_kernel(self.P, ZW, AB) == pytest.approx(0.8210680336158658 + 0.2616718630333178j, rel=1e-14)

    def test_weight_at_origin(self):
        assert fock_weight(self.P, np.zeros(2, complex)) == 1.0

    def test_fock_kernel_hermitian(self):
        k1 = fock_kernel(self.P, ZW, AB)
        k2 = fock_kernel(self.P, AB, ZW)
        assert k1 == pytest.approx(np.conj(k2), rel=1e-14)

    def test_fock_kernel_diagonal_positive(self):
        k = fock_kernel(KernelParams(-0.7, 0.5, 2), np.r_[ZW, AB], np.r_[ZW, AB])
        assert abs(k.imag) < 1e-14 and k.real > 0

    def test_bergman_kernel_hermitian(self):
        P = KernelParams(-0.8, 0.3, 2)
        zw, ab = np.r_[ZW, AB], np.r_[AB, -ZW]
        assert bergman_kernel(P, zw, ab) == pytest.approx(np.conj(bergman_kernel(P, ab, zw)), rel=1e-13)

    def test_lambda_zero_first_order(self):
        # K / limit - 1 = -i lambda/2 (w.conj a - z.conj b) + O(lambda^2)
        lam, t = 1e-6, 0.5
        K = fock_kernel(KernelParams(lam, t), ZW, AB)
        limit = np.exp(np.sum(ZW * np.conj(AB)) / (4 * t))
        B2 = ZW[1] * np.conj(AB[0]) - ZW[0] * np.conj(AB[1])
        assert abs(K / limit - 1 + 0.5j * lam * B2) < 1e-12
        assert abs(K / limit - 1) < 1e-6


class TestLaguerre:
    @pytest.mark.parametrize("k,alpha", [(0, 0.0), (1, 0.0), (3, 1.0), (7, 2.0)])
    def test_against_scipy(self, k, alpha):
        x = np.linspace(0, 6, 9)
        np.testing.assert_allclose(laguerre(k, alpha, x), eval_genlaguerre(k, alpha, x), rtol=1e-12, atol=1e-12)

    def test_frozen(self):
        assert laguerre(3, 1.0, 0.7) == pytest.approx(0.7228333333333333, rel=1e-15)

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            laguerre_special_hermite(KernelParams(1.0, 0.5), -1, np.zeros(2))

    @pytest.mark.parametrize("k", [0, 2])
    def test_weyl_transform_is_projection(self, k):
        lam = 1.0
        B = HermiteBasis(1, lam, 12)
        g = gauss_hermite_grid(lam, 2, 48, scale=math.sqrt(2.0))
        f = GridFunction.from_function(g, lambda y: laguerre_special_hermite(KernelParams(lam, 0.5), k, y))
        i = B.interior(4)
        T = weyl_transform(B, f)
        target = plancherel_factor(1, lam) * spectral_projection(B, k)
        assert np.max(np.abs((T - target)[np.ix_(i, i)])) < 1e-8
