import math

import numpy as np
import pytest

import twisted_fock.fock as fock
from twisted_fock.fock import (
    AdjointGuardError,
    FT_SIGN,
    U_lambda,
    U_lambda_operator,
    apply_U,
    apply_U_star,
    bergman_norm,
    constant_element,
    fock_inner,
    fock_norm,
    gauss_bargmann,
    gauss_bargmann_adjoint,
    isometry_normalizer,
    make_cgrid,
    reproduce,
    reproducing_normalizer,
    segal_bargmann,
    segal_bargmann_direct,
)
from twisted_fock.hermite import HermiteBasis, gauss_hermite_grid, hermite_semigroup
from twisted_fock.kernels import KernelParams, coth_scale, fock_weight, heat_kernel
from twisted_fock.weyl import GridFunction

T = 0.5
ZW = np.array([[0.3 + 0.2j, -0.4 + 0.1j], [-0.1 - 0.3j, 0.5 + 0.0j], [0.2j, 0.25]])


def _block(B, K, seed):
    rng = np.random.default_rng(seed)
    idx = np.flatnonzero(B.degrees <= K)
    M = np.zeros((B.d, B.d), dtype=complex)
    M[np.ix_(idx, idx)] = rng.normal(size=(len(idx), len(idx))) + 1j * rng.normal(size=(len(idx), len(idx)))
    return M / np.linalg.norm(M, 2)


def _gauss_poly(lam, coeffs, Q=40):
    g = gauss_hermite_grid(lam, 2, Q)
    c0, c1, c2 = coeffs
    fn = lambda p: (c0 + c1 * p[:, 0] + c2 * p[:, 0] * p[:, 1] ** 2) * np.exp(-0.5 * abs(lam) * np.sum(p * p, axis=1))
    return GridFunction.from_function(g, fn)


@pytest.fixture(scope="module", params=[1.0, -0.7])
def env(request):
    lam = request.param
    return lam, HermiteBasis(1, lam, 20), make_cgrid(lam, T, 1, Q=24)


class TestNormalizers:
    def test_frozen(self):
        assert isometry_normalizer(1.0, 0.5, 1) == pytest.approx(128.152299708541, rel=1e-14)
        assert reproducing_normalizer(1.0, 0.5, 1) == pytest.approx(54.52355749877813, rel=1e-14)
        assert isometry_normalizer(-0.7, 0.3, 2) == pytest.approx(169.8427874969221, rel=1e-14)

    def test_reproducing_normalizer_is_weight_mass(self, env):
        lam, B, cg = env
        mass = cg.integrate(fock_weight(KernelParams(lam, T), cg.points)).real
        assert mass == pytest.approx(reproducing_normalizer(lam, T, 1), rel=1e-10)


class TestGaussBargmann:
    def test_identity_is_constant(self, env):
        lam, B, _ = env
        np.testing.assert_allclose(gauss_bargmann(B, np.eye(B.d), T)(ZW), 1.0, atol=1e-12)
        np.testing.assert_allclose(constant_element(B, 2.5, T)(ZW), 2.5)

    def test_vacuum_closed_form(self, env):
        # G(E_00) = (|lambda|/2pi) e^{-2t|lambda|} exp(-|lambda|(z^2+w^2)/4) / p_{2t}
        lam, B, _ = env
        M = np.zeros((B.d, B.d))
        M[0, 0] = 1
        L = abs(lam)
        expected = L / (2 * math.pi) * math.exp(-2 * T * L) * np.exp(-L * np.sum(ZW * ZW, axis=1) / 4)
        expected /= heat_kernel(KernelParams(lam, 2 * T), ZW)
        np.testing.assert_allclose(gauss_bargmann(B, M, T)(ZW), expected, rtol=1e-12)

    def test_frozen_value(self):
        B = HermiteBasis(1, 1.0, 10)
        M = np.zeros((B.d, B.d))
        M[1, 0], M[0, 2] = 1.0, 0.5
        val = gauss_bargmann(B, M)(ZW[:1])[0]
        assert val == pytest.approx(0.1373642145454626 - 0.08927880453722857j, rel=1e-13)

    def test_holomorphic(self, env):
        lam, B, _ = env
        F = gauss_bargmann(B, _block(B, 4, 1), T)
        h = 1e-5
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = h
            dx = (F(ZW + e) - F(ZW - e)) / (2 * h)
            dy = (F(ZW + 1j * e) - F(ZW - 1j * e)) / (2j * h)
            np.testing.assert_allclose(dx, dy, atol=1e-8)

    def test_isometry(self, env):
        lam, B, cg = env
        S = hermite_semigroup(B, T)
        for seed in range(3):
            M = _block(B, 5, seed)
            assert fock_norm(gauss_bargmann(B, M, T), cg) == pytest.approx(np.sum(np.abs(S @ M) ** 2), rel=1e-6)

    def test_inner_product(self, env):
        lam, B, cg = env
        S = hermite_semigroup(B, T)
        M1, M2 = _block(B, 4, 3), _block(B, 4, 4)
        ip = fock_inner(gauss_bargmann(B, M1, T), gauss_bargmann(B, M2, T), cg)
        assert ip == pytest.approx(np.trace((S @ M1) @ (S @ M2).conj().T), rel=1e-6)

    def test_reproducing(self, env):
        lam, B, cg = env
        F = gauss_bargmann(B, _block(B, 5, 5), T)
        np.testing.assert_allclose(reproduce(F, ZW, cg), F(ZW), rtol=1e-6)

    def test_adjoint_recovers_M(self, env):
        lam, B, _ = env
        M = _block(B, 4, 6)
        F = gauss_bargmann(B, M, T)
        F_eval = F.derive(F.evaluator, M=None)
        np.testing.assert_allclose(gauss_bargmann_adjoint(F_eval, 8), B.with_K(8).embed(B, M), atol=1e-6)

    def test_adjoint_guard(self, env):
        lam, B, _ = env
        F = gauss_bargmann(B, _block(B, 4, 7), T)
        with pytest.raises(AdjointGuardError):
            gauss_bargmann_adjoint(F.derive(F.evaluator, M=None), 20)

    def test_shape_check(self, env):
        lam, B, _ = env
        with pytest.raises(ValueError):
            gauss_bargmann(B, np.eye(3), T)

    def test_no_operator_data(self, env):
        lam, B, _ = env
        F = gauss_bargmann(B, np.eye(B.d), T)
        with pytest.raises(ValueError):
            F.derive(F.evaluator, M=None).onb_coefficients(4)


class TestBargmann:
    def test_trace_formula_matches_direct(self, env):
        lam, B, _ = env
        f = _gauss_poly(lam, [1.0, 0.4 - 0.2j, 0.3])
        np.testing.assert_allclose(segal_bargmann(B, f, T)(ZW), segal_bargmann_direct(f, lam, T, ZW), rtol=1e-8)

    def test_unitary(self, env):
        lam, B, cg = env
        f = _gauss_poly(lam, [0.5, 1.0, -0.2j])
        assert bergman_norm(segal_bargmann(B, f, T), lam, T, 1, cg) == pytest.approx(f.l2_norm_sq(), rel=1e-4)


class TestU:
    def test_pointwise_definition(self, env):
        lam, B, _ = env
        F = gauss_bargmann(B, _block(B, 4, 8), T)
        np.testing.assert_allclose(apply_U(F)(ZW), F(-1j * ZW), rtol=1e-12)
        np.testing.assert_allclose(apply_U_star(F)(ZW), F(1j * ZW), rtol=1e-12)

    def test_fourth_power_and_inverse(self, env):
        lam, B, _ = env
        F = gauss_bargmann(B, _block(B, 4, 9), T)
        np.testing.assert_allclose(apply_U(apply_U(apply_U(apply_U(F))))(ZW), F(ZW), rtol=1e-12)
        np.testing.assert_allclose(apply_U_star(apply_U(F))(ZW), F(ZW), rtol=1e-12)

    def test_exact_operator_vs_quadrature(self, env):
        lam, B, _ = env
        UF = apply_U(gauss_bargmann(B, _block(B, 4, 10), T))
        quad = gauss_bargmann_adjoint(UF.derive(UF.evaluator, M=None, coefficients=None), 8)
        np.testing.assert_allclose(UF.operator(8), quad, atol=1e-6)

    def test_exact_operator_reproduces_values(self):
        B = HermiteBasis(1, 1.0, 40)
        M = B.embed(HermiteBasis(1, 1.0, 20), _block(HermiteBasis(1, 1.0, 20), 3, 11))
        UF = apply_U(gauss_bargmann(B, M, T))
        G = gauss_bargmann(B.with_K(26), UF.operator(26), T)
        z = ZW * 0.5
        np.testing.assert_allclose(G(z), UF(z), rtol=1e-8)

    def test_operator_quadrature_form(self):
        B = HermiteBasis(1, 1.0, 12)
        M = _block(B, 3, 12)
        # quadrature error is amplified by e^{tH}: compare on the levels <= 3
        exact = apply_U(gauss_bargmann(B, M, T)).operator(3)
        quad = B.with_K(3).embed(B, U_lambda_operator(B, M, T))
        np.testing.assert_allclose(quad, exact, atol=1e-4)


class TestULambda:
    def test_sign_constant(self):
        assert FT_SIGN == -1

    @pytest.mark.parametrize("lam", [1.0, -0.7])
    def test_fixes_heat_kernel(self, lam):
        g = gauss_hermite_grid(lam, 2, 40)
        p = GridFunction.from_function(g, lambda y: heat_kernel(KernelParams(lam, T), y))
        x = np.array([[0.2, -0.4], [1.0, 0.7]])
        np.testing.assert_allclose(U_lambda(p, lam, T).at(x), p.at(x), atol=1e-10)

    def _intertwining_error(self, lam):
        B = HermiteBasis(1, lam, 20)
        f = _gauss_poly(lam, [0.3, 1.0, 0.5j])
        x = np.array([[0.2, -0.4], [0.5, 0.1], [-0.3, 0.3]])
        lhs = segal_bargmann_direct(U_lambda(f, lam, T), lam, T, x)
        kap = coth_scale(lam, 2 * T)
        rhs = np.exp(-0.5 * kap * np.sum(x * x, axis=1)) * segal_bargmann(B, f, T)(-1j * x)
        return np.max(np.abs(lhs - rhs))

    @pytest.mark.parametrize("lam", [1.0, -0.7])
    def test_intertwining(self, lam):
        assert self._intertwining_error(lam) < 1e-8

    def test_opposite_sign_breaks_intertwining(self, monkeypatch):
        monkeypatch.setattr(fock, "FT_SIGN", 1)
        assert self._intertwining_error(1.0) > 1e-2
