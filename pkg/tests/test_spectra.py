"""Spectral matrix, Lyapunov oracle, projections and output covariances."""

import numpy as np
import pytest

from kerrcoupler import (CouplerParams, NonHermitianResidual,
                         PhaseSpacePoint, UnstablePoint, linearize,
                         newton_refine, output_covariance,
                         quadrature_projection, relax_to_steady_state,
                         spectral_integral, spectral_matrix,
                         static_covariance)
from kerrcoupler.model import DiffusionMatrix, DriftMatrix
from kerrcoupler.spectra import (LinearizedModel, SpectralMatrix,
                                 output_covariance_grid, quadrature_rotation,
                                 spectral_matrices)

from conftest import draw_stable_regime, reference_params


def toy_model(a: np.ndarray, d: np.ndarray) -> LinearizedModel:
    """Model wrapper around hand-built matrices for oracle tests."""
    params = CouplerParams(gamma1=1.0, gamma2=1.0, delta1=0.0, delta2=0.0,
                           eps1=0.0, eps2=0.0, chi1=0.0, chi2=0.0,
                           coupling_j=0.0)
    return LinearizedModel(params=params, steady=PhaseSpacePoint.origin(),
                           a=DriftMatrix(a=a), d=DiffusionMatrix(d=d))


class TestSpectralMatrix:
    def test_scalar_ou_spectrum(self):
        gamma, diff = 1.7, 0.8
        model = toy_model(gamma * np.eye(4), diff * np.eye(4) + 0j)
        for omega in (0.0, 0.5, 3.0):
            s = spectral_matrix(model, omega).s
            expect = diff / (gamma ** 2 + omega ** 2) * np.eye(4)
            assert np.allclose(s, expect, rtol=1e-13, atol=1e-16)

    def test_zero_diffusion(self):
        model = toy_model(np.eye(4), np.zeros((4, 4), complex))
        assert np.all(spectral_matrix(model, 2.0).s == 0)

    def test_matches_explicit_inverses(self, fig2_model):
        a = fig2_model.a.a
        d = fig2_model.d.d
        for omega in (0.0, 1.3, 25.0):
            s = spectral_matrix(fig2_model, omega).s
            direct = np.linalg.inv(a + 1j * omega * np.eye(4)) @ d \
                @ np.linalg.inv(a.T - 1j * omega * np.eye(4))
            assert np.allclose(s, direct, rtol=1e-10, atol=1e-18)

    def test_batch_matches_scalar(self, fig2_model):
        omegas = np.array([0.0, 2.0, 11.0])
        batch = spectral_matrices(fig2_model.a.a, fig2_model.d.d, omegas)
        for k, w in enumerate(omegas):
            assert np.array_equal(batch[k], spectral_matrix(fig2_model,
                                                            w).s)

    def test_transpose_frequency_identity(self, fig2_model):
        # S(-w) equals S(w)^T for the defining product
        s_plus = spectral_matrix(fig2_model, 3.7).s
        s_minus = spectral_matrix(fig2_model, -3.7).s
        assert np.allclose(s_minus, s_plus.T, rtol=1e-12, atol=1e-18)


class TestStaticCovariance:
    def test_scalar_ou(self):
        gamma, diff = 2.0, 1.2
        model = toy_model(gamma * np.eye(4), diff * np.eye(4) + 0j)
        expect = diff / (2.0 * gamma) * np.eye(4)
        assert np.allclose(static_covariance(model), expect, rtol=1e-13)

    def test_zero_diffusion(self):
        model = toy_model(np.eye(4), np.zeros((4, 4), complex))
        assert np.allclose(static_covariance(model), 0.0, atol=1e-15)

    def test_solves_lyapunov_equation(self, fig2_model):
        c = static_covariance(fig2_model)
        a = fig2_model.a.a
        resid = a @ c + c @ a.T - fig2_model.d.d
        assert np.abs(resid).max() <= 1e-12 * (1.0 + np.abs(c).max())

    def test_frequency_integral_oracle(self, fig2_model):
        c = static_covariance(fig2_model)
        total = spectral_integral(fig2_model, rtol=1e-5)
        err = np.abs(total - c).max() / np.abs(c).max()
        assert err < 1e-3

    def test_frequency_integral_random_regimes(self):
        rng = np.random.default_rng(41)
        for _ in range(3):
            params, steady = draw_stable_regime(rng)
            model = linearize(params, steady.point)
            c = static_covariance(model)
            total = spectral_integral(model, rtol=1e-5)
            ref = np.abs(c).max()
            if ref == 0.0:
                continue
            assert np.abs(total - c).max() / ref < 1e-3


class TestLinearize:
    def test_linear_case(self):
        params = CouplerParams(gamma1=1.0, gamma2=2.0, delta1=0.3,
                               delta2=-0.1, eps1=5.0, eps2=1.0, chi1=0.0,
                               chi2=0.0, coupling_j=0.8)
        steady = relax_to_steady_state(params)
        model = linearize(params, steady.point)
        assert np.all(model.d.d == 0)
        assert (model.fluctuation_eigenvalues().real < 0).all()

    def test_rejects_unstable_fixed_point(self):
        # bistable single Kerr cavity: the middle branch is a saddle
        params = CouplerParams(gamma1=1.0, gamma2=1.0, delta1=-3.0,
                               delta2=0.0, eps1=np.sqrt(20.0), eps2=0.0,
                               chi1=0.1, chi2=0.0, coupling_j=0.0)
        # analytic middle-branch seed: |a1|^2 = 10 with phase from the
        # linear response at the shifted detuning
        from kerrcoupler import jacobian
        seed = PhaseSpacePoint.on_manifold(np.sqrt(20.0) / (1.0 - 1.0j), 0.0)
        point = newton_refine(params, seed, tol=1e-12)
        eig = np.linalg.eigvals(jacobian(params, point))
        assert eig.real.max() > 0  # genuinely unstable
        with pytest.raises(UnstablePoint):
            linearize(params, point)


class TestQuadratureProjection:
    def test_zero_spectrum(self):
        s = SpectralMatrix(omega=0.0, s=np.zeros((4, 4), complex))
        assert np.all(quadrature_projection(s, 0.3) == 0)

    def test_pi_shift_invariance(self, fig2_model):
        s = spectral_matrix(fig2_model, 1.1)
        p0 = quadrature_projection(s, 0.4)
        p1 = quadrature_projection(s, 0.4 + np.pi)
        assert np.allclose(p0, p1, rtol=1e-12, atol=1e-14)

    def test_half_pi_shift_swaps_quadratures(self, fig2_model):
        s = spectral_matrix(fig2_model, 0.7)
        p0 = quadrature_projection(s, 0.25)
        p1 = quadrature_projection(s, 0.25 + np.pi / 2.0)
        # new X is the old Y, new Y is the old -X, per mode
        r = np.zeros((4, 4))
        r[0, 1] = 1.0
        r[1, 0] = -1.0
        r[2, 3] = 1.0
        r[3, 2] = -1.0
        assert np.allclose(p1, r @ p0 @ r.T, rtol=1e-11, atol=1e-13)

    def test_residual_guard_raises(self):
        s = SpectralMatrix(omega=0.0, s=1j * np.eye(4))
        with pytest.raises(NonHermitianResidual):
            quadrature_projection(s, 0.0)

    def test_output_is_real_symmetric(self, fig2_model):
        s = spectral_matrix(fig2_model, 2.2)
        p = quadrature_projection(s, 1.0)
        assert p.dtype == np.float64
        assert np.array_equal(p, p.T)


class TestOutputCovariance:
    def test_vacuum_is_identity_exactly(self):
        params = CouplerParams(gamma1=1.0, gamma2=3.0, delta1=0.2,
                               delta2=-0.5, eps1=30.0, eps2=10.0j, chi1=0.0,
                               chi2=0.0, coupling_j=2.0)
        steady = relax_to_steady_state(params)
        model = linearize(params, steady.point)
        for omega in (0.0, 1.0, 10.0):
            for theta in (0.0, 0.7, 2.0):
                v = output_covariance(model, omega, theta).v
                assert np.array_equal(v, np.eye(4))

    def test_grid_matches_scalar(self, fig2_model):
        omegas = np.array([0.0, 1.5, 8.0])
        thetas = np.array([0.1, 1.2])
        grid = output_covariance_grid(fig2_model, omegas, thetas)
        for i, w in enumerate(omegas):
            for j, t in enumerate(thetas):
                v = output_covariance(fig2_model, w, t).v
                assert np.allclose(grid[i, j], v, rtol=1e-12, atol=1e-14)

    def test_uncertainty_bound(self, fig2_model):
        omegas = np.linspace(0.0, 80.0, 25)
        thetas = np.linspace(0.0, np.pi, 12, endpoint=False)
        v = output_covariance_grid(fig2_model, omegas, thetas)
        assert np.all(v[..., 0, 0] >= 0)
        assert np.all(v[..., 2, 2] >= 0)
        assert np.all(v[..., 0, 0] * v[..., 1, 1] >= 1.0 - 1e-12)
        assert np.all(v[..., 2, 2] * v[..., 3, 3] >= 1.0 - 1e-12)

    def test_label_swap_permutes_output(self, fig2_model):
        params_sw = reference_params().swapped()
        steady_sw = relax_to_steady_state(params_sw, step=0.01)
        model_sw = linearize(params_sw, steady_sw.point)
        perm = [2, 3, 0, 1]
        for omega, theta in ((0.0, 0.5), (2.5, 1.4)):
            v = output_covariance(fig2_model, omega, theta).v
            v_sw = output_covariance(model_sw, omega, theta).v
            assert np.allclose(v_sw, v[np.ix_(perm, perm)], rtol=1e-9,
                               atol=1e-11)

    def test_squeezing_present_in_reference_regime(self, fig2_model):
        # at the most favorable angle the output deviates from vacuum
        v = output_covariance(fig2_model, 0.0, np.radians(30.0)).v
        assert np.abs(v - np.eye(4)).max() > 0.05
        # correlations are present over a range of angles
        v9 = output_covariance(fig2_model, 1.0, np.radians(9.0)).v
        assert np.abs(v9 - np.eye(4)).max() > 0.01


class TestQuadratureRotation:
    def test_base_angle(self):
        q = quadrature_rotation(0.0)
        assert np.array_equal(q[0, :2], np.array([1.0 + 0j, 1.0 + 0j]))
        assert np.array_equal(q[1, :2], np.array([-1j, 1j]))
        assert np.all(q[:2, 2:] == 0)
