import math

import numpy as np
import pytest
from scipy.optimize import minimize

from conftest import random_spd
from mecanum_ftc.errors import NumericalError
from mecanum_ftc.estimation import GaussianBelief, dyna_drift, dyna_filter_step
from mecanum_ftc.faults import standard_fault_set
from mecanum_ftc.ftc import (
    ModelBank,
    aggregate_control,
    control_matrix,
    drift_term,
    ftc_step,
    likelihood,
    log_likelihood,
    matrix_divergence,
    per_model_control,
    posterior_update,
)
from mecanum_ftc.plant import BodyVelocity, FaultVector, WheelTorques


class TestControlMatrix:
    def test_healthy_top_left_entry(self, params):
        g = control_matrix(FaultVector.healthy(), params)
        assert g[0, 0] == pytest.approx(0.1 / (math.sqrt(2) * 0.04 * 3))

    def test_dead_wheel_zero_column(self, params):
        g = control_matrix(FaultVector((0, 1, 1, 1)), params)
        np.testing.assert_allclose(g[:, 0], np.zeros(3))
        assert np.all(g[:, 1:] != 0)

    def test_columns_scale_linearly_with_health(self, params):
        g_full = control_matrix(FaultVector.healthy(), params)
        g_half = control_matrix(FaultVector((0.5, 1, 1, 1)), params)
        np.testing.assert_allclose(g_half[:, 0], 0.5 * g_full[:, 0])
        np.testing.assert_allclose(g_half[:, 1:], g_full[:, 1:])


class TestDriftTerm:
    def test_zero_at_rest_without_friction(self, params):
        frictionless = params.with_(tau_f=(0, 0, 0, 0))
        np.testing.assert_allclose(drift_term(BodyVelocity(0, 0, 0), frictionless), np.zeros(3))

    def test_friction_pullback_at_rest(self, params):
        # forward channel: -(t_s / (sqrt(2) r m)) * sum(tau_f)
        expected = -(0.1 / (math.sqrt(2) * 0.04 * 3.0)) * 0.2
        drift = drift_term(BodyVelocity(0, 0, 0), params)
        assert drift[0] == pytest.approx(expected)
        assert drift[1] == pytest.approx(0.0, abs=1e-15)
        assert drift[2] == pytest.approx(0.0, abs=1e-15)


class TestPerModelControl:
    def test_zero_residual_zero_control(self, params):
        g = control_matrix(FaultVector.healthy(), params)
        xi_des = BodyVelocity.from_array(dyna_drift(np.array([0.1, 0.2, 0.3]), params))
        belief = GaussianBelief(np.array([0.1, 0.2, 0.3]), np.eye(3))
        u = per_model_control(belief, g, xi_des, 0.01, params)
        np.testing.assert_allclose(u.as_array(), np.zeros(4), atol=1e-12)

    def test_effort_dominated_limit(self, params):
        g = control_matrix(FaultVector.healthy(), params)
        belief = GaussianBelief(np.array([1.0, -1.0, 0.5]), np.eye(3))
        u = per_model_control(belief, g, BodyVelocity(0, 0, 0), 1e9, params)
        assert np.max(np.abs(u.as_array())) <= 1e-6

    def test_matches_numerical_minimizer(self, params, rng):
        # oracle: direct minimization of the one-step quadratic cost
        for _ in range(25):
            lam = FaultVector.from_array(rng.uniform(0, 1, 4))
            g = control_matrix(lam, params)
            xi_hat = rng.standard_normal(3) * 0.5
            xi_des = rng.standard_normal(3) * 0.5
            beta = float(10 ** rng.uniform(-3, 0))

            def cost(u):
                r = dyna_drift(xi_hat, params) + g @ u - xi_des
                return float(r @ r + beta * u @ u)

            res = minimize(cost, np.zeros(4), method="BFGS",
                           options={"gtol": 1e-10, "maxiter": 500})
            u = per_model_control(GaussianBelief(xi_hat, np.eye(3)), g,
                                  BodyVelocity.from_array(xi_des), beta, params).as_array()
            scale = 1.0 + np.max(np.abs(res.x))
            np.testing.assert_allclose(u, res.x, atol=1e-6 * scale)

    def test_gradient_vanishes_at_solution(self, params, rng):
        lam = FaultVector.from_array(rng.uniform(0, 1, 4))
        g = control_matrix(lam, params)
        xi_hat = np.array([0.3, -0.2, 0.1])
        xi_des = np.array([0.5, 0.1, -0.3])
        beta = 0.01
        u = per_model_control(GaussianBelief(xi_hat, np.eye(3)), g,
                              BodyVelocity.from_array(xi_des), beta, params).as_array()

        def cost(uu):
            r = dyna_drift(xi_hat, params) + g @ uu - xi_des
            return float(r @ r + beta * uu @ uu)

        eps = 1e-7
        grad = np.array([
            (cost(u + eps * e) - cost(u - eps * e)) / (2 * eps)
            for e in np.eye(4)
        ])
        grad0 = np.array([
            (cost(eps * e) - cost(-eps * e)) / (2 * eps)
            for e in np.eye(4)
        ])
        assert np.max(np.abs(grad)) <= 1e-6 * (1 + np.linalg.norm(grad0))

    def test_rejects_nonpositive_beta(self, params):
        g = control_matrix(FaultVector.healthy(), params)
        with pytest.raises(ValueError):
            per_model_control(GaussianBelief(np.zeros(3), np.eye(3)), g,
                              BodyVelocity(0, 0, 0), 0.0, params)


class TestLikelihood:
    def test_zero_innovation_unit_covariance(self):
        assert likelihood(np.zeros(3), np.eye(3)) == pytest.approx(1.0)

    def test_unit_innovation(self):
        assert likelihood(np.array([1.0, 0, 0]), np.eye(3)) == pytest.approx(math.exp(-0.5))

    def test_determinant_scaling(self):
        assert likelihood(np.zeros(3), 4 * np.eye(3)) == pytest.approx(1.0 / 8.0)

    def test_log_form_consistent(self, rng):
        for _ in range(20):
            s = random_spd(rng, 3, 100, scale=0.01)
            e = rng.standard_normal(3) * 0.1
            assert math.exp(log_likelihood(e, s)) == pytest.approx(likelihood(e, s), rel=1e-12)

    def test_non_spd_rejected(self):
        with pytest.raises(NumericalError):
            likelihood(np.zeros(3), -np.eye(3))


class TestPosteriorUpdate:
    def test_uniform_prior_equal_likelihoods(self):
        pi = posterior_update(np.full(17, 1 / 17), np.ones(17))
        np.testing.assert_allclose(pi, np.full(17, 1 / 17))

    def test_single_double_likelihood(self):
        lik = np.ones(17)
        lik[0] = 2.0
        pi = posterior_update(np.full(17, 1 / 17), lik)
        assert pi[0] == pytest.approx(1 / 9)
        np.testing.assert_allclose(pi[1:], np.full(16, 1 / 18))

    def test_one_hot_prior_is_absorbing_without_floor(self, rng):
        prior = np.zeros(17)
        prior[4] = 1.0
        pi = posterior_update(prior, rng.uniform(0.1, 2.0, 17), floor=0.0)
        np.testing.assert_allclose(pi, prior)

    def test_floor_and_simplex(self, rng):
        floor = 1e-6
        pi = np.full(17, 1 / 17)
        for _ in range(200):
            pi = posterior_update(pi, rng.uniform(0, 1, 17) ** 8, floor=floor)
            assert abs(pi.sum() - 1.0) <= 1e-12
            assert np.all(pi >= floor)

    def test_degenerate_likelihoods_keep_prior(self):
        prior = np.array([0.3, 0.7])
        pi = posterior_update(prior, np.zeros(2))
        np.testing.assert_allclose(pi, prior)


class TestAggregateControl:
    def test_one_hot_selects_and_clamps(self):
        controls = np.array([[0.1, 0.9, -0.9, 0.0], [1.0, 1.0, 1.0, 1.0]])
        pis = np.array([1.0, 0.0])
        u = aggregate_control(pis, controls, (-0.5, 0.5))
        np.testing.assert_allclose(u.as_array(), [0.1, 0.5, -0.5, 0.0])

    def test_symmetric_mix_cancels(self):
        controls = np.array([[0.4] * 4, [-0.4] * 4])
        u = aggregate_control(np.array([0.5, 0.5]), controls, (-0.5, 0.5))
        np.testing.assert_allclose(u.as_array(), np.zeros(4), atol=1e-15)

    def test_clamp_at_torque_bound(self):
        controls = np.array([[0.7] * 4])
        u = aggregate_control(np.array([1.0]), controls, (-0.5, 0.5))
        assert u.as_array() == pytest.approx([0.5] * 4)


class TestMatrixDivergence:
    def test_zero_iff_equal(self, rng):
        for n in (2, 3, 5):
            a = random_spd(rng, n, 50)
            assert matrix_divergence(a, a.copy()) == pytest.approx(0.0, abs=1e-12)

    def test_hand_values(self):
        assert matrix_divergence(2 * np.eye(3), np.eye(3)) == pytest.approx(3 + math.log(8) - 6)
        assert matrix_divergence(0.5 * np.eye(3), np.eye(3)) == pytest.approx(3 - 3 * math.log(2) - 1.5)

    def test_nonpositive_over_random_pairs(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 7))
            a = random_spd(rng, n, 1e4)
            b = random_spd(rng, n, 1e4)
            assert matrix_divergence(a, b) <= 1e-9

    def test_rejects_non_spd(self):
        with pytest.raises(NumericalError):
            matrix_divergence(np.eye(2), np.diag([1.0, -1.0]))


def make_bank(params, noise, fault_set=None, **kwargs):
    return ModelBank.create(fault_set or standard_fault_set(), params, noise, **kwargs)


class TestFtcStep:
    def test_singleton_bank_reduces_to_certainty_equivalence(self, params, noise):
        from mecanum_ftc.faults import FaultSet
        fs = FaultSet.from_vectors([(1.0, 1.0, 1.0, 1.0)])
        bank = make_bank(params, noise, fault_set=fs).initialize(BodyVelocity(0.1, 0.0, 0.0))
        obs = BodyVelocity(0.12, 0.01, -0.02)
        u_prev = WheelTorques((0.05, 0.05, 0.05, 0.05))
        xi_des = BodyVelocity(0.2, 0.0, 0.0)
        torques, new_bank = ftc_step(bank, obs, u_prev, xi_des)

        res = dyna_filter_step(GaussianBelief(bank.means[0], bank.covs[0]),
                               bank.g_stack[0], u_prev, obs, params, noise)
        expected = per_model_control(res.belief, bank.g_stack[0], xi_des, bank.beta, params)
        clamped = np.clip(expected.as_array(), params.tau_min, params.tau_max)
        np.testing.assert_allclose(torques.as_array(), clamped, atol=1e-9)
        np.testing.assert_allclose(new_bank.means[0], res.belief.mean, atol=1e-9)

    def test_bank_matches_reference_filter_per_hypothesis(self, params, noise, rng):
        bank = make_bank(params, noise).initialize(BodyVelocity(0.1, -0.05, 0.02))
        obs = BodyVelocity.from_array(rng.standard_normal(3) * 0.1)
        u_prev = WheelTorques.from_array(rng.uniform(-0.3, 0.3, 4))
        _, new_bank = ftc_step(bank, obs, u_prev, BodyVelocity(0, 0, 0))
        for i in range(bank.size):
            ref = dyna_filter_step(GaussianBelief(bank.means[i], bank.covs[i]),
                                   bank.g_stack[i], u_prev, obs, params, noise)
            np.testing.assert_allclose(new_bank.means[i], ref.belief.mean, atol=1e-10)
            np.testing.assert_allclose(new_bank.covs[i], ref.belief.cov, atol=1e-10)
            np.testing.assert_allclose(new_bank.diag.innovations[i], ref.innovation, atol=1e-10)

    def test_posterior_simplex_invariant(self, params, noise, rng):
        bank = make_bank(params, noise).initialize(BodyVelocity(0, 0, 0))
        u = WheelTorques((0.1, -0.1, 0.2, 0.0))
        for _ in range(100):
            obs = BodyVelocity.from_array(rng.standard_normal(3) * 0.05)
            _, bank = ftc_step(bank, obs, u, BodyVelocity(0.1, 0, 0))
            assert abs(bank.pi.sum() - 1.0) <= 1e-12
            assert np.all(bank.pi >= bank.floor)

    def test_one_hot_posterior_fuses_bitwise(self, params, noise):
        import dataclasses
        bank = make_bank(params, noise, floor=0.0).initialize(BodyVelocity(0.05, 0.0, 0.0))
        pi = np.zeros(bank.size)
        pi[6] = 1.0
        bank = dataclasses.replace(bank, pi=pi)
        xi_des = BodyVelocity(0.3, 0.1, 0.0)
        controls = bank._per_model_controls(bank.means, xi_des)
        fused = bank.fused_control(xi_des)
        expected = np.clip(controls[6], params.tau_min, params.tau_max)
        assert np.array_equal(fused.as_array(), expected)

    def test_numerical_failure_names_hypothesis(self, params, noise):
        import dataclasses
        bank = make_bank(params, noise).initialize(BodyVelocity(0, 0, 0))
        means = bank.means.copy()
        means[4] = np.nan
        bank = dataclasses.replace(bank, means=means)
        with pytest.raises(NumericalError) as err:
            ftc_step(bank, BodyVelocity(0, 0, 0), WheelTorques((0,) * 4), BodyVelocity(0, 0, 0))
        assert "hypothesis" in str(err.value)

    def test_true_model_dominates_posterior(self, params, noise, rng):
        # generate data under hypothesis 7 and watch its weight take over
        from mecanum_ftc.faults import standard_fault_set
        fs = standard_fault_set()
        true_g = control_matrix(fs.vector(7), params)
        chol_q = np.linalg.cholesky(noise.q_dyna)
        chol_r = np.linalg.cholesky(noise.r_dyna)
        xi = np.zeros(3)
        bank = make_bank(params, noise).initialize(BodyVelocity(0, 0, 0))
        for _ in range(60):
            u = rng.uniform(-0.3, 0.3, 4)
            xi = dyna_drift(xi, params) + true_g @ u + chol_q @ rng.standard_normal(3)
            obs = BodyVelocity.from_array(xi + chol_r @ rng.standard_normal(3))
            _, bank = ftc_step(bank, obs, WheelTorques.from_array(u), BodyVelocity(0, 0, 0))
        assert int(np.argmax(bank.pi)) + 1 == 7
        assert bank.pi[6] >= 0.99
