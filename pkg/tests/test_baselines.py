import numpy as np
import pytest

from mecanum_ftc.baselines import (
    APTController,
    PIDController,
    PIDGains,
    RLSState,
    rls_update,
)
from mecanum_ftc.estimation import GaussianBelief, dyna_drift
from mecanum_ftc.ftc import control_matrix, per_model_control
from mecanum_ftc.plant import BodyVelocity, FaultVector, PoseState, WheelTorques


def generate_rls_data(params, lam, n_steps, rng, noise=0.0):
    """Noiseless (or noisy) velocity data under a fixed health vector."""
    g_true = control_matrix(FaultVector.from_array(lam), params)
    xi = np.zeros(3)
    records = []
    for _ in range(n_steps):
        u = rng.uniform(-0.4, 0.4, 4)
        xi_next = dyna_drift(xi, params) + g_true @ u
        if noise:
            xi_next = xi_next + noise * rng.standard_normal(3)
        records.append((xi.copy(), u.copy(), xi_next.copy()))
        xi = xi_next
    return records


class TestRLS:
    def test_converges_to_truth_noiseless(self, params, rng):
        lam = np.array([0.5, 0.0, 1.0, 0.75])
        state = RLSState.create()
        for xi, u, xi_next in generate_rls_data(params, lam, 200, rng):
            state = rls_update(state, BodyVelocity.from_array(xi_next),
                               BodyVelocity.from_array(xi),
                               WheelTorques.from_array(u), params)
        assert np.max(np.abs(state.theta_hat - lam)) <= 1e-6

    def test_unit_forgetting_matches_batch_least_squares(self, params, rng):
        # recursive form equals the prior-regularized batch solution exactly,
        # provided the estimate stays interior so the unit-box clip is inert
        lam = np.array([0.6, 0.3, 0.7, 0.4])
        g_healthy = control_matrix(FaultVector.healthy(), params)
        p0 = 1e6
        theta0 = 0.5 * np.ones(4)
        state = RLSState(theta0.copy(), p0 * np.eye(4), forgetting=1.0)
        a = np.eye(4) / p0
        b = theta0 / p0
        for xi, u, xi_next in generate_rls_data(params, lam, 120, rng):
            state = rls_update(state, BodyVelocity.from_array(xi_next),
                               BodyVelocity.from_array(xi),
                               WheelTorques.from_array(u), params)
            assert np.all(state.theta_hat > 0) and np.all(state.theta_hat < 1)
            phi = g_healthy * u[None, :]
            a += phi.T @ phi
            b += phi.T @ (xi_next - dyna_drift(xi, params))
        np.testing.assert_allclose(state.theta_hat, np.linalg.solve(a, b), atol=1e-9)

    def test_zero_torque_is_inert(self, params):
        state = RLSState.create()
        out = rls_update(state, BodyVelocity(0.1, 0, 0), BodyVelocity(0.1, 0, 0),
                         WheelTorques((0, 0, 0, 0)), params)
        np.testing.assert_allclose(out.theta_hat, state.theta_hat)

    def test_covariance_stays_spd_and_bounded(self, params, rng):
        lam = np.array([1.0, 1.0, 0.5, 1.0])
        state = RLSState.create()
        traces = []
        for xi, u, xi_next in generate_rls_data(params, lam, 300, rng, noise=0.01):
            state = rls_update(state, BodyVelocity.from_array(xi_next),
                               BodyVelocity.from_array(xi),
                               WheelTorques.from_array(u), params)
            assert np.linalg.eigvalsh(state.cov).min() > 0
            traces.append(np.trace(state.cov))
        assert max(traces[50:]) < 10 * traces[0] + 1.0

    def test_theta_clipped_to_unit_box(self, params, rng):
        state = RLSState.create()
        for xi, u, xi_next in generate_rls_data(params, np.ones(4), 50, rng, noise=0.2):
            state = rls_update(state, BodyVelocity.from_array(xi_next),
                               BodyVelocity.from_array(xi),
                               WheelTorques.from_array(u), params)
            assert np.all(state.theta_hat >= 0) and np.all(state.theta_hat <= 1)

    def test_forgetting_validation(self):
        with pytest.raises(ValueError):
            RLSState(np.ones(4), np.eye(4), forgetting=0.0)
        with pytest.raises(ValueError):
            RLSState(np.ones(4), np.eye(4), forgetting=1.5)


class TestPID:
    def test_zero_error_gives_friction_feedforward(self, params):
        pid = PIDController(params)
        torques, xi_des = pid.step(PoseState(1, 2, 0.5), BodyVelocity(0, 0, 0), PoseState(1, 2, 0.5))
        np.testing.assert_allclose(torques.as_array(), params.tau_f_vec, atol=1e-12)
        np.testing.assert_allclose(xi_des.as_array(), np.zeros(3), atol=1e-12)

    def test_forward_error_loads_wheels_equally(self, params):
        pid = PIDController(params)
        torques, _ = pid.step(PoseState(0, 0, 0), BodyVelocity(0, 0, 0), PoseState(0.01, 0, 0))
        tau = torques.as_array()
        assert np.all(tau > params.tau_f_vec)
        np.testing.assert_allclose(tau, tau[0], rtol=1e-9)

    def test_output_saturates_to_torque_box(self, params):
        pid = PIDController(params)
        torques, _ = pid.step(PoseState(0, 0, 0), BodyVelocity(0, 0, 0), PoseState(100, -100, 0))
        tau = torques.as_array()
        assert np.all(tau >= params.tau_min) and np.all(tau <= params.tau_max)
        assert np.any(np.isin(tau, [params.tau_min, params.tau_max]))

    def test_integrators_clamped(self, params):
        pid = PIDController(params, PIDGains(outer_windup=0.2, inner_windup=0.3))
        for _ in range(500):
            pid.step(PoseState(0, 0, 0), BodyVelocity(0, 0, 0), PoseState(10, 10, 0))
        assert np.max(np.abs(pid._int_outer)) <= 0.2
        assert np.max(np.abs(pid._int_inner)) <= 0.3

    def test_gain_validation(self):
        with pytest.raises(ValueError):
            PIDGains(outer_kp=(-1.0, 4.0, 2.0))
        with pytest.raises(ValueError):
            PIDGains(outer_windup=0.0)


class TestAPT:
    def test_exact_estimate_matches_single_model_law(self, params):
        lam = FaultVector((1.0, 0.5, 1.0, 1.0))
        apt = APTController(params)
        apt.rls = RLSState(np.array(lam.lam), np.eye(4), forgetting=0.9)
        obs = BodyVelocity(0.1, -0.05, 0.02)
        xi_des = BodyVelocity(0.3, 0.0, 0.1)
        torques = apt.step(obs, xi_des)
        g = control_matrix(lam, params)
        expected = per_model_control(GaussianBelief(obs.as_array(), np.eye(3)), g,
                                     xi_des, apt.beta, params).as_array()
        np.testing.assert_allclose(torques.as_array(),
                                   np.clip(expected, params.tau_min, params.tau_max), atol=1e-12)

    def test_initial_control_is_fault_free_law(self, params):
        apt = APTController(params)
        obs = BodyVelocity(0.0, 0.0, 0.0)
        xi_des = BodyVelocity(0.2, 0.1, 0.0)
        torques = apt.step(obs, xi_des)
        g = control_matrix(FaultVector.healthy(), params)
        expected = per_model_control(GaussianBelief(obs.as_array(), np.eye(3)), g,
                                     xi_des, apt.beta, params).as_array()
        np.testing.assert_allclose(torques.as_array(),
                                   np.clip(expected, params.tau_min, params.tau_max), atol=1e-12)

    def test_adapts_toward_true_fault(self, params, rng):
        lam = np.array([1.0, 0.0, 1.0, 1.0])
        g_true = control_matrix(FaultVector.from_array(lam), params)
        apt = APTController(params)
        xi = np.zeros(3)
        for _ in range(150):
            xi_des = BodyVelocity.from_array(0.3 * rng.standard_normal(3))
            torques = apt.step(BodyVelocity.from_array(xi), xi_des)
            xi = dyna_drift(xi, params) + g_true @ torques.as_array()
        assert np.max(np.abs(apt.rls.theta_hat - lam)) < 0.1
