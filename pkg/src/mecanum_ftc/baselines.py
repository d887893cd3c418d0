"""Comparison controllers: cascaded PID and an RLS-based adaptive law (APT).

The PID cascade maps body-frame posture error to a velocity demand, velocity
error to a wrench demand, and allocates wheel torques through the
pseudo-inverse of the wheel mixing map with a friction feed-forward.  APT
identifies the four health factors online by exponentially weighted recursive
least squares and applies the same certainty-equivalent one-step law as a
single-hypothesis bank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .estimation import GaussianBelief, dyna_drift
from .ftc import control_matrix, per_model_control
from .params import RobotParams
from .plant import SQRT2, BodyVelocity, FaultVector, PoseState, WheelTorques, mixing_matrix


@dataclass(frozen=True)
class PIDGains:
    """Per-channel gains for the posture (outer) and velocity (inner) loops."""

    outer_kp: tuple = (4.0, 4.0, 2.0)
    outer_ki: tuple = (0.5, 0.5, 0.2)
    outer_kd: tuple = (0.1, 0.1, 0.05)
    inner_kp: tuple = (6.0, 6.0, 3.0)
    inner_ki: tuple = (1.0, 1.0, 0.5)
    inner_kd: tuple = (0.0, 0.0, 0.0)
    outer_windup: float = 0.5
    inner_windup: float = 1.0

    def __post_init__(self):
        gains = (self.outer_kp + self.outer_ki + self.outer_kd
                 + self.inner_kp + self.inner_ki + self.inner_kd)
        if any(g < 0 for g in gains):
            raise ValueError("PID gains must be nonnegative")
        if self.outer_windup <= 0 or self.inner_windup <= 0:
            raise ValueError("windup bounds must be positive")


class PIDController:
    """Cascaded posture/velocity PID with pseudo-inverse torque allocation."""

    def __init__(self, params: RobotParams, gains: PIDGains = PIDGains()):
        self.params = params
        self.gains = gains
        # allocation: wrench -> wheel forces through the scaled mixing map
        self._alloc = np.linalg.pinv(mixing_matrix(params.l_bar) / SQRT2)
        self.reset()

    def reset(self) -> None:
        self._int_outer = np.zeros(3)
        self._int_inner = np.zeros(3)
        self._prev_outer_err = None
        self._prev_inner_err = None

    def step(self, pose_est: PoseState, xi_est: BodyVelocity, ref: PoseState) -> tuple[WheelTorques, BodyVelocity]:
        """Returns the clamped wheel torques and the internal velocity demand."""
        p = self.params
        g = self.gains
        ts = p.t_s

        c, s = math.cos(pose_est.theta), math.sin(pose_est.theta)
        ex, ey = ref.x - pose_est.x, ref.y - pose_est.y
        outer_err = np.array([c * ex + s * ey, -s * ex + c * ey, ref.theta - pose_est.theta])
        self._int_outer = np.clip(self._int_outer + outer_err * ts, -g.outer_windup, g.outer_windup)
        d_outer = np.zeros(3) if self._prev_outer_err is None else (outer_err - self._prev_outer_err) / ts
        self._prev_outer_err = outer_err
        xi_des = (np.asarray(g.outer_kp) * outer_err
                  + np.asarray(g.outer_ki) * self._int_outer
                  + np.asarray(g.outer_kd) * d_outer)

        inner_err = xi_des - xi_est.as_array()
        self._int_inner = np.clip(self._int_inner + inner_err * ts, -g.inner_windup, g.inner_windup)
        d_inner = np.zeros(3) if self._prev_inner_err is None else (inner_err - self._prev_inner_err) / ts
        self._prev_inner_err = inner_err
        wrench = (np.asarray(g.inner_kp) * inner_err
                  + np.asarray(g.inner_ki) * self._int_inner
                  + np.asarray(g.inner_kd) * d_inner)

        forces = self._alloc @ wrench
        torques = p.r * forces + p.tau_f_vec
        torques = np.clip(torques, p.tau_min, p.tau_max)
        return WheelTorques.from_array(torques), BodyVelocity.from_array(xi_des)


def pid_step(
    controller: PIDController,
    pose_est: PoseState,
    xi_est: BodyVelocity,
    ref: PoseState,
) -> tuple[WheelTorques, BodyVelocity]:
    return controller.step(pose_est, xi_est, ref)


@dataclass(frozen=True)
class RLSState:
    """Exponentially weighted least-squares estimate of the health vector."""

    theta_hat: np.ndarray
    cov: np.ndarray
    forgetting: float = 0.88

    def __post_init__(self):
        if not 0.0 < self.forgetting <= 1.0:
            raise ValueError("forgetting factor must lie in (0, 1]")

    @classmethod
    def create(cls, forgetting: float = 0.88, p0: float = 10.0) -> "RLSState":
        return cls(np.ones(4), p0 * np.eye(4), forgetting)


def rls_update(
    state: RLSState,
    xi_obs_next: BodyVelocity,
    xi_est: BodyVelocity,
    u_applied: WheelTorques,
    params: RobotParams,
) -> RLSState:
    """Regress the drift-free velocity residual on the torque-scaled healthy
    columns; valid because the control matrix is linear in the health factors.
    """
    y = xi_obs_next.as_array() - dyna_drift(xi_est.as_array(), params)
    g_healthy = control_matrix(FaultVector.healthy(), params)
    phi = g_healthy * u_applied.as_array()[None, :]

    lam = state.forgetting
    p = state.cov
    s = lam * np.eye(3) + phi @ p @ phi.T
    k = p @ phi.T @ np.linalg.inv(s)
    theta = state.theta_hat + k @ (y - phi @ state.theta_hat)
    p_new = (p - k @ phi @ p) / lam
    p_new = 0.5 * (p_new + p_new.T)
    return replace(state, theta_hat=np.clip(theta, 0.0, 1.0), cov=p_new)


class APTController:
    """Certainty-equivalent one-step law around the RLS health estimate."""

    def __init__(self, params: RobotParams, forgetting: float = 0.88, beta: float = 0.005,
                 p0: float = 10.0, u_limits: tuple[float, float] | None = None):
        self.params = params
        self.beta = beta
        self.u_limits = u_limits if u_limits is not None else (params.tau_min, params.tau_max)
        self.rls = RLSState.create(forgetting, p0)
        self._xi_prev: BodyVelocity | None = None
        self._u_prev: WheelTorques | None = None

    def step(self, obs: BodyVelocity, xi_des: BodyVelocity) -> WheelTorques:
        if self._xi_prev is not None and self._u_prev is not None:
            self.rls = rls_update(self.rls, obs, self._xi_prev, self._u_prev, self.params)
        g = control_matrix(FaultVector.from_array(self.rls.theta_hat), self.params)
        belief = GaussianBelief(obs.as_array(), np.eye(3))
        u = per_model_control(belief, g, xi_des, self.beta, self.params).as_array()
        torques = WheelTorques.from_array(np.clip(u, self.u_limits[0], self.u_limits[1]))
        self._xi_prev = obs
        self._u_prev = torques
        return torques


def apt_step(controller: APTController, obs: BodyVelocity, xi_des: BodyVelocity) -> tuple[WheelTorques, RLSState]:
    torques = controller.step(obs, xi_des)
    return torques, controller.rls
