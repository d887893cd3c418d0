"""Extended Kalman filtering for both control loops.

The pose filter tracks (x, y, theta) through the kinematic model driven by a
known body velocity; the velocity filter tracks (u, v, omega) through the
dynamic model under one candidate control matrix.  Both observe the full
state directly (H = I).  Covariances are symmetrized after every predict and
update; linear solves go through a Cholesky factorization, never an explicit
inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalError
from .params import RobotParams
from .plant import SQRT2, BodyVelocity, PoseState, WheelTorques, mixing_matrix


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of a Gaussian state estimate."""

    mean: np.ndarray
    cov: np.ndarray

    def validate(self, tol: float = 1e-9) -> None:
        if not np.all(np.isfinite(self.mean)) or not np.all(np.isfinite(self.cov)):
            raise NumericalError("belief contains non-finite entries")
        if np.max(np.abs(self.cov - self.cov.T)) > tol:
            raise NumericalError("covariance is not symmetric")
        if np.linalg.eigvalsh(self.cov).min() <= 0:
            raise NumericalError("covariance is not positive definite")


@dataclass(frozen=True)
class NoiseConfig:
    """Process/observation covariances for the two loops (all SPD 3x3)."""

    q_kine: np.ndarray
    r_kine: np.ndarray
    q_dyna: np.ndarray
    r_dyna: np.ndarray

    @classmethod
    def from_scalars(cls, q_kine=0.0025, r_kine=0.01, q_dyna=1e-4, r_dyna=4e-4) -> "NoiseConfig":
        return cls(*(np.eye(3) * s for s in (q_kine, r_kine, q_dyna, r_dyna)))

    def __post_init__(self):
        for name in ("q_kine", "r_kine", "q_dyna", "r_dyna"):
            mat = getattr(self, name)
            if mat.shape != (3, 3) or np.max(np.abs(mat - mat.T)) > 1e-12:
                raise ValueError(f"{name} must be a symmetric 3x3 matrix")
            if np.linalg.eigvalsh(mat).min() <= 0:
                raise ValueError(f"{name} must be positive definite")


@dataclass(frozen=True)
class UpdateResult:
    belief: GaussianBelief
    innovation: np.ndarray
    innovation_cov: np.ndarray


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def _chol(mat: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive definite") from exc


def ekf_predict(
    belief: GaussianBelief,
    propagate: Callable[[np.ndarray], np.ndarray],
    jacobian: np.ndarray,
    q: np.ndarray,
) -> GaussianBelief:
    """Time update: mean through ``propagate``, covariance through F P F^T + Q."""
    mean = np.asarray(propagate(belief.mean), dtype=float)
    if not np.all(np.isfinite(mean)):
        raise NumericalError("state propagation produced non-finite values")
    cov = _symmetrize(jacobian @ belief.cov @ jacobian.T + q)
    return GaussianBelief(mean, cov)


def ekf_update(belief: GaussianBelief, obs: np.ndarray, h: np.ndarray, r: np.ndarray) -> UpdateResult:
    """Measurement update with gain K = P H^T (H P H^T + R)^-1."""
    obs = np.asarray(obs, dtype=float)
    p = belief.cov
    s = _symmetrize(h @ p @ h.T + r)
    l = _chol(s, "innovation covariance")
    # K = P H^T S^-1 via two triangular solves
    pht = p @ h.T
    k = np.linalg.solve(l.T, np.linalg.solve(l, pht.T)).T
    innovation = obs - h @ belief.mean
    mean = belief.mean + k @ innovation
    cov = _symmetrize((np.eye(p.shape[0]) - k @ h) @ p)
    return UpdateResult(GaussianBelief(mean, cov), innovation, s)


def kine_propagate(pose: np.ndarray, xi: np.ndarray, params: RobotParams) -> np.ndarray:
    """Pose map of the kinematic model for a fixed body velocity."""
    c, s = math.cos(pose[2]), math.sin(pose[2])
    ts = params.t_s
    return np.array(
        [
            pose[0] + ts * (xi[0] * c - xi[1] * s),
            pose[1] + ts * (xi[0] * s + xi[1] * c),
            pose[2] + ts * xi[2],
        ]
    )


def kine_jacobian(pose: np.ndarray, xi: np.ndarray, params: RobotParams) -> np.ndarray:
    """d(pose')/d(pose); only the heading column is nontrivial."""
    c, s = math.cos(pose[2]), math.sin(pose[2])
    ts = params.t_s
    return np.array(
        [
            [1.0, 0.0, ts * (-xi[0] * s - xi[1] * c)],
            [0.0, 1.0, ts * (xi[0] * c - xi[1] * s)],
            [0.0, 0.0, 1.0],
        ]
    )


def dyna_drift(xi: np.ndarray, params: RobotParams) -> np.ndarray:
    """Control-free part of the velocity map: damping, Coriolis and the
    friction feed-through (friction reduces drive, hence the minus sign)."""
    ts = params.t_s
    u, v, om = xi
    damped = np.array(
        [
            u + ts * (-params.c_v * u / params.m + v * om),
            v + ts * (-params.c_v * v / params.m - u * om),
            om + ts * (-params.c_theta * om / params.i_z),
        ]
    )
    return damped + dyna_friction_offset(params)


def dyna_friction_offset(params: RobotParams) -> np.ndarray:
    """Constant velocity offset per step caused by wheel friction torques."""
    scale = params.t_s / (SQRT2 * params.r)
    d = np.diag([1.0 / params.m, 1.0 / params.m, 1.0 / params.i_z])
    return -scale * d @ mixing_matrix(params.l_bar) @ params.tau_f_vec


def dyna_jacobian(xi: np.ndarray, params: RobotParams) -> np.ndarray:
    """d(xi')/d(xi) of the drift map."""
    ts = params.t_s
    u, v, om = xi
    a = 1.0 - ts * params.c_v / params.m
    return np.array(
        [
            [a, ts * om, ts * v],
            [-ts * om, a, -ts * u],
            [0.0, 0.0, 1.0 - ts * params.c_theta / params.i_z],
        ]
    )


_I3 = np.eye(3)


def kine_filter_step(
    belief: GaussianBelief,
    xi_cmd: BodyVelocity,
    obs: PoseState,
    params: RobotParams,
    noise: NoiseConfig,
) -> UpdateResult:
    """Predict the pose through the kinematic model, then fuse a direct
    pose observation."""
    xi = xi_cmd.as_array()
    f = kine_jacobian(belief.mean, xi, params)
    predicted = ekf_predict(belief, lambda m: kine_propagate(m, xi, params), f, noise.q_kine)
    return ekf_update(predicted, obs.as_array(), _I3, noise.r_kine)


def dyna_filter_step(
    belief: GaussianBelief,
    g_i: np.ndarray,
    u_prev: WheelTorques,
    obs: BodyVelocity,
    params: RobotParams,
    noise: NoiseConfig,
) -> UpdateResult:
    """Velocity filter step under one candidate control matrix ``g_i``."""
    u = u_prev.as_array()
    f = dyna_jacobian(belief.mean, params)
    predicted = ekf_predict(belief, lambda m: dyna_drift(m, params) + g_i @ u, f, noise.q_dyna)
    return ekf_update(predicted, obs.as_array(), _I3, noise.r_dyna)
