"""Ground-truth plant of the four-Mecanum-wheeled robot.

Discrete-time forward-Euler models: a kinematic layer rotating body-frame
velocity into world-frame pose rates, and a dynamic layer driving body
velocity from the resultant wheel wrench.  Actuator health enters as a
multiplicative factor on each wheel's driving torque, so a wheel at
``lambda_i = 0`` contributes only its friction drag.

All functions are pure: value types in, value types out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import RobotParams

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PoseState:
    """World-frame pose (x, y, theta).  theta accumulates, it is never wrapped."""

    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @classmethod
    def from_array(cls, a) -> "PoseState":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class BodyVelocity:
    """Body-frame twist: longitudinal u, lateral v, yaw rate omega."""

    u: float
    v: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.omega], dtype=float)

    @classmethod
    def from_array(cls, a) -> "BodyVelocity":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class WheelTorques:
    """Commanded driving torque per wheel [N m]."""

    tau: tuple[float, float, float, float]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.tau, dtype=float)

    @classmethod
    def from_array(cls, a) -> "WheelTorques":
        return cls(tuple(float(v) for v in a))


@dataclass(frozen=True)
class BodyWrench:
    """Resultant body-frame force and yaw moment."""

    f_x: float
    f_y: float
    tau_z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f_x, self.f_y, self.tau_z], dtype=float)


@dataclass(frozen=True)
class FaultVector:
    """Actuation-health vector; each entry scales one wheel's torque in [0, 1]."""

    lam: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.lam) != 4:
            raise ValueError("fault vector must have four entries")
        if any(not 0.0 <= v <= 1.0 for v in self.lam):
            raise ValueError(f"fault entries must lie in [0, 1], got {self.lam}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.lam, dtype=float)

    @classmethod
    def from_array(cls, a) -> "FaultVector":
        return cls(tuple(float(v) for v in a))

    @classmethod
    def healthy(cls) -> "FaultVector":
        return cls((1.0, 1.0, 1.0, 1.0))


def mixing_matrix(l_bar: float) -> np.ndarray:
    """Unscaled 3x4 map from wheel forces to body wrench (rank 3).

    The physical wrench carries an extra 1/sqrt(2) roller factor, applied in
    :func:`body_wrench`.
    """
    return np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [-1.0, 1.0, -1.0, 1.0],
            [-l_bar, l_bar, l_bar, -l_bar],
        ]
    )


def kinematic_step(pose: PoseState, xi: BodyVelocity, params: RobotParams) -> PoseState:
    """One forward-Euler step of the pose under body velocity ``xi``."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    ts = params.t_s
    return PoseState(
        pose.x + ts * (xi.u * c - xi.v * s),
        pose.y + ts * (xi.u * s + xi.v * c),
        pose.theta + ts * xi.omega,
    )


def wheel_forces(torques: WheelTorques, fault: FaultVector, params: RobotParams) -> np.ndarray:
    """Per-wheel driving force F_i = (lambda_i tau_i - tau_f_i) / r.

    The friction torque is subtracted as a signed constant, also at rest and
    under complete failure; set ``tau_f`` to zero in the config to disable
    the resulting rest creep.
    """
    tau = torques.as_array()
    lam = fault.as_array()
    return (lam * tau - params.tau_f_vec) / params.r


def body_wrench(forces: np.ndarray, params: RobotParams) -> BodyWrench:
    """Sum wheel forces into the body-frame wrench (roller-scaled mixing map)."""
    w = mixing_matrix(params.l_bar) @ np.asarray(forces, dtype=float) / SQRT2
    return BodyWrench(float(w[0]), float(w[1]), float(w[2]))


def dynamic_step(xi: BodyVelocity, wrench: BodyWrench, params: RobotParams) -> BodyVelocity:
    """One forward-Euler step of the body velocity under a wrench.

    Includes linear/angular damping and the Coriolis coupling between the
    translational channels.
    """
    ts = params.t_s
    u, v, om = xi.u, xi.v, xi.omega
    return BodyVelocity(
        u + ts * ((wrench.f_x - params.c_v * u) / params.m + v * om),
        v + ts * ((wrench.f_y - params.c_v * v) / params.m - u * om),
        om + ts * ((wrench.tau_z - params.c_theta * om) / params.i_z),
    )


def plant_step(
    pose: PoseState,
    xi: BodyVelocity,
    torques: WheelTorques,
    fault: FaultVector,
    params: RobotParams,
    process_noise_kine: np.ndarray | None = None,
    process_noise_dyna: np.ndarray | None = None,
) -> tuple[PoseState, BodyVelocity]:
    """Full ground-truth step: faulted wheel map, dynamics, then kinematics.

    Strict forward Euler on the stacked state: both sub-steps consume the
    pre-step ``xi``.  Noise vectors are drawn by the caller.
    """
    wrench = body_wrench(wheel_forces(torques, fault, params), params)
    xi_next = dynamic_step(xi, wrench, params).as_array()
    pose_next = kinematic_step(pose, xi, params).as_array()
    if process_noise_dyna is not None:
        xi_next = xi_next + np.asarray(process_noise_dyna, dtype=float)
    if process_noise_kine is not None:
        pose_next = pose_next + np.asarray(process_noise_kine, dtype=float)
    return PoseState.from_array(pose_next), BodyVelocity.from_array(xi_next)
