"""Kinematics-loop model predictive controller.

The nonlinear pose model is linearized stage by stage along the reference
trajectory (LTV, one QP per step, no SQP iteration), states are eliminated by
forward substitution, and the resulting condensed box QP over the stacked
body-velocity sequence is handed to the operator-splitting solver.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .params import RobotParams
from .plant import BodyVelocity, PoseState
from .qp import QPProblem, QPSettings, QPSolution, solve_qp_admm
from .estimation import kine_jacobian, kine_propagate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearizedModel:
    """Affine pose model x' = A x + B xi + c, exact at the linearization point."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class MPCConfig:
    horizon: int = 10
    q_stage: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0, 1.0]))
    q_terminal: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0, 1.0]))
    r_stage: np.ndarray = field(default_factory=lambda: np.diag([0.1, 0.1, 0.1]))
    xi_min: np.ndarray = field(default_factory=lambda: np.array([-1.0, -1.0, -2.0]))
    xi_max: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 2.0]))

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("MPC horizon must be at least 1")
        for name in ("q_stage", "q_terminal"):
            w = getattr(self, name)
            if np.linalg.eigvalsh(0.5 * (w + w.T)).min() < -1e-12:
                raise ConfigError(f"{name} must be positive semidefinite")
        if np.linalg.eigvalsh(0.5 * (self.r_stage + self.r_stage.T)).min() <= 0:
            raise ConfigError("r_stage must be positive definite")
        if np.any(self.xi_min >= self.xi_max):
            raise ConfigError("xi_min must be strictly below xi_max")


def linearize_kinematics(pose_ref: PoseState, xi_ref: BodyVelocity, params: RobotParams) -> LinearizedModel:
    """First-order pose model around (pose_ref, xi_ref)."""
    pose = pose_ref.as_array()
    xi = xi_ref.as_array()
    a = kine_jacobian(pose, xi, params)
    ct, st = math.cos(pose[2]), math.sin(pose[2])
    b = params.t_s * np.array([[ct, -st, 0.0], [st, ct, 0.0], [0.0, 0.0, 1.0]])
    c = kine_propagate(pose, xi, params) - a @ pose - b @ xi
    return LinearizedModel(a, b, c)


def build_condensed_qp(
    models: list[LinearizedModel],
    pose_est: PoseState,
    reference: list[PoseState],
    config: MPCConfig,
) -> QPProblem:
    """Condense the finite-horizon tracking problem onto the stacked velocities.

    Decision variable z stacks the N stage velocities; predicted poses are
    eliminated through the affine models, so 1/2 z'Pz + q'z (plus a constant)
    reproduces the rolled-out cost exactly.
    """
    n = config.horizon
    if len(models) != n:
        raise ConfigError(f"expected {n} stage models, got {len(models)}")
    if len(reference) != n + 1:
        raise ConfigError(f"expected {n + 1} reference poses, got {len(reference)}")

    # x_{i+1} = phi_i x0 + sum_j gamma[i][j] z_j + d_i, built by forward substitution
    x0 = pose_est.as_array()
    s_mat = np.zeros((3 * n, 3 * n))
    offsets = np.zeros(3 * n)
    carry = x0.copy()
    prop = [None] * n  # running products A_{i} ... A_{j+1} B_j
    for i in range(n):
        mdl = models[i]
        for j in range(i):
            prop[j] = mdl.a @ prop[j]
        prop[i] = mdl.b
        carry = mdl.a @ carry + mdl.c
        offsets[3 * i:3 * i + 3] = carry
        for j in range(i + 1):
            s_mat[3 * i:3 * i + 3, 3 * j:3 * j + 3] = prop[j]

    q_bar = np.zeros((3 * n, 3 * n))
    for i in range(n - 1):
        q_bar[3 * i:3 * i + 3, 3 * i:3 * i + 3] = config.q_stage
    q_bar[3 * (n - 1):, 3 * (n - 1):] = config.q_terminal

    r_bar = np.kron(np.eye(n), config.r_stage)
    ref_vec = np.concatenate([p.as_array() for p in reference[1:]])

    err0 = offsets - ref_vec
    p = 2.0 * (s_mat.T @ q_bar @ s_mat + r_bar)
    p = 0.5 * (p + p.T)
    q = 2.0 * (s_mat.T @ (q_bar @ err0))
    lower = np.tile(config.xi_min, n)
    upper = np.tile(config.xi_max, n)
    return QPProblem(p, q, lower, upper)


def reference_body_velocities(reference: list[PoseState], params: RobotParams) -> list[BodyVelocity]:
    """Finite-difference velocities of the reference, rotated into the body frame."""
    out = []
    ts = params.t_s
    for cur, nxt in zip(reference, reference[1:]):
        dx = (nxt.x - cur.x) / ts
        dy = (nxt.y - cur.y) / ts
        dth = (nxt.theta - cur.theta) / ts
        c, s = math.cos(cur.theta), math.sin(cur.theta)
        out.append(BodyVelocity(c * dx + s * dy, -s * dx + c * dy, dth))
    return out


class KinematicsMPC:
    """Receding-horizon tracker; keeps the shifted previous solution warm."""

    def __init__(self, params: RobotParams, config: MPCConfig = MPCConfig(), qp_settings: QPSettings = QPSettings()):
        self.params = params
        self.config = config
        self.qp_settings = qp_settings
        self._warm_z: np.ndarray | None = None
        self._warm_y: np.ndarray | None = None

    def reset(self) -> None:
        self._warm_z = None
        self._warm_y = None

    def step(
        self,
        pose_est: PoseState,
        reference: list[PoseState],
        xi_prev: BodyVelocity,
    ) -> tuple[BodyVelocity, QPSolution]:
        """Solve one horizon and return the first-stage velocity command.

        A short reference window is padded by holding its last pose.  When the
        solver hits its iteration cap the previous command is reissued.
        """
        n = self.config.horizon
        reference = list(reference)
        if not reference:
            raise ConfigError("reference window is empty")
        while len(reference) < n + 1:
            reference.append(reference[-1])
        reference = reference[: n + 1]

        # Linearization poses: reference positions, but heading anchored at
        # the current estimate.  Position never enters the Jacobians, and a
        # reference-frame heading diverges from reality under underactuated
        # faults, flipping the command directions past 90 degrees of error.
        theta0 = pose_est.theta
        lin_poses = [
            PoseState(p.x, p.y, theta0 + (p.theta - reference[0].theta))
            for p in reference
        ]
        xi_refs = reference_body_velocities(lin_poses, self.params)
        models = [
            linearize_kinematics(pose, xi, self.params)
            for pose, xi in zip(lin_poses[:n], xi_refs)
        ]
        problem = build_condensed_qp(models, pose_est, reference, self.config)
        solution = solve_qp_admm(problem, self.qp_settings, self._warm_z, self._warm_y)

        if solution.solved:
            self._warm_z = _shift_stages(solution.z)
            self._warm_y = _shift_stages(solution.dual)
            xi = np.clip(solution.z[:3], self.config.xi_min, self.config.xi_max)
            return BodyVelocity.from_array(xi), solution
        log.warning("QP hit max iterations (primal %.2e, dual %.2e); holding previous command",
                    solution.primal_residual, solution.dual_residual)
        self._warm_z = None
        self._warm_y = None
        return xi_prev, solution


def _shift_stages(z: np.ndarray) -> np.ndarray:
    shifted = np.empty_like(z)
    shifted[:-3] = z[3:]
    shifted[-3:] = z[-3:]
    return shifted
