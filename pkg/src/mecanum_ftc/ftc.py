"""Fault-tolerant dynamics-loop controller.

A bank of velocity filters, one per fault hypothesis, feeds a Bayesian
posterior over the hypothesis set.  Each hypothesis also carries an analytic
one-step control law (regularized least squares onto its control matrix), and
the applied wheel torque is the posterior-weighted sum of the per-hypothesis
laws, clamped to the actuator box.  The weighting smooths the switch between
laws when the true fault changes abruptly; a small posterior floor keeps
re-convergence alive after such changes.

No belief mixing happens between hypotheses: this is a multiple-model
adaptive estimator, not an interacting-multiple-model filter.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .errors import NumericalError
from .estimation import GaussianBelief, NoiseConfig, dyna_drift, dyna_friction_offset
from .faults import FaultSet
from .params import RobotParams
from .plant import SQRT2, BodyVelocity, FaultVector, WheelTorques, mixing_matrix

log = logging.getLogger(__name__)


def control_matrix(fault: FaultVector, params: RobotParams) -> np.ndarray:
    """3x4 torque-to-velocity-increment map under a given health vector.

    Column i scales linearly with lambda_i, so a dead wheel contributes a
    zero column.
    """
    scale = params.t_s / (SQRT2 * params.r)
    d = np.diag([1.0 / params.m, 1.0 / params.m, 1.0 / params.i_z])
    return scale * d @ mixing_matrix(params.l_bar) @ np.diag(fault.as_array())


def drift_term(xi: BodyVelocity, params: RobotParams) -> np.ndarray:
    """Control-free velocity propagation (damping, Coriolis, friction drag)."""
    return dyna_drift(xi.as_array(), params)


def per_model_control(
    belief: GaussianBelief,
    g_i: np.ndarray,
    xi_des: BodyVelocity,
    beta: float,
    params: RobotParams,
) -> WheelTorques:
    """Minimizer of || drift(xi_hat) + G u - xi_des ||^2 + beta ||u||^2, unclamped.

    The beta I term keeps the normal matrix invertible even when G loses
    column rank under complete wheel failures.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    residual = dyna_drift(belief.mean, params) - xi_des.as_array()
    normal = g_i.T @ g_i + beta * np.eye(4)
    u = -np.linalg.solve(normal, g_i.T @ residual)
    return WheelTorques.from_array(u)


def log_likelihood(innovation: np.ndarray, innovation_cov: np.ndarray) -> float:
    """log of |S|^(-1/2) exp(-innov' S^-1 innov / 2); the 2*pi power is
    omitted since it cancels in the posterior normalization."""
    try:
        l = np.linalg.cholesky(innovation_cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("innovation covariance is not positive definite") from exc
    w = np.linalg.solve(l, np.asarray(innovation, dtype=float))
    return float(-np.sum(np.log(np.diag(l))) - 0.5 * w @ w)


def likelihood(innovation: np.ndarray, innovation_cov: np.ndarray) -> float:
    return float(np.exp(log_likelihood(innovation, innovation_cov)))


def posterior_update(prior: np.ndarray, likelihoods: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Bayes update of the hypothesis weights, floored and renormalized.

    A degenerate all-zero likelihood row keeps the previous weights.
    """
    prior = np.asarray(prior, dtype=float)
    weighted = np.asarray(likelihoods, dtype=float) * prior
    total = weighted.sum()
    if not np.isfinite(total) or total <= 0.0:
        log.warning("posterior update skipped: likelihood mass is %s", total)
        return prior.copy()
    pi = weighted / total
    if floor > 0.0:
        pi = np.maximum(pi, floor)
        pi /= pi.sum()
        # renormalizing can push floored entries a hair below the floor; pin
        # them and take the mass from the dominant hypothesis
        under = pi < floor
        if under.any():
            deficit = float(np.sum(floor - pi[under]))
            pi[under] = floor
            pi[int(np.argmax(pi))] -= deficit
    return pi


def aggregate_control(pis: np.ndarray, controls: np.ndarray, limits: tuple[float, float]) -> WheelTorques:
    """Probability-weighted torque fusion, clamped to the actuator box."""
    fused = np.asarray(pis, dtype=float) @ np.asarray(controls, dtype=float)
    return WheelTorques.from_array(np.clip(fused, limits[0], limits[1]))


def matrix_divergence(a: np.ndarray, b: np.ndarray) -> float:
    """l + ln|A| - ln|B| - tr(B^-1 A) for SPD A, B; nonpositive, zero iff A = B."""
    for name, mat in (("A", a), ("B", b)):
        try:
            np.linalg.cholesky(mat)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"{name} is not positive definite") from exc
    l = a.shape[0]
    sign_a, logdet_a = np.linalg.slogdet(a)
    sign_b, logdet_b = np.linalg.slogdet(b)
    return float(l + logdet_a - logdet_b - np.trace(np.linalg.solve(b, a)))


@dataclass(frozen=True)
class ModelHypothesis:
    """Read view of one bank slot."""

    index: int
    g: np.ndarray
    belief: GaussianBelief
    pi: float


@dataclass(frozen=True)
class BankDiagnostics:
    loglik: np.ndarray
    innovations: np.ndarray
    nis: np.ndarray
    controls: np.ndarray


@dataclass(frozen=True)
class ModelBank:
    """Hypothesis bank state: weights, per-hypothesis beliefs, cached maps."""

    fault_set: FaultSet
    params: RobotParams
    noise: NoiseConfig
    pi: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    g_stack: np.ndarray
    control_maps: np.ndarray    # (s, 4, 3): -(G'G + beta I)^-1 G' per hypothesis
    beta: float
    floor: float
    u_limits: tuple[float, float]
    diag: BankDiagnostics | None = None

    @classmethod
    def create(
        cls,
        fault_set: FaultSet,
        params: RobotParams,
        noise: NoiseConfig,
        beta: float = 0.01,
        floor: float = 1e-6,
        u_limits: tuple[float, float] | None = None,
        prior: np.ndarray | None = None,
    ) -> "ModelBank":
        s = len(fault_set)
        g_stack = np.stack([control_matrix(v, params) for _, v, _ in fault_set.entries])
        eye4 = np.eye(4)
        control_maps = np.stack(
            [np.linalg.solve(g.T @ g + beta * eye4, g.T) for g in g_stack]
        )
        pi = np.full(s, 1.0 / s) if prior is None else np.asarray(prior, dtype=float)
        if u_limits is None:
            u_limits = (params.tau_min, params.tau_max)
        means = np.zeros((s, 3))
        covs = np.broadcast_to(noise.r_dyna, (s, 3, 3)).copy()
        return cls(fault_set, params, noise, pi, means, covs, g_stack, control_maps,
                   float(beta), float(floor), u_limits)

    @property
    def size(self) -> int:
        return len(self.fault_set)

    @property
    def hypotheses(self) -> list[ModelHypothesis]:
        return [
            ModelHypothesis(i + 1, self.g_stack[i], GaussianBelief(self.means[i], self.covs[i]), float(self.pi[i]))
            for i in range(self.size)
        ]

    @property
    def fused_mean(self) -> np.ndarray:
        return self.pi @ self.means

    def initialize(self, xi_init: BodyVelocity) -> "ModelBank":
        """Seed every hypothesis belief at a common starting estimate."""
        means = np.tile(xi_init.as_array(), (self.size, 1))
        covs = np.broadcast_to(self.noise.r_dyna, (self.size, 3, 3)).copy()
        return replace(self, means=means, covs=covs, diag=None)

    def fused_control(self, xi_des: BodyVelocity) -> WheelTorques:
        """Posterior-weighted control from the current beliefs (no filtering)."""
        controls = self._per_model_controls(self.means, xi_des)
        return aggregate_control(self.pi, controls, self.u_limits)

    def _per_model_controls(self, means: np.ndarray, xi_des: BodyVelocity) -> np.ndarray:
        residuals = _batched_drift(means, self.params) - xi_des.as_array()
        return -np.einsum("sij,sj->si", self.control_maps, residuals)


def _batched_drift(means: np.ndarray, params: RobotParams) -> np.ndarray:
    ts = params.t_s
    u, v, om = means[:, 0], means[:, 1], means[:, 2]
    out = np.empty_like(means)
    out[:, 0] = u + ts * (-params.c_v * u / params.m + v * om)
    out[:, 1] = v + ts * (-params.c_v * v / params.m - u * om)
    out[:, 2] = om + ts * (-params.c_theta * om / params.i_z)
    return out + dyna_friction_offset(params)


def ftc_step(
    bank: ModelBank,
    obs: BodyVelocity,
    u_prev: WheelTorques,
    xi_des: BodyVelocity,
    tick: int | None = None,
) -> tuple[WheelTorques, ModelBank]:
    """One dynamics-loop tick: filter bank, posterior update, fused control.

    The order is fixed: every hypothesis filter predicts with the previously
    applied torque and fuses the velocity observation; the innovation
    likelihoods update the posterior; each hypothesis then computes its
    control from its own refreshed belief, and the posterior-weighted sum is
    clamped to the torque box.
    """
    params, noise = bank.params, bank.noise
    means, covs, loglik, innov, nis, bad = backend.bank_filter_step(
        np.ascontiguousarray(bank.means),
        np.ascontiguousarray(bank.covs),
        np.ascontiguousarray(bank.g_stack),
        u_prev.as_array(),
        obs.as_array(),
        np.ascontiguousarray(noise.q_dyna),
        np.ascontiguousarray(noise.r_dyna),
        params.t_s,
        params.c_v / params.m,
        params.c_theta / params.i_z,
        dyna_friction_offset(params),
    )
    if bad >= 0:
        raise NumericalError("innovation covariance lost positive definiteness",
                             tick=tick, hypothesis=bad + 1)
    if not np.all(np.isfinite(loglik)):
        raise NumericalError("non-finite likelihood in hypothesis bank",
                             tick=tick, hypothesis=int(np.argmax(~np.isfinite(loglik))) + 1)

    # shared max-subtraction keeps the exponentials in range; the common
    # factor cancels in the posterior normalization
    lik = np.exp(loglik - loglik.max())
    pi = posterior_update(bank.pi, lik, bank.floor)

    new_bank = replace(bank, pi=pi, means=means, covs=covs, diag=None)
    controls = new_bank._per_model_controls(means, xi_des)
    torques = aggregate_control(pi, controls, bank.u_limits)
    new_bank = replace(new_bank, diag=BankDiagnostics(loglik, innov, nis, controls))
    return torques, new_bank
