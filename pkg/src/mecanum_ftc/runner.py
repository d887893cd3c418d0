"""Closed-loop scenario runner, per-tick logging, and summary metrics.

Per tick, in fixed order: draw the four noise vectors (kinematics process,
dynamics process, kinematics observation, dynamics observation), observe both
loops, run the pose filter, build the reference window, run the selected
controller, log the record, then advance the ground truth.  Identical
(config, seed) pairs reproduce the log bit for bit.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backend
from .baselines import APTController, PIDController
from .errors import NumericalError
from .estimation import GaussianBelief, kine_filter_step
from .faults import nearest_fault, schedule_lookup
from .ftc import ModelBank, ftc_step
from .mpc import KinematicsMPC
from .plant import BodyVelocity, PoseState, WheelTorques, plant_step
from .scenario import ScenarioConfig
from .trajectories import ReferenceGenerator


@dataclass
class TimeSeriesLog:
    """One record per control tick; fixed schema, no gaps."""

    t: np.ndarray
    true_pose: np.ndarray
    true_xi: np.ndarray
    est_pose: np.ndarray
    est_xi: np.ndarray
    ref_pose: np.ndarray
    xi_des: np.ndarray
    torques: np.ndarray
    lam: np.ndarray
    pi: np.ndarray
    obstacle_dist: np.ndarray
    qp_iters: np.ndarray
    qp_status: list[str]
    extras: dict

    def __len__(self) -> int:
        return self.t.shape[0]

    def column_names(self) -> list[str]:
        names = ["t"]
        names += [f"{c}_true" for c in ("x", "y", "theta", "u", "v", "omega")]
        names += [f"{c}_est" for c in ("x", "y", "theta", "u", "v", "omega")]
        names += [f"{c}_ref" for c in ("x", "y", "theta")]
        names += [f"{c}_des" for c in ("u", "v", "omega")]
        names += [f"tau{i}" for i in range(1, 5)]
        names += [f"lambda{i}" for i in range(1, 5)]
        names += [f"pi{i}" for i in range(1, self.pi.shape[1] + 1)]
        names += [f"obstacle{i}_dist" for i in range(1, self.obstacle_dist.shape[1] + 1)]
        names += ["qp_iters", "qp_status"]
        return names

    def to_csv(self, path: str | Path) -> None:
        lines = [",".join(self.column_names())]
        for k in range(len(self)):
            vals = [self.t[k]]
            vals += list(self.true_pose[k]) + list(self.true_xi[k])
            vals += list(self.est_pose[k]) + list(self.est_xi[k])
            vals += list(self.ref_pose[k]) + list(self.xi_des[k])
            vals += list(self.torques[k]) + list(self.lam[k]) + list(self.pi[k])
            vals += list(self.obstacle_dist[k])
            fields = [repr(float(v)) for v in vals]
            fields.append(str(int(self.qp_iters[k])))
            fields.append(self.qp_status[k])
            lines.append(",".join(fields))
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class SegmentMetrics:
    t_start: float
    t_end: float
    true_lambda: tuple
    nearest_index: int
    converged: bool
    convergence_time: float | None
    converged_index: int | None
    final_argmax: int


@dataclass(frozen=True)
class RunMetrics:
    position_rmse: float
    velocity_rmse: float
    segments: tuple[SegmentMetrics, ...]
    min_obstacle_clearance: float | None
    danger_zone_time: float
    runtime_seconds: float

    def to_dict(self, config: ScenarioConfig | None = None) -> dict:
        out = {
            "position_rmse": self.position_rmse,
            "velocity_rmse": self.velocity_rmse,
            "min_obstacle_clearance": self.min_obstacle_clearance,
            "danger_zone_time": self.danger_zone_time,
            "runtime_seconds": self.runtime_seconds,
        }
        for i, seg in enumerate(self.segments, start=1):
            out[f"segment{i}_t_start"] = seg.t_start
            out[f"segment{i}_true_lambda"] = list(seg.true_lambda)
            out[f"segment{i}_nearest_index"] = seg.nearest_index
            out[f"segment{i}_converged"] = seg.converged
            out[f"segment{i}_convergence_time"] = seg.convergence_time
            out[f"segment{i}_converged_index"] = seg.converged_index
            out[f"segment{i}_final_argmax"] = seg.final_argmax
        if config is not None:
            out["controller"] = config.controller
            out["seed"] = config.seed
            out["config_hash"] = config.config_hash()
            out["backend"] = backend.name()
        return out


def run_scenario(config: ScenarioConfig) -> tuple[TimeSeriesLog, RunMetrics]:
    params, noise = config.robot, config.noise
    ts = params.t_s
    n = config.n_ticks
    s = len(config.fault_set)
    n_obs = len(config.obstacles)
    rng = np.random.default_rng(config.seed)
    scale = config.noise_scale

    chol_qk = np.linalg.cholesky(noise.q_kine)
    chol_qd = np.linalg.cholesky(noise.q_dyna)
    chol_rk = np.linalg.cholesky(noise.r_kine)
    chol_rd = np.linalg.cholesky(noise.r_dyna)

    refgen = ReferenceGenerator(config.trajectory, ts)
    uniform_pi = np.full(s, 1.0 / s)

    mpc = bank = apt = pid = None
    if config.controller == "pid":
        pid = PIDController(params, config.pid)
    else:
        mpc = KinematicsMPC(params, config.mpc, config.qp)
        if config.controller == "ftc":
            bank = ModelBank.create(
                config.fault_set, params, noise,
                beta=config.ftc.beta, floor=config.ftc.floor,
            )
        else:
            apt = APTController(
                params, forgetting=config.apt.forgetting,
                beta=config.apt.beta, p0=config.apt.p0,
            )

    log = TimeSeriesLog(
        t=np.zeros(n),
        true_pose=np.zeros((n, 3)),
        true_xi=np.zeros((n, 3)),
        est_pose=np.zeros((n, 3)),
        est_xi=np.zeros((n, 3)),
        ref_pose=np.zeros((n, 3)),
        xi_des=np.zeros((n, 3)),
        torques=np.zeros((n, 4)),
        lam=np.zeros((n, 4)),
        pi=np.zeros((n, s)),
        obstacle_dist=np.zeros((n, n_obs)),
        qp_iters=np.zeros(n, dtype=int),
        qp_status=["skipped"] * n,
        extras={
            "kine_innov_norm": np.full(n, np.nan),
            "kine_nis": np.full(n, np.nan),
            "dyna_innov_norm_true": np.full(n, np.nan),
            "dyna_nis_true": np.full(n, np.nan),
            "qp_primal_residual": np.full(n, np.nan),
            "qp_dual_residual": np.full(n, np.nan),
        },
    )

    pose = config.initial_pose.as_array()
    xi = config.initial_xi.as_array()
    u_prev = WheelTorques.from_array(np.zeros(4))
    xi_des_prev = BodyVelocity(0.0, 0.0, 0.0)
    kine_belief: GaussianBelief | None = None
    xi_pred_src = np.zeros(3)
    horizon = config.mpc.horizon

    t_wall = time.perf_counter()
    for k in range(n):
        t = k * ts
        lam_vec = schedule_lookup(config.fault_schedule, t)
        lam = lam_vec.as_array()

        w_kine = scale * (chol_qk @ rng.standard_normal(3))
        w_dyna = scale * (chol_qd @ rng.standard_normal(3))
        v_kine = scale * (chol_rk @ rng.standard_normal(3))
        v_dyna = scale * (chol_rd @ rng.standard_normal(3))
        pose_obs = pose + v_kine
        xi_obs = xi + v_dyna

        if k == 0:
            kine_belief = GaussianBelief(pose_obs.copy(), noise.r_kine.copy())
            if bank is not None:
                bank = bank.initialize(BodyVelocity.from_array(xi_obs))
        else:
            try:
                res = kine_filter_step(
                    kine_belief, BodyVelocity.from_array(xi_pred_src),
                    PoseState.from_array(pose_obs), params, noise,
                )
            except NumericalError as exc:
                raise NumericalError(f"pose filter failed: {exc}", tick=k) from exc
            kine_belief = res.belief
            log.extras["kine_innov_norm"][k] = float(np.linalg.norm(res.innovation))
            log.extras["kine_nis"][k] = float(
                res.innovation @ np.linalg.solve(res.innovation_cov, res.innovation)
            )
        pose_est = kine_belief.mean
        pose_est_state = PoseState.from_array(pose_est)

        refgen.advance(pose_est_state)
        if pid is not None:
            ref_window = refgen.window(k, 1, pose_est_state)
            torques, xi_des_bv = pid.step(
                pose_est_state, BodyVelocity.from_array(xi_obs), ref_window[0])
            xi_est = xi_obs
            xi_pred_next = xi_obs
            pi_row = uniform_pi
        else:
            ref_window = refgen.window(k, horizon + 1, pose_est_state)
            xi_des_bv, qp_sol = mpc.step(pose_est_state, ref_window, xi_des_prev)
            log.qp_iters[k] = qp_sol.iterations
            log.qp_status[k] = qp_sol.status
            log.extras["qp_primal_residual"][k] = qp_sol.primal_residual
            log.extras["qp_dual_residual"][k] = qp_sol.dual_residual
            xi_des_prev = xi_des_bv
            if bank is not None:
                if k == 0:
                    torques = bank.fused_control(xi_des_bv)
                    xi_pred_next = xi_obs
                else:
                    torques, bank = ftc_step(
                        bank, BodyVelocity.from_array(xi_obs), u_prev, xi_des_bv, tick=k)
                    true_idx = nearest_fault(lam_vec, config.fault_set)
                    log.extras["dyna_innov_norm_true"][k] = float(
                        np.linalg.norm(bank.diag.innovations[true_idx - 1]))
                    log.extras["dyna_nis_true"][k] = float(bank.diag.nis[true_idx - 1])
                    # the pose filter propagates with the most-probable
                    # model's estimate; the weighted fuse drags in
                    # not-yet-suppressed hypotheses and their bias
                    xi_pred_next = bank.means[int(np.argmax(bank.pi))]
                xi_est = bank.fused_mean
                pi_row = bank.pi
            else:
                torques = apt.step(BodyVelocity.from_array(xi_obs), xi_des_bv)
                xi_est = xi_obs
                xi_pred_next = xi_obs
                pi_row = uniform_pi

        log.t[k] = t
        log.true_pose[k] = pose
        log.true_xi[k] = xi
        log.est_pose[k] = pose_est
        log.est_xi[k] = xi_est
        log.ref_pose[k] = ref_window[0].as_array()
        log.xi_des[k] = xi_des_bv.as_array()
        log.torques[k] = torques.as_array()
        log.lam[k] = lam
        log.pi[k] = pi_row
        for j, obstacle in enumerate(config.obstacles):
            log.obstacle_dist[k, j] = math.hypot(
                pose[0] - obstacle.center[0], pose[1] - obstacle.center[1])

        pose_state, xi_state = plant_step(
            PoseState.from_array(pose), BodyVelocity.from_array(xi),
            torques, lam_vec, params, w_kine, w_dyna,
        )
        pose = pose_state.as_array()
        xi = xi_state.as_array()
        if not np.all(np.isfinite(pose)) or not np.all(np.isfinite(xi)):
            raise NumericalError("plant state became non-finite", tick=k)
        u_prev = torques
        xi_pred_src = xi_pred_next

    runtime = time.perf_counter() - t_wall
    return log, compute_metrics(log, config, runtime)


def compute_metrics(log: TimeSeriesLog, config: ScenarioConfig, runtime_seconds: float = 0.0) -> RunMetrics:
    """Summary statistics over a completed log.

    RMSEs cover the post-transient window; fault-segment convergence requires
    the posterior argmax to reach the set member nearest the true fault and
    hold it for the remainder of the segment.
    """
    mask = log.t >= config.rmse_transient
    if not mask.any():
        mask = np.ones(len(log), dtype=bool)
    pos_err = log.true_pose[mask, :2] - log.ref_pose[mask, :2]
    position_rmse = float(np.sqrt(np.mean(np.sum(pos_err**2, axis=1))))
    vel_err = log.true_xi[mask, :2] - log.xi_des[mask, :2]
    velocity_rmse = float(np.sqrt(np.mean(np.sum(vel_err**2, axis=1))))

    duration = config.duration
    segments = []
    starts = [t for t, _ in config.fault_schedule.segments]
    vectors = [v for _, v in config.fault_schedule.segments]
    for i, (t0, vec) in enumerate(zip(starts, vectors)):
        t1 = starts[i + 1] if i + 1 < len(starts) else duration
        idx = np.flatnonzero((log.t >= t0) & (log.t < t1))
        if idx.size == 0:
            continue
        nearest = nearest_fault(vec, config.fault_set)
        argmax = np.argmax(log.pi[idx], axis=1) + 1
        hits = argmax == nearest
        # first tick after which the argmax never leaves the nearest index
        stable_from = None
        for j in range(len(hits) - 1, -1, -1):
            if not hits[j]:
                break
            stable_from = j
        converged = stable_from is not None
        segments.append(SegmentMetrics(
            t_start=float(t0),
            t_end=float(t1),
            true_lambda=vec.lam,
            nearest_index=nearest,
            converged=converged,
            convergence_time=float(log.t[idx[stable_from]] - t0) if converged else None,
            converged_index=nearest if converged else None,
            final_argmax=int(argmax[-1]),
        ))

    min_clearance = None
    danger_time = 0.0
    if config.obstacles:
        radii = np.array([o.radius for o in config.obstacles])
        danger = np.array([o.danger_radius for o in config.obstacles])
        clearance = log.obstacle_dist - radii
        min_clearance = float(clearance.min())
        in_danger = (log.obstacle_dist < danger).any(axis=1)
        danger_time = float(in_danger.sum() * config.robot.t_s)

    return RunMetrics(
        position_rmse=position_rmse,
        velocity_rmse=velocity_rmse,
        segments=tuple(segments),
        min_obstacle_clearance=min_clearance,
        danger_zone_time=danger_time,
        runtime_seconds=runtime_seconds,
    )


def write_run(
    log: TimeSeriesLog,
    metrics: RunMetrics,
    config: ScenarioConfig,
    outdir: str | Path,
    run_id: str | None = None,
) -> Path:
    """Persist one run as <outdir>/<run-id>/{timeseries.csv, metrics.json}."""
    run_id = run_id or f"{config.controller}-seed{config.seed}"
    run_dir = Path(outdir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    log.to_csv(run_dir / "timeseries.csv")
    payload = metrics.to_dict(config)
    (run_dir / "metrics.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return run_dir
