"""Declarative scenario configuration: JSON schema, defaults, and the three
shipped fault scenarios (one-fault lemniscate, two-fault square, collision
waypoints)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import PIDGains
from .errors import ConfigError
from .estimation import NoiseConfig
from .faults import FaultSchedule, FaultSet, standard_fault_set
from .mpc import MPCConfig
from .params import RobotParams
from .plant import BodyVelocity, FaultVector, PoseState
from .qp import QPSettings
from .trajectories import TrajectorySpec

CONTROLLERS = ("ftc", "apt", "pid")


@dataclass(frozen=True)
class ObstacleSpec:
    center: tuple[float, float]
    radius: float
    danger_radius: float

    def __post_init__(self):
        if not 0.0 < self.radius < self.danger_radius:
            raise ConfigError("obstacle needs 0 < radius < danger_radius")


@dataclass(frozen=True)
class FTCSettings:
    beta: float = 0.01
    floor: float = 1e-6


@dataclass(frozen=True)
class APTSettings:
    forgetting: float = 0.88
    beta: float = 0.005
    p0: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    robot: RobotParams = field(default_factory=RobotParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig.from_scalars)
    noise_scale: float = 1.0
    fault_set: FaultSet = field(default_factory=standard_fault_set)
    fault_schedule: FaultSchedule = field(
        default_factory=lambda: FaultSchedule.constant(FaultVector.healthy())
    )
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    controller: str = "ftc"
    mpc: MPCConfig = field(default_factory=MPCConfig)
    qp: QPSettings = field(default_factory=QPSettings)
    ftc: FTCSettings = field(default_factory=FTCSettings)
    apt: APTSettings = field(default_factory=APTSettings)
    pid: PIDGains = field(default_factory=PIDGains)
    duration: float = 35.0
    seed: int = 1
    initial_pose: PoseState = PoseState(0.3, 0.0, 0.0)
    initial_xi: BodyVelocity = BodyVelocity(0.0, 0.0, 0.0)
    obstacles: tuple[ObstacleSpec, ...] = ()
    rmse_transient: float = 2.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be nonnegative")

    @property
    def n_ticks(self) -> int:
        return int(np.floor(self.duration / self.robot.t_s + 1e-9))

    def with_(self, **kwargs) -> "ScenarioConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        r = self.robot
        return {
            "controller": self.controller,
            "duration": self.duration,
            "seed": self.seed,
            "noise_scale": self.noise_scale,
            "initial_pose": [self.initial_pose.x, self.initial_pose.y, self.initial_pose.theta],
            "initial_xi": [self.initial_xi.u, self.initial_xi.v, self.initial_xi.omega],
            "rmse_transient": self.rmse_transient,
            "robot": {
                "m": r.m, "i_z": r.i_z, "r": r.r, "l_x": r.l_x, "l_y": r.l_y,
                "c_v": r.c_v, "c_theta": r.c_theta, "tau_f": list(r.tau_f),
                "tau_limits": [r.tau_min, r.tau_max], "t_s": r.t_s,
            },
            "noise": {
                "q_kine": self.noise.q_kine.tolist(),
                "r_kine": self.noise.r_kine.tolist(),
                "q_dyna": self.noise.q_dyna.tolist(),
                "r_dyna": self.noise.r_dyna.tolist(),
            },
            "fault_set": [list(v.lam) for _, v, _ in self.fault_set.entries],
            "fault_schedule": [[t, list(v.lam)] for t, v in self.fault_schedule.segments],
            "trajectory": {
                "kind": self.trajectory.kind,
                "x_amplitude": self.trajectory.x_amplitude,
                "y_amplitude": self.trajectory.y_amplitude,
                "steps_per_lap": self.trajectory.steps_per_lap,
                "side": self.trajectory.side,
                "speed": self.trajectory.speed,
                "corner_dwell": self.trajectory.corner_dwell,
                "origin": list(self.trajectory.origin),
                "points": [list(p) for p in self.trajectory.points],
                "capture_radius": self.trajectory.capture_radius,
            },
            "mpc": {
                "horizon": self.mpc.horizon,
                "q_stage": self.mpc.q_stage.tolist(),
                "q_terminal": self.mpc.q_terminal.tolist(),
                "r_stage": self.mpc.r_stage.tolist(),
                "xi_min": self.mpc.xi_min.tolist(),
                "xi_max": self.mpc.xi_max.tolist(),
            },
            "qp": {
                "rho": self.qp.rho, "sigma": self.qp.sigma, "alpha": self.qp.alpha,
                "eps_abs": self.qp.eps_abs, "eps_rel": self.qp.eps_rel,
                "max_iter": self.qp.max_iter, "polish": self.qp.polish,
            },
            "ftc": {"beta": self.ftc.beta, "floor": self.ftc.floor},
            "apt": {"forgetting": self.apt.forgetting, "beta": self.apt.beta, "p0": self.apt.p0},
            "pid": {
                "outer_kp": list(self.pid.outer_kp), "outer_ki": list(self.pid.outer_ki),
                "outer_kd": list(self.pid.outer_kd), "inner_kp": list(self.pid.inner_kp),
                "inner_ki": list(self.pid.inner_ki), "inner_kd": list(self.pid.inner_kd),
                "outer_windup": self.pid.outer_windup, "inner_windup": self.pid.inner_windup,
            },
            "obstacles": [
                {"center": list(o.center), "radius": o.radius, "danger_radius": o.danger_radius}
                for o in self.obstacles
            ],
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _as_cov(value, name: str) -> np.ndarray:
    """Scalar -> scaled identity, 3-vector -> diagonal, 3x3 -> as given."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(3)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape == (3, 3):
        return arr
    raise ConfigError(f"{name} must be a scalar, length-3 diagonal, or 3x3 matrix")


def _take(d: dict, known: set, where: str) -> None:
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def from_dict(data: dict) -> ScenarioConfig:
    """Build a validated config from the JSON schema, filling defaults."""
    if not isinstance(data, dict):
        raise ConfigError("scenario config must be a JSON object")
    _take(data, {
        "controller", "duration", "seed", "noise_scale", "initial_pose", "initial_xi",
        "rmse_transient", "robot", "noise", "fault_set", "fault_schedule", "trajectory",
        "mpc", "qp", "ftc", "apt", "pid", "obstacles",
    }, "top-level")
    base = ScenarioConfig()
    kwargs: dict = {}

    if "robot" in data:
        rd = dict(data["robot"])
        _take(rd, {"m", "i_z", "r", "l_x", "l_y", "c_v", "c_theta", "tau_f", "tau_limits", "t_s"}, "robot")
        if "tau_f" in rd:
            tf = rd["tau_f"]
            rd["tau_f"] = tuple([float(tf)] * 4) if np.isscalar(tf) else tuple(float(v) for v in tf)
        if "tau_limits" in rd:
            lo, hi = rd.pop("tau_limits")
            rd["tau_min"], rd["tau_max"] = float(lo), float(hi)
        try:
            kwargs["robot"] = RobotParams(**{k: v for k, v in rd.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid robot parameters: {exc}") from exc

    if "noise" in data:
        nd = dict(data["noise"])
        _take(nd, {"q_kine", "r_kine", "q_dyna", "r_dyna"}, "noise")
        defaults = NoiseConfig.from_scalars()
        try:
            kwargs["noise"] = NoiseConfig(
                q_kine=_as_cov(nd["q_kine"], "q_kine") if "q_kine" in nd else defaults.q_kine,
                r_kine=_as_cov(nd["r_kine"], "r_kine") if "r_kine" in nd else defaults.r_kine,
                q_dyna=_as_cov(nd["q_dyna"], "q_dyna") if "q_dyna" in nd else defaults.q_dyna,
                r_dyna=_as_cov(nd["r_dyna"], "r_dyna") if "r_dyna" in nd else defaults.r_dyna,
            )
        except ValueError as exc:
            raise ConfigError(f"invalid noise config: {exc}") from exc

    if "fault_set" in data:
        fs = data["fault_set"]
        if fs == "standard":
            kwargs["fault_set"] = standard_fault_set()
        else:
            try:
                kwargs["fault_set"] = FaultSet.from_vectors(fs)
            except ValueError as exc:
                raise ConfigError(f"invalid fault set: {exc}") from exc

    if "fault_schedule" in data:
        try:
            kwargs["fault_schedule"] = FaultSchedule.from_pairs(data["fault_schedule"])
        except ValueError as exc:
            raise ConfigError(f"invalid fault schedule: {exc}") from exc

    if "trajectory" in data:
        td = dict(data["trajectory"])
        if "points" in td:
            td["points"] = tuple(tuple(float(c) for c in p) for p in td["points"])
        if "origin" in td:
            td["origin"] = tuple(float(c) for c in td["origin"])
        try:
            kwargs["trajectory"] = TrajectorySpec(**td)
        except TypeError as exc:
            raise ConfigError(f"invalid trajectory spec: {exc}") from exc

    if "mpc" in data:
        md = dict(data["mpc"])
        _take(md, {"horizon", "q_stage", "q_terminal", "r_stage", "xi_min", "xi_max"}, "mpc")
        mk: dict = {"horizon": int(md.get("horizon", base.mpc.horizon))}
        for key in ("q_stage", "q_terminal", "r_stage"):
            if key in md:
                mk[key] = _as_cov(md[key], key)
        for key in ("xi_min", "xi_max"):
            if key in md:
                mk[key] = np.asarray(md[key], dtype=float)
        kwargs["mpc"] = MPCConfig(**mk)

    if "qp" in data:
        qd = dict(data["qp"])
        _take(qd, {"rho", "sigma", "alpha", "eps_abs", "eps_rel", "max_iter", "polish"}, "qp")
        kwargs["qp"] = QPSettings(**qd)

    if "ftc" in data:
        fd = dict(data["ftc"])
        _take(fd, {"beta", "floor"}, "ftc")
        kwargs["ftc"] = FTCSettings(**fd)

    if "apt" in data:
        ad = dict(data["apt"])
        _take(ad, {"forgetting", "beta", "p0"}, "apt")
        kwargs["apt"] = APTSettings(**ad)

    if "pid" in data:
        pd = dict(data["pid"])
        _take(pd, {"outer_kp", "outer_ki", "outer_kd", "inner_kp", "inner_ki", "inner_kd",
                   "outer_windup", "inner_windup"}, "pid")
        for key in ("outer_kp", "outer_ki", "outer_kd", "inner_kp", "inner_ki", "inner_kd"):
            if key in pd:
                pd[key] = tuple(float(v) for v in pd[key])
        try:
            kwargs["pid"] = PIDGains(**pd)
        except ValueError as exc:
            raise ConfigError(f"invalid PID gains: {exc}") from exc

    if "obstacles" in data:
        obstacles = []
        for od in data["obstacles"]:
            _take(dict(od), {"center", "radius", "danger_radius"}, "obstacle")
            obstacles.append(ObstacleSpec(tuple(float(c) for c in od["center"]),
                                          float(od["radius"]), float(od["danger_radius"])))
        kwargs["obstacles"] = tuple(obstacles)

    for key in ("controller", "duration", "seed", "noise_scale", "rmse_transient"):
        if key in data:
            kwargs[key] = data[key]
    if "initial_pose" in data:
        kwargs["initial_pose"] = PoseState(*(float(v) for v in data["initial_pose"]))
    if "initial_xi" in data:
        kwargs["initial_xi"] = BodyVelocity(*(float(v) for v in data["initial_xi"]))

    try:
        return replace(base, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return from_dict(data)


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def one_fault_scenario(**overrides) -> ScenarioConfig:
    """35 s lemniscate with a sequential single-wheel fault schedule."""
    cfg = ScenarioConfig(
        fault_schedule=FaultSchedule.from_pairs([
            (0.0, (0.5, 0.0, 1.0, 1.0)),
            (10.0, (1.0, 0.65, 1.0, 1.0)),
            (20.0, (1.0, 1.0, 1.0, 0.0)),
        ]),
        trajectory=TrajectorySpec(kind="lemniscate"),
        duration=35.0,
        initial_pose=PoseState(0.3, 0.0, 0.0),
    )
    return cfg.with_(**overrides) if overrides else cfg


def two_fault_scenario(**overrides) -> ScenarioConfig:
    """10 s square with adjacent-pair fault changes."""
    cfg = ScenarioConfig(
        fault_schedule=FaultSchedule.from_pairs([
            (0.0, (0.50, 0.45, 1.0, 1.0)),
            (3.5, (1.0, 0.0, 0.0, 1.0)),
            (6.5, (1.0, 1.0, 0.01, 0.15)),
        ]),
        trajectory=TrajectorySpec(kind="square", side=1.0, speed=0.4),
        duration=10.0,
        initial_pose=PoseState(0.0, 0.0, 0.0),
    )
    return cfg.with_(**overrides) if overrides else cfg


def collision_scenario(**overrides) -> ScenarioConfig:
    """19 s cyclic waypoint run among three obstacles with danger zones."""
    cfg = ScenarioConfig(
        fault_schedule=FaultSchedule.from_pairs([
            (0.0, (0.45, 1.0, 1.0, 1.0)),
            (3.5, (1.0, 0.65, 1.0, 1.0)),
            (6.5, (1.0, 1.0, 0.0, 0.0)),
        ]),
        trajectory=TrajectorySpec(
            kind="waypoints",
            points=((1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)),
            capture_radius=0.1,
        ),
        obstacles=(
            ObstacleSpec((0.5, 0.35), 0.1, 0.25),
            ObstacleSpec((0.65, 0.5), 0.1, 0.25),
            ObstacleSpec((0.5, 0.65), 0.1, 0.25),
        ),
        duration=19.0,
        initial_pose=PoseState(0.0, 0.0, 0.0),
    )
    return cfg.with_(**overrides) if overrides else cfg


def nominal_scenario(**overrides) -> ScenarioConfig:
    """Fault-free, noise-free lemniscate tracking run."""
    cfg = ScenarioConfig(noise_scale=0.0, duration=35.0)
    return cfg.with_(**overrides) if overrides else cfg
