"""Reference trajectory generators: lemniscate, square, and cyclic waypoints."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .plant import PoseState


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "lemniscate"
    # lemniscate
    x_amplitude: float = 0.3
    y_amplitude: float = 0.4
    steps_per_lap: int = 350
    # square
    side: float = 1.0
    speed: float = 0.4
    corner_dwell: float = 0.0
    origin: tuple[float, float] = (0.0, 0.0)
    # waypoints
    points: tuple = ()
    capture_radius: float = 0.08

    def __post_init__(self):
        if self.kind not in ("lemniscate", "square", "waypoints"):
            raise ConfigError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "lemniscate":
            if self.x_amplitude <= 0 or self.y_amplitude <= 0 or self.steps_per_lap < 1:
                raise ConfigError("lemniscate needs positive amplitudes and steps_per_lap >= 1")
        if self.kind == "square" and (self.side <= 0 or self.speed <= 0 or self.corner_dwell < 0):
            raise ConfigError("square needs positive side and speed, nonnegative dwell")
        if self.kind == "waypoints" and not self.points:
            raise ConfigError("waypoint trajectory needs a nonempty point list")


def lemniscate_reference(k: int, ns: int, ax: float = 0.3, ay: float = 0.4) -> PoseState:
    """Figure-eight pose at step ``k`` of an ``ns``-step lap (heading held at 0)."""
    phase = 2.0 * math.pi * k / ns
    c, s = math.cos(phase), math.sin(phase)
    den = 1.0 + s * s
    return PoseState(ax * c / den, ay * s * c / den, 0.0)


def square_reference(t: float, spec: TrajectorySpec) -> PoseState:
    """Constant-speed perimeter traversal with an optional dwell at corners."""
    side, v = spec.side, spec.speed
    leg_time = side / v + spec.corner_dwell
    lap = 4.0 * leg_time
    t = t % lap
    corners = [(0.0, 0.0), (side, 0.0), (side, side), (0.0, side)]
    leg = min(int(t // leg_time), 3)
    t_leg = t - leg * leg_time
    ox, oy = spec.origin
    x0, y0 = corners[leg]
    x1, y1 = corners[(leg + 1) % 4]
    travel = min(t_leg * v, side)  # dwell holds the far corner
    frac = travel / side
    return PoseState(ox + x0 + (x1 - x0) * frac, oy + y0 + (y1 - y0) * frac, 0.0)


class WaypointTracker:
    """Cyclic waypoint reference: hold the target until captured, then advance."""

    def __init__(self, spec: TrajectorySpec):
        self.points = [tuple(float(c) for c in p) for p in spec.points]
        self.capture_radius = spec.capture_radius
        self.index = 0

    def update(self, pose: PoseState) -> PoseState:
        tx, ty = self.points[self.index]
        if math.hypot(pose.x - tx, pose.y - ty) <= self.capture_radius:
            self.index = (self.index + 1) % len(self.points)
            tx, ty = self.points[self.index]
        return PoseState(tx, ty, 0.0)


class ReferenceGenerator:
    """Uniform tick-indexed interface over the three trajectory kinds."""

    def __init__(self, spec: TrajectorySpec, t_s: float):
        self.spec = spec
        self.t_s = t_s
        self._tracker = WaypointTracker(spec) if spec.kind == "waypoints" else None

    def start_pose(self) -> PoseState:
        return self.window(0, 1, None)[0]

    def advance(self, pose_est: PoseState) -> None:
        """Per-tick bookkeeping (waypoint capture uses the estimated pose)."""
        if self._tracker is not None:
            self._tracker.update(pose_est)

    def window(self, k: int, count: int, pose_est: PoseState | None) -> list[PoseState]:
        """Reference poses for ticks k .. k+count-1."""
        spec = self.spec
        if spec.kind == "lemniscate":
            return [
                lemniscate_reference(k + i, spec.steps_per_lap, spec.x_amplitude, spec.y_amplitude)
                for i in range(count)
            ]
        if spec.kind == "square":
            return [square_reference((k + i) * self.t_s, spec) for i in range(count)]
        tx, ty = self._tracker.points[self._tracker.index]
        return [PoseState(tx, ty, 0.0)] * count
