import numpy as np
import pytest

from mecanum_ftc.errors import ConfigError
from mecanum_ftc.plant import PoseState
from mecanum_ftc.trajectories import (
    ReferenceGenerator,
    TrajectorySpec,
    WaypointTracker,
    lemniscate_reference,
    square_reference,
)


class TestLemniscate:
    def test_start_point(self):
        p = lemniscate_reference(0, 350)
        assert (p.x, p.y, p.theta) == pytest.approx((0.3, 0.0, 0.0))

    def test_quarter_lap_crosses_origin(self):
        # cos(pi/2) = 0 kills both coordinates
        p = lemniscate_reference(100, 400)
        assert p.x == pytest.approx(0.0, abs=1e-15)
        assert p.y == pytest.approx(0.0, abs=1e-15)

    def test_half_lap(self):
        p = lemniscate_reference(200, 400)
        assert (p.x, p.y) == pytest.approx((-0.3, 0.0), abs=1e-15)

    def test_periodicity(self):
        a = lemniscate_reference(17, 350)
        b = lemniscate_reference(17 + 350, 350)
        assert (a.x, a.y) == pytest.approx((b.x, b.y))

    def test_heading_always_zero(self):
        assert all(lemniscate_reference(k, 350).theta == 0.0 for k in range(0, 350, 7))


class TestSquare:
    SPEC = TrajectorySpec(kind="square", side=1.0, speed=0.4)

    def test_starts_at_first_corner(self):
        p = square_reference(0.0, self.SPEC)
        assert (p.x, p.y) == (0.0, 0.0)

    def test_constant_speed_on_first_leg(self):
        p = square_reference(1.0, self.SPEC)
        assert (p.x, p.y) == pytest.approx((0.4, 0.0))

    def test_lap_length_is_four_sides(self):
        # sampled path length over one lap approaches the perimeter
        lap = 4 * self.SPEC.side / self.SPEC.speed
        ts = np.linspace(0, lap, 4001)
        pts = np.array([[square_reference(t, self.SPEC).x, square_reference(t, self.SPEC).y] for t in ts])
        length = np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
        assert length == pytest.approx(4 * self.SPEC.side, rel=1e-6)

    def test_corner_dwell_holds_position(self):
        spec = TrajectorySpec(kind="square", side=1.0, speed=0.5, corner_dwell=1.0)
        leg_time = 1.0 / 0.5 + 1.0
        p_arrive = square_reference(2.0, spec)
        p_dwell = square_reference(2.5, spec)
        assert (p_arrive.x, p_arrive.y) == pytest.approx((1.0, 0.0))
        assert (p_dwell.x, p_dwell.y) == pytest.approx((1.0, 0.0))
        p_next = square_reference(leg_time + 0.5, spec)
        assert p_next.y == pytest.approx(0.25)

    def test_origin_offset(self):
        spec = TrajectorySpec(kind="square", side=1.0, speed=0.4, origin=(5.0, -2.0))
        p = square_reference(0.0, spec)
        assert (p.x, p.y) == (5.0, -2.0)


class TestWaypoints:
    SPEC = TrajectorySpec(kind="waypoints", points=((1, 0), (1, 1), (0, 1), (0, 0)),
                          capture_radius=0.1)

    def test_holds_target_until_captured(self):
        tracker = WaypointTracker(self.SPEC)
        p = tracker.update(PoseState(0, 0, 0))
        assert (p.x, p.y) == (1.0, 0.0)
        p = tracker.update(PoseState(0.5, 0.0, 0))
        assert (p.x, p.y) == (1.0, 0.0)

    def test_advances_within_capture_radius(self):
        tracker = WaypointTracker(self.SPEC)
        p = tracker.update(PoseState(0.95, 0.0, 0))
        assert (p.x, p.y) == (1.0, 1.0)

    def test_cycles_back_to_first(self):
        tracker = WaypointTracker(self.SPEC)
        for target in [(1, 1), (0, 1), (0, 0), (1, 0)]:
            pose = PoseState(*tracker.points[tracker.index], 0)
            p = tracker.update(pose)
            assert (p.x, p.y) == target


class TestReferenceGenerator:
    def test_window_length_and_values(self):
        gen = ReferenceGenerator(TrajectorySpec(kind="lemniscate"), 0.1)
        win = gen.window(5, 11, None)
        assert len(win) == 11
        expected = lemniscate_reference(7, 350)
        assert win[2].x == pytest.approx(expected.x)

    def test_waypoint_window_is_constant(self):
        gen = ReferenceGenerator(self.spec_waypoints(), 0.1)
        gen.advance(PoseState(0, 0, 0))
        win = gen.window(0, 5, PoseState(0, 0, 0))
        assert all((p.x, p.y) == (1.0, 0.0) for p in win)

    @staticmethod
    def spec_waypoints():
        return TrajectorySpec(kind="waypoints", points=((1, 0), (0, 0)), capture_radius=0.05)


def test_spec_validation():
    with pytest.raises(ConfigError):
        TrajectorySpec(kind="circle")
    with pytest.raises(ConfigError):
        TrajectorySpec(kind="square", side=-1.0)
    with pytest.raises(ConfigError):
        TrajectorySpec(kind="waypoints", points=())
