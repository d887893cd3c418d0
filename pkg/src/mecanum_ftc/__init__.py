"""Fault-tolerant control workbench for four-Mecanum-wheeled mobile robots.

Two-loop architecture: an EKF + linear-MPC kinematics loop commands body
velocities, and a Bayesian multiple-model dynamics loop turns them into wheel
torques that stay effective under partial and complete actuator faults.
Everything is deterministic given (config, seed).
"""

from . import backend
from .baselines import APTController, PIDController, PIDGains, RLSState, rls_update
from .errors import ConfigError, NumericalError
from .estimation import GaussianBelief, NoiseConfig, UpdateResult, ekf_predict, ekf_update
from .faults import FaultSchedule, FaultSet, nearest_fault, schedule_lookup, standard_fault_set
from .ftc import (
    ModelBank,
    ModelHypothesis,
    aggregate_control,
    control_matrix,
    drift_term,
    ftc_step,
    likelihood,
    matrix_divergence,
    per_model_control,
    posterior_update,
)
from .mpc import KinematicsMPC, LinearizedModel, MPCConfig, build_condensed_qp, linearize_kinematics
from .params import RobotParams
from .plant import (
    BodyVelocity,
    BodyWrench,
    FaultVector,
    PoseState,
    WheelTorques,
    body_wrench,
    dynamic_step,
    kinematic_step,
    plant_step,
    wheel_forces,
)
from .qp import QPProblem, QPSettings, QPSolution, solve_qp_admm
from .runner import RunMetrics, TimeSeriesLog, compute_metrics, run_scenario, write_run
from .scenario import (
    ObstacleSpec,
    ScenarioConfig,
    collision_scenario,
    load_config,
    nominal_scenario,
    one_fault_scenario,
    save_config,
    two_fault_scenario,
)
from .trajectories import TrajectorySpec, lemniscate_reference, square_reference

__version__ = "0.1.0"
