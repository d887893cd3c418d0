"""Physical parameters of the four-Mecanum-wheeled robot."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class RobotParams:
    """Rigid-body, wheel and discretization constants.

    Defaults are the simulation platform used throughout the shipped
    scenarios; every field can be overridden from a scenario config.
    ``l_bar = l_x + l_y`` is derived, never stored.
    """

    m: float = 3.0            # mass [kg]
    i_z: float = 1.2          # yaw inertia [kg m^2]
    r: float = 0.04           # wheel radius [m]
    l_x: float = 0.1          # half length [m]
    l_y: float = 0.1          # half width [m]
    c_v: float = 2.0          # linear damping [N s/m]
    c_theta: float = 0.1      # angular damping [N m s]
    tau_f: tuple[float, float, float, float] = (0.05, 0.05, 0.05, 0.05)  # friction torque per wheel [N m]
    tau_min: float = -0.5     # driving torque lower bound [N m]
    tau_max: float = 0.5      # driving torque upper bound [N m]
    t_s: float = 0.1          # sampling interval [s]

    def __post_init__(self):
        if self.m <= 0 or self.i_z <= 0 or self.r <= 0:
            raise ValueError("m, i_z and r must be positive")
        if self.l_x <= 0 or self.l_y <= 0:
            raise ValueError("l_x and l_y must be positive")
        if self.c_v < 0 or self.c_theta < 0:
            raise ValueError("damping coefficients must be nonnegative")
        if len(self.tau_f) != 4:
            raise ValueError("tau_f must have four entries")
        if not self.tau_min < self.tau_max:
            raise ValueError("tau_min must be below tau_max")
        if self.t_s <= 0:
            raise ValueError("t_s must be positive")

    @property
    def l_bar(self) -> float:
        return self.l_x + self.l_y

    @property
    def tau_f_vec(self) -> np.ndarray:
        return np.asarray(self.tau_f, dtype=float)

    def with_(self, **kwargs) -> "RobotParams":
        return replace(self, **kwargs)
