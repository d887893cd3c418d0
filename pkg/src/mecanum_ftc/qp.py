"""Box-constrained quadratic programming via operator splitting.

Solves min 1/2 z'Pz + q'z subject to lo <= z <= hi with an ADMM scheme
(over-relaxed alternating minimization with box projection), followed by an
exact polish step: the active set suggested by the converged iterate is
frozen, the reduced KKT system is solved directly, and the polished point is
kept when it passes feasibility and multiplier-sign checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ConfigError

_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class QPSettings:
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    eps_abs: float = 1e-4
    eps_rel: float = 1e-4
    max_iter: int = 4000
    polish: bool = True


@dataclass(frozen=True)
class QPProblem:
    """Condensed box QP; P must be symmetric PSD and lower <= upper."""

    p: np.ndarray
    q: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = self.q.shape[0]
        if self.p.shape != (n, n):
            raise ConfigError("P and q dimensions disagree")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ConfigError("bound dimensions disagree with q")
        if np.max(np.abs(self.p - self.p.T)) > 1e-9:
            raise ConfigError("P must be symmetric")
        if np.any(self.lower > self.upper):
            raise ConfigError("lower bound exceeds upper bound")

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ self.p @ z + self.q @ z)


@dataclass(frozen=True)
class QPSolution:
    z: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    status: str                      # "solved" | "max-iterations"
    dual: np.ndarray = field(repr=False, default=None)
    polished: bool = False

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def _polish(problem: QPProblem, z: np.ndarray, y: np.ndarray):
    """Exact solve on the active set guessed from the ADMM iterate.

    Returns (z, y) or None when the guess fails the KKT checks.
    """
    p, q, lo, hi = problem.p, problem.q, problem.lower, problem.upper
    n = q.shape[0]
    span = np.maximum(hi - lo, 1.0)
    at_lo = (z - lo) <= _BOUND_TOL * span
    at_hi = (hi - z) <= _BOUND_TOL * span
    # the dual sign disambiguates degenerate lo == hi entries
    at_lo &= ~(at_hi & (y > 0))
    at_hi &= ~at_lo
    free = ~(at_lo | at_hi)

    z_pol = np.where(at_hi, hi, np.where(at_lo, lo, z))
    if free.any():
        p_ff = p[np.ix_(free, free)]
        rhs = -(q[free] + p[np.ix_(free, ~free)] @ z_pol[~free])
        try:
            z_pol[free] = np.linalg.solve(p_ff, rhs)
        except np.linalg.LinAlgError:
            return None
        if np.any(z_pol[free] < lo[free] - _BOUND_TOL) or np.any(z_pol[free] > hi[free] + _BOUND_TOL):
            return None

    grad = p @ z_pol + q
    if np.any(grad[at_lo] < -_BOUND_TOL * (1.0 + np.abs(grad[at_lo]))):
        return None
    if np.any(grad[at_hi] > _BOUND_TOL * (1.0 + np.abs(grad[at_hi]))):
        return None
    y_pol = np.zeros(n)
    y_pol[at_lo | at_hi] = -grad[at_lo | at_hi]
    return np.clip(z_pol, lo, hi), y_pol


def recover_multiplier(problem: QPProblem, z: np.ndarray) -> np.ndarray:
    """Best sign-feasible bound multiplier mu for the residual Pz + q + mu.

    Inactive coordinates carry mu = 0; a lower-active coordinate admits
    mu <= 0, an upper-active one mu >= 0, degenerate lo == hi entries are
    unconstrained.  At an exact optimum the residual vanishes.
    """
    grad = problem.p @ z + problem.q
    span = np.maximum(problem.upper - problem.lower, 1.0)
    at_lo = (z - problem.lower) <= _BOUND_TOL * span
    at_hi = (problem.upper - z) <= _BOUND_TOL * span
    mu = np.zeros_like(z)
    mu[at_lo] = np.minimum(-grad[at_lo], 0.0)
    mu[at_hi] = np.maximum(-grad[at_hi], 0.0)
    both = at_lo & at_hi
    mu[both] = -grad[both]
    return mu


def stationarity_residual(problem: QPProblem, z: np.ndarray) -> float:
    """Infinity norm of Pz + q + mu with the recovered bound multiplier."""
    mu = recover_multiplier(problem, z)
    return float(np.max(np.abs(problem.p @ z + problem.q + mu)))


def solve_qp_admm(
    problem: QPProblem,
    settings: QPSettings = QPSettings(),
    warm_z: np.ndarray | None = None,
    warm_y: np.ndarray | None = None,
    backend_name: str | None = None,
) -> QPSolution:
    n = problem.q.shape[0]
    x0 = np.zeros(n) if warm_z is None else np.clip(warm_z, problem.lower, problem.upper)
    y0 = np.zeros(n) if warm_y is None else np.asarray(warm_y, dtype=float)

    x, z, y, iters, r_prim, r_dual, converged = backend.admm_solve_box(
        np.ascontiguousarray(problem.p),
        np.ascontiguousarray(problem.q),
        np.ascontiguousarray(problem.lower),
        np.ascontiguousarray(problem.upper),
        settings.rho,
        settings.sigma,
        settings.alpha,
        settings.eps_abs,
        settings.eps_rel,
        settings.max_iter,
        np.ascontiguousarray(x0),
        np.ascontiguousarray(y0),
        backend=backend_name,
    )
    status = "solved" if converged else "max-iterations"

    polished = False
    if converged and settings.polish:
        result = _polish(problem, z, y)
        if result is not None:
            z, y = result
            grad = problem.p @ z + problem.q
            r_prim = 0.0
            r_dual = float(np.max(np.abs(grad + y)))
            polished = True

    return QPSolution(
        z=z,
        iterations=iters,
        primal_residual=float(r_prim),
        dual_residual=float(r_dual),
        status=status,
        dual=y,
        polished=polished,
    )
