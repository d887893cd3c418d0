"""Cross-checks between the compiled kernels and the NumPy fallback."""

import numpy as np
import pytest

from conftest import random_spd
from mecanum_ftc import backend
from mecanum_ftc.estimation import dyna_friction_offset
from mecanum_ftc.ftc import control_matrix
from mecanum_ftc.qp import QPProblem, QPSettings, solve_qp_admm

needs_compiled = pytest.mark.skipif(
    "compiled" not in backend.available(), reason="compiled kernels not built")


def random_bank_state(rng, params, noise, s=17):
    from mecanum_ftc.faults import standard_fault_set
    fs = standard_fault_set()
    means = rng.standard_normal((s, 3)) * 0.3
    covs = np.stack([random_spd(rng, 3, 10, scale=1e-3) for _ in range(s)])
    g_stack = np.stack([control_matrix(v, params) for _, v, _ in fs.entries])
    u_prev = rng.uniform(-0.5, 0.5, 4)
    obs = rng.standard_normal(3) * 0.3
    return means, covs, g_stack, u_prev, obs


@needs_compiled
class TestBankKernelAgreement:
    def test_bank_step_matches_python(self, params, noise, rng):
        for _ in range(10):
            means, covs, g_stack, u_prev, obs = random_bank_state(rng, params, noise)
            args = (means, covs, g_stack, u_prev, obs,
                    noise.q_dyna, noise.r_dyna,
                    params.t_s, params.c_v / params.m, params.c_theta / params.i_z,
                    dyna_friction_offset(params))
            out_c = backend.bank_filter_step(*args, backend="compiled")
            out_p = backend.bank_filter_step(*args, backend="python")
            assert out_c[5] == out_p[5] == -1
            for c, p in zip(out_c[:5], out_p[:5]):
                np.testing.assert_allclose(c, p, atol=1e-12)

    def test_non_spd_reports_same_hypothesis(self, params, noise, rng):
        means, covs, g_stack, u_prev, obs = random_bank_state(rng, params, noise)
        r_bad = -np.eye(3)  # drives every innovation covariance negative
        args = (means, covs, g_stack, u_prev, obs,
                noise.q_dyna, r_bad,
                params.t_s, params.c_v / params.m, params.c_theta / params.i_z,
                dyna_friction_offset(params))
        out_c = backend.bank_filter_step(*args, backend="compiled")
        out_p = backend.bank_filter_step(*args, backend="python")
        assert out_c[5] == out_p[5] == 0


@needs_compiled
class TestAdmmKernelAgreement:
    def test_solutions_agree(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 12))
            p = random_spd(rng, n, 100)
            q = rng.standard_normal(n)
            lo = rng.uniform(-1, 0, n)
            hi = rng.uniform(0.1, 1, n)
            problem = QPProblem(p, q, lo, hi)
            sol_c = solve_qp_admm(problem, backend_name="compiled")
            sol_p = solve_qp_admm(problem, backend_name="python")
            assert sol_c.solved and sol_p.solved
            np.testing.assert_allclose(sol_c.z, sol_p.z, atol=1e-6)

    def test_iteration_counts_match(self, rng):
        # identical update rule: same problem, same trajectory length
        p = random_spd(rng, 6, 50)
        q = rng.standard_normal(6)
        problem = QPProblem(p, q, -np.ones(6), np.ones(6))
        settings = QPSettings(polish=False)
        sol_c = solve_qp_admm(problem, settings, backend_name="compiled")
        sol_p = solve_qp_admm(problem, settings, backend_name="python")
        assert sol_c.iterations == sol_p.iterations


def test_backend_selection_api():
    assert backend.name() in backend.available()
    with pytest.raises(ValueError):
        backend.use("fortran")
    current = backend.name()
    for name in backend.available():
        backend.use(name)
        assert backend.name() == name
    backend.use(current)
