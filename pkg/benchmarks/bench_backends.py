#!/usr/bin/env python3
"""Compare the compiled kernels against the NumPy fallback.

Times the two hot kernels in isolation (hypothesis-bank filter step, box-QP
solve) and a full closed-loop scenario run per backend, then prints a
speedup table.  Usage: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from mecanum_ftc import backend
from mecanum_ftc.estimation import NoiseConfig, dyna_friction_offset
from mecanum_ftc.ftc import control_matrix
from mecanum_ftc.faults import standard_fault_set
from mecanum_ftc.params import RobotParams
from mecanum_ftc.qp import QPProblem, solve_qp_admm
from mecanum_ftc.runner import run_scenario
from mecanum_ftc.scenario import one_fault_scenario


def bench_bank(impl_name: str, repeats: int) -> float:
    params = RobotParams()
    noise = NoiseConfig.from_scalars()
    fs = standard_fault_set()
    rng = np.random.default_rng(0)
    g_stack = np.ascontiguousarray(np.stack([control_matrix(v, params) for _, v, _ in fs.entries]))
    means = np.ascontiguousarray(rng.standard_normal((17, 3)) * 0.1)
    covs = np.ascontiguousarray(np.broadcast_to(noise.r_dyna, (17, 3, 3)).copy())
    args = (means, covs, g_stack, rng.uniform(-0.5, 0.5, 4), rng.standard_normal(3) * 0.1,
            noise.q_dyna, noise.r_dyna, params.t_s,
            params.c_v / params.m, params.c_theta / params.i_z, dyna_friction_offset(params))
    backend.bank_filter_step(*args, backend=impl_name)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        backend.bank_filter_step(*args, backend=impl_name)
    return (time.perf_counter() - t0) / repeats


def bench_qp(impl_name: str, repeats: int) -> float:
    # a condensed tracking problem of representative size (horizon 10)
    rng = np.random.default_rng(1)
    n = 30
    m = rng.standard_normal((n, n)) * 0.3
    p = m @ m.T + 0.2 * np.eye(n)
    q = rng.standard_normal(n)
    problem = QPProblem(p, q, np.full(n, -1.0), np.full(n, 1.0))
    solve_qp_admm(problem, backend_name=impl_name)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        solve_qp_admm(problem, backend_name=impl_name)
    return (time.perf_counter() - t0) / repeats


def bench_scenario(impl_name: str) -> float:
    previous = backend.name()
    backend.use(impl_name)
    try:
        t0 = time.perf_counter()
        run_scenario(one_fault_scenario())
        return time.perf_counter() - t0
    finally:
        backend.use(previous)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    impls = backend.available()
    if "compiled" not in impls:
        print("note: compiled kernels unavailable, timing the fallback only")

    rows = []
    for task, fn, unit_scale, unit in (
        ("bank filter step (17 hypotheses)", lambda i: bench_bank(i, args.repeats), 1e6, "us"),
        ("box-QP solve (n=30, cold start)", lambda i: bench_qp(i, max(args.repeats // 10, 50)), 1e3, "ms"),
        ("one-fault scenario (350 ticks)", bench_scenario, 1.0, "s"),
    ):
        times = {impl: fn(impl) for impl in impls}
        rows.append((task, times, unit_scale, unit))

    width = max(len(r[0]) for r in rows) + 2
    header = f"{'task':<{width}}" + "".join(f"{impl:>14}" for impl in impls)
    if len(impls) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for task, times, scale, unit in rows:
        line = f"{task:<{width}}"
        for impl in impls:
            line += f"{times[impl] * scale:>11.2f} {unit}"
        if len(impls) == 2:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
