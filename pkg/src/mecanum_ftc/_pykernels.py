"""Pure-NumPy implementations of the hot kernels.

Semantically identical to the compiled twins in ``_kernels.pyx``; selected at
import time when the extension is unavailable (or forced via
``MECANUM_FTC_BACKEND=python``).  Kept vectorized so the fallback stays usable
for full scenario runs.
"""

from __future__ import annotations

import numpy as np

_I3 = np.eye(3)


def admm_solve_box(p, q, lo, hi, rho, sigma, alpha, eps_abs, eps_rel, max_iter, x0, y0):
    """Operator-splitting iteration for min 1/2 z'Pz + q'z s.t. lo <= z <= hi.

    Returns (x, z, y, iterations, r_prim, r_dual, converged).
    """
    n = p.shape[0]
    m = p + (sigma + rho) * np.eye(n)
    l = np.linalg.cholesky(m)

    x = np.array(x0, dtype=float)
    z = np.clip(x, lo, hi)
    y = np.array(y0, dtype=float)

    r_prim = r_dual = np.inf
    iters = 0
    converged = False
    for iters in range(1, max_iter + 1):
        rhs = sigma * x - q + rho * z - y
        xt = np.linalg.solve(l.T, np.linalg.solve(l, rhs))
        x = alpha * xt + (1.0 - alpha) * x
        w = alpha * xt + (1.0 - alpha) * z
        z_next = np.clip(w + y / rho, lo, hi)
        y = y + rho * (w - z_next)
        z = z_next

        px = p @ x
        r_prim = np.max(np.abs(x - z))
        r_dual = np.max(np.abs(px + q + y))
        eps_prim = eps_abs + eps_rel * max(np.max(np.abs(x)), np.max(np.abs(z)))
        eps_dual = eps_abs + eps_rel * max(np.max(np.abs(px)), np.max(np.abs(q)), np.max(np.abs(y)))
        if r_prim <= eps_prim and r_dual <= eps_dual:
            converged = True
            break
    return x, z, y, iters, float(r_prim), float(r_dual), converged


def bank_filter_step(means, covs, g_stack, u_prev, obs, q, r, ts, cv_over_m, cth_over_iz, drift_const):
    """One EKF predict/update for every hypothesis in the bank, batched.

    Returns (means, covs, loglik, innovations, nis); loglik omits the
    (2*pi)^(-3/2) factor, which cancels in the posterior normalization.
    """
    s = means.shape[0]
    u, v, om = means[:, 0], means[:, 1], means[:, 2]

    pred = np.empty_like(means)
    pred[:, 0] = u + ts * (-cv_over_m * u + v * om)
    pred[:, 1] = v + ts * (-cv_over_m * v - u * om)
    pred[:, 2] = om + ts * (-cth_over_iz * om)
    pred += drift_const
    pred += g_stack @ u_prev

    f = np.zeros((s, 3, 3))
    a = 1.0 - ts * cv_over_m
    f[:, 0, 0] = a
    f[:, 0, 1] = ts * om
    f[:, 0, 2] = ts * v
    f[:, 1, 0] = -ts * om
    f[:, 1, 1] = a
    f[:, 1, 2] = -ts * u
    f[:, 2, 2] = 1.0 - ts * cth_over_iz

    p_pred = f @ covs @ f.transpose(0, 2, 1) + q
    p_pred = 0.5 * (p_pred + p_pred.transpose(0, 2, 1))
    s_mat = p_pred + r

    try:
        l = np.linalg.cholesky(s_mat)
    except np.linalg.LinAlgError:
        bad = _first_non_spd(s_mat)
        return None, None, None, None, None, bad

    innov = obs - pred
    s_inv_innov = np.linalg.solve(s_mat, innov[:, :, None])[:, :, 0]
    nis = np.einsum("si,si->s", innov, s_inv_innov)
    logdet_half = np.log(l[:, 0, 0]) + np.log(l[:, 1, 1]) + np.log(l[:, 2, 2])
    loglik = -logdet_half - 0.5 * nis

    gain = np.linalg.solve(s_mat, p_pred).transpose(0, 2, 1)
    means_new = pred + np.einsum("sij,sj->si", gain, innov)
    covs_new = (_I3 - gain) @ p_pred
    covs_new = 0.5 * (covs_new + covs_new.transpose(0, 2, 1))
    return means_new, covs_new, loglik, innov, nis, -1


def _first_non_spd(mats):
    for i, m in enumerate(mats):
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            return i
    return 0
