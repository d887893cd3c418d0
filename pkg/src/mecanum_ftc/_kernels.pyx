# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled twins of the hot kernels in ``_pykernels``.

Hand-rolled dense linear algebra: the systems are tiny (3x3 filter blocks,
a few dozen QP variables), so local Cholesky/triangular solves beat any
library dispatch overhead.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log, sqrt

cnp.import_array()


cdef int _cholesky(double[:, ::1] a, double[:, ::1] l, int n) nogil:
    """Lower Cholesky of a into l; returns -1 on success, else the failing row."""
    cdef int i, j, k
    cdef double s
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= l[i, k] * l[j, k]
            if i == j:
                if s <= 0.0:
                    return i
                l[i, i] = sqrt(s)
            else:
                l[i, j] = s / l[j, j]
    return -1


cdef void _chol_solve(double[:, ::1] l, double[::1] b, double[::1] x, double[::1] work, int n) nogil:
    """Solve (L L^T) x = b given the lower factor."""
    cdef int i, k
    cdef double s
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= l[i, k] * work[k]
        work[i] = s / l[i, i]
    for i in range(n - 1, -1, -1):
        s = work[i]
        for k in range(i + 1, n):
            s -= l[k, i] * x[k]
        x[i] = s / l[i, i]


def admm_solve_box(double[:, ::1] p, double[::1] q, double[::1] lo, double[::1] hi,
                   double rho, double sigma, double alpha,
                   double eps_abs, double eps_rel, int max_iter,
                   double[::1] x0, double[::1] y0):
    """Operator-splitting iteration for min 1/2 z'Pz + q'z s.t. lo <= z <= hi."""
    cdef int n = p.shape[0]
    cdef cnp.ndarray m_arr = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray l_arr = np.zeros((n, n), dtype=np.float64)
    cdef cnp.ndarray x_arr = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray z_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray y_arr = np.array(y0, dtype=np.float64)
    cdef double[:, ::1] m = m_arr
    cdef double[:, ::1] l = l_arr
    cdef double[::1] x = x_arr
    cdef double[::1] z = z_arr
    cdef double[::1] y = y_arr
    cdef cnp.ndarray rhs_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray xt_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray work_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray px_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] rhs = rhs_arr
    cdef double[::1] xt = xt_arr
    cdef double[::1] work = work_arr
    cdef double[::1] px = px_arr

    cdef int i, j, iters
    cdef double w, zn, s
    cdef double r_prim, r_dual, eps_prim, eps_dual
    cdef double x_inf, z_inf, px_inf, q_inf, y_inf
    cdef bint converged = False

    for i in range(n):
        for j in range(n):
            m[i, j] = p[i, j]
        m[i, i] += sigma + rho
        z[i] = x[i]
        if z[i] < lo[i]:
            z[i] = lo[i]
        elif z[i] > hi[i]:
            z[i] = hi[i]

    if _cholesky(m, l, n) >= 0:
        raise np.linalg.LinAlgError("QP matrix is not positive definite")

    r_prim = r_dual = np.inf
    iters = 0
    with nogil:
        for iters in range(1, max_iter + 1):
            for i in range(n):
                rhs[i] = sigma * x[i] - q[i] + rho * z[i] - y[i]
            _chol_solve(l, rhs, xt, work, n)

            r_prim = 0.0
            x_inf = 0.0
            z_inf = 0.0
            for i in range(n):
                x[i] = alpha * xt[i] + (1.0 - alpha) * x[i]
                w = alpha * xt[i] + (1.0 - alpha) * z[i]
                zn = w + y[i] / rho
                if zn < lo[i]:
                    zn = lo[i]
                elif zn > hi[i]:
                    zn = hi[i]
                y[i] = y[i] + rho * (w - zn)
                z[i] = zn
                s = fabs(x[i] - z[i])
                if s > r_prim:
                    r_prim = s
                if fabs(x[i]) > x_inf:
                    x_inf = fabs(x[i])
                if fabs(z[i]) > z_inf:
                    z_inf = fabs(z[i])

            r_dual = 0.0
            px_inf = 0.0
            q_inf = 0.0
            y_inf = 0.0
            for i in range(n):
                s = 0.0
                for j in range(n):
                    s += p[i, j] * x[j]
                px[i] = s
                if fabs(s) > px_inf:
                    px_inf = fabs(s)
                if fabs(q[i]) > q_inf:
                    q_inf = fabs(q[i])
                if fabs(y[i]) > y_inf:
                    y_inf = fabs(y[i])
                s = fabs(s + q[i] + y[i])
                if s > r_dual:
                    r_dual = s

            eps_prim = eps_abs + eps_rel * (x_inf if x_inf > z_inf else z_inf)
            s = px_inf
            if q_inf > s:
                s = q_inf
            if y_inf > s:
                s = y_inf
            eps_dual = eps_abs + eps_rel * s
            if r_prim <= eps_prim and r_dual <= eps_dual:
                converged = True
                break

    return x_arr, z_arr, y_arr, iters, r_prim, r_dual, bool(converged)


def bank_filter_step(double[:, ::1] means, double[:, :, ::1] covs, double[:, :, ::1] g_stack,
                     double[::1] u_prev, double[::1] obs,
                     double[:, ::1] q, double[:, ::1] r,
                     double ts, double cv_over_m, double cth_over_iz, double[::1] drift_const):
    """One EKF predict/update for every hypothesis in the bank."""
    cdef int s = means.shape[0]
    cdef cnp.ndarray means_new_arr = np.empty((s, 3), dtype=np.float64)
    cdef cnp.ndarray covs_new_arr = np.empty((s, 3, 3), dtype=np.float64)
    cdef cnp.ndarray loglik_arr = np.empty(s, dtype=np.float64)
    cdef cnp.ndarray innov_arr = np.empty((s, 3), dtype=np.float64)
    cdef cnp.ndarray nis_arr = np.empty(s, dtype=np.float64)
    cdef double[:, ::1] means_new = means_new_arr
    cdef double[:, :, ::1] covs_new = covs_new_arr
    cdef double[::1] loglik = loglik_arr
    cdef double[:, ::1] innov = innov_arr
    cdef double[::1] nis = nis_arr

    cdef int h, i, j, k
    cdef double u, v, om, a
    cdef double pred[3]
    cdef double f[3][3]
    cdef double tmp[3][3]
    cdef double pp[3][3]
    cdef double smat[3][3]
    cdef double l00, l10, l20, l11, l21, l22
    cdef double e0, e1, e2, w0, w1, w2, a0, a1, a2
    cdef double kg[3][3]
    cdef double col[3]
    cdef double acc
    cdef int bad = -1

    with nogil:
        for h in range(s):
            u = means[h, 0]
            v = means[h, 1]
            om = means[h, 2]

            pred[0] = u + ts * (-cv_over_m * u + v * om) + drift_const[0]
            pred[1] = v + ts * (-cv_over_m * v - u * om) + drift_const[1]
            pred[2] = om + ts * (-cth_over_iz * om) + drift_const[2]
            for i in range(3):
                acc = 0.0
                for j in range(4):
                    acc += g_stack[h, i, j] * u_prev[j]
                pred[i] += acc

            a = 1.0 - ts * cv_over_m
            f[0][0] = a
            f[0][1] = ts * om
            f[0][2] = ts * v
            f[1][0] = -ts * om
            f[1][1] = a
            f[1][2] = -ts * u
            f[2][0] = 0.0
            f[2][1] = 0.0
            f[2][2] = 1.0 - ts * cth_over_iz

            # P = F C F^T + Q, symmetrized
            for i in range(3):
                for j in range(3):
                    acc = 0.0
                    for k in range(3):
                        acc += f[i][k] * covs[h, k, j]
                    tmp[i][j] = acc
            for i in range(3):
                for j in range(3):
                    acc = q[i, j]
                    for k in range(3):
                        acc += tmp[i][k] * f[j][k]
                    pp[i][j] = acc
            for i in range(3):
                for j in range(i + 1, 3):
                    acc = 0.5 * (pp[i][j] + pp[j][i])
                    pp[i][j] = acc
                    pp[j][i] = acc

            for i in range(3):
                for j in range(3):
                    smat[i][j] = pp[i][j] + r[i, j]

            # 3x3 Cholesky of S
            if smat[0][0] <= 0.0:
                bad = h
                break
            l00 = sqrt(smat[0][0])
            l10 = smat[1][0] / l00
            l20 = smat[2][0] / l00
            a = smat[1][1] - l10 * l10
            if a <= 0.0:
                bad = h
                break
            l11 = sqrt(a)
            l21 = (smat[2][1] - l20 * l10) / l11
            a = smat[2][2] - l20 * l20 - l21 * l21
            if a <= 0.0:
                bad = h
                break
            l22 = sqrt(a)

            e0 = obs[0] - pred[0]
            e1 = obs[1] - pred[1]
            e2 = obs[2] - pred[2]
            innov[h, 0] = e0
            innov[h, 1] = e1
            innov[h, 2] = e2

            # solve S a = e
            w0 = e0 / l00
            w1 = (e1 - l10 * w0) / l11
            w2 = (e2 - l20 * w0 - l21 * w1) / l22
            a2 = w2 / l22
            a1 = (w1 - l21 * a2) / l11
            a0 = (w0 - l10 * a1 - l20 * a2) / l00

            nis[h] = e0 * a0 + e1 * a1 + e2 * a2
            loglik[h] = -(log(l00) + log(l11) + log(l22)) - 0.5 * nis[h]

            # K = P S^-1: column i of K^T solves S col = P[:, i]... use S X = P, K = X^T
            for i in range(3):
                w0 = pp[0][i] / l00
                w1 = (pp[1][i] - l10 * w0) / l11
                w2 = (pp[2][i] - l20 * w0 - l21 * w1) / l22
                col[2] = w2 / l22
                col[1] = (w1 - l21 * col[2]) / l11
                col[0] = (w0 - l10 * col[1] - l20 * col[2]) / l00
                kg[i][0] = col[0]
                kg[i][1] = col[1]
                kg[i][2] = col[2]

            means_new[h, 0] = pred[0] + kg[0][0] * e0 + kg[0][1] * e1 + kg[0][2] * e2
            means_new[h, 1] = pred[1] + kg[1][0] * e0 + kg[1][1] * e1 + kg[1][2] * e2
            means_new[h, 2] = pred[2] + kg[2][0] * e0 + kg[2][1] * e1 + kg[2][2] * e2

            # (I - K) P, symmetrized
            for i in range(3):
                for j in range(3):
                    acc = pp[i][j]
                    for k in range(3):
                        acc -= kg[i][k] * pp[k][j]
                    tmp[i][j] = acc
            for i in range(3):
                for j in range(3):
                    covs_new[h, i, j] = 0.5 * (tmp[i][j] + tmp[j][i])

    if bad >= 0:
        return None, None, None, None, None, bad
    return means_new_arr, covs_new_arr, loglik_arr, innov_arr, nis_arr, -1
