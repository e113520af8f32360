"""Dormand-Prince 8(5,3) integration of the trimer mean-field flow.

The flow is integrated in Cartesian amplitude coordinates ``z_k = x_k + i y_k``
with ``dz/dt = i (H0 z + u |z|^2 z)``, which is free of the angle singularities
of the reduced ``(q, p)`` chart.  The state vector holds ``ncopy`` stacked
6-component copies (``x1 x2 x3 y1 y2 y3``) followed by two accumulators,
the time integrals of ``|z_1|^2`` and ``|z_2|^2`` of copy 0.

Tableau, error estimator and dense-output coefficients are the standard
DOP853 ones as tabulated in :mod:`scipy.integrate`.
"""

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

N_STAGES = _dop.N_STAGES
A = np.ascontiguousarray(_dop.A, dtype=np.float64)
B = np.ascontiguousarray(_dop.B, dtype=np.float64)
C = np.ascontiguousarray(_dop.C, dtype=np.float64)
E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)
D = np.ascontiguousarray(_dop.D, dtype=np.float64)
N_EXT = _dop.N_STAGES_EXTENDED
INTERP_POWER = _dop.INTERPOLATOR_POWER

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0

N_ACC = 2

SECTION_NONE = 0
SECTION_UP = 1
SECTION_BOTH = 2

OK = 0
STEP_TOO_SMALL = 1
MAX_STEPS = 2
BUFFER_FULL = 3

CROSS_COLS = 8  # t, x1 x2 x3 y1 y2 y3, direction


def state_size(ncopy):
    return 6 * ncopy + N_ACC


@njit(cache=True)
def rhs(y, H, u, ncopy, out):
    for c in range(ncopy):
        o = 6 * c
        for k in range(3):
            xk = y[o + k]
            yk = y[o + 3 + k]
            nk = u * (xk * xk + yk * yk)
            hx = H[k, 0] * y[o] + H[k, 1] * y[o + 1] + H[k, 2] * y[o + 2]
            hy = H[k, 0] * y[o + 3] + H[k, 1] * y[o + 4] + H[k, 2] * y[o + 5]
            out[o + k] = -(hy + nk * yk)
            out[o + 3 + k] = hx + nk * xk
    a = 6 * ncopy
    out[a] = y[0] * y[0] + y[3] * y[3]
    out[a + 1] = y[1] * y[1] + y[4] * y[4]


@njit(cache=True)
def _section_g(y, value):
    return y[0] * y[0] + y[3] * y[3] - value


@njit(cache=True)
def _dense_eval(F, y_old, x, out):
    n = y_old.shape[0]
    for j in range(n):
        out[j] = 0.0
    npow = F.shape[0]
    for i in range(npow):
        f = F[npow - 1 - i]
        for j in range(n):
            out[j] += f[j]
        if i % 2 == 0:
            for j in range(n):
                out[j] *= x
        else:
            for j in range(n):
                out[j] *= 1.0 - x
    for j in range(n):
        out[j] += y_old[j]


@njit(cache=True)
def advance(y0, t0, t_target, h, H, u, ncopy, rtol, atol, sec_value, sec_mode, cross_buf, ncross, max_steps):
    """Integrate from ``t0`` to exactly ``t_target`` (> t0).

    Returns ``(y, t, h_next, ncross, status, nsteps)``.  Section crossings of
    ``|z_1|^2 = sec_value`` are polished on the dense interpolant and written
    to ``cross_buf`` rows ``[t, state(6), direction]``.
    """
    n = y0.shape[0]
    y = y0.copy()
    t = t0
    K = np.empty((N_EXT, n))
    y_new = np.empty(n)
    f = np.empty(n)
    tmp = np.empty(n)
    F = np.empty((INTERP_POWER, n))
    rhs(y, H, u, ncopy, f)
    min_step = 1e-14
    status = OK
    nsteps = 0
    while t < t_target:
        if nsteps >= max_steps:
            status = MAX_STEPS
            break
        accepted = False
        rejected = False
        hh = h
        clamped = False
        while not accepted:
            if hh < min_step:
                status = STEP_TOO_SMALL
                break
            t_new = t + hh
            clamped = False
            if t_new > t_target:
                t_new = t_target
                clamped = True
            hh = t_new - t
            # stages
            for j in range(n):
                K[0, j] = f[j]
            for s in range(1, N_STAGES):
                for j in range(n):
                    acc = 0.0
                    for r in range(s):
                        acc += A[s, r] * K[r, j]
                    tmp[j] = y[j] + hh * acc
                rhs(tmp, H, u, ncopy, K[s])
            for j in range(n):
                acc = 0.0
                for r in range(N_STAGES):
                    acc += B[r] * K[r, j]
                y_new[j] = y[j] + hh * acc
            rhs(y_new, H, u, ncopy, K[N_STAGES])
            # error norm
            e5 = 0.0
            e3 = 0.0
            for j in range(n):
                sc = atol + rtol * max(abs(y[j]), abs(y_new[j]))
                a5 = 0.0
                a3 = 0.0
                for r in range(N_STAGES + 1):
                    a5 += E5[r] * K[r, j]
                    a3 += E3[r] * K[r, j]
                e5 += (a5 / sc) ** 2
                e3 += (a3 / sc) ** 2
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = hh * e5 / np.sqrt((e5 + 0.01 * e3) * n)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err**ERR_EXP)
                if rejected:
                    factor = min(1.0, factor)
                h_next = hh * factor
                accepted = True
            else:
                hh = hh * max(MIN_FACTOR, SAFETY * err**ERR_EXP)
                rejected = True
        if status != OK:
            break
        nsteps += 1
        # section detection on copy 0
        if sec_mode != SECTION_NONE:
            g0 = _section_g(y, sec_value)
            g1 = _section_g(y_new, sec_value)
            up = g0 < 0.0 and g1 >= 0.0
            down = g0 > 0.0 and g1 <= 0.0
            if up or (down and sec_mode == SECTION_BOTH):
                # extra stages for the 7th-order interpolant
                for s in range(N_STAGES + 1, N_EXT):
                    for j in range(n):
                        acc = 0.0
                        for r in range(s):
                            acc += A[s, r] * K[r, j]
                        tmp[j] = y[j] + hh * acc
                    rhs(tmp, H, u, ncopy, K[s])
                for j in range(n):
                    dy = y_new[j] - y[j]
                    F[0, j] = dy
                    F[1, j] = hh * K[0, j] - dy
                    F[2, j] = 2.0 * dy - hh * (K[N_STAGES, j] + K[0, j])
                for i in range(INTERP_POWER - 3):
                    for j in range(n):
                        acc = 0.0
                        for r in range(N_EXT):
                            acc += D[i, r] * K[r, j]
                        F[3 + i, j] = hh * acc
                # Illinois false position on x in [0, 1]
                xa, xb = 0.0, 1.0
                ga, gb = g0, g1
                side = 0
                xm = 0.5
                for it in range(100):
                    xm = (xa * gb - xb * ga) / (gb - ga)
                    if not (xa < xm < xb):
                        xm = 0.5 * (xa + xb)
                    _dense_eval(F, y, xm, tmp)
                    gm = _section_g(tmp, sec_value)
                    if abs(gm) <= 1e-15 or (xb - xa) < 1e-16:
                        break
                    if (gm < 0.0) == (ga < 0.0):
                        xa, ga = xm, gm
                        if side == -1:
                            gb *= 0.5
                        side = -1
                    else:
                        xb, gb = xm, gm
                        if side == 1:
                            ga *= 0.5
                        side = 1
                if ncross < cross_buf.shape[0]:
                    cross_buf[ncross, 0] = t + xm * hh
                    for j in range(6):
                        cross_buf[ncross, 1 + j] = tmp[j]
                    cross_buf[ncross, 7] = 1.0 if up else -1.0
                    ncross += 1
                else:
                    status = BUFFER_FULL
        for j in range(n):
            y[j] = y_new[j]
            f[j] = K[N_STAGES, j]
        t = t + hh
        if t_new == t_target:
            t = t_target
        # a step shortened to land on t_target says nothing about the next one
        h = max(h_next, h) if (clamped and not rejected) else h_next
        if status == BUFFER_FULL:
            break
    return y, t, h, ncross, status, nsteps
