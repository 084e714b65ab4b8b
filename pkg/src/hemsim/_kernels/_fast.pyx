# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: BLAS-backed network layers with fused activations, fused
Adam and target-blend updates, and the scalar backward-induction sweep of the
planning oracle.  Mirrors ``_ref`` operation for operation."""

from libc.math cimport exp, tanh, sqrt, fabs, INFINITY

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_SIGMOID = 3

DEF C_IDENTITY = 0
DEF C_RELU = 1
DEF C_TANH = 2
DEF C_SIGMOID = 3


cdef void _gemm(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out,
                bint trans_a, bint trans_b) noexcept nogil:
    # out = op(a) @ op(b) for C-order arrays, via column-major BLAS:
    # out^T = op(b)^T @ op(a)^T.
    cdef int m, n, k, lda, ldb
    cdef double alpha = 1.0, beta = 0.0
    cdef char ta, tb
    m = a.shape[1] if trans_a else a.shape[0]
    k = a.shape[0] if trans_a else a.shape[1]
    n = b.shape[0] if trans_b else b.shape[1]
    lda = a.shape[1]
    ldb = b.shape[1]
    ta = b'T' if trans_a else b'N'
    tb = b'T' if trans_b else b'N'
    dgemm(&tb, &ta, &n, &m, &k, &alpha, &b[0, 0], &ldb, &a[0, 0], &lda,
          &beta, &out[0, 0], &n)


def affine_forward(double[:, ::1] x, double[:, ::1] w, double[::1] b,
                   signed char[::1] act):
    """act(x @ w + b) with per-output-unit activation codes."""
    cdef Py_ssize_t rows = x.shape[0], cols = w.shape[1]
    out_arr = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double z
    cdef signed char code
    with nogil:
        _gemm(x, w, out, False, False)
        for i in range(rows):
            for j in range(cols):
                z = out[i, j] + b[j]
                code = act[j]
                if code == C_RELU:
                    z = z if z > 0.0 else 0.0
                elif code == C_TANH:
                    z = tanh(z)
                elif code == C_SIGMOID:
                    z = 1.0 / (1.0 + exp(-z))
                out[i, j] = z
    return out_arr


def affine_backward(double[:, ::1] d_out, double[:, ::1] out, double[:, ::1] x,
                    double[:, ::1] w, signed char[::1] act,
                    bint need_dw=True, bint need_dx=True):
    """Backprop through act(x @ w + b); returns (d_w, d_b, d_x)."""
    cdef Py_ssize_t rows = d_out.shape[0], cols = d_out.shape[1]
    dz_arr = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] dz = dz_arr
    cdef Py_ssize_t i, j
    cdef double a, g
    cdef signed char code
    with nogil:
        for i in range(rows):
            for j in range(cols):
                code = act[j]
                a = out[i, j]
                if code == C_RELU:
                    g = 1.0 if a > 0.0 else 0.0
                elif code == C_TANH:
                    g = 1.0 - a * a
                elif code == C_SIGMOID:
                    g = a * (1.0 - a)
                else:
                    g = 1.0
                dz[i, j] = d_out[i, j] * g

    d_w_arr = None
    d_b_arr = None
    d_x_arr = None
    cdef double[:, ::1] d_w, d_x
    cdef double[::1] d_b
    if need_dw:
        d_w_arr = np.empty((x.shape[1], cols), dtype=np.float64)
        d_b_arr = np.zeros(cols, dtype=np.float64)
        d_w = d_w_arr
        d_b = d_b_arr
        with nogil:
            _gemm(x, dz, d_w, True, False)
            for i in range(rows):
                for j in range(cols):
                    d_b[j] += dz[i, j]
    if need_dx:
        d_x_arr = np.empty((rows, x.shape[1]), dtype=np.float64)
        d_x = d_x_arr
        with nogil:
            _gemm(dz, w, d_x, False, True)
    return d_w_arr, d_b_arr, d_x_arr


def adam_step(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
              long t, double lr, double beta1, double beta2, double eps):
    """One fused Adam update, in place on flat float64 arrays.

    Returns nonzero (without touching the state) if the gradient contains a
    NaN or infinity."""
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double inv_bc1 = 1.0 / (1.0 - beta1 ** t)
    cdef double inv_sqrt_bc2 = 1.0 / sqrt(1.0 - beta2 ** t)
    cdef double gi
    cdef int bad = 0
    with nogil:
        for i in range(n):
            gi = g[i]
            if gi != gi or gi == INFINITY or gi == -INFINITY:
                bad = 1
                break
        if not bad:
            for i in range(n):
                gi = g[i]
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi
                v[i] = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
                p[i] -= lr * (m[i] * inv_bc1) / (sqrt(v[i]) * inv_sqrt_bc2 + eps)
    return bad


def blend(double[::1] target, double[::1] online, double tau):
    """target = (1 - tau) * target + tau * online, in place."""
    cdef Py_ssize_t i, n = target.shape[0]
    with nogil:
        for i in range(n):
            target[i] = (1.0 - tau) * target[i] + tau * online[i]


def dp_backward_sweep(double[:, ::1] v_next, double[::1] b_grid, double[::1] t_grid,
                      double[::1] f_levels, double[::1] e_levels,
                      double solar_kw, double demand_kw, double outdoor_f, double price_buy,
                      double charge_eff, double discharge_eff, double ess_min, double ess_max,
                      double charge_max, double discharge_max, double hvac_max,
                      double comfort_min, double comfort_max, double inertia, double hvac_gain,
                      double wear_cost, double sell_ratio, double comfort_weight,
                      double[:, ::1] v_out, int[:, ::1] best_f_idx, int[:, ::1] best_e_idx):
    """One slot of backward induction; see the reference implementation for
    the contract.  Ties resolve to the first (storage, HVAC) level."""
    cdef Py_ssize_t nb = b_grid.shape[0], nt = t_grid.shape[0]
    cdef Py_ssize_t nf = f_levels.shape[0], ne = e_levels.shape[0]
    cdef double db = (b_grid[nb - 1] - b_grid[0]) / (nb - 1)
    cdef double dt = (t_grid[nt - 1] - t_grid[0]) / (nt - 1)
    cdef double sell = sell_ratio * price_buy

    cdef Py_ssize_t ib, it, fi, ei
    cdef double bval, tval, f_lo, f_hi, f, charge, discharge, b_next, wear
    cdef double e, t_next, g, c_energy, c_comfort, xb, xt, wb, wt, vi, cost, best
    cdef Py_ssize_t jb, jt
    cdef int arg_f, arg_e

    with nogil:
        for ib in range(nb):
            bval = b_grid[ib]
            f_lo = (ess_min - bval) * discharge_eff
            if f_lo < -discharge_max:
                f_lo = -discharge_max
            if f_lo > 0.0:
                f_lo = 0.0
            f_hi = (ess_max - bval) / charge_eff
            if f_hi > charge_max:
                f_hi = charge_max
            if f_hi < 0.0:
                f_hi = 0.0
            for it in range(nt):
                tval = t_grid[it]
                best = INFINITY
                arg_f = 0
                arg_e = 0
                for fi in range(nf):
                    f = f_levels[fi]
                    if f < f_lo:
                        f = f_lo
                    if f > f_hi:
                        f = f_hi
                    charge = f if f > 0.0 else 0.0
                    discharge = f if f < 0.0 else 0.0
                    b_next = bval + charge_eff * charge + discharge / discharge_eff
                    wear = wear_cost * fabs(f)

                    xb = (b_next - b_grid[0]) / db
                    if xb < 0.0:
                        xb = 0.0
                    elif xb > nb - 1.0:
                        xb = nb - 1.0
                    jb = <Py_ssize_t> xb
                    if jb > nb - 2:
                        jb = nb - 2
                    wb = xb - jb

                    for ei in range(ne):
                        e = e_levels[ei]
                        if e < 0.0:
                            e = 0.0
                        if e > hvac_max:
                            e = hvac_max
                        if tval < comfort_min:
                            e = 0.0
                        t_next = inertia * tval + (1.0 - inertia) * (outdoor_f - hvac_gain * e)

                        g = demand_kw + e + charge + discharge - solar_kw
                        c_energy = 0.5 * (price_buy - sell) * fabs(g) + 0.5 * (price_buy + sell) * g
                        c_comfort = 0.0
                        if t_next > comfort_max:
                            c_comfort = t_next - comfort_max
                        elif t_next < comfort_min:
                            c_comfort = comfort_min - t_next

                        xt = (t_next - t_grid[0]) / dt
                        if xt < 0.0:
                            xt = 0.0
                        elif xt > nt - 1.0:
                            xt = nt - 1.0
                        jt = <Py_ssize_t> xt
                        if jt > nt - 2:
                            jt = nt - 2
                        wt = xt - jt

                        vi = ((v_next[jb, jt] * (1.0 - wb) + v_next[jb + 1, jt] * wb) * (1.0 - wt)
                              + (v_next[jb, jt + 1] * (1.0 - wb) + v_next[jb + 1, jt + 1] * wb) * wt)

                        cost = c_energy + wear + comfort_weight * c_comfort + vi
                        if cost < best:
                            best = cost
                            arg_f = <int> fi
                            arg_e = <int> ei
                v_out[ib, it] = best
                best_f_idx[ib, it] = arg_f
                best_e_idx[ib, it] = arg_e
