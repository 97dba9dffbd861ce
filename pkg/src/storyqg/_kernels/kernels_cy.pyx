# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel implementations (see kernels_py for the reference semantics).

Forward kernels allocate and return; backward kernels accumulate into the
caller's gradient buffer. Arrays are C-contiguous float64 (int64 for ids).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as c_exp, log as c_log, sqrt as c_sqrt, tanh as c_tanh

cnp.import_array()

BACKEND = "cython"


def sigmoid(cnp.ndarray x):
    cdef cnp.ndarray[double, ndim=1] xf = np.ascontiguousarray(x).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] y = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        y[i] = 1.0 / (1.0 + c_exp(-xf[i]))
    return y.reshape(np.shape(x))


def sigmoid_bwd(cnp.ndarray y, cnp.ndarray gy, cnp.ndarray gx):
    cdef cnp.ndarray[double, ndim=1] yf = np.ascontiguousarray(y).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] gf = np.ascontiguousarray(gy).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] o = gx.reshape(-1)
    cdef Py_ssize_t i, n = yf.shape[0]
    for i in range(n):
        o[i] += yf[i] * (1.0 - yf[i]) * gf[i]


def tanh(cnp.ndarray x):
    cdef cnp.ndarray[double, ndim=1] xf = np.ascontiguousarray(x).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] y = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        y[i] = c_tanh(xf[i])
    return y.reshape(np.shape(x))


def tanh_bwd(cnp.ndarray y, cnp.ndarray gy, cnp.ndarray gx):
    cdef cnp.ndarray[double, ndim=1] yf = np.ascontiguousarray(y).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] gf = np.ascontiguousarray(gy).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] o = gx.reshape(-1)
    cdef Py_ssize_t i, n = yf.shape[0]
    for i in range(n):
        o[i] += (1.0 - yf[i] * yf[i]) * gf[i]


def leaky_relu(cnp.ndarray x, double slope):
    cdef cnp.ndarray[double, ndim=1] xf = np.ascontiguousarray(x).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] y = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        y[i] = xf[i] if xf[i] > 0.0 else slope * xf[i]
    return y.reshape(np.shape(x))


def leaky_relu_bwd(cnp.ndarray x, double slope, cnp.ndarray gy, cnp.ndarray gx):
    cdef cnp.ndarray[double, ndim=1] xf = np.ascontiguousarray(x).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] gf = np.ascontiguousarray(gy).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] o = gx.reshape(-1)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        o[i] += gf[i] if xf[i] > 0.0 else slope * gf[i]


def exp(cnp.ndarray x):
    cdef cnp.ndarray[double, ndim=1] xf = np.ascontiguousarray(x).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] y = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        y[i] = c_exp(xf[i])
    return y.reshape(np.shape(x))


def exp_bwd(cnp.ndarray y, cnp.ndarray gy, cnp.ndarray gx):
    cdef cnp.ndarray[double, ndim=1] yf = np.ascontiguousarray(y).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] gf = np.ascontiguousarray(gy).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] o = gx.reshape(-1)
    cdef Py_ssize_t i, n = yf.shape[0]
    for i in range(n):
        o[i] += yf[i] * gf[i]


def log_guarded(cnp.ndarray x, double eps):
    cdef cnp.ndarray[double, ndim=1] xf = np.ascontiguousarray(x).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] y = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        y[i] = c_log(xf[i] if xf[i] > eps else eps)
    return y.reshape(np.shape(x))


def log_guarded_bwd(cnp.ndarray x, double eps, cnp.ndarray gy, cnp.ndarray gx):
    cdef cnp.ndarray[double, ndim=1] xf = np.ascontiguousarray(x).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] gf = np.ascontiguousarray(gy).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] o = gx.reshape(-1)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        if xf[i] >= eps:
            o[i] += gf[i] / xf[i]


def minimum(cnp.ndarray a, cnp.ndarray b):
    cdef cnp.ndarray[double, ndim=1] af = np.ascontiguousarray(a).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] bf = np.ascontiguousarray(b).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] y = np.empty_like(af)
    cdef Py_ssize_t i, n = af.shape[0]
    for i in range(n):
        y[i] = af[i] if af[i] <= bf[i] else bf[i]
    return y.reshape(np.shape(a))


def minimum_bwd(cnp.ndarray a, cnp.ndarray b, cnp.ndarray gy, cnp.ndarray ga, cnp.ndarray gb):
    cdef cnp.ndarray[double, ndim=1] af = np.ascontiguousarray(a).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] bf = np.ascontiguousarray(b).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] gf = np.ascontiguousarray(gy).reshape(-1)
    cdef cnp.ndarray[double, ndim=1] oa = ga.reshape(-1)
    cdef cnp.ndarray[double, ndim=1] ob = gb.reshape(-1)
    cdef Py_ssize_t i, n = af.shape[0]
    for i in range(n):
        if af[i] <= bf[i]:
            oa[i] += gf[i]
        else:
            ob[i] += gf[i]


def softmax_rows(cnp.ndarray x, mask):
    cdef cnp.ndarray[double, ndim=2] xf = np.ascontiguousarray(x)
    cdef cnp.ndarray[double, ndim=2] y = np.empty_like(xf)
    cdef cnp.ndarray[double, ndim=2] mf
    cdef Py_ssize_t i, j, rows = xf.shape[0], cols = xf.shape[1]
    cdef double mx, s
    cdef bint any_valid
    if mask is None:
        for i in range(rows):
            mx = xf[i, 0]
            for j in range(1, cols):
                if xf[i, j] > mx:
                    mx = xf[i, j]
            s = 0.0
            for j in range(cols):
                y[i, j] = c_exp(xf[i, j] - mx)
                s += y[i, j]
            for j in range(cols):
                y[i, j] /= s
    else:
        mf = np.ascontiguousarray(mask)
        for i in range(rows):
            any_valid = False
            mx = 0.0
            for j in range(cols):
                if mf[i, j] > 0.0 and (not any_valid or xf[i, j] > mx):
                    mx = xf[i, j]
                    any_valid = True
            if not any_valid:
                raise ValueError("softmax: fully masked row")
            s = 0.0
            for j in range(cols):
                if mf[i, j] > 0.0:
                    y[i, j] = c_exp(xf[i, j] - mx)
                    s += y[i, j]
                else:
                    y[i, j] = 0.0
            for j in range(cols):
                y[i, j] /= s
    return y


def softmax_rows_bwd(cnp.ndarray y, cnp.ndarray gy, cnp.ndarray gx):
    cdef cnp.ndarray[double, ndim=2] yf = np.ascontiguousarray(y)
    cdef cnp.ndarray[double, ndim=2] gf = np.ascontiguousarray(gy)
    cdef cnp.ndarray[double, ndim=2] o = gx
    cdef Py_ssize_t i, j, rows = yf.shape[0], cols = yf.shape[1]
    cdef double dot
    for i in range(rows):
        dot = 0.0
        for j in range(cols):
            dot += yf[i, j] * gf[i, j]
        for j in range(cols):
            o[i, j] += yf[i, j] * (gf[i, j] - dot)


def adam_update(cnp.ndarray p, cnp.ndarray g, cnp.ndarray m, cnp.ndarray v,
                long t, double lr, double beta1, double beta2, double eps):
    cdef cnp.ndarray[double, ndim=1] pf = p
    cdef cnp.ndarray[double, ndim=1] gf = g
    cdef cnp.ndarray[double, ndim=1] mf = m
    cdef cnp.ndarray[double, ndim=1] vf = v
    cdef Py_ssize_t i, n = pf.shape[0]
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    cdef double mhat, vhat
    for i in range(n):
        mf[i] = beta1 * mf[i] + (1.0 - beta1) * gf[i]
        vf[i] = beta2 * vf[i] + (1.0 - beta2) * gf[i] * gf[i]
        mhat = mf[i] / bc1
        vhat = vf[i] / bc2
        pf[i] -= lr * mhat / (c_sqrt(vhat) + eps)


def lcs_len(cnp.ndarray a, cnp.ndarray b):
    cdef cnp.ndarray[long long, ndim=1] af = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1] bf = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = af.shape[0], m = bf.shape[0]
    if n == 0 or m == 0:
        return 0
    cdef cnp.ndarray[long long, ndim=1] prev = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1] cur = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1] tmp
    cdef Py_ssize_t i, j
    cdef long long ai, pj, cj
    for i in range(1, n + 1):
        ai = af[i - 1]
        for j in range(1, m + 1):
            if ai == bf[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                pj = prev[j]
                cj = cur[j - 1]
                cur[j] = pj if pj >= cj else cj
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])
