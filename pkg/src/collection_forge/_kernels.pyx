# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: soft thresholding, group shrinkage, monotone FISTA.

Same contracts as `_kernels_py`; see that module for the reference
implementation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

IMPLEMENTATION = "compiled"


def prox_l1(v, double t):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(vv)
    cdef Py_ssize_t i, n = vv.shape[0]
    cdef double a
    for i in range(n):
        a = fabs(vv[i]) - t
        out[i] = (a if a > 0.0 else 0.0) * (1.0 if vv[i] >= 0.0 else -1.0)
    return out


def prox_group_l21(v, double t, starts, stops):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = vv.copy()
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ss = np.asarray(starts, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ee = np.asarray(stops, dtype=np.intp)
    cdef Py_ssize_t g, i
    cdef double norm, scale
    for g in range(ss.shape[0]):
        norm = 0.0
        for i in range(ss[g], ee[g]):
            norm += vv[i] * vv[i]
        norm = sqrt(norm)
        if norm <= t:
            for i in range(ss[g], ee[g]):
                out[i] = 0.0
        else:
            scale = 1.0 - t / norm
            for i in range(ss[g], ee[g]):
                out[i] = vv[i] * scale
    return out


def group_l21_norm(v, starts, stops):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ss = np.asarray(starts, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ee = np.asarray(stops, dtype=np.intp)
    cdef Py_ssize_t g, i
    cdef double norm, total = 0.0
    for g in range(ss.shape[0]):
        norm = 0.0
        for i in range(ss[g], ee[g]):
            norm += vv[i] * vv[i]
        total += sqrt(norm)
    return total


cdef void _matvec(double[:, ::1] G, double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, n = G.shape[0]
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += G[i, j] * x[j]
        out[i] = acc


cdef double _penalty(double[::1] x, double lam, cnp.intp_t[::1] ss,
                     cnp.intp_t[::1] ee, bint grouped) noexcept nogil:
    cdef Py_ssize_t i, g
    cdef double total = 0.0, norm
    if grouped:
        for g in range(ss.shape[0]):
            norm = 0.0
            for i in range(ss[g], ee[g]):
                norm += x[i] * x[i]
            total += sqrt(norm)
    else:
        for i in range(x.shape[0]):
            total += fabs(x[i])
    return lam * total


cdef void _prox_step(double[::1] y, double[::1] grad, double step, double thr,
                     cnp.intp_t[::1] ss, cnp.intp_t[::1] ee, bint grouped,
                     double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, g
    cdef double a, norm, scale
    for i in range(y.shape[0]):
        out[i] = y[i] - step * grad[i]
    if grouped:
        for g in range(ss.shape[0]):
            norm = 0.0
            for i in range(ss[g], ee[g]):
                norm += out[i] * out[i]
            norm = sqrt(norm)
            if norm <= thr:
                for i in range(ss[g], ee[g]):
                    out[i] = 0.0
            else:
                scale = 1.0 - thr / norm
                for i in range(ss[g], ee[g]):
                    out[i] *= scale
    else:
        for i in range(y.shape[0]):
            a = fabs(out[i]) - thr
            out[i] = (a if a > 0.0 else 0.0) * (1.0 if out[i] >= 0.0 else -1.0)


def fista_quadratic(G, c, double lam, double lipschitz, x0=None, double tol=1e-8,
                    int max_iter=2000, double const=0.0, starts=None, stops=None):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Ga = np.ascontiguousarray(G, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ca = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = ca.shape[0], i
    cdef bint grouped = starts is not None
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ss_a, ee_a
    if grouped:
        ss_a = np.asarray(starts, dtype=np.intp)
        ee_a = np.asarray(stops, dtype=np.intp)
    else:
        ss_a = np.zeros(0, dtype=np.intp)
        ee_a = np.zeros(0, dtype=np.intp)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_a
    if x0 is None:
        x_a = np.zeros(n, dtype=np.float64)
    else:
        x_a = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y_a = x_a.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z_a = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad_a = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tmp_a = np.empty(n, dtype=np.float64)

    cdef double[:, ::1] Gm = Ga
    cdef double[::1] cm = ca, x = x_a, y = y_a, z = z_a, grad = grad_a, tmp = tmp_a
    cdef cnp.intp_t[::1] ss = ss_a, ee = ee_a

    cdef double step = 1.0 / lipschitz, thr = lam * step
    cdef double t_mom = 1.0, t_next, obj_x, obj_z, coef
    cdef int it = 0
    cdef bint converged
    # above this size the BLAS matvec via numpy beats the plain C loop
    cdef bint use_blas = n >= 64

    if use_blas:
        np.dot(Ga, x_a, out=tmp_a)
    else:
        _matvec(Gm, x, tmp)
    obj_x = 0.0
    for i in range(n):
        obj_x += 0.5 * x[i] * tmp[i] - cm[i] * x[i]
    obj_x += const + _penalty(x, lam, ss, ee, grouped)

    for it in range(1, max_iter + 1):
        if use_blas:
            np.dot(Ga, y_a, out=grad_a)
        else:
            _matvec(Gm, y, grad)
        for i in range(n):
            grad[i] -= cm[i]
        _prox_step(y, grad, step, thr, ss, ee, grouped, z)
        if use_blas:
            np.dot(Ga, z_a, out=tmp_a)
        else:
            _matvec(Gm, z, tmp)
        obj_z = 0.0
        for i in range(n):
            obj_z += 0.5 * z[i] * tmp[i] - cm[i] * z[i]
        obj_z += const + _penalty(z, lam, ss, ee, grouped)
        if obj_z > obj_x:
            if use_blas:
                np.dot(Ga, x_a, out=grad_a)
            else:
                _matvec(Gm, x, grad)
            for i in range(n):
                grad[i] -= cm[i]
            _prox_step(x, grad, step, thr, ss, ee, grouped, z)
            if use_blas:
                np.dot(Ga, z_a, out=tmp_a)
            else:
                _matvec(Gm, z, tmp)
            obj_z = 0.0
            for i in range(n):
                obj_z += 0.5 * z[i] * tmp[i] - cm[i] * z[i]
            obj_z += const + _penalty(z, lam, ss, ee, grouped)
            t_mom = 1.0
        t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t_mom * t_mom))
        coef = (t_mom - 1.0) / t_next
        for i in range(n):
            y[i] = z[i] + coef * (z[i] - x[i])
        converged = fabs(obj_x - obj_z) <= tol * max(1.0, fabs(obj_x))
        if obj_z <= obj_x:
            for i in range(n):
                x[i] = z[i]
            obj_x = obj_z
        t_mom = t_next
        if converged:
            break
    return x_a, obj_x, it
