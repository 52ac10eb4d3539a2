# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_pykernels``; see that module for semantics."""

import numpy as np

cimport cython
from cython.parallel cimport parallel, prange
from libc.math cimport floor, fabs
from libc.stdlib cimport free, malloc, qsort

cdef double SNAP = 1e-9
cdef double TIE_TOL = 1e-12
cdef double DEDUP_TOL = 1e-12
cdef int MAX_DIM = 16


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


cdef inline double _stage_cost(double h, double demand, double c, double p,
                               double cap, double a) noexcept nogil:
    cdef double short = demand - h
    cdef double thermal = short if short > 0.0 else 0.0
    if thermal > cap:
        thermal = cap
    cdef double deficit = short - cap
    if deficit < 0.0:
        deficit = 0.0
    cdef double surplus = -short
    if surplus < 0.0:
        surplus = 0.0
    return c * thermal + p * deficit - a * surplus


cdef inline double _interp(const double* values, const Py_ssize_t* shape,
                           const Py_ssize_t* strides, const double* steps,
                           const double* point, int m, Py_ssize_t* base,
                           double* frac, int* off) noexcept nogil:
    cdef int j, corner
    cdef double pos, k, t, w, acc
    cdef Py_ssize_t ki, idx
    off[0] = 0
    for j in range(m):
        pos = point[j] / steps[j]
        k = floor(pos)
        t = pos - k
        if t > 1.0 - SNAP:
            k = k + 1.0
            t = 0.0
        elif t < SNAP:
            t = 0.0
        ki = <Py_ssize_t>k
        if ki < 0:
            ki = 0
            t = 0.0
        if ki >= shape[j] - 1:
            ki = shape[j] - 2
            t = 1.0
        base[j] = ki
        frac[j] = t
        if t > 0.0 and t < 1.0:
            off[0] = 1
    acc = 0.0
    for corner in range(1 << m):
        w = 1.0
        idx = 0
        for j in range(m):
            if (corner >> j) & 1:
                w = w * frac[j]
                idx = idx + (base[j] + 1) * strides[j]
            else:
                w = w * (1.0 - frac[j])
                idx = idx + base[j] * strides[j]
        if w != 0.0:
            acc = acc + w * values[idx]
    return acc


def multilinear(values, shape, steps, points):
    cdef double[::1] vals = np.ascontiguousarray(values, dtype=np.float64).ravel()
    cdef double[:, ::1] pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef Py_ssize_t npts = pts.shape[0]
    cdef int m = pts.shape[1]
    if m > MAX_DIM:
        raise ValueError("too many dimensions")
    cdef Py_ssize_t[::1] shp = np.asarray(shape, dtype=np.intp).copy()
    cdef double[::1] stp = np.ascontiguousarray(steps, dtype=np.float64)
    cdef Py_ssize_t[::1] strides = np.ones(m, dtype=np.intp)
    cdef int j
    for j in range(m - 2, -1, -1):
        strides[j] = strides[j + 1] * shp[j + 1]
    out_arr = np.empty(npts)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t base[16]
    cdef double frac[16]
    cdef int off
    cdef Py_ssize_t i, offgrid = 0
    with nogil:
        for i in range(npts):
            out[i] = _interp(&vals[0], &shp[0], &strides[0], &stp[0], &pts[i, 0],
                             m, base, frac, &off)
            offgrid += off
    return out_arr, int(offgrid)


def select_min(obj):
    cdef double[:, ::1] o = np.ascontiguousarray(np.atleast_2d(obj), dtype=np.float64)
    cdef Py_ssize_t rows = o.shape[0], cols = o.shape[1]
    vals_arr = np.empty(rows)
    idx_arr = np.empty(rows, dtype=np.intp)
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef Py_ssize_t r, k
    cdef double best, thresh
    with nogil:
        for r in range(rows):
            best = o[r, 0]
            for k in range(1, cols):
                if o[r, k] < best:
                    best = o[r, k]
            thresh = best + TIE_TOL * (1.0 + fabs(best))
            idx[r] = -1
            vals[r] = best
            for k in range(cols):
                if o[r, k] <= thresh:
                    idx[r] = k
                    vals[r] = o[r, k]
                    break
    return vals_arr, idx_arr


cdef Py_ssize_t _candidates(const double* pot, const double* store_levels,
                            const Py_ssize_t* level_off, const Py_ssize_t* levels,
                            int m, int refine, Py_ssize_t maxd, double demand,
                            double cap, double total, double* buf) noexcept nogil:
    cdef Py_ssize_t n = 0, nsweep = refine * (maxd - 1), k, w
    cdef int j
    cdef double ratio, lev, u, tol
    if total <= 0.0:
        buf[0] = 0.0
        return 1
    for k in range(nsweep):
        buf[n] = k * total / nsweep
        n += 1
    buf[n] = total
    n += 1
    for j in range(m):
        if pot[j] <= 0.0:
            continue
        ratio = total / pot[j]
        for k in range(levels[j]):
            lev = store_levels[level_off[j] + k]
            if lev > pot[j]:
                break
            u = total - lev * ratio
            if u >= 0.0 and u <= total:
                buf[n] = u
                n += 1
    u = demand - cap
    if u > 0.0 and u < total:
        buf[n] = u
        n += 1
    if demand > 0.0 and demand < total:
        buf[n] = demand
        n += 1
    qsort(buf, n, sizeof(double), _cmp_double)
    tol = DEDUP_TOL * (total if total > 1.0 else 1.0)
    w = 1
    for k in range(1, n):
        if buf[k] - buf[w - 1] > tol:
            buf[w] = buf[k]
            w += 1
    return w


def aggregate_stage(stores, inflows, capacities, levels, steps, next_values,
                    double demand, double c, double p, double cap, double a,
                    int refine, int num_threads=1):
    cdef double[:, ::1] st = np.ascontiguousarray(stores, dtype=np.float64)
    cdef double[::1] x = np.ascontiguousarray(inflows, dtype=np.float64)
    cdef double[::1] qbar = np.ascontiguousarray(capacities, dtype=np.float64)
    cdef Py_ssize_t[::1] lev = np.asarray(levels, dtype=np.intp).copy()
    cdef double[::1] stp = np.ascontiguousarray(steps, dtype=np.float64)
    cdef double[::1] nxt = np.ascontiguousarray(next_values, dtype=np.float64).ravel()
    cdef Py_ssize_t nstates = st.shape[0]
    cdef int m = st.shape[1]
    if m > MAX_DIM:
        raise ValueError("too many dimensions")
    cdef Py_ssize_t maxd = max(lev[j] for j in range(m))
    cdef Py_ssize_t[::1] strides = np.ones(m, dtype=np.intp)
    cdef Py_ssize_t[::1] level_off = np.zeros(m, dtype=np.intp)
    cdef int j
    for j in range(m - 2, -1, -1):
        strides[j] = strides[j + 1] * lev[j + 1]
    for j in range(1, m):
        level_off[j] = level_off[j - 1] + lev[j - 1]
    cdef double[::1] slev = np.concatenate(
        [np.linspace(0.0, qbar[j], lev[j]) for j in range(m)])
    cdef Py_ssize_t bufsize = refine * (maxd - 1) + 1 + sum(lev[j] for j in range(m)) + 2

    vals_arr = np.empty(nstates)
    us_arr = np.empty(nstates)
    offs_arr = np.zeros(nstates, dtype=np.intp)
    cdef double[::1] vals = vals_arr
    cdef double[::1] us = us_arr
    cdef Py_ssize_t[::1] offs = offs_arr

    cdef Py_ssize_t s, k, ncand, off_count
    cdef double* buf
    cdef double* obj
    cdef double* pot
    cdef double* succ
    cdef Py_ssize_t* base
    cdef double* frac
    cdef double total, best, thresh, sj
    cdef int off

    with nogil, parallel(num_threads=num_threads):
        buf = <double*>malloc(bufsize * sizeof(double))
        obj = <double*>malloc(bufsize * sizeof(double))
        pot = <double*>malloc(m * sizeof(double))
        succ = <double*>malloc(m * sizeof(double))
        base = <Py_ssize_t*>malloc(m * sizeof(Py_ssize_t))
        frac = <double*>malloc(m * sizeof(double))
        for s in prange(nstates, schedule="static"):
            total = 0.0
            for j in range(m):
                pot[j] = st[s, j] + x[j]
                total = total + pot[j]
            ncand = _candidates(pot, &slev[0], &level_off[0], &lev[0], m, refine,
                                maxd, demand, cap, total, buf)
            off_count = 0
            off = 0
            for k in range(ncand):
                for j in range(m):
                    if total > 0.0:
                        sj = pot[j] - buf[k] * (pot[j] / total)
                    else:
                        sj = 0.0
                    if sj < 0.0:
                        sj = 0.0
                    if sj > qbar[j]:
                        sj = qbar[j]
                    succ[j] = sj
                obj[k] = _stage_cost(buf[k], demand, c, p, cap, a) + _interp(
                    &nxt[0], &lev[0], &strides[0], &stp[0], succ, m, base, frac, &off)
                off_count = off_count + off
            best = obj[0]
            for k in range(1, ncand):
                if obj[k] < best:
                    best = obj[k]
            thresh = best + TIE_TOL * (1.0 + fabs(best))
            for k in range(ncand):
                if obj[k] <= thresh:
                    vals[s] = obj[k]
                    us[s] = buf[k]
                    break
            offs[s] = off_count
        free(buf)
        free(obj)
        free(pot)
        free(succ)
        free(base)
        free(frac)
    return vals_arr, us_arr, int(offs_arr.sum())
