# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled programming and relaxation kernels.

Each function mirrors the one of the same name in ``_fallback.py``: the random
stream is consumed in the same order (step-major over active cells, read
noise first, then pulse noise), so both backends produce identical device
states for the same generator.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport fabs, floor, sqrt, isfinite
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()


cdef inline bitgen_t* _bitgen(rng):
    return <bitgen_t*> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline double _clip(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def program_verify(double[::1] g, const double[::1] target, const double[::1] tol,
                   long max_pulses, double g_min, double g_max, double step,
                   double sigma_c2c, double sigma_read,
                   double pot_cost, double w_pot, double dep_cost, double w_dep,
                   double read_cost, double w_read, rng):
    cdef Py_ssize_t n = g.shape[0]
    pulses_a = np.zeros(n, dtype=np.int64)
    reads_a = np.zeros(n, dtype=np.int64)
    busy_a = np.zeros(n, dtype=np.float64)
    ew_a = np.zeros(n, dtype=np.float64)
    er_a = np.zeros(n, dtype=np.float64)
    conv_a = np.zeros(n, dtype=np.bool_)
    act_a = np.arange(n, dtype=np.intp)
    err_a = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] pulses = pulses_a
    cdef cnp.int64_t[::1] reads = reads_a
    cdef double[::1] busy = busy_a
    cdef double[::1] ew = ew_a
    cdef double[::1] er = er_a
    cdef cnp.npy_bool[::1] conv = conv_a
    cdef Py_ssize_t[::1] act = act_a
    cdef double[::1] err = err_a
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t m = n, k, j, c
    cdef long it
    cdef double gr, seen, e, size, g_new
    with rng.bit_generator.lock, nogil:
        for it in range(max_pulses + 1):
            if m == 0:
                break
            # verify read of every active cell
            for j in range(m):
                c = act[j]
                gr = g[c]
                if sigma_read > 0:
                    seen = gr * (1.0 + sigma_read * random_standard_normal(bg))
                else:
                    seen = gr
                reads[c] += 1
                busy[c] += w_read
                er[c] += read_cost * gr
                e = target[c] - seen
                err[c] = e
                if fabs(e) <= tol[c]:
                    conv[c] = 1
            if it == max_pulses:
                break
            k = 0
            for j in range(m):
                c = act[j]
                if conv[c]:
                    continue
                act[k] = c
                k += 1
            # one pulse toward target, amplitude trimmed near the target
            for j in range(k):
                c = act[j]
                e = err[c]
                size = fabs(e)
                if size > step:
                    size = step
                if sigma_c2c > 0:
                    size = size * max(1.0 + sigma_c2c * random_standard_normal(bg), 0.0)
                if e > 0:
                    g_new = _clip(g[c] + size, g_min, g_max)
                    ew[c] += pot_cost * (0.5 * (g[c] + g_new))
                    busy[c] += w_pot
                else:
                    g_new = _clip(g[c] - size, g_min, g_max)
                    ew[c] += dep_cost * (0.5 * (g[c] + g_new))
                    busy[c] += w_dep
                pulses[c] += 1
                g[c] = g_new
            m = k
    return pulses_a, reads_a, busy_a, ew_a, er_a, conv_a


def program_open_loop(double[::1] g, const double[::1] believed, const double[::1] target,
                      double g_min, double g_max, double step, double sigma_c2c,
                      double pot_cost, double w_pot, double dep_cost, double w_dep, rng):
    cdef Py_ssize_t n = g.shape[0]
    pulses_a = np.zeros(n, dtype=np.int64)
    busy_a = np.zeros(n, dtype=np.float64)
    ew_a = np.zeros(n, dtype=np.float64)
    need_a = np.zeros(n, dtype=np.int64)
    act_a = np.empty(n, dtype=np.intp)
    cdef cnp.int64_t[::1] pulses = pulses_a
    cdef double[::1] busy = busy_a
    cdef double[::1] ew = ew_a
    cdef cnp.int64_t[::1] need = need_a
    cdef Py_ssize_t[::1] act = act_a
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t m = 0, k, j, c
    cdef cnp.int64_t it = 0
    cdef double d, size, g_new
    for c in range(n):
        d = target[c] - believed[c]
        need[c] = <cnp.int64_t> floor(fabs(d) / step + 0.5)
        if need[c] > 0:
            act[m] = c
            m += 1
    with rng.bit_generator.lock, nogil:
        while m > 0:
            for j in range(m):
                c = act[j]
                if sigma_c2c > 0:
                    size = step * max(1.0 + sigma_c2c * random_standard_normal(bg), 0.0)
                else:
                    size = step
                if target[c] - believed[c] > 0:
                    g_new = _clip(g[c] + size, g_min, g_max)
                    ew[c] += pot_cost * (0.5 * (g[c] + g_new))
                    busy[c] += w_pot
                else:
                    g_new = _clip(g[c] - size, g_min, g_max)
                    ew[c] += dep_cost * (0.5 * (g[c] + g_new))
                    busy[c] += w_dep
                pulses[c] += 1
                g[c] = g_new
            it += 1
            k = 0
            for j in range(m):
                c = act[j]
                if need[c] > it:
                    act[k] = c
                    k += 1
            m = k
    return pulses_a, busy_a, ew_a


def relax(const double[:, ::1] gl, const double[:, ::1] gr, const double[::1] i,
          double a, double b, double kappa, double h, double tol, long max_steps,
          const double[::1] v0):
    """Forward-Euler settling of the two-stage TIA feedback loop."""
    cdef Py_ssize_t nr = gl.shape[0], nt = gl.shape[1]
    v_a = np.array(v0, dtype=np.float64, copy=True)
    r_a = np.empty(nr, dtype=np.float64)
    dv_a = np.empty(nt, dtype=np.float64)
    cdef double[::1] v = v_a
    cdef double[::1] r = r_a
    cdef double[::1] dv = dv_a
    cdef Py_ssize_t p, q
    cdef long it
    cdef double acc, rate = 0.0
    cdef bint ok = 0
    with nogil:
        for it in range(max_steps + 1):
            for p in range(nr):
                acc = 0.0
                for q in range(nt):
                    acc = acc + gl[p, q] * v[q]
                r[p] = acc - i[p]
            rate = 0.0
            for p in range(nt):
                acc = 0.0
                for q in range(nr):
                    acc = acc + gr[p, q] * r[q]
                dv[p] = kappa * (-a * v[p] - b * acc)
                rate = rate + dv[p] * dv[p]
            rate = sqrt(rate)
            if rate < tol:
                ok = 1
                break
            if not isfinite(rate) or it == max_steps:
                break
            for p in range(nt):
                v[p] = v[p] + h * dv[p]
    return v_a, it, rate, bool(ok)
