"""Pure numpy implementations of the compiled kernels.

Vectorised over cells, iterating over pulse steps.  Random numbers are drawn
in exactly the order used by ``_kernels.pyx``.
"""

import numpy as np


def program_verify(g, target, tol, max_pulses, g_min, g_max, step, sigma_c2c, sigma_read,
                   pot_cost, w_pot, dep_cost, w_dep, read_cost, w_read, rng):
    n = g.shape[0]
    pulses = np.zeros(n, dtype=np.int64)
    reads = np.zeros(n, dtype=np.int64)
    busy = np.zeros(n)
    ew = np.zeros(n)
    er = np.zeros(n)
    conv = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for it in range(max_pulses + 1):
        if active.size == 0:
            break
        gr = g[active]
        if sigma_read > 0:
            seen = gr * (1.0 + sigma_read * rng.standard_normal(active.size))
        else:
            seen = gr
        reads[active] += 1
        busy[active] += w_read
        er[active] += read_cost * gr
        err = target[active] - seen
        ok = np.abs(err) <= tol[active]
        conv[active[ok]] = True
        if it == max_pulses:
            break
        todo = active[~ok]
        if todo.size == 0:
            break
        e = err[~ok]
        size = np.minimum(np.abs(e), step)
        if sigma_c2c > 0:
            size = size * np.maximum(1.0 + sigma_c2c * rng.standard_normal(todo.size), 0.0)
        up = e > 0
        g_old = g[todo]
        g_new = np.minimum(np.maximum(np.where(up, g_old + size, g_old - size), g_min), g_max)
        ew[todo] += np.where(up, pot_cost, dep_cost) * (0.5 * (g_old + g_new))
        busy[todo] += np.where(up, w_pot, w_dep)
        pulses[todo] += 1
        g[todo] = g_new
        active = todo
    return pulses, reads, busy, ew, er, conv


def program_open_loop(g, believed, target, g_min, g_max, step, sigma_c2c,
                      pot_cost, w_pot, dep_cost, w_dep, rng):
    n = g.shape[0]
    pulses = np.zeros(n, dtype=np.int64)
    busy = np.zeros(n)
    ew = np.zeros(n)
    d = target - believed
    need = np.floor(np.abs(d) / step + 0.5).astype(np.int64)
    up_all = d > 0
    active = np.flatnonzero(need > 0)
    it = 0
    while active.size:
        if sigma_c2c > 0:
            size = step * np.maximum(1.0 + sigma_c2c * rng.standard_normal(active.size), 0.0)
        else:
            size = np.full(active.size, step)
        up = up_all[active]
        g_old = g[active]
        g_new = np.minimum(np.maximum(np.where(up, g_old + size, g_old - size), g_min), g_max)
        ew[active] += np.where(up, pot_cost, dep_cost) * (0.5 * (g_old + g_new))
        busy[active] += np.where(up, w_pot, w_dep)
        pulses[active] += 1
        g[active] = g_new
        it += 1
        active = active[need[active] > it]
    return pulses, busy, ew


def relax(gl, gr, i, a, b, kappa, h, tol, max_steps, v0):
    v = np.array(v0, dtype=float, copy=True)
    rate = 0.0
    for it in range(max_steps + 1):
        dv = kappa * (-a * v - b * (gr @ (gl @ v - i)))
        rate = float(np.sqrt(dv @ dv))
        if rate < tol:
            return v, it, rate, True
        if not np.isfinite(rate) or it == max_steps:
            return v, it, rate, False
        v = v + h * dv
    return v, max_steps, rate, False
