"""Compare the compiled kernels with the pure-Python fallback.

Run from the repository root after ``pip install -e .``::

    python3 benchmarks/bench_kernels.py --cells 4096 65536 --repeat 5

Each kernel is run on identical inputs and generator seeds in both backends;
the outputs are checked for agreement before timings are reported.
"""

import argparse
import time

import numpy as np

from rram_baseband import kernels
from rram_baseband.config import load_config


def _costs(p):
    return (p.pot_amplitude**2 * p.pot_width, p.pot_width, p.dep_amplitude**2 * p.dep_width, p.dep_width)


def _verify_case(impl, p, n, seed):
    r = np.random.default_rng(seed)
    target = p.g_min + p.g_range * r.uniform(0.05, 1.0, n)
    g = np.full(n, p.g_min)
    out = impl.program_verify(g, target, 0.005 * target, 4 * p.n_states + 64, p.g_min, p.g_max, p.step,
                              p.sigma_c2c, p.sigma_read, *_costs(p), p.read_voltage**2 * p.read_width,
                              p.read_width, r)
    return g, out[0]


def _open_loop_case(impl, p, n, seed):
    r = np.random.default_rng(seed)
    target = p.g_min + p.g_range * r.uniform(0.05, 1.0, n)
    g = np.full(n, p.g_min)
    out = impl.program_open_loop(g, g.copy(), target, p.g_min, p.g_max, p.step, p.sigma_c2c, *_costs(p), r)
    return g, out[0]


def _relax_case(impl, p, n, seed):
    r = np.random.default_rng(seed)
    k = max(2, int(round(np.sqrt(n))) // 2 * 2)
    gl = np.eye(k) + 0.2 * r.standard_normal((k, k)) / np.sqrt(k)
    gr = np.ascontiguousarray(gl.T)
    y = r.standard_normal(k)
    a, b = 0.05, 1.0
    h = 1.0 / (a + b * np.linalg.norm(gr, 2) * np.linalg.norm(gl, 2))
    v, it, _, _ = impl.relax(gl, gr, y, a, b, 1.0, h, 1e-10, 100_000, np.zeros(k))
    return v, it


CASES = {"program_verify": _verify_case, "program_open_loop": _open_loop_case, "relax": _relax_case}


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+", default=[1024, 16384, 262144],
                    help="problem sizes (cells; relax uses a sqrt(cells) square system)")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--preset", default="paper_4x4", help="preset whose device parameters are used")
    args = ap.parse_args(argv)

    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled extension not available; only the fallback can be timed")
    params = load_config(args.preset)[0].device
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<18} {'cells':>8} {'python s':>10} {'compiled s':>11} {'speed-up':>9}  agree")
    for name, case in CASES.items():
        for n in args.cells:
            t_py, r_py = best_time(lambda: case(impls["python"], params, n, 7), args.repeat)
            if "compiled" in impls:
                t_c, r_c = best_time(lambda: case(impls["compiled"], params, n, 7), args.repeat)
                exact = name != "relax"
                if exact:
                    agree = all(np.array_equal(a, b) for a, b in zip(r_py, r_c))
                else:
                    agree = bool(np.allclose(r_py[0], r_c[0], atol=1e-8))
                print(f"{name:<18} {n:>8} {t_py:>10.4f} {t_c:>11.4f} {t_py / t_c:>8.1f}x  {agree}")
            else:
                print(f"{name:<18} {n:>8} {t_py:>10.4f} {'-':>11} {'-':>9}  -")


if __name__ == "__main__":
    main()
