"""Compare the compiled and pure-Python integration kernels.

    python benchmarks/bench_kernel.py [--repeat N]

Each case integrates one profile from the series start to the horizon and
reports the best wall time over ``--repeat`` runs. The two kernels must
produce bitwise identical samples; a mismatch aborts the run.
"""

import argparse
import sys
import timeit

import numpy as np

from biharm import _backend
from biharm.radial_ode import IntegratorControls, series_start

CASES = [
    # q, beta, horizon
    (2.0, 0.0, 1e3),
    (2.0, 4.0, 1e3),
    (2.0, 2.0053972218, 1e10),
    (5.0, 0.9531562050, 1e10),
    (3.0, 1000.0, 1e6),
]


def _args(q, beta, horizon):
    c = IntegratorControls(r_target=horizon)
    s = series_start(beta, q, c.start_radius)
    return ((s.u, s.du, s.v, s.dv), s.r, q, horizon, c.rel_tol, c.abs_tol, c.u_floor, c.max_steps, c.max_step_ratio)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args(argv)
    kernels = _backend.kernels()
    if "cython" not in kernels:
        print("compiled kernel not built; only the Python kernel is available", file=sys.stderr)
    names = sorted(kernels)
    print(f"{'q':>4} {'beta':>14} {'horizon':>8} {'steps':>6} " + " ".join(f"{n + ' [ms]':>13}" for n in names) + "  speedup")
    for q, beta, horizon in CASES:
        args = _args(q, beta, horizon)
        results = {n: kernels[n](*args) for n in names}
        ref = results["python"]
        for n, res in results.items():
            if not (np.array_equal(res[0], ref[0]) and np.array_equal(res[1], ref[1]) and res[2:] == ref[2:]):
                raise SystemExit(f"kernel {n} disagrees with the Python kernel for q={q}, beta={beta}")
        times = {}
        for n in names:
            number = 1 if n == "python" else 20
            best = min(timeit.repeat(lambda: kernels[n](*args), number=number, repeat=opts.repeat)) / number
            times[n] = best * 1e3
        speed = f"{times['python'] / times['cython']:8.1f}x" if "cython" in times else "       -"
        print(f"{q:4g} {beta:14.10g} {horizon:8.0e} {len(ref[0]):6d} " + " ".join(f"{times[n]:13.3f}" for n in names) + "  " + speed)


if __name__ == "__main__":
    main()
