"""Compiled vs pure-Python Dormand-Prince kernel.

Integrates the cosh/sinh solution (n=4, m=2, lambda=-5, k=-1) from t=0.1
to t=3 with both kernels, checks that they produce the same steps and
reports the median wall time of each.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--rtol 1e-10]
"""

import argparse
import math
import statistics
import time

import numpy as np

from warpein import _kernels_py

try:
    from warpein import _kernels
except ImportError:
    _kernels = None


def run(mod, rtol, fixed=0.0):
    t0 = 0.1
    y0 = [math.cosh(t0), math.sinh(t0), math.sinh(t0), math.cosh(t0)]
    return mod.dopri5(y0, t0, 3.0, 0.0, rtol, rtol * 1e-2, 4.0, 2.0, -5.0, -1.0, 1000000, 0.0, fixed,
                      (1, 0, 1, 1))


def timed(mod, rtol, repeat, fixed=0.0):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = run(mod, rtol, fixed)
        times.append(time.perf_counter() - start)
    return statistics.median(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--rtol", type=float, default=1e-10)
    ap.add_argument("--fixed-step", type=float, default=1e-4, help="step of the fixed-step case")
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernel not built; only the pure-Python kernel is available")
    print(f"{'case':<22}{'kernel':<10}{'steps':>8}{'median s':>12}{'speedup':>10}")
    for label, fixed in (("adaptive", 0.0), (f"fixed h={args.fixed_step:g}", args.fixed_step)):
        t_py, out_py = timed(_kernels_py, args.rtol, max(1, args.repeat // 4), fixed)
        print(f"{label:<22}{'python':<10}{len(out_py[4]):>8}{t_py:>12.5f}{'1.0':>10}")
        if _kernels is not None:
            t_c, out_c = timed(_kernels, args.rtol, args.repeat, fixed)
            same = len(out_c[4]) == len(out_py[4]) and np.allclose(out_c[2], out_py[2], rtol=1e-12, atol=0)
            print(f"{label:<22}{'cython':<10}{len(out_c[4]):>8}{t_c:>12.5f}{t_py / t_c:>10.1f}"
                  + ("" if same else "   (results differ)"))
        err = max(abs(out_py[2][0] - math.cosh(3.0)), abs(out_py[2][2] - math.sinh(3.0)))
        print(f"{'':<22}end-point error {err:.2e}")


if __name__ == "__main__":
    main()
