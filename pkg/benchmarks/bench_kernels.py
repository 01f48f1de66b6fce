"""Time the grid-hot kernels on both lanes (numba @njit vs pure numpy).

Usage:
    python benchmarks/bench_kernels.py [--steps 20000] [--n-max 60] [--repeats 5]

The dispatched lane follows the package selection (numba unless
JCSUBDYN_DISABLE_NUMBA=1 or numba is missing); the numpy lane is always the
broadcasting implementation.  Results of both lanes are also diffed here as
a belt-and-braces check.
"""

import argparse
import math
import time

import numpy as np

from jcsubdyn import _kernels
from jcsubdyn.hilbert import poisson_weights


def time_call(fn, args, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--n-max", type=int, default=60)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    mean = 10.0
    ts = np.linspace(0.0, 50.0 / 0.02, args.steps)
    p = poisson_weights(mean, args.n_max)
    p1 = poisson_weights(mean, args.n_max + 1)[1:]
    sums_args = (ts, args.n_max, 0.1, 0.02, 1.0, p, p1,
                 complex(math.sqrt(mean)), 1.0, 0.0, 0.0 + 0.0j)
    tables_args = (ts, 0.1, 0.02, args.n_max + 2)

    print(f"dispatched lane: {_kernels.active_lane()}   "
          f"(steps={args.steps}, n_max={args.n_max}, repeats={args.repeats})")

    if _kernels.USING_NUMBA:
        _kernels.channel_sums(*sums_args)  # JIT warm-up
        _kernels.corr_tables(*tables_args)

    rows = []
    for name, fast, slow, fast_args in (
        ("channel_sums", _kernels.channel_sums, _kernels.channel_sums_numpy, sums_args),
        ("corr_tables", _kernels.corr_tables, _kernels.corr_tables_numpy, tables_args),
    ):
        t_fast, out_fast = time_call(fast, fast_args, args.repeats)
        t_slow, out_slow = time_call(slow, fast_args, args.repeats)
        worst = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
                    for a, b in zip(out_fast, out_slow))
        rows.append((name, t_fast, t_slow, t_slow / t_fast, worst))

    print(f"{'kernel':<14} {'dispatched':>12} {'numpy':>12} {'speedup':>9} {'max diff':>11}")
    for name, t_fast, t_slow, speedup, worst in rows:
        print(f"{name:<14} {t_fast * 1e3:>10.2f}ms {t_slow * 1e3:>10.2f}ms "
              f"{speedup:>8.2f}x {worst:>11.2e}")


if __name__ == "__main__":
    main()
