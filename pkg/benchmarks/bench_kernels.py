"""Time the numba kernels against their pure-numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``. Both variants are called
directly, so the ``AERISK_NO_NUMBA`` switch has no effect here. Each line
reports the best of ``--repeat`` runs and checks that both outputs agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from aerisk import kernels
from aerisk._accel import HAVE_NUMBA


def best_of(fn, args, repeat):
    fn(*args)  # compile / warm caches
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def make_arm(rng, n):
    time_ = np.sort(rng.exponential(30.0, n))
    kind = rng.choice(np.array([0, 1, 2], dtype=np.int8), n, p=[0.4, 0.35, 0.25])
    return time_, kind


def cases(rng, n, replicates):
    time_, kind = make_arm(rng, n)
    idx = rng.integers(0, n, (replicates, n))
    weights = np.array([np.bincount(row, minlength=n) for row in idx], dtype=np.float64)
    tau = float(np.quantile(time_, 0.8))
    yield "cr_summary", (time_, kind, weights, tau)

    group = rng.integers(0, 2, n).astype(np.int8)
    event = (kind == 1).astype(np.int8)
    yield "cox_tables", (time_, event, group, np.ones(n))

    yield "resample_counts", (idx, n)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=lambda s: [int(v) for v in s.split(",")], default=[100, 1000, 10000])
    parser.add_argument("--replicates", type=int, default=999, help="bootstrap rows for cr_summary")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'n':>7}{'numba ms':>11}{'numpy ms':>11}{'speed-up':>10}  agree")
    for n in args.sizes:
        reps = args.replicates if n <= 1000 else max(2, args.replicates // 10)
        for name, call_args in cases(rng, n, reps):
            t_numba, out_numba = best_of(getattr(kernels, f"_{name}_numba"), call_args, args.repeat)
            t_numpy, out_numpy = best_of(getattr(kernels, f"_{name}_numpy"), call_args, args.repeat)
            if isinstance(out_numba, tuple):
                agree = all(np.allclose(a, b, rtol=1e-12, atol=1e-12) for a, b in zip(out_numba, out_numpy))
            else:
                agree = np.allclose(out_numba, out_numpy, rtol=1e-12, atol=1e-12)
            print(f"{name:<16}{n:>7}{t_numba * 1e3:>11.3f}{t_numpy * 1e3:>11.3f}"
                  f"{t_numpy / t_numba:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
