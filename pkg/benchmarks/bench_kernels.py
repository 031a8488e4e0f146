"""Compare the compiled and numpy Schur-complement kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Times the bare kernel on a few block shapes and full extensive-form solves
with each backend, and checks that both backends agree.
"""

import argparse
import time

import numpy as np

from stochsdp.extensive import build_cvar
from stochsdp.instances import random_instance
from stochsdp.sdp import SolverOptions, solve
from stochsdp.sdp.kernels import KERNELS


def kernel_case(rng, nblocks, k, rows_per_block):
    W = np.stack([np.eye(k) + 0.1 * (a + a.T) for a in rng.standard_normal((nblocks, k, k))])
    mats, rows, offsets = [], [], [0]
    m = rows_per_block * 2
    for _ in range(nblocks):
        a = rng.standard_normal((rows_per_block, k, k))
        mats.append(a + np.swapaxes(a, 1, 2))
        rows.append(rng.choice(m, rows_per_block, replace=False))
        offsets.append(offsets[-1] + rows_per_block)
    return m, W, np.concatenate(mats), np.array(offsets, dtype=np.int64), np.concatenate(rows).astype(np.int64)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"backends: {', '.join(KERNELS)}")
    print(f"{'case':<28}" + "".join(f"{name:>12}" for name in KERNELS) + "   max |diff|")
    for nblocks, k, r in [(50, 2, 3), (200, 3, 4), (20, 8, 10), (4, 20, 30)]:
        m, W, mats, offs, rows = kernel_case(rng, nblocks, k, r)
        outs, cols = [], []
        for name, fn in KERNELS.items():
            M = np.zeros((m, m))
            fn(M, W, mats, offs, rows)
            outs.append(M)

            def run(fn=fn):
                fn(np.zeros((m, m)), W, mats, offs, rows)

            cols.append(best_of(run, args.repeat))
        diff = max(float(np.abs(o - outs[0]).max()) for o in outs)
        label = f"{nblocks} blocks k={k} r={r}"
        print(f"{label:<28}" + "".join(f"{1e3 * t:>10.3f}ms" for t in cols) + f"   {diff:.1e}")

    print()
    print("extensive CVaR solves (S scenarios):")
    for S in (5, 20, 60):
        p, sc = random_instance(np.random.default_rng(S), n=2, m=3, s=2, S=S)
        sdp = build_cvar(p, sc, 0.8, 1.0).sdp
        vals, cols = [], []
        for name in KERNELS:
            opts = SolverOptions(kernel=name)
            vals.append(solve(sdp, opts).pobj)
            cols.append(best_of(lambda: solve(sdp, opts), max(1, args.repeat // 2)))
        print(f"  S={S:<4}" + "".join(f"{name}: {1e3 * t:8.1f}ms  " for name, t in zip(KERNELS, cols)) + f"value spread {max(vals) - min(vals):.1e}")


if __name__ == "__main__":
    main()
