"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--levels 9 9 9] [--repeat 5]
"""

import argparse
import os
import time

import numpy as np

from hydrodp.kernels import backends


def grid_states(levels, caps):
    axes = [np.linspace(0, c, d) for c, d in zip(caps, levels)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[9, 9, 9])
    ap.add_argument("--refine", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    levels = np.array(args.levels)
    caps = levels - 1.0
    steps = caps / (levels - 1)
    states = grid_states(levels, caps)
    nxt = rng.uniform(0, 50, int(np.prod(levels)))
    stage_args = (states, np.ones(len(levels)), caps, levels, steps, nxt, 6.0, 1.0, 10.0, 2.0, 0.0, args.refine)
    pts = rng.uniform(0, 1, (200_000, len(levels))) * caps
    obj = rng.normal(size=(20_000, 64))

    impls = backends()
    threads = int(os.environ.get("HYDRODP_THREADS", os.cpu_count() or 1))
    print(f"grid {tuple(args.levels)} = {len(states)} states, refine {args.refine}, threads {threads}")
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name in impls) + "     speedup")
    for label, call in (
        ("aggregate_stage", lambda m: m.aggregate_stage(*stage_args, num_threads=threads)),
        ("multilinear", lambda m: m.multilinear(nxt, levels, steps, pts)),
        ("select_min", lambda m: m.select_min(obj)),
    ):
        t = {name: best_of(lambda m=m: call(m), args.repeat) for name, m in impls.items()}
        line = f"{label:<18}" + "".join(f"{t[name] * 1e3:>10.2f}ms" for name in impls)
        if "cython" in t:
            line += f"  {t['python'] / t['cython']:>9.1f}x"
        print(line)
    if "cython" in impls:
        a = impls["python"].aggregate_stage(*stage_args)
        b = impls["cython"].aggregate_stage(*stage_args, num_threads=threads)
        print("aggregate_stage outputs identical:", bool(np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])))


if __name__ == "__main__":
    main()
