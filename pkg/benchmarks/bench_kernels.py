"""Time the numba kernels against their numpy twins and check that they agree.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from dyadic_lab import _kernels


def best_of(fn, repeat):
    fn()  # warm-up (compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    R = 16
    fine = rng.standard_normal(1 << R)
    parent = rng.standard_normal(1 << (R - 4))
    depth = 14
    tree = rng.random((1 << depth) - 1)
    A = rng.standard_normal((256, 256))
    B = A @ A.T
    v = np.ones(256)
    return {
        "coarsen": (lambda k: k(fine, 2)),
        "refine_add": (lambda k: k(parent, fine)),
        "subtree_sums": (lambda k: k(tree, 2, depth)),
        "power_iteration": (lambda k: k(B, v, 1e-10, 2000)[0]),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if _kernels.numba is None:
        raise SystemExit("numba is not installed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}  agree")
    for name, call in cases(rng).items():
        np_fn = getattr(_kernels, f"{name}_numpy")
        nb_fn = getattr(_kernels, f"{name}_numba")
        agree = np.allclose(call(np_fn), call(nb_fn), rtol=1e-10, atol=1e-12)
        t_np = best_of(lambda: call(np_fn), args.repeat)
        t_nb = best_of(lambda: call(nb_fn), args.repeat)
        print(f"{name:<16}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>8.1f}x  {agree}")


if __name__ == "__main__":
    main()
