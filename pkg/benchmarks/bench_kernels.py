"""Compare the compiled and pure-Python graph kernels.

    python benchmarks/bench_kernels.py [--sizes 16 32 64] [--degree 6] [--repeat 5]
"""

import argparse
import time

import networkx as nx
import numpy as np

from graphdiff import kernels


def best_of(fn, A, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(A)
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--degree", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if kernels.BACKEND != "cython":
        print("compiled extension not built; only the Python backend is available")
        impls = ["python"]
    else:
        impls = ["cython", "python"]

    print(f"{'kernel':<10}{'n':>5}" + "".join(f"{i + ' ms':>14}" for i in impls) + f"{'speedup':>10}")
    for n in args.sizes:
        G = nx.random_regular_graph(args.degree, n, seed=args.seed)
        A = nx.to_numpy_array(G, dtype=np.uint8)
        for name in ("triangles", "orbit4"):
            fn = getattr(kernels, name)
            ref = fn(A, impl="python")
            ms = {}
            for impl in impls:
                if not np.array_equal(fn(A, impl=impl), ref):
                    raise SystemExit(f"{name}: {impl} disagrees with the Python reference at n={n}")
                ms[impl] = 1e3 * best_of(lambda a: fn(a, impl=impl), A, args.repeat)
            speed = f"{ms['python'] / ms['cython']:>9.1f}x" if "cython" in ms else f"{'-':>10}"
            print(f"{name:<10}{n:>5}" + "".join(f"{ms[i]:>14.3f}" for i in impls) + speed)


if __name__ == "__main__":
    main()
