"""Compare the compiled and numpy kernel backends on the two hot paths.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--workers 1]

Prints one line per (kernel, size, backend) with the best wall time and the
speedup of the compiled backend over the fallback.
"""

import argparse
import time

import numpy as np

from vmifs import _backend
from vmifs.data import gen_tree_synthetic
from vmifs.vmi import QDistKind, VmiConfig, select


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(workers):
    rng = np.random.default_rng(0)
    for m in (1000, 4000):
        q = np.ascontiguousarray(rng.normal(size=(m, 1)))
        s = np.ascontiguousarray(rng.normal(size=(m, 1)))
        w, h = np.ones(m), np.array([0.3])
        yield (f"gauss_kde n=m={m}",
               lambda k, q=q, s=s, w=w, h=h: k.gauss_kde(q, s, w, h, workers))
    for N, D in ((5000, 20), (20000, 50)):
        logq = rng.normal(size=(N, 2))
        logc = np.log(rng.dirichlet([1, 1], size=(D, N)))
        args = (logq, logc, np.arange(D, dtype=np.int64), np.log([0.5, 0.5]),
                rng.integers(0, 2, N).astype(np.int64), np.full(N, 1 / N))
        yield (f"score_candidates N={N} D={D}",
               lambda k, args=args: k.score_candidates(*args, workers))
    ds = gen_tree_synthetic(3000, 0)
    yield ("select kde N=3000 T=3",
           lambda k: select(ds, QDistKind.NAIVE, 3, VmiConfig(workers=workers)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    names = _backend.available()
    print(f"backends: {', '.join(names)}; workers={args.workers}")
    for label, fn in cases(args.workers):
        timing = {}
        for name in names:
            prev = _backend.use(name)
            try:
                kernels = _backend.kernels()
                fn(kernels)  # warm-up
                timing[name] = best_of(lambda: fn(_backend.kernels()), args.repeat)
            finally:
                _backend.use(prev)
        row = "  ".join(f"{n}={t * 1e3:9.2f}ms" for n, t in timing.items())
        if "cython" in timing:
            row += f"  speedup={timing['python'] / timing['cython']:.2f}x"
        print(f"{label:32s} {row}")


if __name__ == "__main__":
    main()
