"""Benchmark the compiled kernels against the numpy fallback.

Times the proximal operators and the quadratic FISTA solver on a range
of problem sizes and prints a small table with speedups.

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from collection_forge import _kernels_py


def _load_compiled():
    try:
        from collection_forge import _kernels
        return _kernels
    except ImportError:
        return None


def _spans(n, groups):
    edges = np.linspace(0, n, groups + 1).astype(np.intp)
    return edges[:-1].copy(), edges[1:].copy()


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(name, make_py, make_c, repeats):
    t_py = timeit(make_py, repeats)
    if make_c is None:
        print(f"{name:<34s} python {t_py * 1e3:8.3f} ms   compiled      n/a")
        return
    t_c = timeit(make_c, repeats)
    print(f"{name:<34s} python {t_py * 1e3:8.3f} ms   compiled "
          f"{t_c * 1e3:8.3f} ms   x{t_py / t_c:5.2f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    compiled = _load_compiled()
    if compiled is None:
        print("compiled extension not available; showing python timings only")

    rng = np.random.default_rng(0)
    print(f"{'case':<34s} {'timings (best of %d)' % args.repeats}")

    for n in (1_000, 100_000):
        v = rng.normal(size=n)
        bench_case(f"prox_l1 n={n}",
                   lambda: _kernels_py.prox_l1(v, 0.5),
                   (lambda: compiled.prox_l1(v, 0.5)) if compiled else None,
                   args.repeats)

    for n, groups in ((1_000, 10), (100_000, 500)):
        v = rng.normal(size=n)
        starts, stops = _spans(n, groups)
        bench_case(f"prox_group_l21 n={n} g={groups}",
                   lambda: _kernels_py.prox_group_l21(v, 0.5, starts, stops),
                   (lambda: compiled.prox_group_l21(v, 0.5, starts, stops))
                   if compiled else None,
                   args.repeats)

    for d, n in ((32, 64), (128, 400)):
        D = rng.normal(size=(d, n)) / np.sqrt(d)
        f = rng.normal(size=d)
        G = D.T @ D
        c = D.T @ f
        L = float(np.linalg.eigvalsh(G)[-1])
        kwargs = {"tol": 1e-10, "max_iter": 2000, "const": 0.5 * float(f @ f)}
        bench_case(f"fista_quadratic {d}x{n} l1",
                   lambda: _kernels_py.fista_quadratic(G, c, 0.05, L, **kwargs),
                   (lambda: compiled.fista_quadratic(G, c, 0.05, L, **kwargs))
                   if compiled else None,
                   args.repeats)
        starts, stops = _spans(n, 4)
        bench_case(f"fista_quadratic {d}x{n} group",
                   lambda: _kernels_py.fista_quadratic(
                       G, c, 0.05, L, starts=starts, stops=stops, **kwargs),
                   (lambda: compiled.fista_quadratic(
                       G, c, 0.05, L, starts=starts, stops=stops, **kwargs))
                   if compiled else None,
                   args.repeats)


if __name__ == "__main__":
    main()
