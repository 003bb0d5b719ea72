"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--trials 4096] [--repeat 5]

Both backends get the same (T, M, L) stacks; results are checked for
agreement before timing so a broken build cannot report a speed-up.
"""
import argparse
import timeit

import numpy as np

from irsdetect import kernels

SHAPES = [(2, 8), (4, 16), (8, 32), (16, 64)]


def _stack(rng, trials, M, L):
    return (rng.standard_normal((trials, M, L)) + 1j * rng.standard_normal((trials, M, L))) / np.sqrt(2)


def _time(fun, X, repeat):
    return min(timeit.repeat(lambda: fun(X), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if "cython" not in kernels.BACKENDS:
        print("compiled extension not built; only the numpy backend is available")
        return 1
    rng = np.random.default_rng(0)
    previous = kernels.BACKEND
    print(f"{'kernel':<15}{'M':>4}{'L':>5}{'numpy ms':>11}{'cython ms':>11}{'speed-up':>10}")
    try:
        for M, L in SHAPES:
            X = _stack(rng, args.trials, M, L)
            for name in ("blind_stats", "row_sum_energy"):
                fun = getattr(kernels, name)
                out, ms = {}, {}
                for backend in ("numpy", "cython"):
                    kernels.use_backend(backend)
                    out[backend] = fun(X)
                    ms[backend] = 1e3 * _time(fun, X, args.repeat)
                for a, b in zip(out["numpy"], out["cython"]):
                    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)
                print(f"{name:<15}{M:>4}{L:>5}{ms['numpy']:>11.2f}{ms['cython']:>11.2f}"
                      f"{ms['numpy'] / ms['cython']:>9.1f}x")
    finally:
        kernels.use_backend(previous)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
