"""Time the numba kernels against their numpy twins.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 65,129,257] [--repeat 5]

JIT compilation happens once before timing, so the numbers are steady state.
"""
import argparse
import timeit

import numpy as np

from halfplane_ma import _kernels as K


def cases(n, rng):
    x = np.linspace(-1.0, 1.0, n)
    u = 0.5 * x * x + 0.1 * x ** 4
    slopes = np.diff(u) / np.diff(x)
    xi = np.linspace(slopes[0], slopes[-1], n)
    X, Y = np.meshgrid(x, np.linspace(0.0, 1.0, n))
    U = 0.5 * X * X + Y ** 3 / 6 + 1e-3 * rng.standard_normal(X.shape)
    rhs = np.linspace(0.0, 1.0, n)[1:-1, None] * np.ones((1, n - 2))
    h = x[1] - x[0]
    return {
        "argmax_brute": ((x, u, xi), "conjugate_argmax_brute"),
        "argmax_monotone": ((slopes, xi), "conjugate_argmax_monotone"),
        "ma_operator": ((U, h, 1.0 / (n - 1), rhs, True), "ma_operator"),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="65,129,257")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'n':>6}{'numpy [ms]':>14}{'numba [ms]':>14}{'speedup':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        for label, (call_args, name) in cases(n, rng).items():
            fn_np = getattr(K, name + "_numpy")
            fn_nb = getattr(K, name + "_numba")
            fn_nb(*call_args)  # compile
            loops = 3
            t_np = min(timeit.repeat(lambda: fn_np(*call_args), number=loops,
                                     repeat=args.repeat)) / loops
            t_nb = min(timeit.repeat(lambda: fn_nb(*call_args), number=loops,
                                     repeat=args.repeat)) / loops
            print(f"{label:<18}{n:>6}{1e3 * t_np:>14.3f}{1e3 * t_nb:>14.3f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
