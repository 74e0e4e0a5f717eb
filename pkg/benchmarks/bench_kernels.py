"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the environment switch
MIXBAYES_PURE_PYTHON does not matter here. Each case reports the best of
``--repeat`` timings and the largest difference between the two outputs.
"""
import argparse
import timeit

import numpy as np

from mixbayes import _kernels_py

try:
    from mixbayes import _kernels
except ImportError:  # extension not built
    _kernels = None


def _lasso_case(d, N, lam, seed=0):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((2 * d, d))
    D /= np.linalg.norm(D, axis=0)
    G = D.T @ D
    C = rng.standard_normal((N, 2 * d)) @ D
    return (G, C, lam, np.zeros((N, d)), 1e-8, 100000)


def _prox_case(p, N, tau, seed=0):
    rng = np.random.default_rng(seed)
    k = rng.uniform(0.05, 3.0, p)
    k[: p // 10] = 0.0
    return (2 * rng.standard_normal((N, p)), k, tau)


CASES = [
    ("lasso_cd d=25 N=200", "lasso_cd", _lasso_case(25, 200, 0.1)),
    ("lasso_cd d=64 N=500", "lasso_cd", _lasso_case(64, 500, 0.05)),
    ("weighted_l2_prox p=50 N=1000", "weighted_l2_prox", _prox_case(50, 1000, 0.5)),
    ("weighted_l2_prox p=1000 N=200", "weighted_l2_prox", _prox_case(1000, 200, 2.0)),
]


def _first(out):
    return out[0] if isinstance(out, tuple) else out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not available; build with `pip install --no-build-isolation -e .`")
        return 1
    print(f"{'case':<32}{'python (ms)':>13}{'compiled (ms)':>15}{'speedup':>9}{'max diff':>11}")
    for name, fn, case in CASES:
        py = getattr(_kernels_py, fn)
        cy = getattr(_kernels, fn)
        t_py = min(timeit.repeat(lambda: py(*case), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: cy(*case), number=1, repeat=args.repeat))
        diff = np.abs(_first(py(*case)) - _first(cy(*case))).max()
        print(f"{name:<32}{1e3 * t_py:>13.2f}{1e3 * t_cy:>15.2f}{t_py / t_cy:>8.1f}x{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
