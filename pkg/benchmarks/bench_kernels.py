"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Checks that both backends agree bitwise, then times the Voronoi owner map
and the shallow-water update on a 64x64 grid.
"""
import argparse
import timeit

import numpy as np

from dsovt import _pykernels

try:
    from dsovt import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(rng):
    pos = np.stack([rng.integers(0, 64, 100), rng.integers(0, 64, 100)], axis=1).astype(np.int64)
    i = np.arange(64.0)[:, None]
    j = np.arange(64.0)[None, :]
    h = 1.0 + 0.5 * ((i - 31.5) ** 2 + (j - 31.5) ** 2 <= 64.0)
    return pos, h, np.zeros_like(h), np.zeros_like(h)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()
    pos, h, hu, hv = cases(np.random.default_rng(0))
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled backend unavailable; timing the Python fallback only")

    results = {}
    for name, mod in backends.items():
        owner = mod.nearest_owner(pos, 64, 64)
        state = mod.lf_advance(h.copy(), hu.copy(), hv.copy(), 0.1, 1.0, args.steps)
        t_owner = min(timeit.repeat(lambda: mod.nearest_owner(pos, 64, 64), number=10, repeat=args.repeat)) / 10
        t_swe = min(timeit.repeat(lambda: mod.lf_advance(h.copy(), hu.copy(), hv.copy(), 0.1, 1.0, args.steps),
                                  number=1, repeat=args.repeat))
        results[name] = (owner, state, t_owner, t_swe)
        print(f"{name:>7}: owner map {t_owner * 1e3:8.3f} ms   {args.steps} solver steps {t_swe * 1e3:8.1f} ms")

    if len(results) == 2:
        (o1, s1, a1, b1), (o2, s2, a2, b2) = results["python"], results["cython"]
        same = np.array_equal(o1, o2) and all(np.array_equal(x, y) for x, y in zip(s1[:3], s2[:3]))
        print(f"bitwise agreement: {same}")
        print(f"speed-up: owner map x{a1 / a2:.1f}, solver x{b1 / b2:.1f}")


if __name__ == "__main__":
    main()
