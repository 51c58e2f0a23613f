"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--sizes 1000,10000,100000] [--repeat 5]

Prints one line per (kernel, size) with the best-of-repeat time for each
backend and the speed-up. Outputs are checked for equality first.
"""
import argparse
import timeit

import numpy as np

from sbtrees import kernels
from sbtrees.discrete import build_dtree, sample_dtuple
from sbtrees.params import validate_degree_sequence


def binary(n):
    return validate_degree_sequence([2] * n + [0] * (n + 1))


def cases(s, rng):
    d = binary(s // 2)
    a = sample_dtuple(d, rng)
    leaves = np.flatnonzero(np.asarray(d.degrees) == 0).astype(np.int64)
    tree, _ = build_dtree(d, a)
    depth = tree.depth
    points = rng.choice(d.s, size=min(200, d.s), replace=False).astype(np.int64)
    offsets = rng.integers(0, np.arange(len(a), 0, -1)).astype(np.int64)
    labels = np.asarray(a, dtype=np.int64)
    return {
        "dtree_walk": lambda b: kernels.dtree_walk(a, len(a), leaves, d.s, -1, True, backend=b),
        "partial_shuffle": lambda b: shuffled(labels, offsets, b),
        "tree_distance_matrix": lambda b: kernels.tree_distance_matrix(tree.parent, depth, points, backend=b),
    }


def shuffled(labels, offsets, backend):
    out = labels.copy()
    kernels.partial_shuffle(out, 0, offsets, backend=backend)
    return out


def same(x, y):
    if isinstance(x, tuple):
        return all(same(u, v) for u, v in zip(x, y))
    return np.array_equal(np.asarray(x), np.asarray(y))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,10000,100000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        print("compiled kernels unavailable; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'s':>8}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}")
    for s in (int(x) for x in args.sizes.split(",")):
        for name, fn in cases(s, rng).items():
            assert same(fn(py), fn(cy)), name
            tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
            tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat))
            print(f"{name:<22}{s:>8}{tp * 1e3:>14.3f}{tc * 1e3:>14.3f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
