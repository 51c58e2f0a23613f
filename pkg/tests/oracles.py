"""Independent reference implementations used only by the tests.

None of these import the package: they are written straight from the
definitions with Python lists and dicts so they can catch errors in the
vectorised and compiled code paths.
"""
from __future__ import annotations

import itertools
import math


def straight_line_dtree(d, a):
    """Walk a D-tuple by hand. Labels are 0-based, positions 1-based.

    Returns (root, edges as (parent, child), Y, Z, first-hit dict).
    """
    s = len(d)
    if s == 1:
        return 0, [], [], [], {}
    leaves = [i for i in range(s) if d[i] == 0]
    in_tree = {a[0]}
    first = {a[0]: 1}
    edges, Y, Z = [], [], []

    def next_leaf():
        for leaf in leaves:
            if leaf not in in_tree:
                return leaf
        raise RuntimeError("ran out of leaves")

    for i in range(2, s):
        prev, cur = a[i - 2], a[i - 1]
        if cur not in in_tree:
            edges.append((prev, cur))
            in_tree.add(cur)
            first[cur] = i
        else:
            Y.append(i)
            Z.append(first[cur])
            leaf = next_leaf()
            edges.append((prev, leaf))
            in_tree.add(leaf)
    leaf = next_leaf()
    edges.append((a[s - 2], leaf))
    return a[0], edges, Y, Z, first


def recursive_sb_distance(y, z, a, b):
    """Three-case recursion for the glued-segment metric; z[i] glues (y[i], y[i+1]]."""

    def dist(i, u, v):
        if i == 0:
            return abs(u - v)
        lo = y[i - 1]
        uin, vin = u > lo, v > lo
        if not uin and not vin:
            return dist(i - 1, u, v)
        if uin and vin:
            return abs(u - v)
        if uin:
            u, v = v, u
        return dist(i - 1, u, z[i - 1]) + (v - lo)

    top = max(a, b)
    i = next(k for k, yk in enumerate(y) if top <= yk)
    return dist(i, a, b)


def all_trees_with_child_counts(d):
    """Every rooted tree on range(len(d)) in which vertex i has d[i] children.

    Returns a set of (root, parent tuple) keys; brute force over parent maps.
    """
    s = len(d)
    out = set()
    internal = [i for i in range(s) if d[i] > 0]
    for root in range(s):
        others = [v for v in range(s) if v != root]
        for choice in itertools.product(internal, repeat=len(others)):
            parent = [-1] * s
            for v, p in zip(others, choice):
                parent[v] = p
            counts = [0] * s
            for v in others:
                counts[parent[v]] += 1
            if counts != list(d):
                continue
            ok = True
            for v in others:
                seen = set()
                u = v
                while u != root:
                    if u in seen:
                        ok = False
                        break
                    seen.add(u)
                    u = parent[u]
                if not ok:
                    break
            if ok:
                out.add((root, tuple(parent)))
    return out


def binary_first_repeat_survival(n, m):
    """P(Y_1 > m) for the binary sequence (2 x n, 0 x (n + 1)).

    Y_1 > m means the first m tuple entries are distinct; given j distinct
    entries so far, j copies of seen labels remain among s - 1 - j slots.
    """
    s = 2 * n + 1
    p = 1.0
    for j in range(m):
        remaining = s - 1 - j
        if remaining <= 0:
            return p
        p *= max(remaining - j, 0) / remaining
    return p


def tuple_count(d):
    out = math.factorial(len(d) - 1)
    for x in d:
        out //= math.factorial(x)
    return out


def four_point_gap(dab, dac, dae, dbc, dbe, dce):
    sums = sorted((dab + dce, dac + dbe, dae + dbc))
    return sums[2] - sums[1]


def bfs_distances(edges, n, source):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = [-1] * n
    dist[source] = 0
    queue = [source]
    for u in queue:
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def paper_prokhorov_bruteforce(xa, wa, xb, wb):
    """Smallest candidate gap eps with mu(A) <= nu(A^eps) and the reverse, over every subset of atoms."""
    gaps = sorted({0.0} | {abs(x - y) for x in xa for y in xb})

    def one_side(x1, w1, x2, w2, eps):
        for r in range(1, len(x1) + 1):
            for sub in itertools.combinations(range(len(x1)), r):
                m = sum(w1[i] for i in sub)
                near = sum(w2[j] for j in range(len(x2)) if any(abs(x2[j] - x1[i]) <= eps for i in sub))
                if m > near + 1e-12:
                    return False
        return True

    for eps in gaps:
        if one_side(xa, wa, xb, wb, eps) and one_side(xb, wb, xa, wa, eps):
            return eps
    return math.inf


def levy_grid(a, b, step=1e-4, top=2.0):
    """Smallest grid eps passing the Levy inequalities, checked on an x grid of the same step.

    The inequalities are monotone in eps, so the grid of eps values is bisected.
    """
    import numpy as np

    a, b = np.sort(a), np.sort(b)
    lo = min(a[0], b[0]) - 1.0
    hi = max(a[-1], b[-1]) + 1.0
    xs = lo + step * np.arange(int((hi - lo) / step) + 1)

    def cdf(s, x):
        return np.searchsorted(s, x, side="right") / len(s)

    gb = cdf(b, xs)

    def ok(eps):
        return bool(np.all(cdf(a, xs - eps) - eps <= gb + 1e-12) and np.all(gb <= cdf(a, xs + eps) + eps + 1e-12))

    k_lo, k_hi = -1, int(round(top / step))
    while k_hi - k_lo > 1:
        mid = (k_lo + k_hi) // 2
        if ok(mid * step):
            k_hi = mid
        else:
            k_lo = mid
    return k_hi * step
