"""Pure-Python kernels. Reference semantics for the compiled twin in ``_kernels.pyx``."""
from __future__ import annotations

import numpy as np


def partial_shuffle(labels, start, offsets):
    """In-place Fisher-Yates steps: for j = start.., swap labels[j] with labels[j + offsets[j - start]]."""
    for k in range(len(offsets)):
        j = start + k
        r = j + int(offsets[k])
        labels[j], labels[r] = labels[r], labels[j]


def dtree_walk(a, n, attach, nv, max_cuts, finalize):
    """Stick-breaking walk over the first ``n`` entries of ``a``.

    A new vertex is hung below its predecessor in the walk; a repeated
    vertex is a cut, at which the next vertex of ``attach`` not yet in the
    tree is hung below the predecessor. With ``finalize`` one more vertex of
    ``attach`` is hung below the last walk entry. Positions are 1-based.

    Returns (parent, depth, first_hit, cut_pos, glue_pos, cut_leaf, steps, final_leaf).
    """
    a = [int(x) for x in a[:n]]
    att = [int(x) for x in attach]
    parent = [-1] * nv
    depth = [-1] * nv
    first_hit = [-1] * nv
    cut_pos, glue_pos, cut_leaf = [], [], []
    ptr = 0
    steps = n
    final_leaf = -1
    if n > 0:
        root = a[0]
        depth[root] = 0
        first_hit[root] = 1
        stopped = False
        for i in range(1, n):
            v = a[i]
            prev = a[i - 1]
            if depth[v] < 0:
                parent[v] = prev
                depth[v] = depth[prev] + 1
                first_hit[v] = i + 1
                continue
            if first_hit[v] < 0:
                first_hit[v] = i + 1
            while depth[att[ptr]] >= 0:
                ptr += 1
            leaf = att[ptr]
            parent[leaf] = prev
            depth[leaf] = depth[prev] + 1
            cut_pos.append(i + 1)
            glue_pos.append(first_hit[v])
            cut_leaf.append(leaf)
            if 0 <= max_cuts == len(cut_pos):
                steps = i + 1
                stopped = True
                break
        if finalize and not stopped:
            prev = a[n - 1]
            while depth[att[ptr]] >= 0:
                ptr += 1
            leaf = att[ptr]
            parent[leaf] = prev
            depth[leaf] = depth[prev] + 1
            final_leaf = leaf
    i64 = np.int64
    return (
        np.asarray(parent, dtype=i64),
        np.asarray(depth, dtype=i64),
        np.asarray(first_hit, dtype=i64),
        np.asarray(cut_pos, dtype=i64),
        np.asarray(glue_pos, dtype=i64),
        np.asarray(cut_leaf, dtype=i64),
        steps,
        final_leaf,
    )


def tree_distance_matrix(parent, depth, points):
    """Graph distances between ``points`` by climbing parent pointers to the common ancestor."""
    k = len(points)
    out = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        for j in range(i + 1, k):
            u, v = int(points[i]), int(points[j])
            du, dv = int(depth[u]), int(depth[v])
            dist = 0
            while du > dv:
                u = int(parent[u])
                du -= 1
                dist += 1
            while dv > du:
                v = int(parent[v])
                dv -= 1
                dist += 1
            while u != v:
                u = int(parent[u])
                v = int(parent[v])
                dist += 2
            out[i, j] = out[j, i] = dist
    return out
