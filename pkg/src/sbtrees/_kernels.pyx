# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same signatures and results as ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def partial_shuffle(i64[::1] labels, Py_ssize_t start, const i64[::1] offsets):
    cdef Py_ssize_t k, j, r
    cdef i64 tmp
    for k in range(offsets.shape[0]):
        j = start + k
        r = j + offsets[k]
        tmp = labels[j]
        labels[j] = labels[r]
        labels[r] = tmp


def dtree_walk(const i64[::1] a, Py_ssize_t n, const i64[::1] attach, Py_ssize_t nv,
               Py_ssize_t max_cuts, bint finalize):
    cdef cnp.ndarray[i64, ndim=1] parent_arr = np.full(nv, -1, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] depth_arr = np.full(nv, -1, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] hit_arr = np.full(nv, -1, dtype=np.int64)
    cdef Py_ssize_t cap = n if n > 0 else 1
    cdef cnp.ndarray[i64, ndim=1] cut_arr = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] glue_arr = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] leaf_arr = np.empty(cap, dtype=np.int64)
    cdef i64[::1] parent = parent_arr
    cdef i64[::1] depth = depth_arr
    cdef i64[::1] first_hit = hit_arr
    cdef i64[::1] cut_pos = cut_arr
    cdef i64[::1] glue_pos = glue_arr
    cdef i64[::1] cut_leaf = leaf_arr
    cdef Py_ssize_t i, ptr = 0, ncut = 0, steps = n
    cdef i64 v, prev, leaf, final_leaf = -1
    cdef bint stopped = False
    if n > 0:
        depth[a[0]] = 0
        first_hit[a[0]] = 1
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
            while depth[attach[ptr]] >= 0:
                ptr += 1
            leaf = attach[ptr]
            parent[leaf] = prev
            depth[leaf] = depth[prev] + 1
            cut_pos[ncut] = i + 1
            glue_pos[ncut] = first_hit[v]
            cut_leaf[ncut] = leaf
            ncut += 1
            if max_cuts >= 0 and ncut == max_cuts:
                steps = i + 1
                stopped = True
                break
        if finalize and not stopped:
            prev = a[n - 1]
            while depth[attach[ptr]] >= 0:
                ptr += 1
            leaf = attach[ptr]
            parent[leaf] = prev
            depth[leaf] = depth[prev] + 1
            final_leaf = leaf
    return (parent_arr, depth_arr, hit_arr, cut_arr[:ncut].copy(), glue_arr[:ncut].copy(),
            leaf_arr[:ncut].copy(), steps, final_leaf)


def tree_distance_matrix(const i64[::1] parent, const i64[::1] depth, const i64[::1] points):
    cdef Py_ssize_t k = points.shape[0], i, j
    cdef cnp.ndarray[i64, ndim=2] out_arr = np.zeros((k, k), dtype=np.int64)
    cdef i64[:, ::1] out = out_arr
    cdef i64 u, v, du, dv, dist
    for i in range(k):
        for j in range(i + 1, k):
            u = points[i]
            v = points[j]
            du = depth[u]
            dv = depth[v]
            dist = 0
            while du > dv:
                u = parent[u]
                du -= 1
                dist += 1
            while dv > du:
                v = parent[v]
                dv -= 1
                dist += 1
            while u != v:
                u = parent[u]
                v = parent[v]
                dist += 2
            out[i, j] = dist
            out[j, i] = dist
    return out_arr
