"""Distances between trees, measures and finite metric spaces."""
from __future__ import annotations

import itertools
from collections import deque
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .continuum import SegmentTree, height_segments, segment_distance  # noqa: F401  (re-exported)
from .discrete import RootedTree
from .errors import DisconnectedStage, Empty, NotProbability, OutOfRange, TooLarge, UnknownVertex

GH_MAX_POINTS = 7
EXACT_COVER_MAX = 12
PROB_TOL = 1e-9


# ---------------------------------------------------------------------------
# distance matrices


def check_distance_matrix(m, *, triangle: bool = True, atol: float = 1e-9) -> np.ndarray:
    """Validate symmetry, zero diagonal, non-negativity and (for n <= 50) the triangle inequality."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.allclose(a, a.T, atol=atol, rtol=0) or np.any(np.abs(np.diag(a)) > atol) or np.any(a < -atol):
        raise ValueError("not a symmetric non-negative matrix with zero diagonal")
    if triangle and a.shape[0] <= 50:
        # a[i, k] <= a[i, j] + a[j, k] for all i, j, k
        if np.any(a[:, None, :] > a[:, :, None] + a[None, :, :] + atol):
            raise ValueError("triangle inequality fails")
    return a


def distance_matrix_tree(t: RootedTree, points: Sequence[int], *, backend=None) -> np.ndarray:
    pts = np.asarray(points, dtype=np.int64).ravel()
    if np.any(pts < 0) or np.any(pts >= t.n_slots) or np.any(t.depth[np.clip(pts, 0, t.n_slots - 1)] < 0):
        raise UnknownVertex("points must be vertices of the tree")
    return kernels.tree_distance_matrix(t.parent, t.depth, pts, backend=backend)


def distance_matrix_segments(t: SegmentTree, points: Sequence[float]) -> np.ndarray:
    pts = [float(p) for p in points]
    k = len(pts)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = segment_distance(t, pts[i], pts[j])
    return out


def height(t: RootedTree) -> int:
    return t.height()


def hausdorff_stage(t: RootedTree, stage) -> int:
    """max over vertices of the graph distance to a connected stage containing the root."""
    st = {int(v) for v in stage}
    if not st:
        raise DisconnectedStage("stage is empty")
    verts = set(t.vertices.tolist())
    if not st <= verts:
        raise UnknownVertex("stage contains vertices outside the tree")
    if t.root not in st or any(int(t.parent[v]) not in st for v in st if v != t.root):
        raise DisconnectedStage("stage must be a connected set containing the root")
    kids: dict[int, list[int]] = {}
    for p, c in t.edges():
        kids.setdefault(p, []).append(c)
    # the stage is closed under parents, so distances only grow going down
    dist = {v: 0 for v in st}
    queue = deque(st)
    best = 0
    while queue:
        v = queue.popleft()
        for c in kids.get(v, ()):
            if c not in dist:
                dist[c] = dist[v] + 1
                best = max(best, dist[c])
                queue.append(c)
    return best


# ---------------------------------------------------------------------------
# measures on the line


def _as_prob(points, weights=None):
    x = np.asarray(points, dtype=float).ravel()
    w = np.full(len(x), 1.0 / max(len(x), 1)) if weights is None else np.asarray(weights, dtype=float).ravel()
    if len(x) == 0 or len(x) != len(w):
        raise NotProbability("need matching, non-empty points and weights")
    if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
        raise NotProbability("weights must be non-negative and sum to 1")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    ux, inv = np.unique(x, return_inverse=True)
    return ux, np.bincount(inv, weights=w)


def _runs_ok(xa, wa, xb, wb, eps, slack=0.0) -> bool:
    """mu(A) <= nu(A^eps) + slack for every run A of consecutive atoms of mu (closed neighbourhoods)."""
    cb = np.concatenate(([0.0], np.cumsum(wb)))
    ca = np.concatenate(([0.0], np.cumsum(wa)))
    lo = np.searchsorted(xb, xa - eps, side="left")
    hi = np.searchsorted(xb, xa + eps, side="right")
    n = len(xa)
    for i in range(n):
        # run i..j: mass ca[j+1]-ca[i], neighbourhood mass cb[hi[j]] - cb[lo[i]]
        lhs = ca[i + 1:] - ca[i]
        rhs = cb[hi[i:]] - cb[lo[i]]
        if np.any(lhs > rhs + slack + 1e-12):
            return False
    return True


def prokhorov_paper(mu_points, mu_weights, nu_points, nu_weights) -> float:
    """inf eps with mu(A) <= nu(A^eps) and nu(A) <= mu(A^eps) for every Borel A.

    Without the additive eps this is the infinity-Wasserstein distance; on
    the line it is finite for any two compactly supported laws. The infimum
    is one of the atom gaps |x - y|; binary search over them, checking runs
    of consecutive atoms (unions of separated runs add up, so runs suffice).
    """
    xa, wa = _as_prob(mu_points, mu_weights)
    xb, wb = _as_prob(nu_points, nu_weights)
    cands = np.unique(np.abs(xa[:, None] - xb[None, :]).ravel())
    cands = np.concatenate(([0.0], cands))

    def ok(e):
        return _runs_ok(xa, wa, xb, wb, e) and _runs_ok(xb, wb, xa, wa, e)

    lo, hi = 0, len(cands) - 1
    if ok(cands[lo]):
        return 0.0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(cands[mid]):
            hi = mid
        else:
            lo = mid
    return float(cands[hi])


def winf_quantile(mu_points, mu_weights, nu_points, nu_weights) -> float:
    """sup_u |F^{-1}(u) - G^{-1}(u)| for two finite laws on the line."""
    xa, wa = _as_prob(mu_points, mu_weights)
    xb, wb = _as_prob(nu_points, nu_weights)
    ca, cb = np.cumsum(wa), np.cumsum(wb)
    ca[-1] = cb[-1] = 1.0
    us = np.unique(np.concatenate(([0.0], ca[:-1], cb[:-1])))
    # on (u, next u] both quantile functions are constant
    qa = xa[np.minimum(np.searchsorted(ca, us, side="right"), len(xa) - 1)]
    qb = xb[np.minimum(np.searchsorted(cb, us, side="right"), len(xb) - 1)]
    return float(np.max(np.abs(qa - qb)))


def prokhorov_classical(mu_points, mu_weights, nu_points, nu_weights, *, max_support: int = 14) -> float:
    """Classical Prokhorov metric inf{eps: mu(A) <= nu(A^eps) + eps for all A}, exact by subset enumeration."""
    xa, wa = _as_prob(mu_points, mu_weights)
    xb, wb = _as_prob(nu_points, nu_weights)
    if len(xa) > max_support:
        raise TooLarge(f"support size {len(xa)} exceeds {max_support}")
    gaps = np.abs(xa[:, None] - xb[None, :])
    cands = np.unique(np.concatenate(([0.0], gaps.ravel())))

    def excess(e):
        near = gaps <= e
        best = 0.0
        for r in range(1, len(xa) + 1):
            for sub in itertools.combinations(range(len(xa)), r):
                idx = list(sub)
                cover = near[idx].any(axis=0)
                best = max(best, float(wa[idx].sum() - wb[cover].sum()))
        return best

    # excess is constant on [c_k, c_{k+1}); the answer is the first max(c_k, excess(c_k)) < c_{k+1}
    for k, c in enumerate(cands):
        e = max(c, excess(c))
        nxt = cands[k + 1] if k + 1 < len(cands) else np.inf
        if e < nxt:
            return float(min(e, 1.0))
    return 1.0


def _samples(a) -> np.ndarray:
    x = np.sort(np.asarray(a, dtype=float).ravel())
    if len(x) == 0:
        raise Empty("empty sample")
    return x


def ks_distance(a, b) -> float:
    return float(stats.ks_2samp(_samples(a), _samples(b)).statistic)


def _levy_ok(xa, xb, eps) -> bool:
    na, nb = len(xa), len(xb)

    def F(x, side="right"):
        return np.searchsorted(xa, x, side=side) / na

    def G(x, side="right"):
        return np.searchsorted(xb, x, side=side) / nb

    tol = 1e-12
    # G(x) <= F(x + eps) + eps: check at jumps of G and just left of jumps of F(. + eps)
    if np.any(G(xb) > F(xb + eps) + eps + tol):
        return False
    if np.any(G(xa - eps, "left") > F(xa, "left") + eps + tol):
        return False
    # F(x - eps) - eps <= G(x): at jumps of F(. - eps) and just left of jumps of G
    if np.any(F(xa) - eps > G(xa + eps) + tol):
        return False
    if np.any(F(xb - eps, "left") - eps > G(xb, "left") + tol):
        return False
    return True


def levy_distance(a, b, *, tol: float = 1e-12) -> float:
    """Levy distance between empirical laws, by bisection on an exact step-function check."""
    xa, xb = _samples(a), _samples(b)
    if _levy_ok(xa, xb, 0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _levy_ok(xa, xb, mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# finite metric spaces


class Covering(NamedTuple):
    count: int
    exact: bool


def _greedy_cover(a: np.ndarray, eps: float) -> int:
    n = len(a)
    centers = [0]
    dist = a[0].copy()
    while dist.max() > eps:
        far = int(np.argmax(dist))
        centers.append(far)
        dist = np.minimum(dist, a[far])
    return len(centers) if n else 0


def _exact_cover(a: np.ndarray, eps: float) -> int:
    n = len(a)
    balls = [(a[i] <= eps) for i in range(n)]
    for k in range(1, n + 1):
        for sub in itertools.combinations(range(n), k):
            if np.logical_or.reduce([balls[i] for i in sub]).all():
                return k
    return n


def covering_number(m, eps: float) -> Covering:
    """Fewest closed eps-balls centred at points of the space that cover it.

    Exact for n <= 12; farthest-point greedy otherwise.
    """
    if eps <= 0:
        raise OutOfRange("eps must be positive")
    a = np.asarray(m, dtype=float)
    if len(a) == 0:
        return Covering(0, True)
    if len(a) <= EXACT_COVER_MAX:
        return Covering(_exact_cover(a, eps), True)
    return Covering(_greedy_cover(a, eps), False)


def greedy_covering_number(m, eps: float) -> int:
    return _greedy_cover(np.asarray(m, dtype=float), eps)


def _correspondence_exists(a: np.ndarray, b: np.ndarray, delta: float) -> bool:
    nx, ny = len(a), len(b)
    tol = 1e-12

    def compatible(pairs, x, y):
        return all(abs(a[x, u] - b[y, v]) <= delta + tol for u, v in pairs)

    order_y = range(ny)

    def assign_x(i, pairs, covered):
        if i == nx:
            missing = [y for y in order_y if y not in covered]
            return cover_y(0, missing, pairs)
        for y in order_y:
            if compatible(pairs, i, y):
                pairs.append((i, y))
                added = y not in covered
                covered.add(y)
                if assign_x(i + 1, pairs, covered):
                    return True
                pairs.pop()
                if added:
                    covered.discard(y)
        return False

    def cover_y(k, missing, pairs):
        if k == len(missing):
            return True
        y = missing[k]
        for x in range(nx):
            if compatible(pairs, x, y):
                pairs.append((x, y))
                if cover_y(k + 1, missing, pairs):
                    return True
                pairs.pop()
        return False

    return assign_x(0, [], set())


def gh_bruteforce(a, b, *, max_points: int = GH_MAX_POINTS) -> float:
    """Gromov-Hausdorff distance as half the least distortion over correspondences."""
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    if max(len(A), len(B)) > max_points:
        raise TooLarge(f"spaces larger than {max_points} points")
    if len(A) == 0 or len(B) == 0:
        raise Empty("metric spaces must be non-empty")
    cands = np.unique(np.concatenate(([0.0], np.abs(A.ravel()[:, None] - B.ravel()[None, :]).ravel())))
    lo, hi = -1, len(cands) - 1  # cands[hi] (the full product correspondence) always works
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _correspondence_exists(A, B, cands[mid]):
            hi = mid
        else:
            lo = mid
    return 0.5 * float(cands[hi])


def is_isometric(a, b) -> bool:
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    if A.shape != B.shape:
        return False
    n = len(A)
    for perm in itertools.permutations(range(n)):
        p = list(perm)
        if np.array_equal(A, B[np.ix_(p, p)]):
            return True
    return False
