"""Discrete stick-breaking samplers: D-trees, spanning and pure-rooted variants, P-trees.

Vertices are 0-based integers: vertex ``i`` is V_{i+1}. Discrete trace
positions are 1-based walk indices stored as int64, with -1 standing for
+infinity (a vertex never hit by the walk).
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import (
    IndexOutOfRange,
    InvalidHistory,
    InvalidTuple,
    NonPositiveScale,
    NotBijection,
    NotPermutation,
    TooLarge,
)
from .measure import AtomicMeasure
from .params import DegreeSequence, PParams

ENUMERATION_LIMIT = 10**6


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True, eq=False)
class RootedTree:
    """Rooted labelled tree as a parent array (-1 for the root and for absent vertices)."""

    parent: np.ndarray
    root: int
    depth: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        par = np.ascontiguousarray(self.parent, dtype=np.int64)
        object.__setattr__(self, "parent", par)
        if self.depth is None:
            object.__setattr__(self, "depth", _depths(par, self.root))
        par.setflags(write=False)
        self.depth.setflags(write=False)

    @property
    def n_slots(self) -> int:
        return len(self.parent)

    @property
    def vertices(self) -> np.ndarray:
        return np.flatnonzero(self.depth >= 0)

    @property
    def n_vertices(self) -> int:
        return int((self.depth >= 0).sum())

    def child_count(self) -> np.ndarray:
        par = self.parent[self.parent >= 0]
        return np.bincount(par, minlength=self.n_slots)

    def edges(self) -> list[tuple[int, int]]:
        """(parent, child) pairs ordered by child label."""
        kids = np.flatnonzero(self.parent >= 0)
        return [(int(self.parent[c]), int(c)) for c in kids]

    def height(self) -> int:
        return int(self.depth.max()) if self.n_vertices else 0

    def _key(self):
        return (self.root, self.parent.tobytes())

    def __eq__(self, other) -> bool:
        if not isinstance(other, RootedTree):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def to_json(self) -> dict:
        return {"root": self.root, "parent": {str(c): p for p, c in self.edges()}}

    def to_csv(self) -> str:
        return "parent,child\n" + "".join(f"{p},{c}\n" for p, c in self.edges())


def _depths(parent: np.ndarray, root: int) -> np.ndarray:
    n = len(parent)
    depth = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return depth
    depth[root] = 0
    for v in range(n):
        if depth[v] >= 0 or parent[v] < 0:
            continue
        path = []
        u = v
        while depth[u] < 0:
            path.append(u)
            u = parent[u]
            if u < 0:
                raise ValueError("parent array does not reach the root")
            if len(path) > n:
                raise ValueError("parent array contains a cycle")
        base = depth[u]
        for k, w in enumerate(reversed(path)):
            depth[w] = base + k + 1
    return depth


@dataclass(frozen=True, eq=False)
class StickTrace:
    """Cuts ``Y``, glue points ``Z``, first hits ``X`` and the measure ``mu``.

    With ``integer`` set, positions are int64 walk indices (-1 for +inf);
    otherwise they are floats (``inf``). ``glue_atom[j]`` is the vertex/atom
    whose first hit equals ``Z[j]`` (-1 for a glue point drawn from the
    Lebesgue part). ``horizon`` is the walk length the trace is exact up to;
    only cuts at or before it are recorded.
    """

    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    glue_atom: np.ndarray
    mu: AtomicMeasure
    integer: bool = True
    horizon: float = math.inf
    history: dict | None = None

    @property
    def n_cuts(self) -> int:
        return len(self.Y)

    def _as_float(self, arr: np.ndarray) -> np.ndarray:
        if not self.integer:
            return np.asarray(arr, dtype=float)
        out = np.asarray(arr, dtype=float)
        return np.where(np.asarray(arr) < 0, np.inf, out)

    @property
    def Xf(self) -> np.ndarray:
        return self._as_float(self.X)

    @property
    def Yf(self) -> np.ndarray:
        return self._as_float(self.Y)

    @property
    def Zf(self) -> np.ndarray:
        return self._as_float(self.Z)

    def to_json(self) -> dict:
        def enc(arr):
            if self.integer:
                return [None if v < 0 else int(v) for v in arr]
            return [None if not math.isfinite(v) else float(v) for v in arr]

        return {
            "X": enc(self.X),
            "Y": enc(self.Y),
            "Z": enc(self.Z),
            "glueAtom": [int(v) for v in self.glue_atom],
            "mu": self.mu.to_json(),
            "horizon": None if math.isinf(self.horizon) else self.horizon,
        }


# ---------------------------------------------------------------------------
# D-tuples


def count_dtuples(d: DegreeSequence) -> int:
    """(s - 1)! / prod d_i!, the number of distinct D-tuples."""
    out = math.factorial(d.s - 1)
    for x in d.degrees:
        out //= math.factorial(x)
    return out


def _labels(d: DegreeSequence) -> np.ndarray:
    return np.repeat(np.arange(d.s, dtype=np.int64), d.array)


def validate_dtuple(d: DegreeSequence, a: Sequence[int]) -> np.ndarray:
    arr = np.asarray(a, dtype=np.int64).ravel()
    if len(arr) != d.s - 1:
        raise InvalidTuple(f"tuple has length {len(arr)}, expected s - 1 = {d.s - 1}")
    if len(arr) and (arr.min() < 0 or arr.max() >= d.s):
        raise InvalidTuple("tuple entries must be vertex indices in [0, s)")
    if not np.array_equal(np.bincount(arr, minlength=d.s), d.array):
        raise InvalidTuple("vertex multiplicities do not match the degree sequence")
    return arr


class _TupleStream:
    """Lazily shuffled D-tuple: the first ``m`` entries are a uniform prefix."""

    def __init__(self, d: DegreeSequence, rng: np.random.Generator, backend=None):
        self.labels = _labels(d)
        self.highs = len(self.labels) - np.arange(len(self.labels), dtype=np.int64)
        self.rng = rng
        self.filled = 0
        self.backend = backend

    @property
    def length(self) -> int:
        return len(self.labels)

    def ensure(self, m: int) -> None:
        m = min(m, self.length)
        if m <= self.filled:
            return
        offsets = self.rng.integers(0, self.highs[self.filled:m])
        kernels.partial_shuffle(self.labels, self.filled, offsets, backend=self.backend)
        self.filled = m


def sample_dtuple(d: DegreeSequence, rng: np.random.Generator) -> np.ndarray:
    """Uniform D-tuple (Fisher-Yates on the expanded label list)."""
    ts = _TupleStream(d, rng)
    ts.ensure(ts.length)
    return ts.labels


def conditional_step_law(d: DegreeSequence, history: Sequence[int], i: int) -> dict[int, Fraction]:
    """Exact law of A_i given A_1..A_{i-1}: P(A_i = V_a) = (d_a - #seen_a) / (s - i)."""
    s = d.s
    if not 1 <= i <= s - 1:
        raise InvalidHistory(f"step i must lie in [1, s - 1] = [1, {s - 1}]")
    if len(history) != i - 1:
        raise InvalidHistory(f"history has length {len(history)}, expected {i - 1}")
    seen = Counter(int(v) for v in history)
    if any(v < 0 or v >= s for v in seen):
        raise InvalidHistory("history contains an unknown vertex")
    if any(c > d.degrees[v] for v, c in seen.items()):
        raise InvalidHistory("history uses a vertex more often than its degree")
    return {a: Fraction(d.degrees[a] - seen.get(a, 0), s - i) for a in range(s) if d.degrees[a] > seen.get(a, 0)}


# ---------------------------------------------------------------------------
# Algorithm-1 style constructions


def _trace_from_walk(degrees: Sequence[int], a: np.ndarray, walk, *, horizon: float, shift: int = 0,
                     mu_degrees: Sequence[int] | None = None) -> StickTrace:
    _, _, first_hit, cut_pos, glue_pos, _, _, _ = walk
    X = first_hit.copy()
    hit = X > 0
    X[hit] -= shift
    Y = cut_pos - shift
    Z = glue_pos - shift
    glue_atom = a[glue_pos - 1] if len(glue_pos) else np.empty(0, dtype=np.int64)
    degs = np.asarray(degrees if mu_degrees is None else mu_degrees, dtype=np.int64)
    nd = len(degs)
    Xd = X[:nd]
    keep = (Xd >= 0) & (degs >= 2)
    idx = np.flatnonzero(keep)
    mu = AtomicMeasure.from_atoms(Xd[idx].astype(float), (degs[idx] - 1).astype(float), idx)
    return StickTrace(X=X, Y=Y, Z=Z, glue_atom=np.asarray(glue_atom, dtype=np.int64), mu=mu, integer=True,
                      horizon=horizon)


def _single_vertex(nv: int = 1) -> RootedTree:
    par = np.full(nv, -1, dtype=np.int64)
    return RootedTree(par, 0)


def build_dtree(d: DegreeSequence, a: Sequence[int], *, validate: bool = True, backend=None) -> tuple[RootedTree, StickTrace]:
    """Deterministic tree and trace from a full D-tuple."""
    arr = validate_dtuple(d, a) if validate else np.asarray(a, dtype=np.int64)
    if d.s == 1:
        tree = _single_vertex()
        empty = np.empty(0, dtype=np.int64)
        return tree, StickTrace(np.full(1, -1, dtype=np.int64), empty, empty, empty, AtomicMeasure.empty())
    leaves = d.leaf_array
    walk = kernels.dtree_walk(arr, len(arr), leaves, d.s, -1, True, backend=backend)
    tree = RootedTree(walk[0], int(arr[0]), walk[1])
    return tree, _trace_from_walk(d.array, arr, walk, horizon=math.inf)


def sample_dtree(
    d: DegreeSequence,
    rng: np.random.Generator,
    *,
    min_cuts: int | None = None,
    min_steps: int = 0,
    backend=None,
) -> tuple[RootedTree, StickTrace]:
    """Uniform D-tree with its trace.

    By default the whole D-tuple is shuffled. With ``min_cuts`` (or
    ``min_steps``) only a prefix is shuffled, long enough to contain that
    many cuts and walk steps; the tree is then the stage reached at the end
    of the prefix and the trace is exact up to ``trace.horizon``. Distances
    between vertices already present never change later, so stage trees
    give the same leaf distances as the full tree.
    """
    if (min_cuts is None and min_steps <= 0) or d.s == 1:
        a = sample_dtuple(d, rng)
        return build_dtree(d, a, validate=False, backend=backend)
    want = 0 if min_cuts is None else min(min_cuts, d.big_n)
    ts = _TupleStream(d, rng, backend)
    leaves = d.leaf_array
    m = max(int(min_steps), 16 + int(4 * (want + 1) * d.s / max(d.sigma, 1.0)))
    while True:
        ts.ensure(m)
        done = ts.filled == ts.length
        walk = kernels.dtree_walk(ts.labels, ts.filled, leaves, d.s, -1, done, backend=backend)
        if done or (len(walk[3]) >= want and ts.filled >= min_steps):
            break
        m = 2 * m
    a = ts.labels[: ts.filled].copy()
    tree = RootedTree(walk[0], int(a[0]), walk[1])
    return tree, _trace_from_walk(d.array, a, walk, horizon=math.inf if done else float(ts.filled))


def walk_stage(d: DegreeSequence, a: Sequence[int], k: int, attach: Sequence[int] | None = None,
               *, backend=None) -> tuple[RootedTree, int]:
    """Stage tree T_{Y_k} from a D-tuple prefix (leaf attachment unless ``attach`` is given).

    Returns the tree and Y_k (or (tree, -1) when the prefix holds fewer than k cuts).
    """
    arr = np.asarray(a, dtype=np.int64)
    att = d.leaf_array if attach is None else np.asarray(attach, dtype=np.int64)
    walk = kernels.dtree_walk(arr, len(arr), att, d.s, k, False, backend=backend)
    cuts = walk[3]
    yk = int(cuts[k - 1]) if len(cuts) >= k else -1
    return RootedTree(walk[0], int(arr[0]), walk[1]), yk


def build_dtree_spanning(d: DegreeSequence, a: Sequence[int], w: Sequence[int], *, backend=None) -> RootedTree:
    """Spanning construction: at each cut attach the first vertex of ``w`` not yet in the tree."""
    arr = validate_dtuple(d, a)
    warr = np.asarray(w, dtype=np.int64).ravel()
    if len(warr) != d.s or not np.array_equal(np.sort(warr), np.arange(d.s)):
        raise NotPermutation("w must be a permutation of all s vertices")
    if d.s == 1:
        return _single_vertex()
    walk = kernels.dtree_walk(arr, len(arr), warr, d.s, -1, True, backend=backend)
    return RootedTree(walk[0], int(arr[0]), walk[1])


def pure_degree_sequence(d: DegreeSequence, k: int) -> tuple[int, ...]:
    """Child counts of the pure tree rooted at vertex ``k``: d with d_k + 1 and a trailing leaf."""
    out = list(d.degrees) + [0]
    out[k] += 1
    return tuple(out)


def build_pure_rooted_from_tuple(d: DegreeSequence, k: int, a: Sequence[int], *, backend=None) -> tuple[RootedTree, StickTrace]:
    """Pure D-tree rooted at ``k`` from a D-tuple ``a``: walk ``(k, a_1, ..., a_{s-1})`` on s + 1 vertices.

    Trace positions start at 0 (the prepended root). ``mu`` carries the
    original masses d_i - 1.
    """
    if not 0 <= k < d.s:
        raise IndexOutOfRange(f"root index {k} outside [0, {d.s})")
    arr = validate_dtuple(d, a)
    dp = pure_degree_sequence(d, k)
    walk_tuple = np.concatenate(([k], arr)).astype(np.int64)
    leaves = np.asarray([i for i, x in enumerate(dp) if x == 0], dtype=np.int64)
    walk = kernels.dtree_walk(walk_tuple, len(walk_tuple), leaves, d.s + 1, -1, True, backend=backend)
    tree = RootedTree(walk[0], k, walk[1])
    trace = _trace_from_walk(dp, walk_tuple, walk, horizon=math.inf, shift=1, mu_degrees=d.array)
    return tree, trace


def build_pure_rooted(d: DegreeSequence, k: int, rng: np.random.Generator, *, backend=None) -> tuple[RootedTree, StickTrace]:
    if not 0 <= k < d.s:
        raise IndexOutOfRange(f"root index {k} outside [0, {d.s})")
    return build_pure_rooted_from_tuple(d, k, sample_dtuple(d, rng), backend=backend)


# ---------------------------------------------------------------------------
# P-trees


def sample_ptree(
    p: PParams, steps: int, rng: np.random.Generator, *, max_cuts: int | None = None
) -> tuple[RootedTree, StickTrace]:
    """P-tree after ``steps`` i.i.d. draws (or fewer when ``max_cuts`` cuts occur first).

    Finite atom ``i`` is vertex ``i``; a draw of the infinite atom at step
    ``j`` (1-based) becomes the fresh vertex ``n_atoms + j - 1``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    n_atoms = len(p.probs)
    weights = np.asarray(p.probs + (p.p_inf,), dtype=float)
    weights = weights / weights.sum()
    draws = rng.choice(n_atoms + 1, size=steps, p=weights).astype(np.int64)
    fresh = draws == n_atoms
    b = np.where(fresh, n_atoms + np.arange(steps, dtype=np.int64), draws)
    _, first_idx, inverse = np.unique(b, return_index=True, return_inverse=True)
    is_first = np.zeros(steps, dtype=bool)
    is_first[first_idx] = True
    repeats = np.flatnonzero(~is_first)
    if max_cuts is not None and len(repeats) >= max_cuts:
        n_used = int(repeats[max_cuts - 1]) + 1 if max_cuts > 0 else 1
        repeats = repeats[:max_cuts]
    else:
        n_used = steps
    b = b[:n_used]
    nv = n_atoms + steps
    parent = np.full(nv, -1, dtype=np.int64)
    newcomers = np.flatnonzero(is_first[:n_used])
    newcomers = newcomers[newcomers > 0]
    parent[b[newcomers]] = b[newcomers - 1]
    tree = RootedTree(parent, int(b[0]))
    first_pos = np.full(nv, -1, dtype=np.int64)
    first_pos[b[np.flatnonzero(is_first[:n_used])]] = np.flatnonzero(is_first[:n_used]) + 1
    Y = repeats + 1
    Z = first_pos[b[repeats]]
    glue_atom = b[repeats]
    X = first_pos[:n_atoms].copy()
    hit = np.flatnonzero(X > 0)
    mu = AtomicMeasure.from_atoms(X[hit].astype(float), weights[hit], hit)
    trace = StickTrace(X=X, Y=Y, Z=Z, glue_atom=glue_atom, mu=mu, integer=True, horizon=float(n_used))
    return tree, trace


# ---------------------------------------------------------------------------
# rescaling, enumeration, relabelling


def rescale_trace(t: StickTrace, lambda1: float, lambda2: float) -> StickTrace:
    """(lambda1, lambda2) action: positions times lambda1, measure pushed forward with masses times lambda2."""
    if not (lambda1 > 0 and lambda2 > 0):
        raise NonPositiveScale("scale factors must be positive")
    return StickTrace(
        X=t.Xf * lambda1,
        Y=t.Yf * lambda1,
        Z=t.Zf * lambda1,
        glue_atom=t.glue_atom,
        mu=t.mu.rescale(lambda1, lambda2),
        integer=False,
        horizon=t.horizon * lambda1,
        history=t.history,
    )


def multiset_permutations(items: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Distinct permutations of a multiset in lexicographic order (next-permutation algorithm)."""
    cur = sorted(items)
    n = len(cur)
    yield tuple(cur)
    while True:
        i = n - 2
        while i >= 0 and cur[i] >= cur[i + 1]:
            i -= 1
        if i < 0:
            return
        j = n - 1
        while cur[j] <= cur[i]:
            j -= 1
        cur[i], cur[j] = cur[j], cur[i]
        cur[i + 1:] = reversed(cur[i + 1:])
        yield tuple(cur)


def enumerate_dtrees(d: DegreeSequence, *, limit: int = ENUMERATION_LIMIT) -> frozenset:
    """All trees T^A over every D-tuple A. Raises if two tuples give the same tree."""
    count = count_dtuples(d)
    if count > limit:
        raise TooLarge(f"{count} tuples exceed the enumeration limit {limit}")
    trees = set()
    for a in multiset_permutations(_labels(d).tolist()):
        trees.add(build_dtree(d, a, validate=False)[0])
    if len(trees) != count:
        raise AssertionError(f"A -> T^A is not injective: {count} tuples, {len(trees)} trees")
    return frozenset(trees)


def relabel(t: RootedTree, f: Mapping[int, int] | Sequence[int]) -> RootedTree:
    """Image of ``t`` under a bijection ``f`` of its vertex set."""
    verts = t.vertices.tolist()
    fmap = dict(f) if isinstance(f, Mapping) else {i: int(v) for i, v in enumerate(f)}
    try:
        img = [int(fmap[v]) for v in verts]
    except KeyError as exc:
        raise NotBijection(f"f is undefined at vertex {exc.args[0]}") from None
    if len(set(img)) != len(img) or min(img, default=0) < 0:
        raise NotBijection("f is not injective on the vertex set")
    nv = max(max(img, default=0) + 1, t.n_slots)
    parent = np.full(nv, -1, dtype=np.int64)
    for v in verts:
        p = int(t.parent[v])
        if p >= 0:
            parent[fmap[v]] = fmap[p]
    return RootedTree(parent, int(fmap[t.root]))
