"""Continuum constructions: segment-gluing R-trees, ICRT, continuum D-tree, time change."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .discrete import StickTrace
from .errors import (
    GluePastCut,
    LNonPositive,
    NonIntegerPositions,
    NotIncreasing,
    OutOfRange,
)
from .measure import AtomicMeasure
from .params import DegreeSequence, ThetaParams, _require_sigma

DEFAULT_ATOM_EPS = 1e-8


class DegenerateThetaWarning(RuntimeWarning):
    """theta_0 = 0 with summable theta: the total cut rate is finite."""


# ---------------------------------------------------------------------------
# segment trees


@dataclass(frozen=True, eq=False)
class SegmentTree:
    """R-tree glued from segments: [0, y_1], then (y_k, y_{k+1}] attached at z_k.

    Array index ``k`` is the segment (starts[k], ends[k]]; ``attach[k]`` is
    its glue position (NaN for segment 0) and ``parent_seg[k]`` the segment
    containing it.
    """

    starts: np.ndarray
    ends: np.ndarray
    attach: np.ndarray
    parent_seg: np.ndarray
    base_depth: np.ndarray  # distance from the root to starts[k] along the tree

    @property
    def n_segments(self) -> int:
        return len(self.ends)

    @property
    def span(self) -> float:
        return float(self.ends[-1]) if len(self.ends) else 0.0

    def segment_of(self, x):
        """Index of the segment containing ``x`` (segment 0 is closed at 0)."""
        return np.searchsorted(self.ends, x, side="left")

    def depth(self, x):
        xa = np.asarray(x, dtype=float)
        self._check(xa)
        k = self.segment_of(xa)
        out = self.base_depth[k] + (xa - self.starts[k])
        return float(out) if out.ndim == 0 else out

    def _check(self, xa):
        if np.any(xa < 0) or np.any(xa > self.span):
            raise OutOfRange(f"position outside [0, {self.span}]")

    def to_json(self) -> dict:
        return {
            "segments": [
                {
                    "start": float(self.starts[k]),
                    "end": float(self.ends[k]),
                    "parentSegment": int(self.parent_seg[k]),
                    "attachPos": None if k == 0 else float(self.attach[k]),
                }
                for k in range(self.n_segments)
            ]
        }


def sb_construct(y, z) -> SegmentTree:
    """Glue (y_k, y_{k+1}] at z_k for k = 1..n-1 onto [0, y_1].

    ``z`` may have length n - 1 or n; a trailing entry has no segment to glue
    and is ignored.
    """
    ya = np.asarray(y, dtype=float).ravel()
    za = np.asarray(z, dtype=float).ravel()
    n = len(ya)
    if n == 0:
        raise NotIncreasing("y must be non-empty")
    if len(za) not in (n - 1, n):
        raise ValueError(f"z has length {len(za)}, expected {n - 1} or {n}")
    za = za[: n - 1]
    if ya[0] <= 0 or np.any(np.diff(ya) <= 0) or not np.all(np.isfinite(ya)):
        raise NotIncreasing("y must be positive, finite and strictly increasing")
    if np.any(za < 0) or np.any(za > ya[: n - 1]):
        raise GluePastCut("need 0 <= z_k <= y_k")
    starts = np.concatenate(([0.0], ya[:-1]))
    attach = np.concatenate(([np.nan], za))
    parent_seg = np.concatenate(([-1], np.searchsorted(ya, za, side="left"))).astype(np.int64)
    base = np.zeros(n)
    for k in range(1, n):
        p = parent_seg[k]
        base[k] = base[p] + (attach[k] - starts[p])
    arrs = (starts, ya.copy(), attach, parent_seg, base)
    for a in arrs:
        a.setflags(write=False)
    return SegmentTree(*arrs)


def segment_distance(t: SegmentTree, a: float, b: float) -> float:
    """Exact distance: peel the point in the later segment back to its glue point until both meet."""
    t._check(np.asarray([a, b], dtype=float))
    i, j = int(t.segment_of(a)), int(t.segment_of(b))
    incs = []
    while i != j:
        if i > j:
            incs.append(a - t.starts[i])
            a = t.attach[i]
            i = int(t.parent_seg[i])
        else:
            incs.append(b - t.starts[j])
            b = t.attach[j]
            j = int(t.parent_seg[j])
    out = abs(a - b)
    for inc in reversed(incs):
        out = out + inc
    return float(out)


def distance_to_prefix(t: SegmentTree, x: float, k: int) -> float:
    """Distance from ``x`` to the subtree spanned by segments 0..k-1, i.e. [0, y_k]."""
    t._check(np.asarray(x, dtype=float))
    i = int(t.segment_of(x))
    out = 0.0
    while i >= k:
        out += x - t.starts[i]
        x = t.attach[i]
        i = int(t.parent_seg[i])
    return float(out)


def hausdorff_prefix(t: SegmentTree, k: int, m: int | None = None) -> float:
    """Hausdorff distance between the stages [0, y_k] and [0, y_m] (m defaults to the whole tree)."""
    m = t.n_segments if m is None else m
    if not 1 <= k <= m <= t.n_segments:
        raise OutOfRange("need 1 <= k <= m <= number of segments")
    return max((distance_to_prefix(t, float(t.ends[i]), k) for i in range(k, m)), default=0.0)


def height_segments(t: SegmentTree) -> float:
    return float(np.max(t.base_depth + (t.ends - t.starts)))


# ---------------------------------------------------------------------------
# Poisson cuts by inversion of the cumulative rate


def invert_cumulative(c: float, xs: np.ndarray, ws: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Solve Lambda(y) = T for each increasing target T.

    Lambda(y) = c y^2 / 2 + sum_i w_i (y - x_i)^+ with ``xs`` sorted. Each
    piece between breakpoints is at most quadratic and is inverted with the
    cancellation-free root 2D / (m + sqrt(m^2 + 2 c D)). Targets beyond the
    reach of a finite-mass Lambda return inf.
    """
    out = np.full(len(targets), np.inf)
    y = 0.0
    lam = 0.0
    slope = 0.0  # sum of w_i over breakpoints already passed
    nb = len(xs)
    j = 0
    for n, target in enumerate(targets):
        while True:
            nxt = xs[j] if j < nb else math.inf
            rate = c * y + slope
            # cumulative at the next breakpoint
            if math.isinf(nxt):
                lam_next = math.inf if (c > 0 or slope > 0) else lam
            else:
                h = nxt - y
                lam_next = lam + rate * h + 0.5 * c * h * h
            if target <= lam_next and not (math.isinf(nxt) and rate == 0 and c == 0):
                delta = target - lam
                if delta <= 0:
                    step = 0.0
                else:
                    step = 2.0 * delta / (rate + math.sqrt(rate * rate + 2.0 * c * delta))
                y = y + step
                lam = target
                out[n] = y
                break
            if math.isinf(nxt):
                return out
            lam = lam_next
            y = nxt
            slope += ws[j]
            j += 1
    return out


def _poisson_cuts(rng, c, xs, ws, limit, max_cuts=None, batch=16):
    """Cut positions on [0, limit] for the process with cumulative rate Lambda."""
    order = np.argsort(xs, kind="stable")
    xs, ws = xs[order], ws[order]
    cap = c * limit * limit / 2 + float(np.sum(ws * np.maximum(limit - xs, 0.0)))
    cuts = []
    total = 0.0
    while True:
        steps = rng.standard_exponential(batch)
        targets = total + np.cumsum(steps)
        total = float(targets[-1])
        keep = targets[targets <= cap]
        ys = invert_cumulative(c, xs, ws, keep)
        ys = ys[ys <= limit]
        cuts.extend(ys.tolist())
        if max_cuts is not None and len(cuts) >= max_cuts:
            return np.asarray(cuts[:max_cuts])
        if len(keep) < batch:
            return np.asarray(cuts)
        batch = min(2 * batch, 4096)


# ---------------------------------------------------------------------------
# ICRT


@dataclass(frozen=True, eq=False)
class IcrtSample:
    atom_positions: np.ndarray
    atom_weights: np.ndarray
    trace: StickTrace
    tree: SegmentTree | None
    truncation: float
    atom_cutoff: int
    tail_mass: float

    def to_json(self) -> dict:
        return {
            "atoms": {"X": self.atom_positions.tolist(), "theta": self.atom_weights.tolist()},
            "trace": self.trace.to_json(),
            "segments": self.tree.to_json()["segments"] if self.tree is not None else [],
            "metadata": {"truncation": self.truncation, "tail_mass": self.tail_mass, "atom_cutoff": self.atom_cutoff},
        }


def atom_cutoff(theta: ThetaParams, atom_eps: float) -> tuple[int, float]:
    """Smallest i* with sum_{i > i*} theta_i^2 < atom_eps, and that tail sum."""
    if atom_eps <= 0:
        raise OutOfRange("atom_eps must be positive")
    sq = np.asarray(theta.theta, dtype=float) ** 2
    tails = np.concatenate((np.cumsum(sq[::-1])[::-1], [0.0]))  # tails[i] = sum_{j >= i} (0-based)
    istar = int(np.argmax(tails < atom_eps))
    return istar, float(tails[istar])


def _glue_points(rng, ys, c, xs, ws):
    """Z_k ~ mu restricted to [0, Y_k], normalised; atom index or -1 for the Lebesgue part."""
    zs = np.empty(len(ys))
    glue = np.empty(len(ys), dtype=np.int64)
    for k, y in enumerate(ys):
        live = np.flatnonzero(xs <= y)
        wl = ws[live]
        total = c * y + float(wl.sum())
        u = rng.random() * total
        if u < c * y:
            zs[k] = rng.random() * y
            glue[k] = -1
        else:
            cum = np.cumsum(wl)
            idx = min(int(np.searchsorted(cum, u - c * y, side="right")), len(live) - 1)
            zs[k] = xs[live[idx]]
            glue[k] = live[idx]
    return zs, glue


def sample_icrt(
    theta: ThetaParams,
    truncation: float,
    rng: np.random.Generator,
    *,
    atom_eps: float = DEFAULT_ATOM_EPS,
    max_cuts: int | None = None,
) -> IcrtSample:
    """Truncated ICRT: atoms X_i ~ Exp(theta_i), cuts from Lambda, glue points from mu.

    Stops at the first cut beyond ``truncation`` (or after ``max_cuts`` cuts).
    A zero truncation level gives an empty sample.
    """
    L = float(truncation)
    if L < 0 or math.isnan(L):
        raise LNonPositive("truncation level must be non-negative")
    istar, tail = atom_cutoff(theta, atom_eps)
    w = np.asarray(theta.theta[:istar], dtype=float)
    w = w[w > 0]
    c = theta.theta0sq
    if c == 0:
        warnings.warn("theta_0 = 0: finite total cut rate, the truncation may capture few cuts",
                      DegenerateThetaWarning, stacklevel=2)
    xs = rng.exponential(1.0 / w) if len(w) else np.empty(0)
    mu = AtomicMeasure.from_atoms(xs, w, np.arange(len(w)), lebesgue=c)
    empty_i = np.empty(0, dtype=np.int64)
    if L == 0:
        trace = StickTrace(xs, np.empty(0), np.empty(0), empty_i, mu, integer=False, horizon=0.0)
        return IcrtSample(xs, w, trace, None, 0.0, istar, tail)
    ys = _poisson_cuts(rng, c, xs, w, L, max_cuts)
    zs, glue = _glue_points(rng, ys, c, xs, w)
    capped = max_cuts is not None and 0 < max_cuts <= len(ys)
    if capped or (len(ys) and ys[-1] == L):
        tree = sb_construct(ys, zs)
    else:
        tree = sb_construct(np.concatenate((ys, [L])), zs)
    trace = StickTrace(xs, ys, zs, glue, mu, integer=False, horizon=float(ys[-1]) if capped else L)
    return IcrtSample(xs, w, trace, tree, L, istar, tail)


def mass_measure_prefix(sample: IcrtSample, l: float) -> AtomicMeasure:
    """mu restricted to [0, l] and normalised to a probability measure."""
    if not 0 < l <= sample.truncation:
        raise OutOfRange("need 0 < l <= truncation level")
    return sample.trace.mu.normalized_prefix(l)


# ---------------------------------------------------------------------------
# continuum D-tree and the exponential time change


def continuum_dtree(d: DegreeSequence, rng: np.random.Generator, *, keep_history: bool = True) -> StickTrace:
    """Exponential-clock trace: X_i ~ Exp(rate d_i / sigma), Poisson cuts of intensity dy x dmu,
    kept when the (atom, slot) pair is new, N kept cuts in total."""
    sigma = _require_sigma(d)
    degs = d.array
    s = d.s
    X = np.full(s, np.inf)
    pos = np.flatnonzero(degs >= 1)
    X[pos] = rng.exponential(sigma / degs[pos])
    heavy = np.flatnonzero(degs >= 2)
    xs = X[heavy]
    ws = (degs[heavy] - 1) / sigma
    order = np.argsort(xs, kind="stable")
    heavy, xs, ws = heavy[order], xs[order], ws[order]
    mu = AtomicMeasure.from_atoms(xs, ws, heavy)
    big_n = d.big_n
    ux = {int(i): int(rng.integers(1, degs[i] + 1)) for i in heavy}
    used: set[tuple[int, int]] = set()
    Y, Z, G = [], [], []
    hist_y, hist_z, hist_atom, hist_slot, hist_keep = [], [], [], [], []
    total = 0.0
    cum_w = np.cumsum(ws)
    while len(Y) < big_n:
        total += float(rng.standard_exponential())
        y = float(invert_cumulative(0.0, xs, ws, np.asarray([total]))[0])
        nlive = int(np.searchsorted(xs, y, side="right"))
        u = rng.random() * cum_w[nlive - 1]
        k = min(int(np.searchsorted(cum_w[:nlive], u, side="right")), nlive - 1)
        atom = int(heavy[k])
        slot = int(rng.integers(1, degs[atom]))  # uniform over {1..d} minus U_X
        if slot >= ux[atom]:
            slot += 1
        new = (atom, slot) not in used
        if new:
            used.add((atom, slot))
            Y.append(y)
            Z.append(xs[k])
            G.append(atom)
        if keep_history:
            hist_y.append(y)
            hist_z.append(float(xs[k]))
            hist_atom.append(atom)
            hist_slot.append(slot)
            hist_keep.append(new)
    history = None
    if keep_history:
        history = {
            "Y": np.asarray(hist_y),
            "Z": np.asarray(hist_z),
            "atom": np.asarray(hist_atom, dtype=np.int64),
            "slot": np.asarray(hist_slot, dtype=np.int64),
            "kept": np.asarray(hist_keep, dtype=bool),
            "UX": ux,
        }
    return StickTrace(X, np.asarray(Y, dtype=float), np.asarray(Z, dtype=float), np.asarray(G, dtype=np.int64),
                      mu, integer=False, history=history)


def sample_time_change(d: DegreeSequence, rng: np.random.Generator, upto: int | None = None) -> np.ndarray:
    """f(0..upto): partial sums of independent exponentials with means sigma / (s - i).

    ``upto`` defaults to s - 1; a shorter prefix is exact for traces whose
    positions do not exceed it.
    """
    sigma = _require_sigma(d)
    s = d.s
    top = s - 1 if upto is None else min(int(upto), s - 1)
    means = sigma / (s - np.arange(1, top + 1, dtype=float))
    return np.concatenate(([0.0], np.cumsum(rng.exponential(means))))


def apply_time_change(d: DegreeSequence, trace: StickTrace, f: np.ndarray) -> StickTrace:
    """(f, 1/sigma) action on an integer-indexed trace."""
    if not trace.integer:
        raise NonIntegerPositions("time change needs integer walk positions")
    sigma = _require_sigma(d)

    def fmap(arr):
        arr = np.asarray(arr, dtype=np.int64)
        if np.any(arr >= len(f)):
            raise NonIntegerPositions("position beyond s - 1")
        return np.where(arr < 0, np.inf, f[np.maximum(arr, 0)])

    mu = trace.mu
    pos = mu.positions.astype(np.int64)
    new_mu = AtomicMeasure.from_atoms(f[pos], mu.masses / sigma, mu.labels)
    horizon = math.inf if math.isinf(trace.horizon) else float(f[int(trace.horizon)])
    return StickTrace(fmap(trace.X), fmap(trace.Y), fmap(trace.Z), trace.glue_atom, new_mu, integer=False,
                      horizon=horizon, history=trace.history)


def time_change(d: DegreeSequence, trace: StickTrace, rng: np.random.Generator) -> StickTrace:
    return apply_time_change(d, trace, sample_time_change(d, rng))
