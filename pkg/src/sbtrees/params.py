"""Parameter spaces for D-trees, P-trees and ICRT.

Also holds the exact expected-measure calculus (closed forms for the mean
cut-intensity measures) that the height bounds and the regime assumptions
are built from.
"""
from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    DivergentIntegrand,
    Empty,
    InvalidParams,
    InvalidTheta,
    NegativeEntry,
    NotSorted,
    NZero,
    OutOfRange,
    SigmaZero,
    SumMismatch,
)

SIMPLEX_TOL = 1e-12
BISECTION_RTOL = 1e-10
# relative slack used when flooring s*l/sigma so that l = j*sigma/s lands on j
FLOOR_RTOL = 1e-12


@dataclass(frozen=True)
class DegreeSequence:
    """Child counts ``(d_1, ..., d_s)`` of a rooted tree on ``s`` labelled vertices.

    ``permutation`` is set when the input was canonicalized: entry ``i`` is
    the index in the raw input of the ``i``-th sorted degree.
    """

    degrees: tuple[int, ...]
    permutation: tuple[int, ...] | None = None

    @property
    def s(self) -> int:
        return len(self.degrees)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.asarray(self.degrees, dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.array) <= 0))

    @cached_property
    def sigma(self) -> float:
        a = self.array
        return math.sqrt(float(np.sum(a * (a - 1))))

    @cached_property
    def big_n(self) -> int:
        a = self.array
        return int(np.sum((a - 1)[a >= 1]))

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        """Zero-degree vertices in index order (L_1, L_2, ...)."""
        return tuple(self.leaf_array.tolist())

    @cached_property
    def leaf_array(self) -> np.ndarray:
        arr = np.flatnonzero(self.array == 0).astype(np.int64)
        arr.setflags(write=False)
        return arr

    def stats(self) -> "EnsembleStats":
        return ensemble_stats(self)

    def to_json(self) -> dict:
        out = {"degrees": list(self.degrees)}
        if self.permutation is not None:
            out["permutation"] = list(self.permutation)
        st = self.stats()
        out["stats"] = {
            "s": self.s,
            "sigma": st.sigma,
            "N": st.big_n,
            "s1": st.s1,
            "s_ge2": st.s_ge2,
            "leaf_count": st.leaf_count,
        }
        return out


@dataclass(frozen=True)
class EnsembleStats:
    sigma: float
    big_n: int
    s1: int
    s_ge2: int
    leaf_count: int


@dataclass(frozen=True)
class PParams:
    probs: tuple[float, ...]
    p_inf: float

    @property
    def sigma(self) -> float:
        return math.sqrt(sum(p * p for p in self.probs))

    @property
    def s(self) -> float:
        """Largest index with positive mass (infinite when p_inf > 0)."""
        return math.inf if self.p_inf > 0 else len(self.probs)

    def to_json(self) -> dict:
        return {"p": list(self.probs), "p_inf": self.p_inf, "stats": {"sigma": self.sigma}}


@dataclass(frozen=True)
class ThetaParams:
    theta: tuple[float, ...]
    theta0sq: float

    @property
    def theta0(self) -> float:
        return math.sqrt(self.theta0sq)

    @property
    def mu_infinite(self) -> bool:
        """Whether the mass measure has infinite total mass (theta_0 > 0 or sum theta_i = inf).

        Only finitely many entries are stored, so this reduces to theta_0 > 0.
        """
        return self.theta0sq > 0

    def to_json(self) -> dict:
        return {"theta": list(self.theta), "theta0sq": self.theta0sq}


@dataclass(frozen=True)
class OmegaPoint:
    m: float
    big_n: float
    theta: tuple[float, ...] = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# validation


def validate_degree_sequence(
    raw: Iterable[int], *, canonicalize: bool = False, allow_unsorted: bool = False
) -> DegreeSequence:
    """Validate raw child counts.

    Unsorted input is rejected unless ``canonicalize`` (sort it, remembering
    the permutation) or ``allow_unsorted`` (keep the given labelling) is set.
    """
    vals = []
    for x in raw:
        if isinstance(x, bool) or int(x) != x:
            raise InvalidParams(f"degree {x!r} is not an integer")
        vals.append(int(x))
    if not vals:
        raise Empty("degree sequence is empty (s = 0)")
    if any(x < 0 for x in vals):
        raise NegativeEntry("degrees must be non-negative")
    s = len(vals)
    if sum(vals) != s - 1:
        raise SumMismatch(f"sum of degrees is {sum(vals)}, expected s - 1 = {s - 1}")
    sorted_ok = all(vals[i] >= vals[i + 1] for i in range(s - 1))
    if sorted_ok:
        return DegreeSequence(tuple(vals))
    if canonicalize:
        perm = sorted(range(s), key=lambda i: (-vals[i], i))
        return DegreeSequence(tuple(vals[i] for i in perm), tuple(perm))
    if allow_unsorted:
        return DegreeSequence(tuple(vals))
    raise NotSorted("degrees must be non-increasing (pass canonicalize=True to sort)")


def validate_pparams(probs: Sequence[float], p_inf: float | None = None) -> PParams:
    ps = [float(p) for p in probs]
    if not ps:
        raise InvalidParams("P needs at least one finite atom (p_1 > 0)")
    if any(not math.isfinite(p) or p <= 0 for p in ps):
        raise InvalidParams("finite atoms must carry positive mass")
    if any(ps[i] < ps[i + 1] for i in range(len(ps) - 1)):
        raise NotSorted("p must be non-increasing")
    total = math.fsum(ps)
    if total > 1 + SIMPLEX_TOL:
        raise InvalidParams(f"sum of p is {total} > 1")
    rest = max(0.0, 1.0 - total)
    if p_inf is None:
        p_inf = rest
    else:
        p_inf = float(p_inf)
        if p_inf < -SIMPLEX_TOL or abs(total + p_inf - 1.0) > SIMPLEX_TOL:
            raise InvalidParams("p_inf must equal 1 - sum(p)")
        p_inf = max(0.0, p_inf)
    return PParams(tuple(ps), p_inf)


def validate_theta(theta: Sequence[float]) -> ThetaParams:
    th = [float(t) for t in theta]
    if any(not math.isfinite(t) or t < 0 for t in th):
        raise InvalidTheta("theta entries must be finite and non-negative")
    if any(th[i] < th[i + 1] for i in range(len(th) - 1)):
        raise InvalidTheta("theta must be non-increasing")
    sq = math.fsum(t * t for t in th)
    if sq > 1 + SIMPLEX_TOL:
        raise InvalidTheta(f"sum of theta_i^2 is {sq} > 1")
    theta0sq = 1.0 - sq
    if theta0sq < SIMPLEX_TOL:
        theta0sq = 0.0
    return ThetaParams(tuple(th), min(1.0, theta0sq))


def parse_params(obj: dict, *, canonicalize: bool = False, allow_unsorted: bool = False):
    """Build parameters from the JSON forms ``{"degrees"}``, ``{"p", "p_inf"}`` or ``{"theta"}``."""
    if "degrees" in obj:
        return validate_degree_sequence(
            obj["degrees"], canonicalize=canonicalize, allow_unsorted=allow_unsorted
        )
    if "p" in obj:
        return validate_pparams(obj["p"], obj.get("p_inf"))
    if "theta" in obj:
        return validate_theta(obj["theta"])
    raise InvalidParams("expected one of the keys 'degrees', 'p', 'theta'")


# ---------------------------------------------------------------------------
# statistics


def ensemble_stats(d: DegreeSequence) -> EnsembleStats:
    degs = d.degrees
    s1 = sum(1 for x in degs if x == 1)
    sge2 = sum(1 for x in degs if x >= 2)
    return EnsembleStats(
        sigma=d.sigma,
        big_n=d.big_n,
        s1=s1,
        s_ge2=sge2,
        leaf_count=sum(1 for x in degs if x == 0),
    )


def _require_sigma(d: DegreeSequence) -> float:
    sigma = d.sigma
    if sigma == 0:
        raise SigmaZero("sigma = 0: every degree is at most 1")
    return sigma


def _degree_classes(d: DegreeSequence) -> tuple[np.ndarray, np.ndarray]:
    """Distinct degrees >= 2 and their multiplicities (degrees 0, 1 carry no mass)."""
    vals, counts = np.unique(np.asarray([x for x in d.degrees if x >= 2], dtype=np.int64), return_counts=True)
    return vals, counts


def expected_mu_tilde(d: DegreeSequence, x):
    """Mean of the exponential-clock measure, sum_i (d_i - 1)/sigma * (1 - exp(-x d_i / sigma))."""
    sigma = _require_sigma(d)
    vals, counts = _degree_classes(d)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise OutOfRange("x must be non-negative")
    w = counts * (vals - 1) / sigma
    out = (w[:, None] * -np.expm1(-np.multiply.outer(vals / sigma, xa.ravel()))).sum(axis=0)
    out = out.reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


def _floor_index(s: int, sigma: float, l):
    la = np.asarray(l, dtype=float)
    q = s * la / sigma
    return np.floor(q * (1 + FLOOR_RTOL)).astype(np.int64)


def _unseen_products(d: DegreeSequence, jmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``P[v, j] = prod_{k<=j} (1 - d_v/(s-k))`` for each degree class, j = 0..jmax."""
    s = d.s
    vals, counts = _degree_classes(d)
    j = np.arange(1, jmax + 1, dtype=float)
    prods = np.ones((len(vals), jmax + 1))
    if jmax > 0 and len(vals):
        fac = 1.0 - vals[:, None] / (s - j)[None, :]
        np.maximum(fac, 0.0, out=fac)
        prods[:, 1:] = np.cumprod(fac, axis=1)
    return prods, (counts * (vals - 1)).astype(float)


def expected_mu_discrete(d: DegreeSequence, k):
    """E[mu[0, k]] for the discrete trace: sum_i (d_i - 1) P(V_i among A_1..A_k)."""
    ka = np.asarray(k, dtype=np.int64)
    if np.any(ka < 0):
        raise OutOfRange("k must be non-negative")
    kc = np.minimum(ka, d.s - 1)
    jmax = int(kc.max()) if kc.size else 0
    prods, w = _unseen_products(d, jmax)
    out = (w[:, None] * (1.0 - prods[:, kc.ravel()])).sum(axis=0).reshape(ka.shape)
    return float(out) if out.ndim == 0 else out


def expected_mu_bar(d: DegreeSequence, l, *, clamp: bool = False):
    """Mean of the rescaled discrete measure, E[mu[0, s l / sigma]] / sigma.

    The index ``floor(s l / sigma)`` must stay below ``s`` unless ``clamp`` is
    set, in which case it is clamped to ``s - 1`` (all vertices seen, value N/sigma).
    """
    sigma = _require_sigma(d)
    J = _floor_index(d.s, sigma, l)
    if np.any(J < 0):
        raise OutOfRange("l must be non-negative")
    if np.any(J >= d.s):
        if not clamp:
            raise OutOfRange("floor(s l / sigma) >= s; use clamp=True")
        J = np.minimum(J, d.s - 1)
    out = np.asarray(expected_mu_discrete(d, J)) / sigma
    return float(out) if out.ndim == 0 else out


def threshold_t(d: DegreeSequence) -> int:
    """Smallest integer l with E[mu[0, l]] >= N / 2."""
    big_n = d.big_n
    if big_n == 0:
        raise NZero("N = 0: the trace has no cuts")
    target = big_n / 2
    top = d.s - 1

    def ok(l: int) -> bool:
        return expected_mu_discrete(d, l) >= target

    lo, hi = 0, 1
    while hi < top and not ok(hi):
        lo, hi = hi, min(2 * hi, top)
    # invariant: not ok(lo) (ok(0) is false since E[mu[0,0]] = 0), ok(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def inverse_expected_measure(d: DegreeSequence, m: float) -> float:
    """Solve E[mu_tilde[0, l]] = m for l, with 0 <= m < N / sigma."""
    sigma = _require_sigma(d)
    cap = d.big_n / sigma
    if m < 0 or m >= cap:
        raise OutOfRange(f"m must lie in [0, N/sigma) = [0, {cap})")
    if m == 0:
        return 0.0
    lo = m  # E[mu_tilde[0, x]] <= x
    hi = max(2 * m, 1.0)
    while expected_mu_tilde(d, hi) < m:
        lo, hi = hi, 2 * hi
    if expected_mu_tilde(d, lo) >= m:
        return lo
    while hi - lo > BISECTION_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if expected_mu_tilde(d, mid) < m:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def tail_integral(d: DegreeSequence, a: float, b: float) -> float:
    """Integral of dl / (l E[mu_bar[0, l]]) over [a, b].

    ``E[mu_bar[0, l]]`` is a step function of ``l`` (constant on
    ``[j sigma/s, (j+1) sigma/s)``), so the integral is evaluated exactly as a
    sum of ``log(hi/lo) / value`` over the pieces.
    """
    sigma = _require_sigma(d)
    if a <= 0 or b < a:
        raise OutOfRange("need 0 < a <= b")
    if a == b:
        return 0.0
    s = d.s
    step = sigma / s
    ja = int(_floor_index(s, sigma, a))
    jb = int(_floor_index(s, sigma, b))
    jcap = min(jb, s - 1)
    js = np.arange(ja, jb + 1)
    vals = np.asarray(expected_mu_discrete(d, np.minimum(js, jcap)), dtype=float) / sigma
    if vals[0] <= 0:
        raise DivergentIntegrand("E[mu_bar[0, a]] = 0: the integrand is not integrable at a")
    lo = np.maximum(js * step, a)
    hi = np.minimum((js + 1) * step, b)
    keep = hi > lo
    return float(math.fsum(np.log(hi[keep] / lo[keep]) / vals[keep]))


# ---------------------------------------------------------------------------
# P-tree and ICRT analogues used by the assumption evaluators


def expected_mu_p(p: PParams, x):
    """E[mu^P[0, x]] = sum_i p_i (1 - (1 - p_i)^floor(x)); first hits are geometric."""
    k = np.floor(np.asarray(x, dtype=float))
    pa = np.asarray(p.probs)
    out = (pa[:, None] * -np.expm1(np.multiply.outer(np.log1p(-np.minimum(pa, 1 - 1e-300)), k.ravel()))).sum(axis=0)
    if np.any(pa >= 1.0):
        out = np.where(k.ravel() >= 1, out, 0.0)
    out = out.reshape(k.shape)
    return float(out) if out.ndim == 0 else out


def threshold_t_p(p: PParams) -> int:
    """Smallest integer l with E[mu^P[0, l]] >= 1/2."""
    total = math.fsum(p.probs)
    if total < 0.5:
        raise OutOfRange("sum of p_i < 1/2: threshold never reached")
    hi = 1
    while expected_mu_p(p, hi) < 0.5:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if expected_mu_p(p, mid) >= 0.5:
            hi = mid
        else:
            lo = mid
    return hi


def expected_mu_theta(theta: ThetaParams, x):
    """E[mu^Theta[0, x]] = theta_0^2 x + sum_i theta_i (1 - exp(-theta_i x))."""
    xa = np.asarray(x, dtype=float)
    th = np.asarray(theta.theta, dtype=float)
    atoms = (th[:, None] * -np.expm1(-np.multiply.outer(th, xa.ravel()))).sum(axis=0) if th.size else 0.0
    out = (theta.theta0sq * xa.ravel() + atoms).reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


def _log_quad(fn, a: float, b: float, n: int = 4001) -> float:
    """Simpson's rule in log-space for a smooth integrand over [a, b]."""
    from scipy.integrate import simpson

    u = np.linspace(math.log(a), math.log(b), n)
    x = np.exp(u)
    return float(simpson(fn(x) * x, x=u))


def tail_integral_theta(theta: ThetaParams, a: float, b: float = math.inf) -> float:
    """Integral of dl / (l E[mu^Theta[0, l]]) over [a, b] (b may be infinite when theta_0 > 0)."""
    if a <= 0:
        raise OutOfRange("a must be positive")
    fn = lambda l: 1.0 / (l * np.asarray(expected_mu_theta(theta, l)))  # noqa: E731
    if math.isinf(b):
        if theta.theta0sq <= 0:
            raise DivergentIntegrand("mu^Theta has finite mass: the integral to infinity diverges")
        # beyond B the measure is theta0^2 l + O(1); the remainder is bounded by 1/(theta0^2 B)
        big = max(10 * a, 1e6 / theta.theta0sq)
        rest = 1.0 / (theta.theta0sq * big)
        mass = math.fsum(theta.theta)
        # 1/(l(c l + m)) integrated from big to inf equals log(1 + m/(c big)) / m
        if mass > 0:
            rest = math.log1p(mass / (theta.theta0sq * big)) / mass
        return _log_quad(fn, a, big) + rest
    return _log_quad(fn, a, b)


def tail_integral_p(p: PParams, a: float, b: float) -> float:
    """Integral of dl / (l E[mu_bar^P[0, l]]) with mu_bar^P the (sigma, 1/sigma) rescaling."""
    sig = p.sigma
    if a <= 0 or b < a:
        raise OutOfRange("need 0 < a <= b")
    if a == b:
        return 0.0
    # E[mu_bar^P[0, l]] = E[mu^P[0, l / sigma]] / sigma is constant on [k sigma, (k+1) sigma)
    ka, kb = int(math.floor(a / sig)), int(math.floor(b / sig))
    ks = np.arange(ka, kb + 1)
    vals = np.asarray(expected_mu_p(p, ks), dtype=float) / sig
    if vals[0] <= 0:
        raise DivergentIntegrand("E[mu_bar^P[0, a]] = 0")
    lo = np.maximum(ks * sig, a)
    hi = np.minimum((ks + 1) * sig, b)
    keep = hi > lo
    return float(math.fsum(np.log(hi[keep] / lo[keep]) / vals[keep]))


# ---------------------------------------------------------------------------
# embedding into the common parameter space

Params = Union[DegreeSequence, PParams, ThetaParams]


def omega_embed(source: Params) -> OmegaPoint:
    if isinstance(source, DegreeSequence):
        sigma = _require_sigma(source)
        return OmegaPoint(
            m=sigma / source.s,
            big_n=source.big_n,
            theta=tuple(x / sigma for x in source.degrees),
        )
    if isinstance(source, PParams):
        sig = source.sigma
        return OmegaPoint(m=sig, big_n=math.inf, theta=tuple(p / sig for p in source.probs))
    if isinstance(source, ThetaParams):
        return OmegaPoint(m=0.0, big_n=math.inf, theta=tuple(source.theta))
    raise TypeError(f"cannot embed {type(source).__name__}")
