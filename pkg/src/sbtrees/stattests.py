"""Two-sample and goodness-of-fit tests used by the experiment harness."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

ENERGY_PERMUTATIONS = 999
_CHUNK_ROWS = 256


@dataclass(frozen=True)
class StatResult:
    statistic: float
    pvalue: float

    def to_json(self) -> dict:
        return {"statistic": self.statistic, "pvalue": self.pvalue}


def ks_two_sample(a, b) -> StatResult:
    r = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return StatResult(float(r.statistic), float(r.pvalue))


def ks_one_sample(a, cdf) -> StatResult:
    r = stats.kstest(np.asarray(a, dtype=float), cdf)
    return StatResult(float(r.statistic), float(r.pvalue))


def chisquare_counts(observed, probs) -> StatResult:
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(probs, dtype=float)
    r = stats.chisquare(obs, obs.sum() * p / p.sum())
    return StatResult(float(r.statistic), float(r.pvalue))


def proportion_se(p_hat: float, n: int) -> float:
    """Binomial standard error sqrt(p (1 - p) / n)."""
    return math.sqrt(max(p_hat * (1 - p_hat), 0.0) / n)


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def _row_block_distances(z: np.ndarray, lo: int, hi: int) -> np.ndarray:
    acc = np.zeros((hi - lo, len(z)))
    for k in range(z.shape[1]):
        diff = z[lo:hi, k, None] - z[None, :, k]
        acc += diff * diff
    return np.sqrt(acc, out=acc)


def energy_test(x, y, rng: np.random.Generator, n_perm: int = ENERGY_PERMUTATIONS) -> StatResult:
    """Energy-distance two-sample test with a permutation p-value.

    For a labelling vector ``g`` (1 for the first sample) and pooled distance
    matrix ``D``, the within/between sums are quadratic forms in ``g`` and
    ``D 1``. All labellings (the observed one first) are scored from one
    chunked product ``D @ G``, so ``D`` is never held in memory whole.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x = x.reshape(len(x), -1)
    y = y.reshape(len(y), -1)
    n, m = len(x), len(y)
    z = np.vstack((x, y))
    N = n + m
    labels = np.zeros((N, n_perm + 1))
    labels[:n, 0] = 1.0
    base = np.zeros(N)
    base[:n] = 1.0
    for k in range(1, n_perm + 1):
        labels[:, k] = base[rng.permutation(N)]
    DG = np.empty_like(labels)
    rows = np.empty(N)
    for lo in range(0, N, _CHUNK_ROWS):
        hi = min(N, lo + _CHUNK_ROWS)
        block = _row_block_distances(z, lo, hi)
        DG[lo:hi] = block @ labels
        rows[lo:hi] = block.sum(axis=1)
    q = np.einsum("ij,ij->j", labels, DG)  # sum over pairs within the first group
    r = labels.T @ rows  # sum of row sums over the first group
    total = rows.sum()
    s_xy = r - q
    s_yy = total - 2 * r + q
    stat = (n * m / N) * (2 * s_xy / (n * m) - q / n**2 - s_yy / m**2)
    obs = stat[0]
    # relative slack so that the identity labelling does not lose ties to rounding
    count = int(np.sum(stat[1:] >= obs - 1e-12 * abs(obs)))
    return StatResult(float(obs), (1 + count) / (n_perm + 1))
