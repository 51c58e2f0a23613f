"""Locally finite measures on the half line: finitely many atoms plus a Lebesgue part."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveScale, ZeroMass


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """``lebesgue * dx + sum_k mass_k * delta(position_k)``.

    Atoms are kept sorted by position; zero-mass atoms are dropped on
    construction. ``labels`` records which vertex/atom index produced each
    atom (-1 when unknown).
    """

    positions: np.ndarray
    masses: np.ndarray
    labels: np.ndarray
    lebesgue: float = 0.0

    @classmethod
    def from_atoms(cls, positions, masses, labels=None, lebesgue: float = 0.0) -> "AtomicMeasure":
        pos = np.asarray(positions, dtype=float).ravel()
        mass = np.asarray(masses, dtype=float).ravel()
        lab = np.full(pos.shape, -1, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64).ravel()
        keep = (mass > 0) & np.isfinite(pos)
        pos, mass, lab = pos[keep], mass[keep], lab[keep]
        order = np.argsort(pos, kind="stable")
        out = cls(pos[order], mass[order], lab[order], float(lebesgue))
        for a in (out.positions, out.masses, out.labels):
            a.setflags(write=False)
        return out

    @classmethod
    def empty(cls) -> "AtomicMeasure":
        return cls.from_atoms([], [])

    def __len__(self) -> int:
        return len(self.positions)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return (
            self.lebesgue == other.lebesgue
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.masses, other.masses)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None  # type: ignore[assignment]

    def total_atomic(self) -> float:
        return float(self.masses.sum())

    def cdf(self, x):
        """mu[0, x] (closed interval); vectorised in ``x``."""
        xa = np.asarray(x, dtype=float)
        cum = np.concatenate(([0.0], np.cumsum(self.masses)))
        idx = np.searchsorted(self.positions, xa, side="right")
        out = cum[idx] + self.lebesgue * np.maximum(xa, 0.0)
        return float(out) if out.ndim == 0 else out

    def integral_cdf(self, t):
        """int_0^t mu[0, u] du, the mean number of cuts before ``t`` given mu."""
        ta = np.asarray(t, dtype=float)
        gaps = np.maximum(ta[..., None] - self.positions, 0.0)
        out = (gaps * self.masses).sum(axis=-1) + 0.5 * self.lebesgue * ta * ta
        return float(out) if np.ndim(out) == 0 else out

    def rescale(self, lambda1: float, lambda2: float) -> "AtomicMeasure":
        """Pushforward by x -> lambda1 x, masses times lambda2.

        The result satisfies ``new.cdf(b) = lambda2 * old.cdf(b / lambda1)``.
        The Lebesgue coefficient picks up ``lambda2 / lambda1``.
        """
        if not (lambda1 > 0 and lambda2 > 0):
            raise NonPositiveScale("scale factors must be positive")
        return AtomicMeasure.from_atoms(
            self.positions * lambda1, self.masses * lambda2, self.labels, self.lebesgue * lambda2 / lambda1
        )

    def restrict(self, upper: float) -> "AtomicMeasure":
        keep = self.positions <= upper
        return AtomicMeasure.from_atoms(self.positions[keep], self.masses[keep], self.labels[keep], self.lebesgue)

    def normalized_prefix(self, upper: float) -> "AtomicMeasure":
        """Restriction to [0, upper] scaled to total mass one."""
        r = self.restrict(upper)
        total = r.total_atomic() + r.lebesgue * upper
        if total <= 0:
            raise ZeroMass(f"mu[0, {upper}] = 0")
        return AtomicMeasure.from_atoms(r.positions, r.masses / total, r.labels, r.lebesgue / total)

    def to_json(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "masses": self.masses.tolist(),
            "labels": self.labels.tolist(),
            "lebesgue": self.lebesgue,
        }
