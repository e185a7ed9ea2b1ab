"""Finite atomic measures on [0, 1].

Every distribution the model touches (fitness distributions, the mutant
distribution, equilibria, backward limits) is a finite sum of point masses,
and every map of the model preserves atomicity.  ``DiscreteMeasure`` stores
the atoms as two read-only numpy arrays in canonical order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from kingman.errors import DegenerateMeasureError, DomainError, NumericError

MERGE_TOL = 1e-12
PROB_TOL = 1e-12
ORDER_TOL = 1e-12
RENORM_TOL = 1e-14
DRIFT_ABORT = 1e-8


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite atomic measure ``sum_i w_i * delta_{x_i}`` on [0, 1].

    Build instances with :func:`canonicalize` (or :meth:`from_atoms`); the
    raw constructor trusts its arguments to be canonical already.
    """

    x: np.ndarray
    w: np.ndarray
    total: float = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        w = np.asarray(self.w, dtype=float)
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "total", math.fsum(w))

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence[float]]) -> "DiscreteMeasure":
        return canonicalize(atoms)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.x, self.w)]

    def __len__(self):
        return len(self.x)

    def __repr__(self):
        body = " + ".join(f"{b:.6g}*d({a:.6g})" for a, b in self.atoms)
        return f"DiscreteMeasure({body or '0'})"

    def mass_at(self, location: float) -> float:
        """Weight of the atom at ``location`` (0 if there is none)."""
        i = _find(self.x, location)
        return 0.0 if i < 0 else float(self.w[i])

    def mean(self) -> float:
        return moment(self, 1)

    def is_probability(self, tol: float = PROB_TOL) -> bool:
        return abs(self.total - 1.0) <= tol

    def to_json(self) -> list[dict]:
        return [{"x": a, "w": b} for a, b in self.atoms]

    @classmethod
    def from_json(cls, items: Iterable[dict]) -> "DiscreteMeasure":
        return canonicalize((d["x"], d["w"]) for d in items)


def canonicalize(raw_atoms: Iterable[Sequence[float]]) -> DiscreteMeasure:
    """Sort atoms, merge locations closer than 1e-12 and drop zero weights.

    Merged atoms sit at the weight-averaged location.
    """
    pairs = list(raw_atoms)
    if not pairs:
        return DiscreteMeasure(np.empty(0), np.empty(0))
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("atoms must be (location, weight) pairs")
    return from_arrays(arr[:, 0], arr[:, 1])


def from_arrays(x, w) -> DiscreteMeasure:
    """Canonical measure from parallel location and weight arrays."""
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if x.shape != w.shape:
        raise DomainError("locations and weights differ in length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise DomainError("atoms must be finite")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError(f"locations must lie in [0, 1], got {x[(x < 0) | (x > 1)][:3]}")
    if np.any(w < 0.0):
        raise DomainError("weights must be nonnegative")
    keep = w > 0.0
    x, w = x[keep], w[keep]
    if x.size == 0:
        return DiscreteMeasure(x, w)
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    if x.size > 1 and np.any(np.diff(x) <= MERGE_TOL):
        starts = np.concatenate(([True], np.diff(x) > MERGE_TOL))
        group = np.cumsum(starts) - 1
        wsum = np.bincount(group, weights=w)
        xsum = np.bincount(group, weights=w * x)
        x = np.clip(xsum / wsum, 0.0, 1.0)
        w = wsum
    return DiscreteMeasure(x, w)


def delta(location: float, weight: float = 1.0) -> DiscreteMeasure:
    """Point mass ``weight * delta_location``."""
    return canonicalize([(location, weight)])


def mixture(parts: Iterable[tuple[float, DiscreteMeasure]]) -> DiscreteMeasure:
    """Canonical form of ``sum_k c_k * mu_k``."""
    xs, ws = [], []
    for c, mu in parts:
        xs.append(mu.x)
        ws.append(c * mu.w)
    if not xs:
        return DiscreteMeasure(np.empty(0), np.empty(0))
    return from_arrays(np.concatenate(xs), np.concatenate(ws))


def size_bias(mu: DiscreteMeasure) -> DiscreteMeasure:
    """``x mu(dx) / int y mu(dy)``; an atom at 0 is annihilated."""
    xw = mu.x * mu.w
    s = math.fsum(xw)
    if s <= 0.0:
        raise DegenerateMeasureError("size-bias of a measure with zero mean")
    return from_arrays(mu.x, xw / s)


def moment(mu: DiscreteMeasure, k: int, normalized: bool = True) -> float:
    """``int x^k mu(dx)``, divided by the total mass when ``normalized``."""
    if k < 0:
        raise DomainError("moment order must be nonnegative")
    raw = math.fsum(mu.w * mu.x ** k)
    if not normalized:
        return raw
    if mu.total <= 0.0:
        raise DomainError("normalised moment of the zero measure")
    return raw / mu.total


def tilt_power(Q: DiscreteMeasure, k: int) -> tuple[DiscreteMeasure, float]:
    """``(Q^k, m_k)`` with ``Q^k(dx) = x^k Q(dx) / m_k`` and ``m_k = int x^k Q(dx)``.

    The tilt is formed in log space so that large ``k`` does not underflow
    the relative weights; ``m_k`` itself may underflow to 0.
    """
    if k < 0:
        raise DomainError("tilt order must be nonnegative")
    if k == 0:
        return Q, Q.total
    pos = Q.x > 0.0
    if not np.any(pos):
        raise DegenerateMeasureError("tilting the point mass at 0")
    x, w = Q.x[pos], Q.w[pos]
    lw = k * np.log(x) + np.log(w)
    top = lw.max()
    rel = np.exp(lw - top)
    s = math.fsum(rel)
    return from_arrays(x, rel / s), math.exp(top + math.log(s))


def tv_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Total variation ``sup_B |mu(B) - nu(B)|`` = half the L1 gap of the atoms."""
    x = np.concatenate((mu.x, nu.x))
    d = np.concatenate((mu.w, -nu.w))
    if x.size == 0:
        return 0.0
    order = np.argsort(x, kind="stable")
    x, d = x[order], d[order]
    starts = np.concatenate(([True], np.diff(x) > MERGE_TOL))
    sums = np.bincount(np.cumsum(starts) - 1, weights=d)
    return min(1.0, 0.5 * math.fsum(np.abs(sums)))


def cdf(mu: DiscreteMeasure, x: float) -> float:
    """Right-continuous distribution function ``mu([0, x]) / total``."""
    if mu.total <= 0.0:
        raise DomainError("distribution function of the zero measure")
    idx = np.searchsorted(mu.x, x, side="right")
    return math.fsum(mu.w[:idx]) / mu.total


@dataclass(frozen=True)
class SupportInfo:
    sup_point: float
    mass_at_sup: float


def support_sup(mu: DiscreteMeasure) -> SupportInfo:
    """Largest location carrying positive mass, and that mass."""
    if mu.x.size == 0:
        raise DomainError("the zero measure has no support")
    return SupportInfo(float(mu.x[-1]), float(mu.w[-1]))


def component_leq(mu: DiscreteMeasure, nu: DiscreteMeasure, a: float, open_at_a: bool) -> bool:
    """True iff ``mu(A) <= nu(A)`` for every A inside [0, a] (or [0, a) when open)."""
    if open_at_a:
        region = mu.x < a - MERGE_TOL
    else:
        region = mu.x <= a + MERGE_TOL
    other = weights_on(nu, mu.x[region])
    return bool(np.all(mu.w[region] <= other + ORDER_TOL))


def stochastic_leq(mu: DiscreteMeasure, nu: DiscreteMeasure) -> bool:
    """``mu`` is stochastically smaller than ``nu``: ``D_mu >= D_nu`` everywhere."""
    grid = common_support(mu, nu)
    d_mu = np.cumsum(weights_on(mu, grid)) / mu.total
    d_nu = np.cumsum(weights_on(nu, grid)) / nu.total
    return bool(np.all(d_mu >= d_nu - ORDER_TOL))


# array helpers shared by the engines


def _find(xs: np.ndarray, location: float) -> int:
    i = int(np.searchsorted(xs, location))
    for j in (i - 1, i):
        if 0 <= j < xs.size and abs(xs[j] - location) <= MERGE_TOL:
            return j
    return -1


def common_support(*measures: DiscreteMeasure, extra: Sequence[float] = ()) -> np.ndarray:
    """Sorted union of atom locations (within the merge tolerance)."""
    pts = np.concatenate([m.x for m in measures] + [np.asarray(extra, dtype=float)])
    if pts.size == 0:
        return pts
    pts = np.sort(pts)
    keep = np.concatenate(([True], np.diff(pts) > MERGE_TOL))
    return pts[keep]


def weights_on(mu: DiscreteMeasure, grid: np.ndarray) -> np.ndarray:
    """Weights of ``mu`` read off at ``grid`` locations (0 where ``mu`` has no atom).

    Atoms of ``mu`` that fall off the grid are dropped; callers build the
    grid with :func:`common_support` so this never happens for them.
    """
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(grid.size)
    if grid.size == 0 or mu.x.size == 0:
        return out
    idx = np.searchsorted(grid, mu.x)
    hi = np.clip(idx, 0, grid.size - 1)
    lo = np.clip(idx - 1, 0, grid.size - 1)
    use_hi = np.abs(grid[hi] - mu.x) <= MERGE_TOL
    use_lo = ~use_hi & (np.abs(grid[lo] - mu.x) <= MERGE_TOL)
    j = np.where(use_hi, hi, lo)
    hit = use_hi | use_lo
    np.add.at(out, j[hit], mu.w[hit])
    return out


def renormalize(w: np.ndarray) -> np.ndarray:
    """Guard a probability weight vector (or a stack of them) against drift.

    Rounding drift above 1e-14 is divided out; drift above 1e-8 means a
    logic error upstream and aborts.
    """
    total = w.sum(axis=-1, keepdims=True)
    drift = np.abs(total - 1.0)
    if np.any(drift > DRIFT_ABORT):
        raise NumericError(f"normalisation lost: total mass off by {float(drift.max()):.3e}")
    if np.any(drift > RENORM_TOL):
        w = w / total
    return w


def is_canonical(mu: DiscreteMeasure) -> bool:
    """Sorted, merged, zero-free, inside [0, 1]."""
    x, w = mu.x, mu.w
    return bool(
        np.all(w > 0)
        and np.all((x >= 0) & (x <= 1))
        and (x.size < 2 or np.all(np.diff(x) > MERGE_TOL))
    )
