"""Kingman's deterministic equilibrium for a constant mutation probability b.

Two regimes, separated by the hazard integral ``H = int Q(dx) / (1 - x/h)``:

* ``H >= 1/b`` (case One): ``K(dx) = b*theta*Q(dx) / (theta - (1-b)x)`` where
  theta solves ``int b*theta*Q(dx) / (theta - (1-b)x) = 1``;
* ``H < 1/b`` (case Two): ``K(dx) = b*Q(dx) / (1 - x/h) + (1 - b*H) delta_h``,
  i.e. a condensate of mass ``1 - b*H`` sits at h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from kingman.errors import DegenerateMeasureError, DomainError, NumericError
from kingman.measure import MERGE_TOL, DiscreteMeasure, from_arrays, moment, support_sup

TIE_TOL = 1e-12
RESIDUAL_TOL = 1e-12
MEAN_FITNESS_TOL = 1e-10
_UPPER_CAP = 2.0 ** 40


@dataclass(frozen=True)
class KingmanEquilibrium:
    measure: DiscreteMeasure
    case_tag: str  # "One" or "Two"
    theta: float | None
    condensate_mass: float
    hazard_integral: float


def _check_Q(Q: DiscreteMeasure):
    if Q.x.size == 0 or not Q.is_probability():
        raise DomainError("Q must be a probability measure")
    if Q.x[-1] <= 0.0:
        raise DegenerateMeasureError("Q must not be the point mass at 0")


def hazard_integral(Q: DiscreteMeasure, h: float) -> float:
    """``int Q(dx) / (1 - x/h)``; ``inf`` when Q has an atom at h."""
    s_q = support_sup(Q).sup_point
    if h < s_q - MERGE_TOL:
        raise DomainError(f"h = {h} lies below the top of supp Q ({s_q})")
    gap = 1.0 - Q.x / h
    if np.any(np.abs(Q.x - h) <= MERGE_TOL):
        return math.inf
    return math.fsum(Q.w / gap)


def theta_equation(theta: float, b: float, Q: DiscreteMeasure) -> float:
    """Left side of ``int b*theta*Q(dx) / (theta - (1-b)x) = 1``."""
    return math.fsum(b * theta * Q.w / (theta - (1.0 - b) * Q.x))


def solve_theta(b: float, Q: DiscreteMeasure) -> float:
    """Root theta > (1-b) S_Q of the case-One equation, by bisection.

    The left side decreases strictly in theta, from +inf (or from its value
    at the lower end when Q has no atom at S_Q) down to b.  Bisection runs
    until the bracket cannot be split in floating point.
    """
    if not 0.0 < b < 1.0:
        raise DomainError("b must lie in (0, 1)")
    _check_Q(Q)
    s_q = float(Q.x[-1])
    lo = (1.0 - b) * s_q * (1.0 + 1e-15)
    f_lo = theta_equation(lo, b, Q) - 1.0
    if f_lo <= 0.0:
        if f_lo >= -TIE_TOL:
            return lo
        raise NumericError("no case-One root: parameters are in the condensation regime")
    hi = max(2.0 * lo, 1.0)
    while theta_equation(hi, b, Q) - 1.0 > 0.0:
        hi *= 2.0
        if hi > _UPPER_CAP:
            raise NumericError("root bracket not found below 2**40")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if theta_equation(mid, b, Q) - 1.0 > 0.0:
            lo = mid
        else:
            hi = mid
    r_lo = abs(theta_equation(lo, b, Q) - 1.0)
    r_hi = abs(theta_equation(hi, b, Q) - 1.0)
    return lo if r_lo < r_hi else hi


def equilibrium(b: float, Q: DiscreteMeasure, h: float) -> KingmanEquilibrium:
    """Limit of the constant-b forward sequence started from any P0 with S_P0 = h."""
    if not 0.0 < b < 1.0:
        raise DomainError("b must lie in (0, 1)")
    _check_Q(Q)
    if h > 1.0:
        raise DomainError("h must not exceed 1")
    haz = hazard_integral(Q, h)
    if haz >= 1.0 / b - TIE_TOL:
        theta = solve_theta(b, Q)
        w = b * theta * Q.w / (theta - (1.0 - b) * Q.x)
        measure = from_arrays(Q.x, w / w.sum())
        return KingmanEquilibrium(measure, "One", theta, 0.0, haz)
    w = b * Q.w / (1.0 - Q.x / h)
    cond = 1.0 - math.fsum(w)
    measure = from_arrays(np.append(Q.x, h), np.append(w, cond))
    return KingmanEquilibrium(measure, "Two", None, cond, haz)


def equilibrium_mean_fitness(eq: KingmanEquilibrium, b: float, h: float) -> tuple[float, float]:
    """``(int x K(dx), closed form)``: theta in case One, ``(1-b) h`` in case Two."""
    computed = moment(eq.measure, 1)
    closed = eq.theta if eq.case_tag == "One" else (1.0 - b) * h
    return computed, closed


def log_ratio_diagnostic(b: float, Q: DiscreteMeasure, h: float) -> float:
    """``ln(h(1-b) / int x K_Q(dx))`` with ``K_Q`` the equilibrium at h = S_Q.

    For h > S_Q the value is <= 0 exactly in case One at h.
    """
    s_q = support_sup(Q).sup_point
    k_q = equilibrium(b, Q, s_q)
    return math.log(h * (1.0 - b)) - math.log(moment(k_q.measure, 1))
