"""Forward dynamics ``P_n = (1 - beta_n) x P_{n-1}(dx) / int y P_{n-1}(dy) + beta_n Q(dx)``.

All measures along a trajectory live on ``supp P0 u supp Q``, so the
engines work with a fixed location grid and a weight vector (or a stack of
weight vectors, one row per replica) and convert back to
:class:`DiscreteMeasure` only at the edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from kingman.errors import DegenerateMeasureError, DomainError, UsageError
from kingman.measure import (
    DiscreteMeasure,
    common_support,
    from_arrays,
    renormalize,
    tilt_power,
    weights_on,
)
from kingman.mutation import MutationLaw, expected_log_one_minus

_RESCALE_LO = 1e-200
_RESCALE_HI = 1e200


@dataclass(frozen=True)
class ForwardTrajectory:
    measures: list  # P_0 .. P_n (only the endpoints when not recorded)
    means: list
    betas_used: list


@dataclass(frozen=True)
class UnnormalizedTrajectory:
    """``Pbar_n = exp(log_scales[n]) * measures[n]``; ``log_totals[n] = ln Pbar_n([0,1])``."""

    measures: list
    log_scales: list
    log_totals: list = field(default_factory=list)


def check_mutant(Q: DiscreteMeasure):
    if Q.x.size == 0 or not Q.is_probability():
        raise DomainError("Q must be a probability measure")
    if Q.x[-1] <= 0.0:
        raise DegenerateMeasureError("Q = delta_0 is handled by q_zero_oracle, not the forward map")


def check_betas(betas) -> np.ndarray:
    b = np.asarray(betas, dtype=float)
    if b.size and (np.any(b < 0.0) or np.any(b >= 1.0)):
        raise DomainError("mutation probabilities must lie in [0, 1)")
    return b


def step_weights(x: np.ndarray, w: np.ndarray, beta, q: np.ndarray):
    """One forward map on a fixed grid; ``w`` may be a (replicas, atoms) stack.

    Returns the new weights and the mean fitness of the input.
    """
    m = w @ x
    if np.any(m <= 0.0):
        raise DegenerateMeasureError("size-bias of a measure with zero mean")
    beta = np.asarray(beta, dtype=float)
    if w.ndim == 2:
        out = ((1.0 - beta) / m)[:, None] * (w * x) + beta[:, None] * q
    else:
        out = (1.0 - beta) / m * (w * x) + beta * q
    return renormalize(out), m


def forward_step(P: DiscreteMeasure, beta: float, Q: DiscreteMeasure) -> DiscreteMeasure:
    """``(1 - beta) * size_bias(P) + beta * Q``."""
    check_mutant(Q)
    check_betas([beta])
    x = common_support(P, Q)
    w, _ = step_weights(x, weights_on(P, x), beta, weights_on(Q, x))
    return from_arrays(x, w)


def forward_trajectory(P0: DiscreteMeasure, betas, Q: DiscreteMeasure, record_measures: bool = True) -> ForwardTrajectory:
    """Iterate the forward map over ``betas`` (``beta_1 .. beta_n``)."""
    check_mutant(Q)
    b = check_betas(betas)
    x = common_support(P0, Q)
    q = weights_on(Q, x)
    w = renormalize(weights_on(P0, x))
    measures = [from_arrays(x, w)]
    means = []
    for beta in b:
        w, m = step_weights(x, w, beta, q)
        means.append(float(m))
        if record_measures:
            measures.append(from_arrays(x, w))
    means.append(float(w @ x))
    if not record_measures and b.size:
        measures.append(from_arrays(x, w))
    return ForwardTrajectory(measures, means, [float(v) for v in b])


def forward_batch(P0: DiscreteMeasure, betas: np.ndarray, Q: DiscreteMeasure):
    """Run one forward trajectory per row of ``betas``; return ``(grid, final weights)``."""
    check_mutant(Q)
    b = check_betas(betas)
    if b.ndim != 2:
        raise UsageError("betas must be a (replicas, steps) array")
    x = common_support(P0, Q)
    q = weights_on(Q, x)
    w = np.tile(renormalize(weights_on(P0, x)), (b.shape[0], 1))
    for n in range(b.shape[1]):
        w, _ = step_weights(x, w, b[:, n], q)
    return x, w


def _logx(x: np.ndarray, k) -> np.ndarray:
    """``k * ln x`` with the convention ``0 * ln 0 = 0``."""
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = k * np.log(x)
    return np.where(k == 0, 0.0, out)


def expansion_oracle(P0: DiscreteMeasure, betas, Q: DiscreteMeasure, n: int, means) -> DiscreteMeasure:
    """``P_n`` assembled term by term from the expanded forward recursion.

    ``P_n = c_0 x^n P0(dx) + sum_{j=1}^n c_j b_j x^{n-j} Q(dx)`` with
    ``c_j = prod_{l=j}^{n-1} (1 - b_{l+1}) / mean_l``.  ``means[l]`` is the
    mean fitness of ``P_l``; products and powers are carried in log space.
    """
    b = check_betas(betas)
    if n < 0 or b.size < n or len(means) < n:
        raise UsageError(f"need n <= len(betas) and n <= len(means), got n={n}, {b.size}, {len(means)}")
    if n == 0:
        return P0
    m = np.asarray(means[:n], dtype=float)
    inc = np.log1p(-b[:n]) - np.log(m)  # inc[l] pairs b_{l+1} with mean_l
    suffix = np.concatenate((np.cumsum(inc[::-1])[::-1], [0.0]))  # suffix[j] = sum_{l>=j} inc[l]
    xs = [P0.x]
    lws = [suffix[0] + _logx(P0.x, n) + np.log(P0.w)]
    j = np.arange(1, n + 1)
    keep = b[j - 1] > 0.0
    j = j[keep]
    if j.size:
        lw = (suffix[j] + np.log(b[j - 1]))[:, None] + _logx(Q.x[None, :], (n - j)[:, None]) + np.log(Q.w)[None, :]
        xs.append(np.broadcast_to(Q.x, lw.shape).ravel())
        lws.append(lw.ravel())
    x = np.concatenate(xs)
    w = np.exp(np.concatenate(lws))
    return from_arrays(x, w)


def unnormalized_trajectory(P0: DiscreteMeasure, betas, Q: DiscreteMeasure) -> UnnormalizedTrajectory:
    """``Pbar_n = (1 - beta_n) x Pbar_{n-1}(dx) + beta_n (int y Pbar_{n-1}(dy)) Q(dx)``.

    Raw weights are rescaled only when they leave [1e-200, 1e200]; the
    removed factor is accumulated in ``log_scales``.
    """
    check_mutant(Q)
    b = check_betas(betas)
    x = common_support(P0, Q)
    q = weights_on(Q, x)
    w = weights_on(P0, x)
    scale = 0.0
    measures, scales, totals = [from_arrays(x, w)], [0.0], [math.log(w.sum())]
    for beta in b:
        mass = w @ x
        w = (1.0 - beta) * x * w + beta * mass * q
        t = w.sum()
        if t <= 0.0:
            raise DegenerateMeasureError("unnormalised mass vanished")
        if not _RESCALE_LO <= t <= _RESCALE_HI:
            w = w / t
            scale += math.log(t)
            t = 1.0
        measures.append(from_arrays(x, w))
        scales.append(scale)
        totals.append(scale + math.log(t))
    return UnnormalizedTrajectory(measures, scales, totals)


def growth_rate_h(law: MutationLaw, h: float) -> float:
    """``E[ln(h(1 - beta))]``."""
    if not 0.0 < h <= 1.0:
        raise DomainError("h must lie in (0, 1]")
    return math.log(h) + expected_log_one_minus(law)


def q_zero_oracle(P0: DiscreteMeasure, betas) -> DiscreteMeasure:
    """Closed form for ``Q = delta_0``: ``(1 - beta_n) x^n P0 / int y^n P0 + beta_n delta_0``."""
    b = check_betas(betas)
    n = b.size
    if n == 0:
        return P0
    tilted, _ = tilt_power(P0, n)
    return from_arrays(np.append(tilted.x, 0.0), np.append((1.0 - b[-1]) * tilted.w, b[-1]))
