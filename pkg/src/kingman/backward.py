"""Finite backward sequences and quenched backward limits.

For a terminal measure ``P_n^n`` with top atom h, the backward sequence is

    P_j^n(dx) = (1 - b_{j+1}) x P_{j+1}^n(dx) / int y P_{j+1}^n(dy) + b_{j+1} Q(dx),

run from j = n-1 down to 0, consuming ``b_n, b_{n-1}, ..., b_1``.  With
``P_n^n = delta_h`` the sequence is monotone in n (the part below h only
grows), so ``P_0^n`` converges in total variation and the part of ``P_0^n``
inherited from the terminal, ``H_n = prod_{l=1}^n h(1-b_l) / int y P_l^n``,
decreases to the condensate mass ``G_0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from kingman.errors import DomainError, NonConvergenceError, NumericError, UsageError
from kingman.forward import check_betas, check_mutant
from kingman.measure import (
    MERGE_TOL,
    DiscreteMeasure,
    common_support,
    delta,
    from_arrays,
    support_sup,
    weights_on,
)
from kingman.mutation import BetaStream

DEFAULT_TOL = 1e-10
DEFAULT_WINDOW = 64
DEFAULT_DEPTH_CAP = 10**6
DEFAULT_BURN_IN = 512
SERIES_CUTOFF = 1e-14


@dataclass(frozen=True)
class BackwardPass:
    """``measures[j] = P_j^n`` for j = 0..n (so ``measures[n]`` is the terminal).

    ``mass_at_h[j]`` is the mass of ``P_j^n`` inherited from the terminal; for
    ``terminal = delta_h`` it equals ``prod_{l=j+1}^n h(1-b_l) / means[l]``.
    """

    measures: list
    terminal: DiscreteMeasure
    betas: np.ndarray
    mass_at_h: np.ndarray
    means: np.ndarray
    Q: DiscreteMeasure
    h: float

    @property
    def depth(self) -> int:
        return len(self.betas)


@dataclass(frozen=True)
class QuenchedLimitResult:
    """Approximation of ``I_0 = G_0(beta_1, beta_2, ...)`` and its condensate mass.

    ``stage_means[l]`` approximates ``int y G_l(dy)`` and ``betas[l-1]`` is
    ``beta_l``; both are kept for the series representation of the
    condensate mass.
    """

    limit: DiscreteMeasure
    condensate_mass: float
    depth_used: int
    mass_gap: float
    mean_fitness: float
    stage_means: np.ndarray
    betas: np.ndarray
    h: float


def _check_terminal(terminal: DiscreteMeasure, h: float):
    top = support_sup(terminal).sup_point
    if abs(top - h) > MERGE_TOL:
        raise DomainError(f"terminal measure tops out at {top}, not at h = {h}")


def _run(x, w, q, betas, keep: int = 0):
    """Backward kernel on a fixed grid.

    Returns ``(w_0, means, inherited, stages)`` where ``means[l]`` is the mean
    of stage l (l = 0..n), ``inherited[j]`` the terminal-inherited mass of
    stage j, and ``stages`` the weight rows of stages 0..keep-1 (or None).
    """
    n = betas.size
    means = np.empty(n + 1)
    inherited = np.empty(n + 1)
    stages = np.empty((keep, x.size)) if keep else None
    u = w.copy()
    inherited[n] = 1.0
    for j in range(n - 1, -1, -1):
        m = float(x @ w)
        means[j + 1] = m
        b = betas[j]
        f = (1.0 - b) / m
        w = f * (x * w) + b * q
        u = f * (x * u)
        t = w.sum()
        if abs(t - 1.0) > 1e-14:
            if abs(t - 1.0) > 1e-8:
                raise NumericError(f"normalisation lost at stage {j}: total {t}")
            w = w / t
        inherited[j] = u.sum()
        if j < keep:
            stages[j] = w
    means[0] = float(x @ w)
    return w, means, inherited, stages


def _grid(terminal: DiscreteMeasure, Q: DiscreteMeasure, h: float):
    x = common_support(terminal, Q, extra=[h])
    return x, weights_on(terminal, x), weights_on(Q, x)


def backward_pass(terminal: DiscreteMeasure, betas, Q: DiscreteMeasure, h: float) -> BackwardPass:
    """All stages ``P_n^n, ..., P_0^n`` for ``betas = (b_1, ..., b_n)``."""
    check_mutant(Q)
    b = check_betas(betas)
    _check_terminal(terminal, h)
    x, w, q = _grid(terminal, Q, h)
    n = b.size
    _, means, inherited, stages = _run(x, w, q, b, keep=n)
    measures = [from_arrays(x, row) for row in stages] if n else []
    measures.append(terminal)
    return BackwardPass(measures, terminal, b, inherited, means, Q, float(h))


def backward_batch(terminal: DiscreteMeasure, betas: np.ndarray, Q: DiscreteMeasure, h: float):
    """``P_0^n`` for every row of ``betas`` at once; returns ``(grid, weights)``."""
    check_mutant(Q)
    b = check_betas(betas)
    if b.ndim != 2:
        raise UsageError("betas must be a (replicas, depth) array")
    _check_terminal(terminal, h)
    x, w0, q = _grid(terminal, Q, h)
    w = np.tile(w0, (b.shape[0], 1))
    for j in range(b.shape[1] - 1, -1, -1):
        m = w @ x
        bj = b[:, j]
        w = ((1.0 - bj) / m)[:, None] * (w * x) + bj[:, None] * q
        w = w / w.sum(axis=1, keepdims=True)
    return x, w


def _take(stream, n: int) -> np.ndarray:
    if isinstance(stream, BetaStream):
        return stream.take(n)
    arr = np.asarray(stream, dtype=float)
    if arr.size < n:
        raise UsageError(f"beta list holds {arr.size} values, {n} needed")
    return arr[:n]


def _available(stream) -> float:
    return math.inf if isinstance(stream, BetaStream) else len(stream)


def _result(x, w, means, inherited, betas, q_at_h, h, gap, depth, top_index=0):
    limit = from_arrays(x, w)
    mass = limit.mass_at(h) if not q_at_h else float(inherited[top_index])
    return QuenchedLimitResult(
        limit=limit,
        condensate_mass=min(1.0, max(0.0, mass)),
        depth_used=depth,
        mass_gap=float(gap),
        mean_fitness=float(means[top_index]),
        stage_means=means[top_index:],
        betas=betas[top_index:],
        h=float(h),
    )


def quenched_limit(
    stream,
    Q: DiscreteMeasure,
    h: float,
    tol: float = DEFAULT_TOL,
    window: int = DEFAULT_WINDOW,
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> QuenchedLimitResult:
    """Backward limit ``G_0(beta_1, beta_2, ...)`` from terminal ``delta_h``.

    Depth doubles from ``window`` until the inherited mass satisfies
    ``H_n - H_{n+window} < tol``; the deeper of the two passes is returned.
    The gap is a stopping heuristic, not a proven bound on ``H_n - G_0``.
    """
    if tol <= 0 or window < 1:
        raise UsageError("tol must be positive and window at least 1")
    check_mutant(Q)
    cap = min(depth_cap, _available(stream))
    x, w0, q = _grid(delta(h), Q, h)
    q_at_h = Q.mass_at(h) > 0.0
    n = window
    while True:
        final = n + window >= cap
        if final:
            n = max(1, int(cap) - window)
        deep = n + window
        b = _take(stream, deep)
        _, _, inh_n, _ = _run(x, w0, q, b[:n])
        w, means, inh, _ = _run(x, w0, q, b)
        gap = inh_n[0] - inh[0]
        if gap < tol:
            return _result(x, w, means, inh, b, q_at_h, h, gap, deep)
        if final:
            raise NonConvergenceError(
                f"backward limit not settled at depth {deep}: mass gap {gap:.3e} >= tol {tol:.1e}",
                depth=deep,
                mass_gap=float(gap),
                bracket=(float(inh[0]), 0.0),
            )
        n *= 2


def quenched_sequence(
    stream,
    Q: DiscreteMeasure,
    h: float,
    J: int,
    burn_in: int = DEFAULT_BURN_IN,
    tol: float = DEFAULT_TOL,
    window: int = DEFAULT_WINDOW,
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> list[QuenchedLimitResult]:
    """Approximations of ``I_0, ..., I_{J-1}`` from one pass of depth ``J + burn_in``.

    The burn-in doubles until stage ``J-1`` moves by less than ``tol`` in
    inherited mass when the pass is deepened by ``window``.
    """
    if J < 1 or burn_in < 1:
        raise UsageError("J and burn_in must be positive")
    check_mutant(Q)
    cap = min(depth_cap, _available(stream))
    x, w0, q = _grid(delta(h), Q, h)
    q_at_h = Q.mass_at(h) > 0.0
    while True:
        n = J + burn_in
        final = n + window >= cap
        if final:
            n = int(cap) - window
            if n < J:
                raise UsageError(f"depth cap {cap} too small for J = {J}")
        b = _take(stream, n + window)
        _, _, inh_n, _ = _run(x, w0, q, b[:n])
        _, means, inh, stages = _run(x, w0, q, b, keep=J)
        gaps = inh_n[:J] - inh[:J]
        if gaps[-1] < tol:
            return [
                _result(x, stages[j], means, inh, b, q_at_h, h, gaps[j], n + window - j, top_index=j)
                for j in range(J)
            ]
        if final:
            raise NonConvergenceError(
                f"quenched sequence not settled at depth {n + window}: gap {gaps[-1]:.3e}",
                depth=n + window,
                mass_gap=float(gaps[-1]),
                bracket=(float(inh[J - 1]), 0.0),
            )
        burn_in *= 2


def condensate_mass_routes(pass_: BackwardPass, limit: QuenchedLimitResult) -> tuple[float, float]:
    """Condensate mass two ways.

    product route: ``prod_{l=1}^n h(1-b_l) / int y P_l^n`` of the finite pass;
    series route: ``1 - sum_j prod_{l=1}^j ((1-b_l) / int y G_l) b_{j+1} m_j``
    with ``int y G_l`` taken from the (deeper) limit and ``m_j = int x^j Q``.
    """
    product = float(pass_.mass_at_h[0])
    Q = pass_.Q
    b = np.asarray(limit.betas)
    M = np.asarray(limit.stage_means)
    n = min(b.size, M.size - 1)
    log_coef = np.concatenate(([0.0], np.cumsum(np.log1p(-b[:n]) - np.log(M[1 : n + 1]))))
    lx = np.log(np.where(Q.x > 0, Q.x, 1.0))
    zero_atom = Q.x <= 0
    lwq = np.log(Q.w)
    terms = []
    chunk = 256
    for start in range(0, n, chunk):
        j = np.arange(start, min(n, start + chunk))
        powers = j[:, None] * lx[None, :]
        powers = np.where(zero_atom[None, :] & (j[:, None] > 0), -np.inf, powers)
        log_m = logsumexp(powers + lwq[None, :], axis=1)
        bound = log_coef[j] + log_m
        with np.errstate(divide="ignore"):
            terms.append(np.exp(bound + np.log(b[j])))
        if np.all(bound < math.log(SERIES_CUTOFF)):
            break
    series = 1.0 - math.fsum(np.concatenate(terms)) if terms else 1.0
    return product, series


def tail_mass_diagnostic(sequence: list[QuenchedLimitResult]) -> np.ndarray:
    """``int (y/h)^n G_n(dy) * prod_{l=1}^n h(1-b_l) / int y G_l(dy)`` for n = 0..J-1.

    Non-increasing in n with limit ``G_0`` when there is a condensate.
    """
    first = sequence[0]
    h = first.h
    b = np.asarray(first.betas)
    means = np.array([r.mean_fitness for r in sequence])
    J = len(sequence)
    steps = math.log(h) + np.log1p(-b[: J - 1]) - np.log(means[1:J])
    log_prod = np.concatenate(([0.0], np.cumsum(steps)))
    out = np.empty(J)
    for n, r in enumerate(sequence):
        lim = r.limit
        with np.errstate(divide="ignore"):
            lx = np.log(lim.x / h)
        powers = np.where(lim.x > 0, n * lx, -np.inf if n > 0 else 0.0)
        out[n] = math.exp(logsumexp(powers + np.log(lim.w)) + log_prod[n])
    return out
