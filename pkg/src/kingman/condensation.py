"""Condensation criterion for the random model.

The sign of ``E[ln(h(1 - beta) / int y I_Q(dy))]`` decides whether mass
condenses at the largest fitness value h (``I_Q`` is the quenched backward
limit at ``h = S_Q``).  The first term is exact (quadrature); the second is
an ergodic average along one quenched sequence, with a batch-means interval,
cross-checked against independent replicas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from kingman.backward import (
    DEFAULT_BURN_IN,
    DEFAULT_DEPTH_CAP,
    DEFAULT_TOL,
    DEFAULT_WINDOW,
    quenched_limit,
    quenched_sequence,
)
from kingman.errors import ConfigError, DomainError
from kingman.forward import check_mutant, growth_rate_h
from kingman.measure import MERGE_TOL, DiscreteMeasure, support_sup
from kingman.mutation import BetaStream, MutationLaw, SeedSpec
from kingman.stats import batch_means_ci

# sign decisions treat |criterion| <= 1e-12 as zero, mirroring the equilibrium case tie
SIGN_TOL = 1e-12
MASS_TOL = 1e-6


@dataclass(frozen=True)
class CriterionConfig:
    replicas: int = 16
    depth: int = 4096
    burn_in: int = DEFAULT_BURN_IN
    batches: int = 32
    tol: float = DEFAULT_TOL
    window: int = DEFAULT_WINDOW
    depth_cap: int = DEFAULT_DEPTH_CAP
    mass_tol: float = MASS_TOL
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0))


@dataclass(frozen=True)
class CriterionEstimate:
    point: float
    ci_low: float
    ci_high: float
    term_log_h1mb: float
    term_log_meanfit: float
    samples: int
    method: str
    replica_mean: float | None = None
    replica_se: float | None = None

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


@dataclass(frozen=True)
class CondensationVerdict:
    verdict: str  # Condensation | NoCondensation | Inconclusive | NotApplicable
    reason: str
    estimate: CriterionEstimate | None
    boundary_case: bool


def _validate(law: MutationLaw, Q: DiscreteMeasure, h: float, replicas: int):
    check_mutant(Q)
    s_q = support_sup(Q).sup_point
    if h < s_q - MERGE_TOL or h > 1.0:
        raise DomainError(f"need S_Q <= h <= 1, got h = {h}, S_Q = {s_q}")
    if replicas < 2:
        raise ConfigError("criterion needs at least 2 replicas")
    return s_q


def criterion_expectation(
    law: MutationLaw,
    Q: DiscreteMeasure,
    h: float,
    config: CriterionConfig = CriterionConfig(),
    reference_h: float | None = None,
) -> CriterionEstimate:
    """Estimate ``E[ln h(1-beta)] - E[ln int y I(dy)]``.

    ``I`` is the quenched limit at ``reference_h`` (default ``S_Q``, which
    gives the condensation criterion).  Stream 0 of ``config.seed`` feeds the
    ergodic series of length ``config.depth``; streams 1..replicas feed the
    independent-replica cross-check.
    """
    s_q = _validate(law, Q, h, config.replicas)
    href = s_q if reference_h is None else reference_h
    g_h = growth_rate_h(law, h)
    if not math.isfinite(g_h):
        raise ConfigError("E[ln(1 - beta)] is not finite for this law")
    kw = dict(tol=config.tol, window=config.window, depth_cap=config.depth_cap)
    seq = quenched_sequence(
        BetaStream(law, config.seed.child(0)), Q, href, J=config.depth, burn_in=config.burn_in, **kw
    )
    series = np.log([r.mean_fitness for r in seq])
    ci = batch_means_ci(series, config.batches)
    reps = np.array(
        [math.log(quenched_limit(BetaStream(law, config.seed.child(r)), Q, href, **kw).mean_fitness)
         for r in range(1, config.replicas + 1)]
    )
    point = g_h - ci.mean
    return CriterionEstimate(
        point=point,
        ci_low=point - ci.halfwidth,
        ci_high=point + ci.halfwidth,
        term_log_h1mb=g_h,
        term_log_meanfit=ci.mean,
        samples=len(series),
        method=f"batch means ({ci.batches} batches) over ergodic series at h={href:.6g}; "
        f"{config.replicas} independent replicas as cross-check",
        replica_mean=float(reps.mean()),
        replica_se=float(reps.std(ddof=1) / math.sqrt(reps.size)),
    )


def classify(law: MutationLaw, Q: DiscreteMeasure, h: float, config: CriterionConfig = CriterionConfig()) -> CondensationVerdict:
    """Condensation verdict at h.

    h > S_Q: Condensation iff the interval lies above 0, NoCondensation iff
    it lies at or below 0.  h = S_Q: only NoCondensation (interval below 0)
    can be concluded.  Q(h) > 0 makes the question moot (NotApplicable).
    """
    s_q = _validate(law, Q, h, config.replicas)
    boundary = abs(h - s_q) <= MERGE_TOL
    est = criterion_expectation(law, Q, h, config)
    if Q.mass_at(h) > 0.0:
        return CondensationVerdict("NotApplicable", "Q has an atom at h", est, boundary)
    if boundary:
        if est.ci_high < -SIGN_TOL:
            return CondensationVerdict("NoCondensation", "criterion interval below 0 at h = S_Q", est, True)
        return CondensationVerdict(
            "Inconclusive", "h = S_Q with criterion not below 0: sufficiency-only regime", est, True
        )
    if est.ci_low > SIGN_TOL:
        return CondensationVerdict("Condensation", "criterion interval above 0", est, False)
    if est.ci_high <= SIGN_TOL:
        return CondensationVerdict("NoCondensation", "criterion interval at or below 0", est, False)
    return CondensationVerdict("Inconclusive", "criterion interval straddles 0", est, False)


def empirical_condensate_probe(
    law: MutationLaw,
    Q: DiscreteMeasure,
    h: float,
    replicas: int,
    config: CriterionConfig = CriterionConfig(),
) -> tuple[float, np.ndarray]:
    """Fraction of independent backward limits whose mass at h exceeds ``mass_tol``."""
    check_mutant(Q)
    if Q.mass_at(h) > 0.0:
        raise DomainError("the probe requires Q(h) = 0")
    kw = dict(tol=config.tol, window=config.window, depth_cap=config.depth_cap)
    masses = np.array(
        [quenched_limit(BetaStream(law, config.seed.child(r)), Q, h, **kw).condensate_mass for r in range(replicas)]
    )
    return float(np.mean(masses > config.mass_tol)), masses


def growth_rate_comparison(
    law: MutationLaw, Q: DiscreteMeasure, h: float, config: CriterionConfig = CriterionConfig()
) -> tuple[float, float, float]:
    """``(gr(h), gr(Q), gr(h) - gr(Q))`` with ``gr(Q) = E[ln int x I_Q(dx)]``."""
    est = criterion_expectation(law, Q, h, config)
    return est.term_log_h1mb, est.term_log_meanfit, est.point


def with_seed(config: CriterionConfig, master_seed: int) -> CriterionConfig:
    return replace(config, seed=SeedSpec(master_seed))
