"""Executable checks of the model's identities, used by ``kingman validate`` and the acceptance tests.

Statistical checks compare one-dimensional functionals (mean fitness, mass
at a point) of random measures with a two-sample KS test at level 0.01.
Each is run on three disjoint seeds and passes on a majority.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from kingman import backward as bw
from kingman.condensation import CriterionConfig, classify, criterion_expectation, empirical_condensate_probe
from kingman.equilibrium import (
    MEAN_FITNESS_TOL,
    RESIDUAL_TOL,
    equilibrium,
    equilibrium_mean_fitness,
    hazard_integral,
    solve_theta,
    theta_equation,
)
from kingman.errors import UsageError
from kingman.forward import (
    expansion_oracle,
    forward_batch,
    forward_step,
    forward_trajectory,
    q_zero_oracle,
    unnormalized_trajectory,
)
from kingman.measure import (
    MERGE_TOL,
    ORDER_TOL,
    DiscreteMeasure,
    canonicalize,
    cdf,
    component_leq,
    delta,
    from_arrays,
    moment,
    support_sup,
    tv_distance,
)
from kingman.mutation import BetaStream, MutationLaw, SeedSpec, sample_matrix, sample_sequence
from kingman.stats import KsResult, ks_two_sample
from kingman.two_atom import TwoAtomModel, scalar_backward

ALPHA = 0.01


@dataclass
class CheckResult:
    name: str
    passed: bool
    statistic: float
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"check_name": self.name, "pass": bool(self.passed), "statistic": _jsonable(self.statistic),
                "details": {k: _jsonable(v) for k, v in self.details.items()}}

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: statistic={self.statistic:.3e} ({self.seconds:.2f}s)"


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# statistical harness


def _means(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return w @ x


def _mass_at(x: np.ndarray, w: np.ndarray, loc: float) -> np.ndarray:
    i = int(np.argmin(np.abs(x - loc)))
    if abs(x[i] - loc) > MERGE_TOL:
        return np.zeros(w.shape[0])
    return w[:, i]


def _functional(x, w, functional: str, h: float):
    if functional == "mean":
        return _means(x, w)
    if functional == "mass_at_h":
        return _mass_at(x, w, h)
    raise UsageError(f"unknown functional {functional!r}")


def duality_test(law, Q, h, n, replicas, seed: SeedSpec, backward_depth: int | None = None,
                 functional: str = "mean") -> KsResult:
    """Forward ``P_n`` from ``delta_h`` against backward ``P_0^n`` from ``delta_h`` (independent streams)."""
    nb = n if backward_depth is None else backward_depth
    xf, wf = forward_batch(delta(h), sample_matrix(law, seed.child(0), replicas, n), Q)
    xb, wb = bw.backward_batch(delta(h), sample_matrix(law, seed.child(1), replicas, nb), Q, h)
    return ks_two_sample(_functional(xf, wf, functional, h), _functional(xb, wb, functional, h))


def invariance_test(law, Q, h, replicas, depth, seed: SeedSpec, functional: str = "mean") -> KsResult:
    """Samples of ``nu ~ I`` against one fresh forward step applied to independent copies of ``nu``."""
    x, w = bw.backward_batch(delta(h), sample_matrix(law, seed.child(0), replicas, depth), Q, h)
    x2, w2 = bw.backward_batch(delta(h), sample_matrix(law, seed.child(1), replicas, depth), Q, h)
    fresh = sample_matrix(law, seed.child(2), replicas, 1)
    from kingman.forward import step_weights
    from kingman.measure import weights_on

    stepped, _ = step_weights(x2, w2, fresh[:, 0], weights_on(Q, x2))
    return ks_two_sample(_functional(x, w, functional, h), _functional(x2, stepped, functional, h))


def global_stability_test(law, Q, h, P0_a: DiscreteMeasure, P0_b: DiscreteMeasure, n: int = 200,
                          replicas: int = 2000, seed: SeedSpec = SeedSpec(0), strict: bool = True,
                          functional: str = "mean") -> KsResult:
    """``P_n`` from two initial measures with the same top atom h; equal in law for large n.

    ``strict=False`` drops the equal-top precondition (negative controls).
    """
    if strict:
        for p in (P0_a, P0_b):
            if abs(support_sup(p).sup_point - h) > MERGE_TOL:
                raise UsageError("both initial measures must top out at h")
    xa, wa = forward_batch(P0_a, sample_matrix(law, seed.child(0), replicas, n), Q)
    xb, wb = forward_batch(P0_b, sample_matrix(law, seed.child(1), replicas, n), Q)
    return ks_two_sample(_functional(xa, wa, functional, h), _functional(xb, wb, functional, h))


def q_zero_test(law, P0: DiscreteMeasure, n: int, replicas: int, seed: SeedSpec) -> KsResult:
    """With ``Q = delta_0`` the mass at 0 of ``P_n`` has the law of beta."""
    betas = sample_matrix(law, seed.child(0), replicas, n)
    mass0 = np.array([q_zero_oracle(P0, row).mass_at(0.0) for row in betas])
    direct = sample_matrix(law, seed.child(1), replicas, 1)[:, 0]
    return ks_two_sample(mass0, direct)


def uniqueness_test(law, Q, replicas: int, seed: SeedSpec, depth_a: int = 150, depth_b: int = 200) -> KsResult:
    """Backward limits at ``h = S_Q`` from two seeds and depths agree in law."""
    s_q = support_sup(Q).sup_point
    xa, wa = bw.backward_batch(delta(s_q), sample_matrix(law, seed.child(0), replicas, depth_a), Q, s_q)
    xb, wb = bw.backward_batch(delta(s_q), sample_matrix(law, seed.child(1), replicas, depth_b), Q, s_q)
    return ks_two_sample(_means(xa, wa), _means(xb, wb))


def majority(test, seeds=(101, 202, 303), alpha: float = ALPHA) -> tuple[bool, list[KsResult]]:
    """Run ``test(SeedSpec(s))`` for each seed; pass when most p-values exceed ``alpha``."""
    results = [test(SeedSpec(s)) for s in seeds]
    wins = sum(r.p_value > alpha for r in results)
    return wins * 2 > len(results), results


def mean_ratio_bound_check(u1: DiscreteMeasure, u2: DiscreteMeasure, h: float, a: float, eps: float) -> bool:
    """``int y u1 >= int y u2 / (1 - eps (h - a))`` given its preconditions."""
    for u in (u1, u2):
        if abs(support_sup(u).sup_point - h) > MERGE_TOL:
            raise UsageError("both measures must top out at h")
    if not 0.0 < a < h:
        raise UsageError("a must lie in (0, h)")
    if eps < 0.0:
        raise UsageError("eps must be nonnegative")
    if not component_leq(u1, u2, h, open_at_a=True):
        raise UsageError("u1 is not a component of u2 below h")
    if cdf(u1, a) + eps > cdf(u2, a) + ORDER_TOL:
        raise UsageError("distribution-function gap at a is smaller than eps")
    lhs = moment(u1, 1)
    rhs = moment(u2, 1) / (1.0 - eps * (h - a))
    return lhs >= rhs * (1.0 - 1e-12)


# random instances


def random_Q(rng: np.random.Generator, max_atoms: int = 16, top: float = 0.95) -> DiscreteMeasure:
    k = int(rng.integers(1, max_atoms + 1))
    x = rng.uniform(0.02, top, size=k)
    return canonicalize(zip(x, rng.dirichlet(np.ones(k))))


def random_law(rng: np.random.Generator) -> MutationLaw:
    kind = rng.integers(0, 4)
    if kind == 0:
        return MutationLaw.constant(float(rng.uniform(0.02, 0.9)))
    if kind == 1:
        k = int(rng.integers(2, 5))
        return MutationLaw.discrete(list(zip(rng.uniform(0.0, 0.9, size=k), rng.dirichlet(np.ones(k)))))
    if kind == 2:
        lo = float(rng.uniform(0.0, 0.5))
        return MutationLaw.uniform(lo, float(rng.uniform(lo + 0.05, 0.95)))
    return MutationLaw.beta(float(rng.uniform(0.5, 4)), float(rng.uniform(0.5, 6)))


def random_h(rng: np.random.Generator, Q: DiscreteMeasure) -> float:
    s_q = support_sup(Q).sup_point
    return s_q if rng.random() < 0.25 else float(rng.uniform(s_q, 1.0))


def _timed(name, fn) -> CheckResult:
    t0 = time.perf_counter()
    res = fn()
    res.name = name
    res.seconds = time.perf_counter() - t0
    return res


# acceptance-level checks


def check_kingman_fixed_point(instances: int = 100, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, cases = 0.0, {"One": 0, "Two": 0}
    for _ in range(instances):
        Q = random_Q(rng)
        b = float(rng.uniform(0.01, 0.99))
        h = random_h(rng, Q)
        eq = equilibrium(b, Q, h)
        cases[eq.case_tag] += 1
        worst = max(worst, tv_distance(forward_step(eq.measure, b, Q), eq.measure))
    return CheckResult("kingman_fixed_point", worst <= 1e-10, worst, {"cases": [cases["One"], cases["Two"]]})


def check_theta_residual(instances: int = 100, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        Q = random_Q(rng)
        b = float(rng.uniform(0.01, 0.99))
        h = random_h(rng, Q)
        eq = equilibrium(b, Q, h)
        if eq.case_tag == "One":
            worst = max(worst, abs(theta_equation(eq.theta, b, Q) - 1.0))
    ref = solve_theta(0.5, canonicalize([(0.2, 0.5), (0.8, 0.5)]))
    ref_err = abs(ref - (0.75 + math.sqrt(0.2425)) / 2.0)
    ok = worst <= RESIDUAL_TOL and ref_err <= 1e-6 and abs(ref - 0.621221) <= 1e-6
    return CheckResult("theta_residual", ok, worst, {"theta_reference": ref, "reference_error": ref_err})


def check_equilibrium_mean_fitness(instances: int = 100, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        Q = random_Q(rng)
        b = float(rng.uniform(0.01, 0.99))
        h = random_h(rng, Q)
        eq = equilibrium(b, Q, h)
        computed, closed = equilibrium_mean_fitness(eq, b, h)
        worst = max(worst, abs(computed - closed))
    return CheckResult("equilibrium_mean_fitness", worst <= MEAN_FITNESS_TOL, worst)


def check_forward_convergence(max_steps: int = 5000) -> CheckResult:
    Q, target = delta(0.5), canonicalize([(0.5, 0.6), (1.0, 0.4)])
    P = delta(1.0)
    for n in range(1, max_steps + 1):
        P = forward_step(P, 0.3, Q)
        d = tv_distance(P, target)
        if d <= 1e-6:
            return CheckResult("forward_to_kingman", True, d, {"steps": n})
    return CheckResult("forward_to_kingman", False, d, {"steps": max_steps})


def check_expansion(instances: int = 50, max_n: int = 30, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        Q = random_Q(rng)
        P0 = random_Q(rng, top=1.0)
        law = random_law(rng)
        n = int(rng.integers(0, max_n + 1))
        betas = sample_sequence(law, SeedSpec(seed, i), n)
        tr = forward_trajectory(P0, betas, Q)
        for k in range(n + 1):
            worst = max(worst, tv_distance(expansion_oracle(P0, betas, Q, k, tr.means), tr.measures[k]))
    return CheckResult("expansion_oracle", worst <= 1e-9, worst)


def check_unnormalized(instances: int = 50, max_n: int = 300, seed: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        Q = random_Q(rng)
        P0 = random_Q(rng, top=1.0)
        law = random_law(rng)
        n = int(rng.integers(1, max_n + 1))
        betas = sample_sequence(law, SeedSpec(seed, i), n)
        tr = forward_trajectory(P0, betas, Q)
        un = unnormalized_trajectory(P0, betas, Q)
        ref = np.concatenate(([0.0], np.cumsum(np.log(tr.means[:-1]))))
        err = np.abs(np.asarray(un.log_totals) - ref)[1:]
        rel = err / np.abs(ref[1:]) / np.arange(1, n + 1)
        worst = max(worst, float(np.max(rel)))
    return CheckResult("unnormalised_identity", worst <= 1e-10, worst)


def check_backward_monotonicity(streams: int = 20, max_n: int = 200, seed: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for s in range(streams):
        Q = random_Q(rng)
        h = random_h(rng, Q)
        law = random_law(rng)
        b = sample_sequence(law, SeedSpec(seed, s), max_n + 1)
        x, w0, q = bw._grid(delta(h), Q, h)
        below = x < h - MERGE_TOL
        at_h = ~below
        prev = None
        for n in range(0, max_n + 1):
            _, _, _, st = bw._run(x, w0, q, b[:n], keep=n)
            stages = np.vstack([st, w0[None, :]]) if n else w0[None, :]
            if prev is not None:
                # stage j of depth n-1 vs stage j of depth n, for j <= n-1
                diff_below = prev[:, below] - stages[:n, below]
                diff_h = stages[:n, at_h] - prev[:, at_h]
                worst = max(worst, float(diff_below.max(initial=0.0)), float(diff_h.max(initial=0.0)))
                violations += int(np.sum(diff_below > ORDER_TOL)) + int(np.sum(diff_h > ORDER_TOL))
            prev = stages
        # spot-check the array comparison against the measure-level predicate
        p1 = bw.backward_pass(delta(h), b[:max_n], Q, h)
        p2 = bw.backward_pass(delta(h), b[: max_n + 1], Q, h)
        for j in range(0, max_n + 1, 25):
            if not component_leq(p1.measures[j], p2.measures[j], h, open_at_a=True):
                violations += 1
    return CheckResult("backward_monotonicity", violations == 0, worst, {"violations": violations})


def check_condensate_routes(instances: int = 20, seed: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_routes, worst_rec = 0.0, 0.0
    tol = 1e-10
    for i in range(instances):
        Q = random_Q(rng, top=0.9)
        s_q = support_sup(Q).sup_point
        h = float(rng.uniform(s_q + 0.01, 1.0))
        law = random_law(rng)
        stream = BetaStream(law, SeedSpec(seed, i))
        lim = bw.quenched_limit(stream, Q, h, tol=tol)
        pass_ = bw.backward_pass(delta(h), lim.betas, Q, h)
        prod, series = bw.condensate_mass_routes(pass_, lim)
        worst_routes = max(worst_routes, abs(prod - series))
        seq = bw.quenched_sequence(stream, Q, h, J=64, tol=tol)
        G = np.array([r.condensate_mass for r in seq])
        M = np.array([r.mean_fitness for r in seq])
        b = np.asarray(seq[0].betas)
        pred = G[1:] * h * (1.0 - b[: len(seq) - 1]) / M[1:]
        worst_rec = max(worst_rec, float(np.max(np.abs(G[:-1] - pred))))
    ok = worst_routes <= 1e-8 and worst_rec <= 1e-8
    return CheckResult("condensate_routes", ok, max(worst_routes, worst_rec),
                       {"route_gap": worst_routes, "recursion_residual": worst_rec})


def check_two_atom_equivalence(instances: int = 50, seed: int = 6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        c = float(rng.uniform(0.05, 0.9))
        h = float(rng.uniform(c + 0.01, 1.0))
        law = random_law(rng)
        lim = bw.quenched_limit(BetaStream(law, SeedSpec(seed, i)), delta(c), h)
        worst = max(worst, abs(lim.limit.mass_at(c) - scalar_backward(TwoAtomModel(c, h, law), lim.betas)))
    return CheckResult("two_atom_equivalence", worst <= 1e-10, worst)


def check_criterion_grid(config: CriterionConfig | None = None) -> CheckResult:
    config = config or CriterionConfig(replicas=2, depth=64, batches=32)
    grid = np.round(np.linspace(0.05, 0.95, 10), 10)
    agree = inconclusive = 0
    worst_bound = -math.inf
    for b in grid:
        for c in grid:
            Q = delta(float(c))
            v = classify(MutationLaw.constant(float(b)), Q, 1.0, config)
            kingman_cond = hazard_integral(Q, 1.0) < 1.0 / b - 1e-12
            if v.verdict == "Inconclusive":
                inconclusive += 1
                continue
            agree += (v.verdict == "Condensation") == kingman_cond
            est = v.estimate
            worst_bound = max(worst_bound, est.point - (-math.log(moment(Q, 1)) + 3 * est.halfwidth))
    ok = agree == 100 - inconclusive and worst_bound <= 0.0
    return CheckResult("criterion_vs_kingman", ok, agree / 100.0,
                       {"agree": agree, "inconclusive": inconclusive, "bound_excess": worst_bound})


def check_random_law_condensation(config: CriterionConfig | None = None) -> CheckResult:
    config = config or CriterionConfig()
    law = MutationLaw.discrete([(0.1, 0.5), (0.5, 0.5)])
    Q = delta(0.5)
    est = criterion_expectation(law, Q, 1.0, config)
    expected = 0.5 * (math.log(0.9) + math.log(0.5)) + math.log(2.0)
    frac, masses = empirical_condensate_probe(law, Q, 1.0, 50, config)
    err = abs(est.point - expected)
    bound = est.point <= -math.log(moment(Q, 1)) + 3 * est.halfwidth
    ok = err <= 1e-9 and frac == 1.0 and bound
    return CheckResult("random_law_condensation", ok, err,
                       {"point": est.point, "fraction_positive": frac, "min_mass": float(masses.min())})


def check_mean_ratio_fuzz(trials: int = 10_000, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(trials):
        u1, u2, h, a, eps = random_mean_ratio_instance(rng)
        if not mean_ratio_bound_check(u1, u2, h, a, eps):
            violations += 1
    return CheckResult("mean_ratio_bound", violations == 0, float(violations), {"trials": trials})


def random_mean_ratio_instance(rng: np.random.Generator):
    """Pair ``u1 <=_{h-} u2`` with a distribution-function gap at some a in (0, h)."""
    h = float(rng.uniform(0.2, 1.0))
    k = int(rng.integers(1, 8))
    x = np.sort(rng.uniform(0.0, h, size=k))
    x = x[x < h - 1e-6]
    if x.size == 0:
        x = np.array([h / 2])
    w2 = rng.dirichlet(np.ones(x.size + 1))
    below2 = w2[:-1]
    below1 = below2 * rng.uniform(0.0, 1.0, size=x.size)
    u2 = from_arrays(np.append(x, h), w2)
    u1 = from_arrays(np.append(x, h), np.append(below1, 1.0 - below1.sum()))
    a = float(rng.choice(x)) if x[0] > 0 else float(x[-1])
    if a <= 0.0:
        a = h / 2
    gap = cdf(u2, a) - cdf(u1, a)
    if gap <= 0.0:
        # force a strict gap at the lowest positive atom
        below1[0] = 0.0
        u1 = from_arrays(np.append(x, h), np.append(below1, 1.0 - below1.sum()))
        a = float(max(x[0], 1e-3))
        gap = cdf(u2, a) - cdf(u1, a)
    eps = gap * float(rng.uniform(0.05, 1.0))
    return u1, u2, h, a, eps


STAT_LAW = MutationLaw.discrete([(0.05, 0.5), (0.4, 0.5)])
STAT_Q = canonicalize([(0.2, 0.3), (0.5, 0.4), (0.7, 0.3)])


def check_duality(replicas: int = 2000, n: int = 50) -> CheckResult:
    ok, res = majority(lambda s: duality_test(STAT_LAW, STAT_Q, 1.0, n, replicas, s))
    return _stat_result("duality_forward_backward", ok, res)


def check_invariance(replicas: int = 2000, depth: int = 200) -> CheckResult:
    ok, res = majority(lambda s: invariance_test(STAT_LAW, STAT_Q, 1.0, replicas, depth, s))
    return _stat_result("invariant_measure", ok, res)


def check_global_stability(replicas: int = 2000, n: int = 200) -> CheckResult:
    s_q = support_sup(STAT_Q).sup_point
    P0_b = canonicalize([(s_q / 2, 0.5), (1.0, 0.5)])
    ok, res = majority(lambda s: global_stability_test(STAT_LAW, STAT_Q, 1.0, delta(1.0), P0_b, n, replicas, s))
    return _stat_result("global_stability", ok, res)


def check_q_zero(replicas: int = 2000, n: int = 200) -> CheckResult:
    P0 = canonicalize([(0.5, 0.5), (1.0, 0.5)])
    ok, res = majority(lambda s: q_zero_test(STAT_LAW, P0, n, replicas, s))
    return _stat_result("q_zero_closed_form", ok, res)


def check_uniqueness(replicas: int = 2000) -> CheckResult:
    ok, res = majority(lambda s: uniqueness_test(STAT_LAW, STAT_Q, replicas, s))
    return _stat_result("invariant_uniqueness_on_SQ", ok, res)


def _stat_result(name, ok, res: list[KsResult]) -> CheckResult:
    return CheckResult(name, ok, max(r.statistic for r in res),
                       {"p_values": [r.p_value for r in res], "statistics": [r.statistic for r in res]})


def run_suite(quick: bool = False) -> list[CheckResult]:
    """Every check, in a fixed order; ``quick`` shrinks the statistical sample sizes."""
    reps = 400 if quick else 2000
    checks = [
        ("kingman_fixed_point", check_kingman_fixed_point),
        ("theta_residual", check_theta_residual),
        ("equilibrium_mean_fitness", check_equilibrium_mean_fitness),
        ("forward_to_kingman", check_forward_convergence),
        ("expansion_oracle", check_expansion),
        ("unnormalised_identity", check_unnormalized),
        ("backward_monotonicity", lambda: check_backward_monotonicity(streams=5 if quick else 20)),
        ("condensate_routes", check_condensate_routes),
        ("two_atom_equivalence", check_two_atom_equivalence),
        ("criterion_vs_kingman", check_criterion_grid),
        ("random_law_condensation", check_random_law_condensation),
        ("duality_forward_backward", lambda: check_duality(reps)),
        ("invariant_measure", lambda: check_invariance(reps)),
        ("global_stability", lambda: check_global_stability(reps)),
        ("q_zero_closed_form", lambda: check_q_zero(reps)),
        ("invariant_uniqueness_on_SQ", lambda: check_uniqueness(reps)),
        ("mean_ratio_bound", lambda: check_mean_ratio_fuzz(1000 if quick else 10_000)),
    ]
    return [_timed(name, fn) for name, fn in checks]
