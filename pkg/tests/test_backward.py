import math

import numpy as np
import pytest

from kingman import backward as bw
from kingman.errors import DomainError, NonConvergenceError, UsageError
from kingman.forward import forward_step
from kingman.measure import canonicalize, component_leq, delta, from_arrays, tv_distance
from kingman.mutation import BetaStream, MutationLaw, SeedSpec, sample_matrix, sample_sequence

KINGMAN_03 = canonicalize([(0.5, 0.6), (1.0, 0.4)])
Q3 = canonicalize([(0.2, 0.3), (0.5, 0.4), (0.7, 0.3)])


def test_single_stage(two_point):
    p = bw.backward_pass(delta(1.0), [0.35], two_point, 1.0)
    ref = canonicalize([(0.2, 0.175), (0.8, 0.175), (1.0, 0.65)])
    assert tv_distance(p.measures[0], ref) < 1e-15
    assert p.measures[1].atoms == [(1.0, 1.0)]
    assert p.depth == 1


def test_two_stages_hand_computed():
    p = bw.backward_pass(delta(1.0), [0.5, 0.5], delta(0.5), 1.0)
    assert tv_distance(p.measures[0], canonicalize([(0.5, 2 / 3), (1.0, 1 / 3)])) < 1e-15
    assert p.means[1] == pytest.approx(0.75)


def test_stages_satisfy_backward_recursion():
    betas = sample_sequence(MutationLaw.beta(2, 5), SeedSpec(1), 40)
    p = bw.backward_pass(delta(0.9), betas, Q3, 0.9)
    for j in range(40):
        assert tv_distance(p.measures[j], forward_step(p.measures[j + 1], betas[j], Q3)) < 1e-13


def test_inherited_mass_is_product_formula():
    betas = sample_sequence(MutationLaw.uniform(0, 0.5), SeedSpec(2), 25)
    p = bw.backward_pass(delta(1.0), betas, Q3, 1.0)
    prod = 1.0
    for l in range(25, 0, -1):
        prod *= (1 - betas[l - 1]) / p.measures[l].mean()
        assert p.mass_at_h[l - 1] == pytest.approx(prod, rel=1e-12)
    # Q(h) = 0, so the inherited mass is the whole atom at h
    assert p.measures[0].mass_at(1.0) == pytest.approx(p.mass_at_h[0], rel=1e-12)


def test_constant_law_deep_pass_reaches_kingman():
    p = bw.backward_pass(delta(1.0), [0.3] * 300, delta(0.5), 1.0)
    assert tv_distance(p.measures[0], KINGMAN_03) < 1e-8


def test_backward_batch_matches_pass():
    betas = sample_matrix(MutationLaw.discrete([(0.05, 0.5), (0.4, 0.5)]), SeedSpec(3), 5, 60)
    x, W = bw.backward_batch(delta(1.0), betas, Q3, 1.0)
    for r in range(5):
        ref = bw.backward_pass(delta(1.0), betas[r], Q3, 1.0).measures[0]
        assert tv_distance(from_arrays(x, W[r]), ref) < 1e-13


def test_terminal_must_top_out_at_h():
    with pytest.raises(DomainError):
        bw.backward_pass(delta(0.9), [0.1], Q3, 1.0)


def test_quenched_limit_constant_condensing():
    lim = bw.quenched_limit(BetaStream(MutationLaw.constant(0.3), SeedSpec(0)), delta(0.5), 1.0, tol=1e-8)
    assert tv_distance(lim.limit, KINGMAN_03) < 1e-7
    assert lim.condensate_mass == pytest.approx(0.4, abs=1e-7)
    assert lim.mass_gap < 1e-8


def test_quenched_limit_constant_not_condensing():
    lim = bw.quenched_limit(BetaStream(MutationLaw.constant(0.6), SeedSpec(0)), delta(0.5), 1.0)
    assert lim.condensate_mass < 1e-9
    assert tv_distance(lim.limit, delta(0.5)) < 1e-9


def test_quenched_limit_atom_at_h_is_exact():
    for law in (MutationLaw.constant(0.2), MutationLaw.beta(2, 2)):
        lim = bw.quenched_limit(BetaStream(law, SeedSpec(1)), delta(0.6), 0.6)
        assert lim.limit.atoms == [(0.6, 1.0)]


def test_quenched_limit_accepts_plain_list():
    betas = [0.3] * 1000
    lim = bw.quenched_limit(betas, delta(0.5), 1.0)
    assert lim.condensate_mass == pytest.approx(0.4, abs=1e-9)
    with pytest.raises(NonConvergenceError):
        bw.quenched_limit([0.3] * 100, delta(0.5), 1.0, tol=1e-15)


def test_nonconvergence_reports_bracket():
    # critical case: inherited mass decays like 1/n
    with pytest.raises(NonConvergenceError) as info:
        bw.quenched_limit(BetaStream(MutationLaw.constant(0.5), SeedSpec(0)), delta(0.5), 1.0, depth_cap=4096)
    err = info.value
    assert err.depth <= 4096
    assert err.mass_gap >= 1e-10
    hi, lo = err.bracket
    assert lo == 0.0 and 0.0 < hi < 0.01


def test_bad_tolerances():
    with pytest.raises(UsageError):
        bw.quenched_limit(BetaStream(MutationLaw.constant(0.3), SeedSpec(0)), delta(0.5), 1.0, tol=0.0)


def test_quenched_sequence_constant_law_is_flat():
    seq = bw.quenched_sequence(BetaStream(MutationLaw.constant(0.3), SeedSpec(0)), delta(0.5), 1.0, J=10)
    for r in seq:
        assert tv_distance(r.limit, seq[0].limit) < 1e-12


def test_quenched_sequence_recursion_residual():
    law = MutationLaw.uniform(0.0, 0.6)
    seq = bw.quenched_sequence(BetaStream(law, SeedSpec(5)), Q3, 1.0, J=30)
    betas = seq[0].betas
    for j in range(29):
        assert tv_distance(seq[j].limit, forward_step(seq[j + 1].limit, betas[j], Q3)) <= 1e-9


def test_quenched_sequence_head_matches_quenched_limit():
    law = MutationLaw.beta(2, 5)
    seq = bw.quenched_sequence(BetaStream(law, SeedSpec(6)), Q3, 1.0, J=4)
    lim = bw.quenched_limit(BetaStream(law, SeedSpec(6)), Q3, 1.0)
    assert tv_distance(seq[0].limit, lim.limit) < 1e-8


def test_routes_constant_law():
    lim = bw.quenched_limit(BetaStream(MutationLaw.constant(0.3), SeedSpec(0)), delta(0.5), 1.0)
    p = bw.backward_pass(delta(1.0), lim.betas, delta(0.5), 1.0)
    prod, series = bw.condensate_mass_routes(p, lim)
    assert prod == pytest.approx(0.4, abs=1e-9)
    assert series == pytest.approx(0.4, abs=1e-9)


def test_routes_vanish_with_atom_at_h():
    lim = bw.quenched_limit(BetaStream(MutationLaw.uniform(0.1, 0.5), SeedSpec(0)), delta(0.5), 0.5)
    p = bw.backward_pass(delta(0.5), lim.betas, delta(0.5), 0.5)
    prod, series = bw.condensate_mass_routes(p, lim)
    assert prod < 1e-9 and abs(series) < 1e-9


def test_g_recursion_holds_along_sequence():
    law = MutationLaw.discrete([(0.1, 0.5), (0.5, 0.5)])
    seq = bw.quenched_sequence(BetaStream(law, SeedSpec(2)), Q3, 1.0, J=40)
    b = seq[0].betas
    for j in range(1, 40):
        G_prev, G = seq[j - 1].condensate_mass, seq[j].condensate_mass
        assert abs(G_prev - G * (1 - b[j - 1]) / seq[j].mean_fitness) <= 1e-8


def test_monotone_in_depth():
    law = MutationLaw.beta(1, 3)
    betas = sample_sequence(law, SeedSpec(9), 61)
    p1 = bw.backward_pass(delta(1.0), betas[:60], Q3, 1.0)
    p2 = bw.backward_pass(delta(1.0), betas, Q3, 1.0)
    for j in range(61):
        assert component_leq(p1.measures[j], p2.measures[j], 1.0, open_at_a=True)
    assert p2.mass_at_h[0] <= p1.mass_at_h[0] + 1e-15


def test_tail_mass_diagnostic_non_increasing_to_condensate():
    law = MutationLaw.discrete([(0.1, 0.5), (0.5, 0.5)])
    seq = bw.quenched_sequence(BetaStream(law, SeedSpec(2)), Q3, 1.0, J=200)
    d = bw.tail_mass_diagnostic(seq)
    assert d[0] == pytest.approx(1.0)
    assert np.all(np.diff(d) <= 1e-12)
    assert d[-1] == pytest.approx(seq[0].condensate_mass, rel=1e-3)
