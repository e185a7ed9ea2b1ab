import math

import numpy as np
import pytest

from kingman.errors import DegenerateMeasureError, DomainError
from kingman.forward import (
    expansion_oracle,
    forward_batch,
    forward_step,
    forward_trajectory,
    growth_rate_h,
    q_zero_oracle,
    unnormalized_trajectory,
)
from kingman.measure import canonicalize, delta, from_arrays, tv_distance, weights_on
from kingman.mutation import MutationLaw, SeedSpec, sample_matrix, sample_sequence


def test_forward_step_fixed_point_of_point_mass():
    assert forward_step(delta(0.4), 0.3, delta(0.4)).atoms == [(0.4, 1.0)]


def test_forward_step_kills_atom_at_zero():
    out = forward_step(canonicalize([(0.0, 0.5), (1.0, 0.5)]), 0.2, delta(0.5))
    assert tv_distance(out, canonicalize([(0.5, 0.2), (1.0, 0.8)])) < 1e-15


def test_forward_step_rejects_delta_zero_and_bad_beta():
    with pytest.raises(DegenerateMeasureError):
        forward_step(delta(1.0), 0.2, delta(0.0))
    with pytest.raises(DomainError):
        forward_step(delta(1.0), 1.0, delta(0.5))


def test_empty_trajectory():
    tr = forward_trajectory(delta(0.9), [], delta(0.5))
    assert len(tr.measures) == 1 and tr.measures[0].atoms == [(0.9, 1.0)]
    assert list(tr.means) == [0.9]


def test_beta_near_one_returns_mutant(two_point):
    tr = forward_trajectory(delta(1.0), [1.0 - 1e-12] * 3, two_point)
    assert tv_distance(tr.measures[-1], two_point) < 1e-11


def test_constant_trajectory_approaches_kingman():
    tr = forward_trajectory(delta(1.0), [0.3] * 200, delta(0.5))
    assert tv_distance(tr.measures[-1], canonicalize([(0.5, 0.6), (1.0, 0.4)])) < 1e-6


def test_expansion_oracle_small_n(two_point):
    P0 = canonicalize([(0.3, 0.5), (0.9, 0.5)])
    betas = [0.4]
    tr = forward_trajectory(P0, betas, two_point)
    assert tv_distance(expansion_oracle(P0, betas, two_point, 0, tr.means), P0) == 0.0
    assert tv_distance(expansion_oracle(P0, betas, two_point, 1, tr.means), forward_step(P0, 0.4, two_point)) < 1e-15


def test_expansion_oracle_random_instance(two_point):
    P0 = canonicalize([(0.1, 0.2), (0.6, 0.3), (1.0, 0.5)])
    betas = sample_sequence(MutationLaw.beta(2, 3), SeedSpec(4), 5)
    tr = forward_trajectory(P0, betas, two_point)
    assert tv_distance(expansion_oracle(P0, betas, two_point, 5, tr.means), tr.measures[5]) <= 1e-9


def test_unnormalized_examples(two_point):
    P0 = canonicalize([(0.3, 0.5), (0.9, 0.5)])
    un = unnormalized_trajectory(P0, [0.25], two_point)
    assert un.log_totals[0] == 0.0
    assert un.log_totals[1] == pytest.approx(math.log(0.6), abs=1e-15)
    un = unnormalized_trajectory(delta(0.4), [0.3] * 50, delta(0.4))
    np.testing.assert_allclose(un.log_totals, np.arange(51) * math.log(0.4), rtol=1e-13)


def test_unnormalized_rescaling_keeps_totals_exact():
    # totals reach exp(-2300), far below the double range
    n = 5000
    un = unnormalized_trajectory(delta(0.63), [0.2] * n, delta(0.63))
    assert un.log_totals[-1] == pytest.approx(n * math.log(0.63), rel=1e-12)
    for m, s, t in zip(un.measures[-3:], un.log_scales[-3:], un.log_totals[-3:]):
        assert 1e-200 <= m.total <= 1e200
        assert math.log(m.total) + s == pytest.approx(t, rel=1e-12)


def test_growth_rate_h_examples():
    assert growth_rate_h(MutationLaw.constant(0.3), 1.0) == pytest.approx(math.log(0.7))
    assert growth_rate_h(MutationLaw.constant(0.0), 1.0) == 0.0
    assert growth_rate_h(MutationLaw.uniform(0.0, 0.5), 0.8) == pytest.approx(-0.529996, abs=1e-6)


def test_forward_batch_matches_trajectories(two_point):
    P0 = canonicalize([(0.3, 0.5), (1.0, 0.5)])
    betas = sample_matrix(MutationLaw.uniform(0.0, 0.6), SeedSpec(8), 4, 30)
    x, W = forward_batch(P0, betas, two_point)
    for r in range(4):
        ref = forward_trajectory(P0, betas[r], two_point, record_measures=False).measures[-1]
        assert tv_distance(from_arrays(x, W[r]), ref) < 1e-13


def _direct_q_zero(P0, betas):
    # iterate the map with Q = delta_0 by hand on the support of P0 plus 0
    x = np.append(0.0, P0.x)
    w = weights_on(P0, x)
    for b in betas:
        w = (1 - b) * x * w / (x @ w)
        w[0] += b
    return from_arrays(x, w)


def test_q_zero_oracle_matches_direct_iteration():
    P0 = canonicalize([(0.2, 0.3), (0.7, 0.3), (0.95, 0.4)])
    betas = sample_sequence(MutationLaw.uniform(0.0, 0.8), SeedSpec(2), 40)
    out = q_zero_oracle(P0, betas)
    assert tv_distance(out, _direct_q_zero(P0, betas)) < 1e-12
    assert out.mass_at(0.0) == pytest.approx(betas[-1])
    assert out.mass_at(0.95) > 0.99 * (1 - betas[-1])
