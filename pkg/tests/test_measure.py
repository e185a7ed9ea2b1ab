import json
import math

import numpy as np
import pytest

from kingman.errors import DomainError
from kingman.measure import (
    DiscreteMeasure,
    canonicalize,
    cdf,
    component_leq,
    delta,
    from_arrays,
    is_canonical,
    mixture,
    moment,
    renormalize,
    size_bias,
    stochastic_leq,
    support_sup,
    tilt_power,
    tv_distance,
    weights_on,
)


def test_canonicalize_merges_identical_locations():
    mu = canonicalize([(0.5, 0.5), (0.5, 0.5)])
    assert mu.atoms == [(0.5, 1.0)]
    assert mu.total == 1.0


def test_canonicalize_prunes_zero_weights():
    assert canonicalize([(0.2, 0.0), (0.8, 1.0)]).atoms == [(0.8, 1.0)]


def test_canonicalize_sorts():
    assert canonicalize([(0.8, 0.3), (0.2, 0.7)]).atoms == [(0.2, 0.7), (0.8, 0.3)]


def test_canonicalize_merges_within_tolerance():
    mu = canonicalize([(0.5, 0.25), (0.5 + 5e-13, 0.75)])
    assert len(mu) == 1
    assert mu.mass_at(0.5) == pytest.approx(1.0)


@pytest.mark.parametrize("atoms", [[(1.2, 1.0)], [(-0.1, 1.0)], [(0.5, -0.2)], [(float("nan"), 1.0)]])
def test_canonicalize_rejects_bad_atoms(atoms):
    with pytest.raises(DomainError):
        canonicalize(atoms)


def test_size_bias_examples(two_point):
    assert size_bias(delta(0.7)).atoms == [(0.7, 1.0)]
    sb = size_bias(two_point)
    assert sb.mass_at(0.2) == pytest.approx(0.2)
    assert sb.mass_at(0.8) == pytest.approx(0.8)
    assert size_bias(canonicalize([(0.0, 0.5), (1.0, 0.5)])).atoms == [(1.0, 1.0)]


def test_size_bias_of_delta_zero_is_degenerate():
    with pytest.raises(DomainError):
        size_bias(delta(0.0))


def test_moment_examples(two_point):
    assert moment(delta(0.3), 3) == pytest.approx(0.027)
    assert moment(two_point, 0) == 1.0
    assert moment(two_point, 1) == pytest.approx(0.5)


def test_tilt_power_examples(two_point):
    q0, t0 = tilt_power(two_point, 0)
    assert q0.atoms == two_point.atoms and t0 == 1.0
    q1, t1 = tilt_power(two_point, 1)
    assert t1 == pytest.approx(0.5)
    assert tv_distance(q1, canonicalize([(0.2, 0.2), (0.8, 0.8)])) < 1e-15
    qd, td = tilt_power(delta(0.5), 4)
    assert qd.atoms == [(0.5, 1.0)] and td == pytest.approx(0.0625)


def test_tilt_power_large_k_stays_finite(two_point):
    q, t = tilt_power(two_point, 5000)
    assert q.mass_at(0.8) == pytest.approx(1.0)
    assert q.is_probability()


def test_tv_distance_examples():
    mu = canonicalize([(0.5, 0.6), (1.0, 0.4)])
    assert tv_distance(mu, mu) == 0.0
    assert tv_distance(delta(0.0), delta(1.0)) == 1.0
    assert tv_distance(mu, delta(0.5)) == pytest.approx(0.4)


def test_cdf_examples():
    assert cdf(delta(0.5), 0.4) == 0.0
    assert cdf(delta(0.5), 0.5) == 1.0
    mu = canonicalize([(0.2, 0.3), (0.9, 0.7)])
    assert cdf(mu, 0.5) == pytest.approx(0.3)
    assert cdf(mu, 1.0) == 1.0


def test_support_sup_examples():
    s = support_sup(delta(0.7))
    assert (s.sup_point, s.mass_at_sup) == (0.7, 1.0)
    s = support_sup(canonicalize([(0.5, 0.6), (1.0, 0.4)]))
    assert (s.sup_point, s.mass_at_sup) == (1.0, 0.4)
    s = support_sup(canonicalize([(0.9, 0.0), (0.5, 1.0)]))
    assert (s.sup_point, s.mass_at_sup) == (0.5, 1.0)


def test_component_leq_examples():
    nu = canonicalize([(0.5, 0.5), (1.0, 0.5)])
    assert component_leq(delta(0.5, 0.2), nu, 0.9, open_at_a=True)
    assert not component_leq(delta(0.5, 0.6), delta(0.5, 0.5), 0.9, open_at_a=True)
    assert component_leq(nu, nu, 1.0, open_at_a=False)


def test_component_leq_open_excludes_a():
    mu = canonicalize([(0.5, 0.2), (1.0, 0.8)])
    nu = canonicalize([(0.5, 0.5), (1.0, 0.5)])
    assert component_leq(mu, nu, 1.0, open_at_a=True)
    assert not component_leq(mu, nu, 1.0, open_at_a=False)


def test_stochastic_leq_examples(two_point):
    assert stochastic_leq(delta(0.2), delta(0.8))
    assert not stochastic_leq(delta(0.8), delta(0.2))
    assert stochastic_leq(two_point, two_point)
    assert stochastic_leq(two_point, tilt_power(two_point, 1)[0])


def test_mixture_and_json_round_trip(two_point):
    mu = mixture([(0.5, two_point), (0.5, delta(1.0))])
    assert mu.is_probability()
    back = DiscreteMeasure.from_json(json.loads(json.dumps(mu.to_json())))
    assert back.atoms == mu.atoms
    assert is_canonical(back)


def test_weights_on_grid_and_renormalize(two_point):
    grid = np.array([0.1, 0.2, 0.8, 1.0])
    np.testing.assert_allclose(weights_on(two_point, grid), [0, 0.5, 0.5, 0])
    w = renormalize(np.array([0.5, 0.5 + 1e-13]))
    assert math.isclose(w.sum(), 1.0, abs_tol=1e-15)
    with pytest.raises(ArithmeticError):
        renormalize(np.array([0.5, 0.6]))


def test_from_arrays_is_canonical():
    mu = from_arrays([0.9, 0.1, 0.1], [0.2, 0.3, 0.5])
    assert len(mu) == 2
    assert mu.mass_at(0.1) == pytest.approx(0.8) and mu.mass_at(0.9) == pytest.approx(0.2)
