import numpy as np
import pytest

from kingman.errors import UsageError
from kingman.stats import batch_means_ci, ks_two_sample


def test_identical_samples():
    a = np.linspace(0, 1, 50)
    r = ks_two_sample(a, a)
    assert r.statistic == 0.0 and r.p_value == 1.0
    assert (r.n1, r.n2) == (50, 50)


def test_disjoint_samples():
    r = ks_two_sample(np.zeros(1000), np.ones(1000))
    assert r.statistic == 1.0
    assert r.p_value < 1e-100


def test_undersized_sample():
    with pytest.raises(UsageError):
        ks_two_sample(np.zeros(19), np.zeros(30))


def test_statistic_matches_scipy():
    from scipy.stats import ks_2samp

    rng = np.random.default_rng(0)
    a, b = rng.normal(size=300), rng.normal(0.1, 1.0, size=250)
    assert ks_two_sample(a, b).statistic == pytest.approx(ks_2samp(a, b).statistic, abs=1e-15)


def test_ks_calibration():
    rng = np.random.default_rng(2024)
    passes = sum(ks_two_sample(rng.random(2000), rng.random(2000)).p_value > 0.01 for _ in range(100))
    assert passes >= 98


def test_batch_means_constant_series():
    ci = batch_means_ci(np.full(640, 3.5), 32)
    assert ci.mean == 3.5 and ci.halfwidth == 0.0 and ci.batches == 32


def test_batch_means_calibration():
    rng = np.random.default_rng(7)
    covered = 0
    for _ in range(100):
        ci = batch_means_ci(rng.normal(size=32 * 1000), 32)
        covered += abs(ci.mean) <= ci.halfwidth
    assert covered >= 90


def test_batch_means_errors():
    with pytest.raises(UsageError):
        batch_means_ci(np.arange(100.0), 1)
    with pytest.raises(UsageError):
        batch_means_ci(np.arange(10.0), 32)
