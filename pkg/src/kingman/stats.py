"""Two-sample Kolmogorov-Smirnov test and batch-means confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st

from kingman.errors import UsageError

MIN_KS_SAMPLE = 20


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n1: int
    n2: int


@dataclass(frozen=True)
class ErgodicCi:
    mean: float
    halfwidth: float
    batches: int


def ks_two_sample(a, b) -> KsResult:
    """Two-sample KS with the asymptotic Kolmogorov p-value.

    The statistic is ``sup |F1 - F2|`` over the pooled sample; the p-value is
    ``P(K > sqrt(n1 n2 / (n1 + n2)) D)`` for the Kolmogorov distribution K.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n1, n2 = a.size, b.size
    if n1 < MIN_KS_SAMPLE or n2 < MIN_KS_SAMPLE:
        raise UsageError(f"KS needs at least {MIN_KS_SAMPLE} points per sample, got {n1} and {n2}")
    pooled = np.concatenate((a, b))
    f1 = np.searchsorted(a, pooled, side="right") / n1
    f2 = np.searchsorted(b, pooled, side="right") / n2
    d = float(np.max(np.abs(f1 - f2)))
    ne = n1 * n2 / (n1 + n2)
    p = float(_st.kstwobign.sf(math.sqrt(ne) * d))
    return KsResult(d, min(1.0, max(0.0, p)), n1, n2)


def batch_means_ci(series, batches: int = 32, level: float = 0.95) -> ErgodicCi:
    """Mean of a stationary series with a Student-t batch-means halfwidth.

    The series is cut into ``batches`` equal consecutive blocks (a remainder
    at the end is dropped).
    """
    x = np.asarray(series, dtype=float)
    if batches < 2:
        raise UsageError("batch means needs at least 2 batches")
    if x.size < 2 * batches:
        raise UsageError(f"series of length {x.size} too short for {batches} batches")
    size = x.size // batches
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    centre = float(means.mean())
    sd = float(means.std(ddof=1))
    half = float(_st.t.ppf(0.5 + level / 2.0, batches - 1)) * sd / math.sqrt(batches)
    return ErgodicCi(centre, half, batches)
