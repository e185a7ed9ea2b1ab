"""Scalar oracle for a mutant distribution concentrated on one point c < h.

With ``Q = delta_c`` and terminal ``delta_h`` every backward stage is
``X delta_c + (1 - X) delta_h``, and the backward map on the mass at c is

    X_j = (c + (h b_{j+1} - c)(1 - X_{j+1})) / (c + (h - c)(1 - X_{j+1})),

started from ``X_n = 0``.  Condensation at h holds iff
``E[ln(h(1 - beta) / c)] > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from kingman.condensation import CondensationVerdict, CriterionEstimate
from kingman.errors import DomainError, UsageError
from kingman.mutation import MutationLaw, SeedSpec, expected_log_one_minus, sample_matrix

DEFAULT_DEPTH = 10_000


@dataclass(frozen=True)
class TwoAtomModel:
    c: float
    h: float
    law: MutationLaw

    def __post_init__(self):
        if not 0.0 < self.c < self.h <= 1.0:
            raise DomainError(f"need 0 < c < h <= 1, got c={self.c}, h={self.h}")


def scalar_backward(model: TwoAtomModel, betas) -> float:
    """Mass at c of ``P_0^n`` for ``betas = (b_1, ..., b_n)``."""
    b = np.asarray(betas, dtype=float)
    if b.size == 0:
        raise UsageError("betas must be nonempty")
    c, h = model.c, model.h
    X = 0.0
    for beta in b[::-1]:
        y = 1.0 - X
        X = (c + (h * beta - c) * y) / (c + (h - c) * y)
    return X


def scalar_backward_batch(model: TwoAtomModel, betas: np.ndarray) -> np.ndarray:
    """``scalar_backward`` for every row of a (replicas, depth) array."""
    b = np.asarray(betas, dtype=float)
    c, h = model.c, model.h
    X = np.zeros(b.shape[0])
    for j in range(b.shape[1] - 1, -1, -1):
        y = 1.0 - X
        X = (c + (h * b[:, j] - c) * y) / (c + (h - c) * y)
    return X


def x_distribution(model: TwoAtomModel, replicas: int, depth: int = DEFAULT_DEPTH, seed: SeedSpec = SeedSpec(0)) -> np.ndarray:
    """Sample of the backward limit's mass at c over independent beta streams."""
    if replicas < 1 or depth < 1:
        raise UsageError("replicas and depth must be positive")
    return scalar_backward_batch(model, sample_matrix(model.law, seed, replicas, depth))


def two_atom_classify(model: TwoAtomModel) -> CondensationVerdict:
    """Exact verdict from the sign of ``ln h + E[ln(1 - beta)] - ln c``."""
    g_h = math.log(model.h) + expected_log_one_minus(model.law)
    g_q = math.log(model.c)
    point = g_h - g_q
    est = CriterionEstimate(
        point=point,
        ci_low=point,
        ci_high=point,
        term_log_h1mb=g_h,
        term_log_meanfit=g_q,
        samples=0,
        method="exact: I_Q = delta_c",
    )
    verdict = "Condensation" if point > 0 else "NoCondensation"
    return CondensationVerdict(verdict, f"E[ln(h(1-beta)/c)] = {point:.6g}", est, False)
