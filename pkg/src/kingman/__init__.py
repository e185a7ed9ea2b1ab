"""Kingman's mutation-selection model with constant and i.i.d. random mutation probabilities.

The package computes the deterministic Kingman equilibrium, forward and
backward trajectories of the random model, quenched backward limits with
their condensate masses, and decides condensation at the largest fitness
value from the sign of ``E[ln(h(1-beta) / mean fitness of I_Q)]``.
"""

from kingman.errors import (
    ConfigError,
    DegenerateMeasureError,
    DomainError,
    KingmanError,
    NonConvergenceError,
    NumericError,
    UsageError,
)
from kingman.measure import (
    DiscreteMeasure,
    SupportInfo,
    canonicalize,
    cdf,
    component_leq,
    delta,
    moment,
    size_bias,
    stochastic_leq,
    support_sup,
    tilt_power,
    tv_distance,
)
from kingman.mutation import MutationLaw, SeedSpec, BetaStream, expected_log_one_minus, sample_sequence

__all__ = [
    "BetaStream",
    "ConfigError",
    "DegenerateMeasureError",
    "DiscreteMeasure",
    "DomainError",
    "KingmanError",
    "MutationLaw",
    "NonConvergenceError",
    "NumericError",
    "SeedSpec",
    "SupportInfo",
    "UsageError",
    "canonicalize",
    "cdf",
    "component_leq",
    "delta",
    "expected_log_one_minus",
    "moment",
    "sample_sequence",
    "size_bias",
    "stochastic_leq",
    "support_sup",
    "tilt_power",
    "tv_distance",
]

__version__ = "0.1.0"
