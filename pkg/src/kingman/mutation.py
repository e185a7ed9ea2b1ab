"""Mutation-probability laws and reproducible beta streams.

A law is one of four families supported on [0, 1): ``constant``,
``discrete``, ``uniform`` and ``beta``.  Streams of i.i.d. draws are keyed by
``(master_seed, stream_index)``; the child generator seed is a splitmix64
mix of the pair so any replica can be regenerated on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from kingman.errors import ConfigError, NumericError

_MASK64 = (1 << 64) - 1
ONE_GUARD = 1e-15
QUAD_ABS_TOL = 1e-10
CHUNK = 4096


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SeedSpec:
    """Address of one independent random substream."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise ConfigError("stream_index must be nonnegative")

    @property
    def child_seed(self) -> int:
        """``splitmix64(master ^ splitmix64(stream_index))`` on 64-bit words."""
        return splitmix64((self.master_seed & _MASK64) ^ splitmix64(self.stream_index))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.child_seed))

    def child(self, index: int) -> "SeedSpec":
        """Substream ``index`` of this stream (used to fan out replicas)."""
        return SeedSpec(self.child_seed, index)


@dataclass(frozen=True)
class MutationLaw:
    """Distribution of the per-generation mutation probability.

    ``params`` holds, per ``kind``:
    constant -> (b,); discrete -> ((b_1, p_1), ...); uniform -> (lo, hi);
    beta -> (alpha, gamma).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        k, p = self.kind, self.params
        if k == "constant":
            (b,) = p
            if not 0.0 <= b < 1.0:
                raise ConfigError(f"constant law needs b in [0, 1), got {b}")
        elif k == "discrete":
            if not p:
                raise ConfigError("discrete law needs at least one atom")
            bs = [b for b, _ in p]
            ps = [q for _, q in p]
            if any(not 0.0 <= b < 1.0 for b in bs):
                raise ConfigError("discrete law values must lie in [0, 1)")
            if any(q <= 0.0 for q in ps) or abs(math.fsum(ps) - 1.0) > 1e-12:
                raise ConfigError("discrete law probabilities must be positive and sum to 1")
        elif k == "uniform":
            lo, hi = p
            if not 0.0 <= lo < hi <= 1.0:
                raise ConfigError(f"uniform law needs 0 <= lo < hi <= 1, got ({lo}, {hi})")
        elif k == "beta":
            a, g = p
            if not (a > 0.0 and g > 0.0):
                raise ConfigError("beta law needs alpha, gamma > 0")
        else:
            raise ConfigError(f"unknown law type {k!r}")

    @classmethod
    def constant(cls, b: float) -> "MutationLaw":
        return cls("constant", (float(b),))

    @classmethod
    def discrete(cls, atoms: Sequence[tuple[float, float]]) -> "MutationLaw":
        return cls("discrete", tuple((float(b), float(q)) for b, q in atoms))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "MutationLaw":
        return cls("uniform", (float(lo), float(hi)))

    @classmethod
    def beta(cls, alpha: float, gamma: float) -> "MutationLaw":
        return cls("beta", (float(alpha), float(gamma)))

    @classmethod
    def from_spec(cls, spec: dict) -> "MutationLaw":
        """Parse ``{type: ..., params: ...}`` from a config file."""
        try:
            kind = spec["type"]
            params = spec.get("params", {})
            if kind == "constant":
                b = params["b"] if isinstance(params, dict) else params
                return cls.constant(b)
            if kind == "discrete":
                atoms = params["atoms"] if isinstance(params, dict) else params
                return cls.discrete([(a["b"], a["p"]) if isinstance(a, dict) else tuple(a) for a in atoms])
            if kind == "uniform":
                return cls.uniform(params["lo"], params["hi"])
            if kind == "beta":
                return cls.beta(params["alpha"], params["gamma"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed law spec {spec!r}: {exc}") from exc
        raise ConfigError(f"unknown law type {spec.get('type')!r}")

    def to_spec(self) -> dict:
        if self.kind == "constant":
            return {"type": "constant", "params": {"b": self.params[0]}}
        if self.kind == "discrete":
            return {"type": "discrete", "params": {"atoms": [{"b": b, "p": q} for b, q in self.params]}}
        if self.kind == "uniform":
            return {"type": "uniform", "params": {"lo": self.params[0], "hi": self.params[1]}}
        return {"type": "beta", "params": {"alpha": self.params[0], "gamma": self.params[1]}}

    @property
    def is_deterministic(self) -> bool:
        return self.kind == "constant" or (self.kind == "discrete" and len(self.params) == 1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` i.i.d. draws using ``rng``."""
        if self.kind == "constant":
            return np.full(n, self.params[0])
        if self.kind == "discrete":
            vals = np.array([b for b, _ in self.params])
            probs = np.array([q for _, q in self.params])
            if vals.size == 1:
                return np.full(n, vals[0])
            return vals[rng.choice(vals.size, size=n, p=probs / probs.sum())]
        out = self._draw_continuous(rng, n)
        bad = out >= 1.0 - ONE_GUARD
        while np.any(bad):
            out[bad] = self._draw_continuous(rng, int(bad.sum()))
            bad = out >= 1.0 - ONE_GUARD
        return out

    def _draw_continuous(self, rng, n):
        if self.kind == "uniform":
            lo, hi = self.params
            return lo + (hi - lo) * rng.random(n)
        return rng.beta(self.params[0], self.params[1], size=n)


class BetaStream:
    """Lazily extended i.i.d. sequence ``beta_1, beta_2, ...`` for one seed.

    Draws are produced in fixed blocks so that any prefix is identical no
    matter how the stream was extended.
    """

    def __init__(self, law: MutationLaw, seed: SeedSpec):
        self.law = law
        self.seed = seed
        self._rng = seed.generator()
        self._buf = np.empty(0)

    def take(self, n: int) -> np.ndarray:
        """First ``n`` draws (``beta_1 .. beta_n``) as a read-only array."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        while self._buf.size < n:
            self._buf = np.concatenate((self._buf, self.law.sample(self._rng, CHUNK)))
        out = self._buf[:n]
        out.setflags(write=False)
        return out


def sample_sequence(law: MutationLaw, seed: SeedSpec, n: int) -> np.ndarray:
    return BetaStream(law, seed).take(n).copy()


def sample_matrix(law: MutationLaw, seed: SeedSpec, replicas: int, n: int) -> np.ndarray:
    """Row ``r`` holds the first ``n`` draws of substream ``seed.child(r)``."""
    out = np.empty((replicas, n))
    for r in range(replicas):
        out[r] = BetaStream(law, seed.child(r)).take(n)
    return out


def expected_log_one_minus(law: MutationLaw) -> float:
    """``E[ln(1 - beta)]``: exact for atomic laws, QUADPACK otherwise."""
    if law.kind == "constant":
        return math.log1p(-law.params[0])
    if law.kind == "discrete":
        return math.fsum(q * math.log1p(-b) for b, q in law.params)
    if law.kind == "uniform":
        lo, hi = law.params
        if hi < 1.0:
            val, err = integrate.quad(lambda u: math.log1p(-u), lo, hi, epsabs=QUAD_ABS_TOL, epsrel=0.0, limit=200)
        else:
            # log singularity at 1 handled by the algebraic-logarithmic weight
            val, err = integrate.quad(lambda u: 1.0, lo, 1.0, weight="alg-logb", wvar=(0.0, 0.0), epsabs=QUAD_ABS_TOL, epsrel=0.0)
        _check_quad(err)
        return val / (hi - lo)
    a, g = law.params
    val, err = integrate.quad(
        lambda u: 1.0, 0.0, 1.0, weight="alg-logb", wvar=(a - 1.0, g - 1.0), epsabs=QUAD_ABS_TOL, epsrel=0.0
    )
    _check_quad(err)
    log_beta_fn = math.lgamma(a) + math.lgamma(g) - math.lgamma(a + g)
    return val * math.exp(-log_beta_fn)


def _check_quad(err):
    if not err <= 10 * QUAD_ABS_TOL:
        raise NumericError(f"quadrature did not reach tolerance (error estimate {err:.2e})")
