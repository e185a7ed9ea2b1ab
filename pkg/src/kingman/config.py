"""Experiment configuration: parsing, validation and dotted-path overrides.

A config is a YAML or JSON mapping with sections ``model``, ``law``, ``sim``,
``output`` and, for parameter sweeps, ``sweep``::

    model:
      Q: {atoms: [[0.5, 1.0]]}          # or {family: beta, params: {...}, grid_points: 512}
      h: 1.0
      P0: delta_h                       # or {atoms: [[x, w], ...]}
    law: {type: constant, params: {b: 0.3}}
    sim: {seed: 0, replicas: 16, n_steps: 1000}
    output: {format: json, path: null, record_measures: false}
    sweep: {command: classify, axes: {law.params.b: [0.1, 0.5, 0.9]}}
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy import stats as _st

from kingman.backward import DEFAULT_BURN_IN, DEFAULT_DEPTH_CAP, DEFAULT_TOL, DEFAULT_WINDOW
from kingman.errors import ConfigError, DomainError, KingmanError
from kingman.measure import MERGE_TOL, DiscreteMeasure, canonicalize, delta, from_arrays, support_sup
from kingman.mutation import MutationLaw, SeedSpec

DEFAULT_GRID_POINTS = 512


@dataclass(frozen=True)
class SimConfig:
    seed: int
    depth_cap: int = DEFAULT_DEPTH_CAP
    tol: float = DEFAULT_TOL
    window: int = DEFAULT_WINDOW
    burn_in: int = DEFAULT_BURN_IN
    replicas: int = 16
    n_steps: int = 1000
    depth: int = 4096
    batches: int = 32


@dataclass(frozen=True)
class OutputConfig:
    format: str = "json"
    path: str | None = None
    record_measures: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    Q: DiscreteMeasure
    h: float
    P0: DiscreteMeasure
    law: MutationLaw
    sim: SimConfig
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: dict | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def seed(self) -> SeedSpec:
        return SeedSpec(self.sim.seed)


def discretize_family(family: str, params: dict, grid_points: int = DEFAULT_GRID_POINTS) -> DiscreteMeasure:
    """Midpoint rule on ``grid_points`` equal cells of ``[0, s_q]``.

    Each cell's probability goes to its midpoint.  ``uniform`` takes
    ``{s_q}``; ``beta`` takes ``{alpha, gamma, s_q}`` (a beta law rescaled to
    ``[0, s_q]``).
    """
    if grid_points < 1:
        raise ConfigError("grid_points must be positive")
    try:
        s_q = float(params["s_q"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"grid family needs params.s_q: {exc}") from exc
    if not 0.0 < s_q <= 1.0:
        raise ConfigError(f"s_q must lie in (0, 1], got {s_q}")
    edges = np.linspace(0.0, 1.0, grid_points + 1)
    if family == "uniform":
        cum = edges
    elif family == "beta":
        try:
            a, g = float(params["alpha"]), float(params["gamma"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"beta family needs alpha and gamma: {exc}") from exc
        if a <= 0 or g <= 0:
            raise ConfigError("beta family needs alpha, gamma > 0")
        cum = _st.beta.cdf(edges, a, g)
    else:
        raise ConfigError(f"unknown grid family {family!r}")
    mids = 0.5 * (edges[:-1] + edges[1:]) * s_q
    w = np.diff(cum)
    keep = w > 0
    return from_arrays(mids[keep], w[keep] / w[keep].sum())


def parse_measure(spec) -> DiscreteMeasure:
    """``{atoms: [[x, w], ...]}``, a bare atom list, or a grid family."""
    try:
        if isinstance(spec, dict) and "family" in spec:
            return discretize_family(spec["family"], spec.get("params", {}), int(spec.get("grid_points", DEFAULT_GRID_POINTS)))
        atoms = spec["atoms"] if isinstance(spec, dict) else spec
        pairs = [(a["x"], a["w"]) if isinstance(a, dict) else (a[0], a[1]) for a in atoms]
        return canonicalize([(float(x), float(w)) for x, w in pairs])
    except ConfigError:
        raise
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ConfigError(f"malformed measure spec {spec!r}: {exc}") from exc


def load_raw(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def set_path(raw: dict, dotted: str, value) -> dict:
    """Copy of ``raw`` with ``raw[a][b][c] = value`` for ``dotted = 'a.b.c'``."""
    out = copy.deepcopy(raw)
    node = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        nxt = node.get(k)
        if not isinstance(nxt, dict):
            nxt = {}
            node[k] = nxt
        node = nxt
    node[keys[-1]] = value
    return out


def _positive(name, value, integer=False):
    if value is None or (integer and int(value) != value) or not value > 0:
        raise ConfigError(f"sim.{name} must be a positive {'integer' if integer else 'number'}, got {value!r}")


def build_config(raw: dict) -> ExperimentConfig:
    """Validate a raw mapping and build the typed config."""
    model = raw.get("model") or {}
    if "Q" not in model or "h" not in model:
        raise ConfigError("model.Q and model.h are required")
    Q = parse_measure(model["Q"])
    try:
        h = float(model["h"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model.h must be a number: {exc}") from exc
    s_q = support_sup(Q).sup_point
    if not s_q - MERGE_TOL <= h <= 1.0:
        raise ConfigError(f"model.h = {h} must satisfy S_Q = {s_q:.12g} <= h <= 1")
    p0 = model.get("P0", "delta_h")
    P0 = delta(h) if p0 == "delta_h" else parse_measure(p0)
    if abs(support_sup(P0).sup_point - h) > MERGE_TOL:
        raise ConfigError("model.P0 must have largest fitness value h")
    if "law" not in raw:
        raise ConfigError("law is required")
    law = MutationLaw.from_spec(raw["law"])

    sim_raw = dict(raw.get("sim") or {})
    if sim_raw.get("seed") is None:
        raise ConfigError("sim.seed is required (no nondeterministic default)")
    unknown = set(sim_raw) - set(SimConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown sim keys: {sorted(unknown)}")
    sim = SimConfig(**sim_raw)
    for name in ("depth_cap", "window", "burn_in", "replicas", "n_steps", "depth", "batches"):
        _positive(name, getattr(sim, name), integer=True)
    _positive("tol", sim.tol)
    if not isinstance(sim.seed, int) or sim.seed < 0:
        raise ConfigError("sim.seed must be a nonnegative integer")

    out_raw = dict(raw.get("output") or {})
    try:
        output = OutputConfig(**out_raw)
    except TypeError as exc:
        raise ConfigError(f"bad output section: {exc}") from exc
    if output.format not in ("json", "csv"):
        raise ConfigError(f"output.format must be json or csv, got {output.format!r}")

    sweep = raw.get("sweep")
    if sweep is not None:
        axes = sweep.get("axes") if isinstance(sweep, dict) else None
        if not axes or not all(isinstance(v, list) and v for v in axes.values()):
            raise ConfigError("sweep.axes must map dotted paths to nonempty lists")
    return ExperimentConfig(Q, h, P0, law, sim, output, sweep, raw)


def config_from_raw(raw: dict) -> ExperimentConfig:
    """``build_config`` with every input problem reported as ``ConfigError``."""
    try:
        return build_config(raw)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    except KingmanError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read ``path`` (if any), apply dotted-path ``overrides``, validate."""
    raw = load_raw(path) if path else {}
    for k, v in (overrides or {}).items():
        raw = set_path(raw, k, v)
    return config_from_raw(raw)
