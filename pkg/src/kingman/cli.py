"""Command-line entry point ``kingman``.

Every subcommand reads an optional config file; flags override file values.
Exit codes: 0 success (including Inconclusive verdicts), 1 usage or config
error, 2 numeric failure or a failed validation suite.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from kingman import backward as bw
from kingman.condensation import CriterionConfig, classify, criterion_expectation
from kingman.config import ExperimentConfig, config_from_raw, load_config, set_path
from kingman.equilibrium import equilibrium
from kingman.errors import KingmanError, NumericError, UsageError
from kingman.forward import forward_trajectory
from kingman.mutation import BetaStream, sample_sequence
from kingman.two_atom import TwoAtomModel, two_atom_classify, x_distribution
from kingman.validation import run_suite

COMMANDS = ("equilibrium", "forward", "backward", "criterion", "classify", "two-atom", "phase-sweep", "validate")

# flag name -> dotted config path
FLAG_PATHS = {
    "h": "model.h",
    "seed": "sim.seed",
    "replicas": "sim.replicas",
    "n_steps": "sim.n_steps",
    "depth": "sim.depth",
    "depth_cap": "sim.depth_cap",
    "tol": "sim.tol",
    "window": "sim.window",
    "burn_in": "sim.burn_in",
    "batches": "sim.batches",
    "format": "output.format",
    "output": "output.path",
    "record_measures": "output.record_measures",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def rows_to_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: clean(r.get(k, "")) for k in cols})
    return buf.getvalue()


def _criterion_config(cfg: ExperimentConfig) -> CriterionConfig:
    s = cfg.sim
    return CriterionConfig(
        replicas=s.replicas, depth=s.depth, burn_in=s.burn_in, batches=s.batches,
        tol=s.tol, window=s.window, depth_cap=s.depth_cap, seed=cfg.seed,
    )


def _estimate(est) -> dict:
    return {
        "point": est.point, "ci_low": est.ci_low, "ci_high": est.ci_high,
        "term_log_h1mb": est.term_log_h1mb, "term_log_meanfit": est.term_log_meanfit,
        "samples": est.samples, "method": est.method,
        "replica_mean": est.replica_mean, "replica_se": est.replica_se,
    }


def _verdict(v) -> dict:
    return {"verdict": v.verdict, "reason": v.reason, "boundary_case": v.boundary_case,
            "estimate": _estimate(v.estimate) if v.estimate else None}


# subcommand bodies: each returns (record for JSON, rows for CSV)


def cmd_equilibrium(cfg: ExperimentConfig):
    if not cfg.law.is_deterministic:
        raise UsageError("equilibrium needs a deterministic (constant) law")
    b = cfg.law.params[0] if cfg.law.kind == "constant" else cfg.law.params[0][0]
    eq = equilibrium(b, cfg.Q, cfg.h)
    rec = {"case": eq.case_tag, "theta": eq.theta, "condensate_mass": eq.condensate_mass,
           "hazard_integral": eq.hazard_integral, "mean_fitness": eq.measure.mean(), "b": b, "h": cfg.h,
           "measure": eq.measure.to_json()}
    row = {k: v for k, v in rec.items() if k != "measure"}
    return rec, [row]


def cmd_forward(cfg: ExperimentConfig):
    betas = sample_sequence(cfg.law, cfg.seed.child(0), cfg.sim.n_steps)
    tr = forward_trajectory(cfg.P0, betas, cfg.Q, record_measures=True)
    masses = [m.mass_at(cfg.h) for m in tr.measures]
    rec = {"n_steps": cfg.sim.n_steps, "h": cfg.h, "means": list(tr.means), "mass_at_h": masses,
           "betas": list(tr.betas_used), "final": tr.measures[-1].to_json()}
    if cfg.output.record_measures:
        rec["measures"] = [m.to_json() for m in tr.measures]
    rows = [{"n": n, "beta": (tr.betas_used[n - 1] if n else ""), "mean_fitness": tr.means[n], "mass_at_h": masses[n]}
            for n in range(len(tr.means))]
    return rec, rows


def cmd_backward(cfg: ExperimentConfig):
    s = cfg.sim
    lim = bw.quenched_limit(BetaStream(cfg.law, cfg.seed.child(0)), cfg.Q, cfg.h,
                            tol=s.tol, window=s.window, depth_cap=s.depth_cap)
    rec = {"h": cfg.h, "condensate_mass": lim.condensate_mass, "depth_used": lim.depth_used,
           "mass_gap": lim.mass_gap, "mean_fitness": lim.mean_fitness, "limit": lim.limit.to_json()}
    row = {k: v for k, v in rec.items() if k != "limit"}
    return rec, [row]


def cmd_criterion(cfg: ExperimentConfig):
    rec = _estimate(criterion_expectation(cfg.law, cfg.Q, cfg.h, _criterion_config(cfg)))
    return rec, [rec]


def cmd_classify(cfg: ExperimentConfig):
    v = classify(cfg.law, cfg.Q, cfg.h, _criterion_config(cfg))
    rec = _verdict(v)
    row = {"verdict": v.verdict, "reason": v.reason, "boundary_case": v.boundary_case}
    if v.estimate:
        row.update(_estimate(v.estimate))
    return rec, [row]


def cmd_two_atom(cfg: ExperimentConfig):
    c = float(cfg.Q.x[0])
    model = TwoAtomModel(c, cfg.h, cfg.law)
    v = two_atom_classify(model)
    xs = x_distribution(model, cfg.sim.replicas, cfg.sim.depth, cfg.seed)
    summary = {"replicas": xs.size, "depth": cfg.sim.depth, "mean": float(xs.mean()),
               "std": float(xs.std()), "min": float(xs.min()), "max": float(xs.max()),
               "condensate_mean": float(1.0 - xs.mean())}
    rec = {"c": c, "h": cfg.h, **_verdict(v), "x_summary": summary}
    row = {"c": c, "h": cfg.h, "verdict": v.verdict, "point": v.estimate.point,
           **{f"x_{k}": val for k, val in summary.items()}}
    return rec, [row]


RUNNERS = {
    "equilibrium": cmd_equilibrium,
    "forward": cmd_forward,
    "backward": cmd_backward,
    "criterion": cmd_criterion,
    "classify": cmd_classify,
    "two-atom": cmd_two_atom,
}


def cmd_phase_sweep(cfg: ExperimentConfig):
    sweep = cfg.sweep or {}
    axes = sweep.get("axes")
    if not axes:
        raise UsageError("phase-sweep needs sweep.axes in the config")
    command = sweep.get("command", "classify")
    if command not in RUNNERS:
        raise UsageError(f"sweep.command must be one of {sorted(RUNNERS)}")
    names = list(axes)
    rows = []
    for values in itertools.product(*(axes[n] for n in names)):
        raw = cfg.raw
        for n, v in zip(names, values):
            raw = set_path(raw, n, v)
        row = dict(zip(names, values))
        try:
            sub = config_from_raw(raw)
            _, sub_rows = RUNNERS[command](sub)
            row.update(sub_rows[-1])
            row["error"] = ""
        except KingmanError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return {"command": command, "axes": names, "rows": rows}, rows


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kingman", description="Mutation-selection model with random mutation probabilities.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "validate":
            sp.add_argument("--quick", action="store_true", help="smaller statistical samples")
            sp.add_argument("--output", help="write the JSON report here")
            continue
        sp.add_argument("--config", help="YAML or JSON config file")
        sp.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                        help="override any config key by dotted path (value parsed as YAML)")
        sp.add_argument("--h", type=float)
        sp.add_argument("--Q", dest="Q", help="mutant measure as YAML/JSON, e.g. '[[0.5, 1.0]]'")
        sp.add_argument("--law", help="law spec as YAML/JSON, e.g. '{type: constant, params: {b: 0.3}}'")
        sp.add_argument("--b", type=float, help="shortcut for a constant law")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--n-steps", type=int)
        sp.add_argument("--depth", type=int)
        sp.add_argument("--depth-cap", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--window", type=int)
        sp.add_argument("--burn-in", type=int)
        sp.add_argument("--batches", type=int)
        sp.add_argument("--format", choices=("json", "csv"))
        sp.add_argument("--output", help="output file (stdout if omitted)")
        sp.add_argument("--record-measures", action="store_true", default=None)
        if name == "two-atom":
            sp.add_argument("--c", type=float, required=True)
    return p


def _parse_value(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse value {text!r}: {exc}") from exc


def overrides_from_args(args) -> dict:
    out = {}
    for flag, path in FLAG_PATHS.items():
        v = getattr(args, flag, None)
        if v is not None:
            out[path] = v
    if args.Q is not None:
        out["model.Q"] = _parse_value(args.Q)
    if args.law is not None:
        out["law"] = _parse_value(args.law)
    if args.b is not None:
        out["law"] = {"type": "constant", "params": {"b": args.b}}
    if getattr(args, "c", None) is not None:
        out["model.Q"] = [[args.c, 1.0]]
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects PATH=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v)
    return out


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            results = run_suite(quick=args.quick)
            _emit(dumps([r.to_json() for r in results]), args.output)
            return 0 if all(r.passed for r in results) else 2
        cfg = load_config(args.config, overrides_from_args(args))
        runner = cmd_phase_sweep if args.command == "phase-sweep" else RUNNERS[args.command]
        rec, rows = runner(cfg)
        text = rows_to_csv(rows) if cfg.output.format == "csv" else dumps(rec)
        _emit(text, cfg.output.path)
        return 0
    except NumericError as exc:
        print(f"kingman: numeric failure: {exc}", file=sys.stderr)
        return 2
    except (KingmanError, OSError) as exc:
        print(f"kingman: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
