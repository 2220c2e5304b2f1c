"""Command-line driver: config parsing, stage orchestration and artifacts.

Exit status: 0 when every requested stage converged or passed, 1 on a
numerical failure (diagnostics are still written), 2 on a configuration
error (nothing is written).
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import transform
from .grid import Grid, GridError, write_field_csv
from .model import ConfigError, Nonlinearity, Potential, Problem, SamplingPlan, validate
from .solver import (SolverError, SolverOptions, anti_coercivity_probe, continuation_in_omega,
                     large_norm_sweep, local_linking_probe, multiplicity_search, solve)
from .spectrum import SpectrumError, eigenpairs, write_spectrum_csv

log = logging.getLogger("dualwave")

SCHEMA_VERSION = 1
COMMANDS = ("validate", "spectrum", "transform-table", "solve", "multi", "probe", "continue")

PRESETS: dict[str, dict] = {
    "oscillator-definite": {
        "problem": {"potential": {"kind": "harmonic", "omega": -1.0},
                    "nonlinearity": {"kind": "power", "p": 6, "mu": 6}, "dimension": 1},
        "grid": {"R": 6.0, "n": 8001},
    },
    "oscillator-indefinite": {
        "problem": {"potential": {"kind": "harmonic", "omega": 4.0},
                    "nonlinearity": {"kind": "power", "p": 6, "mu": 6}, "dimension": 1,
                    "shift": 6.0},
        "grid": {"R": 6.0, "n": 128001},
        "solver": {"coarse_n": 4001},
    },
    "oscillator-continuation": {
        "problem": {"potential": {"kind": "harmonic", "omega": 0.0},
                    "nonlinearity": {"kind": "power", "p": 6, "mu": 6}, "dimension": 1},
        "grid": {"R": 6.0, "n": 128001},
        "solver": {"coarse_n": 4001, "omegas": [0.0, 2.0, 3.0, 4.0]},
    },
}

# solver-section keys that are not SolverOptions fields
_RUN_KEYS = {"K": 20, "J": 3, "eps": 1e-2, "n_dirs": 200, "radii": [20.0, 40.0, 80.0],
             "basis_size": 5, "omegas": [0.0, 2.0, 3.0, 4.0], "warm": True,
             "multiplicity_basis": "solutions", "t_min": 1e-8, "t_max": 1e8, "table_count": 201,
             "table_max": 10.0}


# -- config ----------------------------------------------------------------------------


@dataclass
class RunConfig:
    problem: Problem
    grid: Grid
    options: SolverOptions
    run: dict
    output: dict
    seed: int
    raw: dict = field(repr=False)


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return d[key]


def _potential(d: dict) -> Potential:
    kind = _require(d, "kind", "problem.potential")
    if kind == "harmonic":
        return Potential.harmonic(float(d.get("omega", 0.0)), float(d.get("scale", 1.0)))
    if kind == "quartic":
        return Potential.quartic(float(d.get("omega", 0.0)))
    if kind == "constant":
        return Potential.constant(float(_require(d, "value", "problem.potential")))
    if kind == "table":
        return Potential.table(_require(d, "x", "problem.potential"), _require(d, "V", "problem.potential"))
    raise ConfigError(f"unknown potential kind {kind!r}")


def _nonlinearity(d: dict) -> Nonlinearity:
    kind = _require(d, "kind", "problem.nonlinearity")
    mu = float(_require(d, "mu", "problem.nonlinearity"))
    if kind == "power":
        return Nonlinearity.power(float(_require(d, "p", "problem.nonlinearity")), mu)
    if kind == "double_power":
        return Nonlinearity.double_power(float(_require(d, "p", "problem.nonlinearity")),
                                         float(_require(d, "q", "problem.nonlinearity")),
                                         float(d.get("a", 1.0)), float(d.get("b", 1.0)), mu)
    raise ConfigError(f"unknown nonlinearity kind {kind!r}")


def parse_config(raw: dict) -> RunConfig:
    """Build a :class:`RunConfig`; raises :class:`ConfigError` on any problem."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - {"problem", "grid", "solver", "output", "seed"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    pr = _require(raw, "problem", "config")
    gr = _require(raw, "grid", "config")
    try:
        dim = int(pr.get("dimension", 1))
        shift = pr.get("shift")
        problem = Problem(_potential(_require(pr, "potential", "problem")),
                          _nonlinearity(_require(pr, "nonlinearity", "problem")),
                          dim, None if shift is None else float(shift), str(pr.get("name", "")))
        n = int(_require(gr, "n", "grid"))
        R = float(_require(gr, "R", "grid"))
        if n < 64:
            raise ConfigError("grid.n must be >= 64")
        grid = Grid(dim, R, n, gr.get("lo"), gr.get("hi"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    sv = dict(raw.get("solver", {}))
    run = {k: sv.pop(k, v) for k, v in _RUN_KEYS.items()}
    sv.pop("mode", None)
    known = set(SolverOptions.__dataclass_fields__)
    bad = set(sv) - known
    if bad:
        raise ConfigError(f"unknown solver keys {sorted(bad)}")
    seed = int(raw.get("seed", 0))
    try:
        options = SolverOptions(**{**sv, "seed": seed})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if not (options.grad_tol > 0 and options.res_tol > 0):
        raise ConfigError("grad_tol and res_tol must be positive")
    out = {"directory": "out", "formats": ["json", "csv"], **raw.get("output", {})}
    return RunConfig(problem, grid, options, run, out, seed, raw)


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise ConfigError(f"cannot set {dotted!r}")
    d[keys[-1]] = value


def load_raw(args) -> dict:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        raw = copy.deepcopy(PRESETS[args.preset])
    elif args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    else:
        raise ConfigError("a --config file or --preset is required")
    for item in args.set or []:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        _set_path(raw, key, value)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw.setdefault("output", {})["directory"] = args.out
    return raw


# -- serialisation -------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def write_iters_csv(path: Path, rows: list[dict], extra_cols: dict | None = None) -> None:
    cols = ["iter", "stage", "phi", "grad", "rho"]
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    extra_cols = extra_cols or {}
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([*extra_cols, *cols])
        for r in rows:
            wr.writerow([*extra_cols.values(), *(repr(r.get(c)) if isinstance(r.get(c), float)
                                                 else r.get(c, "") for c in cols)])


# -- stages ----------------------------------------------------------------------------


def _header(cfg: RunConfig, command: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": cfg.seed,
        "config": {k: v for k, v in cfg.raw.items() if k != "output"},
        "problem": cfg.problem.with_grid(cfg.grid).to_dict(),
        "grid": cfg.grid.metadata(),
        "solver": cfg.options.to_dict(),
        "run": cfg.run,
    }


def _validation(cfg: RunConfig) -> dict:
    problem = cfg.problem.with_grid(cfg.grid)
    rep = validate(problem, cfg.grid, SamplingPlan(cfg.run["t_min"], cfg.run["t_max"]))
    return rep.to_dict()


def pipeline(command: str) -> list[str]:
    return {
        "validate": ["validate"],
        "spectrum": ["validate", "spectrum"],
        "transform-table": ["transform-table", "verify-transform"],
        "solve": ["validate", "spectrum", "solve (mountain pass if ell == 0, else local linking)"],
        "multi": ["validate", "spectrum", "multiplicity search"],
        "probe": ["validate", "spectrum", "local-linking probe", "anti-coercivity probe",
                  "large-norm sweep"],
        "continue": ["validate", "spectrum per omega", "solve per omega (warm start)"],
    }[command]


def run_command(command: str, cfg: RunConfig, outdir: Path) -> tuple[int, dict]:
    """Execute a subcommand; returns (exit status, report)."""
    report = _header(cfg, command)
    report["pipeline"] = pipeline(command)
    grid = cfg.grid
    problem = cfg.problem.with_grid(grid)
    opts = cfg.options
    ok = True

    if command == "transform-table":
        t = np.linspace(-float(cfg.run["table_max"]), float(cfg.run["table_max"]),
                        int(cfg.run["table_count"]))
        fv, fp, fpp = transform.DEFAULT.evaluate(t)
        with open(outdir / "transform.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "f", "f_prime", "f_second"])
            for row in zip(t, fv, fp, fpp):
                wr.writerow([repr(float(x)) for x in row])
        bounds = transform.verify_transform_bounds(SamplingPlan(cfg.run["t_min"], cfg.run["t_max"]).samples())
        report["transform"] = bounds.to_dict()
        return (0 if bounds.passed else 1), report

    val = _validation(cfg)
    report["validation"] = val
    ok &= val["passed"]
    if command == "validate":
        return (0 if ok else 1), report

    if command == "continue":
        base = cfg.problem
        points = continuation_in_omega(base, grid, cfg.run["omegas"], opts, K=cfg.run["K"],
                                       warm=cfg.run["warm"])
        report["continuation"] = [p.summary() for p in points]
        cols, rows = {}, []
        for p in points:
            if p.report is None:
                ok &= p.degenerate
                continue
            ok &= p.report.converged
            cols[f"u_omega={p.omega:g}"] = p.report.u
            for r in p.report.iterations:
                rows.append({"omega": p.omega, **r})
        if cols:
            write_field_csv(outdir / "profile.csv", grid, cols)
        write_iters_csv(outdir / "iters.csv", rows)
        return (0 if ok else 1), report

    split = eigenpairs(problem, grid, cfg.run["K"])
    write_spectrum_csv(outdir / "spectrum.csv", split)
    report["spectrum"] = {**split.summary(), "eigenvalues": split.eigenvalues,
                          "extrapolated": split.extrapolated}
    if command == "spectrum":
        return (0 if ok else 1), report

    if command == "solve":
        rep = solve(problem, grid, split, opts)
        report["result"] = rep.summary()
        write_field_csv(outdir / "profile.csv", grid, {"v": rep.v, "u": rep.u})
        write_iters_csv(outdir / "iters.csv", rep.iterations)
        ok &= rep.converged and not rep.trivial
    elif command == "multi":
        reps, levels = multiplicity_search(problem, grid, split, cfg.run["J"], opts,
                                           basis=cfg.run["multiplicity_basis"])
        report["results"] = [r.summary() for r in reps]
        report["levels"] = levels
        cols = {}
        rows = []
        for i, r in enumerate(reps, 1):
            cols[f"v{i}"] = r.v
            cols[f"u{i}"] = r.u
            rows += [{"solution": i, **e} for e in r.iterations]
        if cols:
            write_field_csv(outdir / "profile.csv", grid, cols)
        write_iters_csv(outdir / "iters.csv", rows)
        ok &= len(reps) >= cfg.run["J"]
    elif command == "probe":
        seed = cfg.seed
        basis = split.eigenfields[: cfg.run["basis_size"]]
        probes = [
            local_linking_probe(problem, grid, split, cfg.run["eps"], cfg.run["n_dirs"], seed=seed),
            anti_coercivity_probe(problem, grid, basis, cfg.run["radii"], seed=seed),
            large_norm_sweep(problem, grid, basis, seed=seed),
        ]
        report["probes"] = [p.to_dict() for p in probes]
        ok &= all(p.passed for p in probes)
    return (0 if ok else 1), report


# -- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualwave", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", help=f"builtin config: {', '.join(sorted(PRESETS))}")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry, e.g. grid.n=4001 (value parsed as JSON)")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int)
        p.add_argument("--dry-run", action="store_true", help="print the resolved pipeline only")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_raw(args)
        if args.command == "transform-table" and "problem" not in raw:
            raise ConfigError("transform-table still needs a problem/grid section")
        cfg = parse_config(raw)
        if args.command == "multi" and not cfg.problem.nonlinearity.odd:
            raise ConfigError("multiplicity requires an odd nonlinearity")
    except (ConfigError, GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.dry_run:
        print(json.dumps(_clean({"command": args.command, "pipeline": pipeline(args.command),
                                 "config": cfg.raw, "output": cfg.output}), indent=2, sort_keys=True))
        return 0

    outdir = Path(cfg.output["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        status, report = run_command(args.command, cfg, outdir)
    except (SolverError, SpectrumError, ArithmeticError) as exc:
        status = 1
        report = {**_header(cfg, args.command), "error": f"{type(exc).__name__}: {exc}"}
    report["status"] = status
    write_json(outdir / "report.json", report)
    print(f"{args.command}: {'ok' if status == 0 else 'FAILED'} -> {outdir / 'report.json'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
