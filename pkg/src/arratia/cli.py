"""Command-line entry point: ``arratia <subcommand> [flags]``.

Parameters are resolved in three layers: the experiment's defaults, then the
YAML config file (top-level keys apply to every subcommand, a section named
after the subcommand applies to that one only), then command-line flags.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import functools
import inspect
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__, harness
from .coupling import coupling_equivalence_test
from .errors import ConfigError, DomainError, SimulationError
from .flow import (
    FlowConfig,
    StartGrid,
    constant_drift,
    linear_drift,
    simulate_flow,
    width_series,
    write_flowpaths_csv,
)
from .report import ExperimentReport, config_hash, curve
from .rng import check_seed, replicate

log = logging.getLogger("arratia")

# flags shared by every subcommand; None means "not given"
COMMON_FLAGS = ("seed", "workers", "replications", "alpha", "epsilon", "t")


def run_simulate(
    grid: dict | None = None,
    horizon: float = 1.0,
    dt: float = 1e-3,
    save_times: list | None = None,
    drift: dict | None = None,
    bridge: bool = True,
    replications: int = 1,
    seed: int = 0,
    workers: int = 1,
    out: Path | None = None,
) -> ExperimentReport:
    """Simulate flow paths, export them as CSV and check frame invariants."""
    started = time.perf_counter()
    cfg = FlowConfig(
        _build_grid(grid or {"type": "spaced", "left": 3.0, "right": 3.0, "spacing": 0.05}),
        horizon=float(horizon),
        dt=float(dt),
        drift=_build_drift(drift),
        save_times=tuple(save_times or np.linspace(0.0, horizon, 11)[1:]),
        seed=seed,
        bridge=bool(bridge),
    )
    if replications < 1:
        raise ConfigError("replications must be >= 1")
    paths = replicate(functools.partial(_simulate_rep, cfg), replications, seed, "simulate", workers)
    rep = ExperimentReport("simulate", cfg.describe(), seed)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "flowpaths.csv", "w", newline="") as fh:
            write_flowpaths_csv(paths, fh)

    order = contiguous = nosplit = 0
    widths = []
    for p in paths:
        order += all(np.all(np.diff(pos) > 0) for pos in p.positions)
        contiguous += bool(np.all(np.diff(p.cluster_of, axis=1) >= 0) and np.all(
            np.diff(p.cluster_of, axis=1) <= 1))
        # no splitting: points sharing a cluster keep sharing it
        same = np.diff(p.cluster_of, axis=1) == 0
        nosplit += bool(np.all(same[1:] >= same[:-1]))
        widths.append(width_series(p))
    rep.add("order_preserved", order, threshold=replications, verdict=order == replications)
    rep.add("contiguous_clusters", contiguous, threshold=replications, verdict=contiguous == replications)
    rep.add("no_splitting", nosplit, threshold=replications, verdict=nosplit == replications)
    touches = int(sum(w.touches_boundary.any() for w in widths))
    rep.add("boundary_touches", touches, verdict="INFO")
    ts = np.asarray(cfg.save_times)
    left = np.array([w.left for w in widths])
    right = np.array([w.right for w in widths])
    rep.add("mean_nu_hat_final", float(np.mean(left[:, -1] + right[:, -1])), verdict="INFO")
    rep.plot_data["widths"] = (
        curve("mean_left", ts, left.mean(axis=0))
        + curve("mean_right", ts, right.mean(axis=0))
        + curve("mean_nu_hat", ts, (left + right).mean(axis=0))
    )
    rep.wall_time = time.perf_counter() - started
    return rep


def _simulate_rep(cfg, rng, index):
    return simulate_flow(cfg, rng)


def _build_grid(spec) -> StartGrid:
    if isinstance(spec, list):
        return StartGrid(np.asarray(spec, dtype=float))
    if not isinstance(spec, dict):
        raise ConfigError("grid must be a list of points or a mapping")
    spec = dict(spec)
    kind = spec.pop("type", "points")
    try:
        if kind == "points":
            return StartGrid(np.asarray(spec["points"], dtype=float))
        if kind == "uniform":
            return StartGrid.uniform(float(spec["lo"]), float(spec["hi"]), int(spec["n"]))
        if kind == "spaced":
            return StartGrid.spaced(float(spec["left"]), float(spec["right"]), float(spec["spacing"]))
        if kind == "geometric":
            return StartGrid.geometric(float(spec["inner"]), float(spec["outer"]), float(spec["ratio"]))
    except KeyError as exc:
        raise ConfigError(f"grid of type {kind!r} is missing {exc}") from None
    raise ConfigError(f"unknown grid type {kind!r}")


def _build_drift(spec):
    if spec is None:
        return None
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("drift must be a mapping with a 'type' key")
    if spec["type"] == "constant":
        return constant_drift(float(spec.get("c", 0.0)))
    if spec["type"] == "linear":
        return linear_drift(float(spec.get("slope", 0.0)), float(spec.get("intercept", 0.0)))
    raise ConfigError(f"unknown drift type {spec['type']!r}")


def _coupling(levels=(1.0, 0.5, 0.25), replications=10_000, seed=0, workers=1, mesh_dt=1e-5, flow_dt=1e-4,
              probe_times=(0.05, 0.2, 0.5, 1.0), level=0.01):
    return coupling_equivalence_test(levels, replications, seed, mesh_dt=mesh_dt, flow_dt=flow_dt,
                                     probe_times=probe_times, level=level, workers=workers)


def _sudakov(params_list=((0.5, 0.1, 30, 60),), mesh=256, replications=10_000, seed=0, workers=1,
             tail_factors=(0.5, 1.0), alpha=None, epsilon=None):
    params = [
        (p[0] if epsilon is None else epsilon, p[1] if alpha is None else alpha, int(p[2]), int(p[3]))
        for p in params_list
    ]
    return harness.run_sudakov_check(params, mesh, replications, seed, workers, tail_factors)


def _lil_paths(epsilon=0.5, alpha=0.1, n_range=(3, 10), replications=1000, seed=0, workers=1, ratio=1.03,
               substeps=50):
    return harness.run_lil_paths(epsilon, alpha, n_range, replications, seed, workers, ratio, substeps)


# subcommand -> (runner, {flag: parameter})
COMMANDS = {
    "simulate": (run_simulate, {"t": "save_times"}),
    "dist-check": (harness.run_distribution_check, {"t": "t"}),
    "scaling-check": (harness.run_scaling_check, {"t": "t_list"}),
    "lil-marginals": (harness.run_lil_marginals, {}),
    "lil-paths": (_lil_paths, {}),
    "sudakov-check": (_sudakov, {}),
    "coupling-check": (_coupling, {}),
}
LIST_PARAMS = {"save_times", "t_list"}


def _parameters(fn) -> dict:
    sig = inspect.signature(fn)
    params = {}
    for name, p in sig.parameters.items():
        if name != "out":
            params[name] = p.default
    return params


def resolve(command: str, file_cfg: dict, flags: dict) -> dict:
    """Merge defaults, config file and flags into the runner's keyword arguments."""
    fn, rename = COMMANDS[command]
    params = _parameters(fn)
    resolved = {k: v for k, v in params.items()}

    for key, value in file_cfg.items():
        if key in COMMANDS:
            continue
        if key in params:
            resolved[key] = value
    section = file_cfg.get(command, {}) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"config section {command!r} must be a mapping")
    for key, value in section.items():
        if key not in params:
            raise ConfigError(f"unknown key {key!r} in section {command!r}")
        resolved[key] = value

    for flag in COMMON_FLAGS:
        value = flags.get(flag)
        if value is None:
            continue
        target = rename.get(flag, flag)
        if target not in params:
            raise ConfigError(f"--{flag} is not used by {command}")
        if flag == "t" and target not in LIST_PARAMS:
            if len(value) != 1:
                raise ConfigError(f"{command} takes a single --t")
            value = value[0]
        resolved[target] = value
    for key in ("n_range",):
        if key in resolved and resolved[key] is not None:
            resolved[key] = tuple(resolved[key])
    resolved["seed"] = check_seed(resolved.get("seed", 0))
    return resolved


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return data


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML config file")
    common.add_argument("--seed", type=int, help="64-bit master seed")
    common.add_argument("--workers", type=int, help="worker processes (never changes results)")
    common.add_argument("--out", metavar="DIR", help="output directory (default: runs/<subcommand>)")
    common.add_argument("--replications", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--t", type=float, action="append", help="time; repeatable where a list is expected")
    common.add_argument("--no-verdict", action="store_true", help="exit 0 even when a verdict fails")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="arratia", description="Monte Carlo laboratory for the Arratia flow")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    helps = {
        "simulate": "simulate flow paths and export them",
        "dist-check": "cluster-width law against its closed form",
        "scaling-check": "self-similarity and the erf(y/2) limit",
        "lil-marginals": "envelope events at geometric times",
        "lil-paths": "path maxima of width / envelope ratios",
        "sudakov-check": "Sudakov and concentration bounds",
        "coupling-check": "coupled family against the flow engine",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, default=str) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    try:
        file_cfg = _load_config(args.config)
        flags = {k: getattr(args, k) for k in COMMON_FLAGS}
        resolved = resolve(args.command, file_cfg, flags)
        if resolved.get("workers", 1) < 1:
            raise ConfigError("--workers must be >= 1")
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"arratia: error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out or file_cfg.get("out") or f"runs/{args.command}")
    inputs = {k: v for k, v in resolved.items() if k != "workers"}
    manifest = {
        "subcommand": args.command,
        "config_file": args.config,
        "resolved_config": inputs,
        "config_hash": config_hash(inputs),
        "seed": resolved["seed"],
        "workers": resolved.get("workers", 1),
        "output_dir": str(out),
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", manifest)

    fn = COMMANDS[args.command][0]
    kwargs = dict(resolved)
    if fn is run_simulate:
        kwargs["out"] = out
    log.info("running %s with %s", args.command, inputs)
    try:
        report = fn(**kwargs)
    except (ConfigError, DomainError) as exc:
        print(f"arratia: error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"arratia: simulation error: {exc}", file=sys.stderr)
        return 1
    report.inputs = inputs
    report.write(out)

    manifest["wall_time"] = report.wall_time
    manifest["passed"] = report.passed
    _write_json(out / "manifest.json", manifest)

    for row in report.failures:
        print(f"FAIL {row.name}: value={row.value} threshold={row.threshold} {row.note}", file=sys.stderr)
    print(f"{args.command}: {'PASS' if report.passed else 'FAIL'} "
          f"({len(report.rows)} rows, {len(report.failures)} failed) -> {out}")
    if report.passed or args.no_verdict:
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
