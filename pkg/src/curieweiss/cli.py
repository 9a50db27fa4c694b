"""Command-line front end.

    curieweiss <command> --config run.json [--out DIR] [--threads K] [--seed N]

Commands: classify, pmf, lclt, definetti, bounds, mcmc. Configs are JSON or
TOML (chosen by file extension) with a mandatory ``spec_version = 1``;
unknown keys are rejected. Each command writes plot-ready CSV into ``--out``
and prints a one-line JSON summary.

Exit codes: 0 success, 1 invalid input, 2 regime or precondition failure
(``classify`` also exits 2 for a point outside the high temperature regime).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bounds, definetti, exactdist, mcmc
from .exactdist import ResourceLimitError
from .model import GroupSizes, ModelSpec
from .regime import ParameterPoint, RegimeError, classify, empirical_alpha

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("curieweiss")

SPEC_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_REGIME = 0, 1, 2

COMMAND_KEYS = {
    "classify": {"point", "model", "symmetrize"},
    "pmf": {"model", "symmetrize", "max_states"},
    "lclt": {"point", "n_sweep", "symmetrize"},
    "definetti": {"model", "symmetrize", "delta", "n_sweep", "points_per_axis"},
    "bounds": {"m_max", "u_max", "m_points", "u_points", "delta", "tau"},
    "mcmc": {"model", "symmetrize", "chain"},
}
CHAIN_KEYS = {"samples", "burn_in", "thin", "seed"}


class ConfigError(ValueError):
    pass


def load_config(path: Path, command: str) -> dict:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            cfg = tomllib.loads(raw.decode())
        else:
            cfg = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a table/object")
    if cfg.get("spec_version") != SPEC_VERSION:
        raise ConfigError(f"spec_version must be {SPEC_VERSION}")
    unknown = set(cfg) - COMMAND_KEYS[command] - {"spec_version"}
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {sorted(unknown)}")
    if "n_sweep" in cfg:
        ns = cfg["n_sweep"]
        if (not isinstance(ns, list) or not ns or any(not isinstance(v, int) or v < 1 for v in ns)
                or any(b <= a for a, b in zip(ns, ns[1:]))):
            raise ConfigError("n_sweep must be a strictly increasing list of positive integers")
    if "chain" in cfg:
        if not isinstance(cfg["chain"], dict) or set(cfg["chain"]) - CHAIN_KEYS:
            raise ConfigError(f"chain accepts only {sorted(CHAIN_KEYS)}")
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}")
    return cfg[key]


def _model(cfg: dict) -> ModelSpec:
    return ModelSpec.from_json_obj(_require(cfg, "model"), bool(cfg.get("symmetrize", False)))


def _point(cfg: dict) -> ParameterPoint:
    return ParameterPoint.from_json_obj(_require(cfg, "point"), bool(cfg.get("symmetrize", False)))


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def cmd_classify(cfg: dict, args) -> int:
    if "point" in cfg and "model" in cfg:
        raise ConfigError("give either point or model, not both")
    if "model" in cfg:
        spec = _model(cfg)
        point = ParameterPoint(tuple(empirical_alpha(spec.groups)), spec.coupling)
    else:
        point = _point(cfg)
    decision = classify(point)
    _emit(decision.to_record())
    return EXIT_OK if decision.is_high_temperature else EXIT_REGIME


def cmd_pmf(cfg: dict, args) -> int:
    spec = _model(cfg)
    table = exactdist.exact_pmf(spec, max_states=int(cfg.get("max_states", exactdist.DEFAULT_MAX_STATES)),
                                threads=args.threads)
    _write(args.out, "pmf.csv", table.to_csv())
    _emit({"states": spec.groups.num_states, "log_Z": table.log_Z})
    return EXIT_OK


def cmd_lclt(cfg: dict, args) -> int:
    point = _point(cfg)
    ns = _require(cfg, "n_sweep")
    decision = classify(point)
    if not decision.is_high_temperature:
        raise RegimeError(decision.detail)
    reports = exactdist.lclt_sweep(point, ns, threads=args.threads)
    _write(args.out, "lclt.csv", exactdist.lclt_csv(reports))
    _emit({"n": [r.n for r in reports], "sup_error": [r.sup_error for r in reports]})
    return EXIT_OK


def cmd_definetti(cfg: dict, args) -> int:
    spec = _model(cfg)
    ppa = cfg.get("points_per_axis")
    dens = definetti.de_finetti_density(spec, ppa)
    _write(args.out, "definetti_density.csv", definetti.density_profile_csv(dens))
    mix = definetti.mixture_pmf(spec, dens)
    exact = exactdist.exact_pmf(spec, threads=args.threads)
    diff = float(np.max(np.abs(mix.probs - exact.probs)))
    _write(args.out, "definetti_mixture.csv", mix.to_csv())
    summary = {"max_abs_diff": diff, "box": dens.box}
    if "n_sweep" in cfg:
        delta = float(cfg.get("delta", 0.5))
        alpha = empirical_alpha(spec.groups)
        reports = []
        for n in cfg["n_sweep"]:
            sp = ModelSpec(GroupSizes(exactdist.balanced_sizes(alpha, n)), spec.coupling)
            reports.append(definetti.tail_mass(definetti.de_finetti_density(sp, ppa), delta))
        _write(args.out, "concentration.csv", definetti.concentration_csv(reports))
        if len(reports) > 1 and all(r.tail_mass > 0 for r in reports):
            summary["tail_slope"] = definetti.concentration_slope(reports)
    _emit(summary)
    return EXIT_OK


def cmd_bounds(cfg: dict, args) -> int:
    rows = bounds.bound_scan(float(cfg.get("m_max", bounds.GAUSSIAN_BOUND_M_MAX)),
                             float(cfg.get("u_max", bounds.GAUSSIAN_BOUND_U_MAX)),
                             int(cfg.get("m_points", 100)), int(cfg.get("u_points", 100)))
    _write(args.out, "bounds_scan.csv", bounds.bound_scan_csv(rows))
    split = bounds.SplitParams(float(cfg.get("delta", np.pi / 4)), float(cfg.get("tau", 0.5)))
    _emit({
        "negative_margins": int(np.sum(rows[:, 4] < 0)),
        "min_margin": float(rows[:, 4].min()),
        "s": bounds.s_bound(split.tau, split.delta),
        "theta_m0": bounds.theta(bounds.RademacherParam(0.0), split.delta),
    })
    return EXIT_OK


def cmd_mcmc(cfg: dict, args) -> int:
    spec = _model(cfg)
    chain = dict(_require(cfg, "chain"))
    seed = args.seed if args.seed is not None else int(chain.get("seed", 0))
    config = mcmc.ChainConfig(seed=seed, samples=int(_require(chain, "samples")),
                              burn_in=chain.get("burn_in"), thin=chain.get("thin"))
    table = mcmc.run(spec, config)
    _write(args.out, "mcmc.csv", table.to_csv())
    summary = dict(table.meta)
    if spec.groups.num_states <= 10**6:
        summary["tv_vs_exact"] = mcmc.tv_distance(table, exactdist.exact_pmf(spec, threads=args.threads))
    _emit(summary)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "pmf": cmd_pmf,
    "lclt": cmd_lclt,
    "definetti": cmd_definetti,
    "bounds": cmd_bounds,
    "mcmc": cmd_mcmc,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="JSON or TOML run file")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory for CSV files")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser = argparse.ArgumentParser(prog="curieweiss", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.threads < 1 or (args.seed is not None and not 0 <= args.seed < 2**64):
        log.error("--threads must be >= 1 and --seed a 64-bit unsigned integer")
        return EXIT_INPUT
    try:
        cfg = load_config(args.config, args.command)
        return COMMANDS[args.command](cfg, args)
    except (RegimeError, definetti.DivergenceError, ResourceLimitError) as exc:
        log.error("%s", exc)
        return EXIT_REGIME
    except (ValueError, TypeError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
