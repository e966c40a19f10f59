"""Command-line interface.

Subcommands: simulate-balloon, build-operator, generate, fit, residuals,
sweep, compare.  Everything is driven by an INI config file (all keys have
defaults) plus a few per-command flags; outputs are CSV/JSON files.
Exit codes: 0 success, 2 configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .balloon import PhysioParams, generate_responses, write_curve_csv
from .config import ConfigError, RunConfig, dumps_config, load_config
from .design import default_paradigm
from .inference import (METHODS, compute_residuals, fit_m1, fit_method,
                        save_summary)
from .linop import build_omega, write_matrix_csv
from .metrics import compare_methods, run_noise_sweep, write_report_json
from .simulate import load_dataset, save_dataset, simulate_dataset

logger = logging.getLogger(__name__)

SWEEPABLE = ("eta", "tau_psi", "tau_f", "tau_m", "w_tilde", "e0", "v0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asljde",
        description="Physiologically informed joint detection-estimation "
                    "for functional ASL time series.")
    parser.add_argument("--config", metavar="PATH", default=None,
                        help="INI config file (defaults cover every key)")
    parser.add_argument("--seed", type=int, default=None, metavar="U64",
                        help="override the sampler seed")
    parser.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default: config paths.out_dir)")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log sampler progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-balloon",
                       help="emit BRF/PRF curves, optionally sweeping one parameter")
    p.add_argument("--sweep", metavar="PARAM=V1,V2,...", default=None,
                   help=f"vary one of {SWEEPABLE} and emit one curve pair per value")

    sub.add_parser("build-operator", help="emit the response operator as CSV")

    p = sub.add_parser("generate", help="simulate a dataset directory")
    p.add_argument("--grid", metavar="HxW", default=None,
                   help="override the voxel grid, e.g. 10x10")
    p.add_argument("--noise-var", type=float, default=None,
                   help="override the noise variance")

    p = sub.add_parser("fit", help="fit one method on a dataset directory")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--dataset", required=True, metavar="DIR")

    p = sub.add_parser("residuals",
                       help="hemodynamics-stage fit plus residual series")
    p.add_argument("--dataset", required=True, metavar="DIR")

    sub.add_parser("sweep", help="noise-variance sweep over methods and seeds")

    p = sub.add_parser("compare", help="fit several methods on one dataset")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--methods", default="basic,physio-2step",
                   help="comma-separated subset of " + ",".join(METHODS))

    sub.add_parser("print-config", help="print the effective configuration")
    return parser


def _out_dir(args, config: RunConfig) -> Path:
    out = Path(args.out if args.out is not None else config.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, config: RunConfig) -> int:
    return args.seed if args.seed is not None else config.sampler.seed


def cmd_simulate_balloon(args, config: RunConfig) -> int:
    out = _out_dir(args, config)
    params = config.physio_params()
    dt = config.paradigm.dt
    length = config.paradigm.response_length
    brf, prf = generate_responses(params, dt, length)
    write_curve_csv(out / "brf.csv", brf)
    write_curve_csv(out / "prf.csv", prf)
    if args.sweep:
        name, _, raw = args.sweep.partition("=")
        name = name.strip()
        if name not in SWEEPABLE or not raw:
            raise ConfigError(f"--sweep expects PARAM=V1,V2 with PARAM in {SWEEPABLE}")
        try:
            values = [float(v) for v in raw.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad sweep values {raw!r}") from exc
        for value in values:
            swept = replace(params, **{name: value})
            sbrf, sprf = generate_responses(swept, dt, length)
            write_curve_csv(out / f"brf_{name}_{value:g}.csv", sbrf)
            write_curve_csv(out / f"prf_{name}_{value:g}.csv", sprf)
    return 0


def cmd_build_operator(args, config: RunConfig) -> int:
    out = _out_dir(args, config)
    op = build_omega(config.physio_params(), config.paradigm.dt,
                     config.paradigm.response_length)
    write_matrix_csv(out / "omega.csv", op.omega)
    return 0


def cmd_generate(args, config: RunConfig) -> int:
    out = _out_dir(args, config)
    truth_cfg = config.truth_config()
    if args.grid:
        try:
            gh, gw = (int(v) for v in args.grid.lower().split("x"))
        except ValueError as exc:
            raise ConfigError(f"bad --grid {args.grid!r}, expected HxW") from exc
        truth_cfg.grid_shape = (gh, gw)
    if args.noise_var is not None:
        if args.noise_var < 0:
            raise ConfigError("--noise-var must be nonnegative")
        truth_cfg.noise_var = args.noise_var
    dataset, truth = simulate_dataset(config.paradigm_obj(), truth_cfg,
                                      config.physio_params(),
                                      seed=_seed(args, config))
    save_dataset(out, dataset, truth)
    logger.info("dataset with %d scans x %d voxels written to %s",
                dataset.y.shape[0], dataset.y.shape[1], out)
    return 0


def cmd_fit(args, config: RunConfig) -> int:
    out = _out_dir(args, config)
    dataset, _ = load_dataset(args.dataset)
    summary = fit_method(args.method, dataset, config.prior_config(),
                         config.chain_config(), seed=_seed(args, config))
    save_summary(out, summary)
    return 0


def cmd_residuals(args, config: RunConfig) -> int:
    out = _out_dir(args, config)
    dataset, _ = load_dataset(args.dataset)
    m1 = fit_m1(dataset, config.prior_config(), config.chain_config(),
                seed=_seed(args, config))
    residuals = compute_residuals(dataset, m1)
    save_summary(out / "m1_summary", m1.summary)
    lines = [",".join(f"{v:.17g}" for v in row) for row in residuals.values]
    (out / "residuals.csv").write_text("\n".join(lines) + "\n")
    return 0


def cmd_sweep(args, config: RunConfig) -> int:
    out = _out_dir(args, config)
    result = run_noise_sweep(
        config.paradigm_obj(),
        config.sweep.noise_grid,
        seeds=range(config.sweep.n_seeds),
        methods=config.sweep.methods,
        truth_config=config.truth_config(),
        physio=config.physio_params(),
        priors=config.prior_config(),
        config=config.chain_config())
    result.to_csv(out / "sweep.csv")
    return 0


def cmd_compare(args, config: RunConfig) -> int:
    out = _out_dir(args, config)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = set(methods) - set(METHODS)
    if bad:
        raise ConfigError(f"unknown methods: {sorted(bad)}")
    dataset, truth = load_dataset(args.dataset)
    report = compare_methods(dataset, truth, methods,
                             priors=config.prior_config(),
                             config=config.chain_config(),
                             seeds=(_seed(args, config),))
    write_report_json(out / "report.json", report)
    return 0


def cmd_print_config(args, config: RunConfig) -> int:
    sys.stdout.write(dumps_config(config))
    return 0


_COMMANDS = {
    "simulate-balloon": cmd_simulate_balloon,
    "build-operator": cmd_build_operator,
    "generate": cmd_generate,
    "fit": cmd_fit,
    "residuals": cmd_residuals,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "print-config": cmd_print_config,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, sampler=replace(config.sampler,
                                                     seed=args.seed))
        return _COMMANDS[args.command](args, config)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: IO, diverged chains, ...
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
