"""``pathmeas`` command: run / validate / scan.

Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
3 computation or I/O error.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
import traceback
from pathlib import Path

from .. import __version__
from ..errors import ComputeError, ConfigError, PathMeasError
from .config import ExperimentConfig, load_config
from .experiments import run_experiment
from .output import emit_csv, emit_json

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathmeas", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pathmeas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run the experiment named in the config"),
                        ("validate", "run the built-in acceptance checks"),
                        ("scan", "stationary-dominance scan over hbar")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, required=name == "run", help="YAML config file")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int,
                       help="BLAS/FFT thread limit (fallback: PATHMEAS_THREADS)")
        p.add_argument("--format", choices=("csv", "json"), help="table format")
    return parser


def _origin(exc) -> str:
    """Module of the innermost package frame that raised ``exc``."""
    origin = "pathmeas"
    for frame in traceback.extract_tb(exc.__traceback__):
        path = Path(frame.filename)
        if "pathmeas" in path.parts:
            origin = path.stem
    return origin


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.command in ("validate", "scan"):
        updates["experiment"] = args.command
    if args.seed is not None:
        updates["seed"] = args.seed
    threads = args.threads
    if threads is None and os.environ.get("PATHMEAS_THREADS"):
        try:
            threads = int(os.environ["PATHMEAS_THREADS"])
        except ValueError as exc:
            raise ConfigError("PATHMEAS_THREADS must be an integer", key="threads") from exc
    if threads is not None:
        if threads < 1:
            raise ConfigError("threads must be >= 1", key="threads")
        updates["threads"] = threads
    output = cfg.output.model_copy(update={
        k: v for k, v in (("dir", str(args.out) if args.out else None), ("format", args.format)) if v})
    updates["output"] = output
    cfg = cfg.model_copy(update=updates)
    return ExperimentConfig.model_validate(cfg.echo())


def _execute(cfg: ExperimentConfig):
    if cfg.threads:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=cfg.threads):
            return run_experiment(cfg)
    return run_experiment(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    t0 = time.perf_counter()
    try:
        result = _execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PathMeasError, ArithmeticError, ValueError) as exc:
        err = ComputeError(f"{type(exc).__name__}: {exc}", origin=_origin(exc))
        print(f"compute error in {err.origin}: {err}", file=sys.stderr)
        return EXIT_COMPUTE
    wall = time.perf_counter() - t0

    out = Path(cfg.output.dir)
    written = []
    try:
        for name, (header, rows) in result.tables.items():
            if cfg.output.format == "csv":
                path = emit_csv(header, rows, out / f"{cfg.experiment}_{name}.csv")
            else:
                path = emit_json({"header": list(header), "rows": [list(r) for r in rows]},
                                 out / f"{cfg.experiment}_{name}.json")
            written.append(str(path))
        passed = all(c.passed for c in result.checks)
        report = {"version": __version__, "experiment": cfg.experiment, "config": cfg.echo(),
                  "checks": [c.to_dict() for c in result.checks], "passed": passed,
                  "wall_time": wall, "outputs": written}
        emit_json(report, out / f"{cfg.experiment}_report.json")
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE

    for c in result.checks:
        print(c.summary())
    return EXIT_OK if passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
