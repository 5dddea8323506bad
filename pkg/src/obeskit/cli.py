"""Command-line entry point.

``obeskit <subcommand> --config path [--seed N] [--workers N] [--out dir]``

Exit codes: 0 ok, 2 config error, 3 data error, 4 internal error. Failures
print a JSON object ``{"error": {...}}`` on stderr; successes print a JSON
summary on stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback

from .config import ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
SUBCOMMANDS = ("ingest", "extract", "aggregate", "export", "evaluate", "run", "simulate", "scan")


def _data_errors() -> tuple:
    from .evaluation import AnnotationError
    from .geoagg import PrivacyError
    from .ingest import EmptyStreamError, ParseError
    from .location import ContractError
    from .models import ModelError
    from .pipeline import DataError
    from .simulate import ScenarioError

    return (DataError, ParseError, EmptyStreamError, ModelError, ScenarioError, AnnotationError, ContractError,
            PrivacyError, FileNotFoundError)


def _error(code: str, exit_code: int, exc: BaseException, **extra) -> int:
    err = {"code": code, "exit": exit_code, "type": type(exc).__name__, "message": str(exc), **extra}
    line = getattr(exc, "line", None)
    if line is not None:
        err["line"] = line
    print(json.dumps({"error": err}, sort_keys=True), file=sys.stderr)
    return exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obeskit", description="Behavioral indicators from smartphone sensors.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="pipeline config (JSON or TOML); for simulate, a scenario file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _simulate(args) -> dict:
    from pathlib import Path

    from .simulate import run_simulation

    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    try:
        spec = json.loads(path.read_text())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    out = args.out or str(path.parent / "sim")
    cfg_path = run_simulation(spec, out, seed=args.seed)
    return {"stage": "simulate", "config": str(cfg_path)}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    data_errors = _data_errors()
    try:
        if args.subcommand == "simulate":
            result = _simulate(args)
        else:
            from . import pipeline

            cfg = load_config(args.config, {"seed": args.seed, "workers": args.workers, "out_dir": args.out})
            if args.subcommand == "scan":
                findings = pipeline.privacy_scan(cfg)
                result = {"stage": "scan", "findings": findings}
                if findings:
                    print(json.dumps(result, sort_keys=True))
                    return EXIT_DATA
            else:
                result = pipeline.STAGES[args.subcommand](cfg)
    except ConfigError as exc:
        return _error("config_error", EXIT_CONFIG, exc)
    except data_errors as exc:
        from .pipeline import DependencyError

        code = "missing_dependency" if isinstance(exc, DependencyError) else "data_error"
        return _error(code, EXIT_DATA, exc)
    except Exception as exc:  # noqa: BLE001
        return _error("internal_error", EXIT_INTERNAL, exc, trace=traceback.format_exc(limit=5))
    print(json.dumps(result, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
