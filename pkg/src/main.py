import argparse
import asyncio
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from loguru import logger

from core import config
from core.exceptions import BoundaryLayerError, ConfigError, RunAbortedError
from core.run_config import EXPERIMENTS, RunConfig, load_run_config
from experiments import EXPERIMENT_RUNNERS
from handlers.ledger_handler import LedgerHandler
from handlers.report_handler import ReportHandler, emit_plots

EXIT_BY_STATUS = {
    "PASS": config.EXIT_OK,
    "COMPLETE": config.EXIT_OK,
    "FAIL": config.EXIT_FAIL,
    "ABORTED": config.EXIT_ABORTED,
}


class LabArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the lab reserves 2 for failed checks."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        logger.error(f"Usage error: {message}")
        raise SystemExit(config.EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(
        prog="blgv",
        description="Numerical lab for the compressible Prandtl boundary-layer system with analytic data.",
    )
    parser.add_argument(
        "experiment",
        nargs="?",
        choices=EXPERIMENTS,
        help="Experiment to run (default: the one named in the configuration, else 'run').",
    )
    parser.add_argument("--config", type=Path, default=None, help="TOML run configuration.")
    parser.add_argument("--output", type=Path, default=None, help="Root directory of report folders.")
    parser.add_argument("--seed", type=int, default=None, help="Overrides physics.seed.")
    parser.add_argument("--log-level", default=None, help="Console log level (DEBUG, INFO, ...).")
    return parser


async def run_experiment(cfg: RunConfig, output_root: Path, config_path: Optional[Path] = None) -> int:
    """Runs one experiment into a fresh report folder and returns the process exit code."""
    report = ReportHandler(output_root, cfg.experiment)
    ledger = LedgerHandler(config.resolve_ledger_url(Path(output_root)))
    await ledger.ensure_tables_exist()
    run_id = await ledger.open_run(cfg.experiment, cfg.fingerprint(), str(report.directory))

    details: Dict[str, Any] = {}
    metrics: Dict[str, float] = {}
    try:
        report.write_config(cfg, config_path)
        logger.info(f"Experiment '{cfg.experiment}' started (config {cfg.fingerprint()}).")
        outcome = await EXPERIMENT_RUNNERS[cfg.experiment](cfg, report)
        status, details, metrics = outcome.status, outcome.summary, outcome.metrics()
    except RunAbortedError as e:
        logger.critical(f"Experiment '{cfg.experiment}' aborted: {e}")
        status, details = "ABORTED", {"abort_reason": str(e), "abort_time": e.t}
    except BoundaryLayerError as e:
        logger.error(f"Experiment '{cfg.experiment}' stopped: {e}")
        status, details = "ERROR", {"error": str(e)}
    except Exception as e:
        logger.exception(f"Unhandled error in experiment '{cfg.experiment}': {e}")
        status, details = "ERROR", {"error": str(e)}

    exit_code = EXIT_BY_STATUS.get(status, config.EXIT_USAGE)
    summary = {
        "experiment": cfg.experiment,
        "status": status,
        "exit_code": exit_code,
        "config_hash": cfg.fingerprint(),
    }
    summary.update(details)
    report.write_summary(summary)
    emit_plots(report.directory)
    await ledger.close_run(run_id, status, exit_code, metrics)
    log = logger.success if status == "PASS" else logger.info
    log(f"Experiment '{cfg.experiment}' finished: {status} (exit code {exit_code}).")
    report.close()
    return exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        try:
            config.setup_logging(args.log_level)
        except ValueError as e:
            logger.error(f"Invalid log level '{args.log_level}': {e}")
            return config.EXIT_USAGE

    try:
        cfg = load_run_config(args.config)
        if args.experiment:
            cfg.experiment = args.experiment
        if args.seed is not None:
            cfg.physics.seed = args.seed
        cfg.validate()
    except ConfigError as e:
        logger.critical(f"Configuration rejected: {e}")
        return config.EXIT_USAGE

    output_root = Path(args.output or config.OUTPUT_ROOT or cfg.output.directory)
    return asyncio.run(run_experiment(cfg, output_root, args.config))


if __name__ == "__main__":
    sys.exit(main())
