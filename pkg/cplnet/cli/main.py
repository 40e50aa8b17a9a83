"""
cplnet - command-line entry point
Version: 1.0.0

    cplnet <analyze|sweep-r|sweep-n|simulate|design|gains> --config <path>
           [--out <dir>] [--jobs N] [--log-level LEVEL]

Run config (JSON, unknown fields rejected at every level):

    {
      "schema_version": 1,
      "network": {
        "source": {"v_g": 110.0},
        "line": {"n": 2, "resistance": 0.5},
        "converters": [{"inductance": 2e-5, "capacitance": 2.9e-5, "f_sw": 2e5}, ...],
        "loads": [{"power": 1000.0, "v_nominal": 48.0, "v_min": 20.0, "v_max": 120.0}, ...]
      },
      "coupling": "direct_current" | "duty_weighted",
      "input_gain": "node_voltage" | "output_voltage",
      "operating_point_mode": "frozen" | "resolved",
      "gains": {"gains": [{"f_i": ..., "f_v": ...}]}      (or "gains_file": "gains.json"),
      "seed": 0,                                          (seeds initial_state.jitter)
      "out_dir": "out",

      "analyze":      {"closed_loop": false, "design": null, "margin": 0.0, "export_matrices": false},
      "sweep_r":      {"r_max": 10.0, "tol": 1e-6, "grid": {"r_min", "r_max", "points", "spacing"}},
      "sweep_n":      {"n_min": 1, "n_max": 8, "r_max": 10.0, "tol": 1e-6,
                       "critical_r": null, "critical_n_max": 50},
      "simulate":     {"model": "switched", "dt": null, "t_end": 0.02,
                       "controller": {"kind": "open_loop" | "proportional" | "state_feedback", ...},
                       "initial_state": {"i0", "v0", "vc0", "vf0", "jitter": 0.0},
                       "design": null, "decimation": 1,
                       "measurement": "period_average" | "sample"},
      "design":       {"kind": "output_shunt_r" | "input_ground_rc" | "input_shunt_c", ...},
      "gains_design": {"poles": [[re, im], [re, im]]}
    }

Designs are {"kind": "output_shunt_r", "r_s": ...}, {"kind": "input_ground_rc",
"r_f": ..., "c_f": ...} or {"kind": "input_shunt_c", "c_s": ...}.

Exit codes: 0 success, 2 configuration error, 3 model or feasibility error,
4 numerical failure.
"""

import argparse
import logging
import logging.config
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from cplnet import __version__
from cplnet.cli.commands import (
    RunContext,
    cmd_analyze,
    cmd_design,
    cmd_gains,
    cmd_simulate,
    cmd_sweep_n,
    cmd_sweep_r,
)
from cplnet.core.config import settings
from cplnet.core.exceptions import EXIT_NUMERICAL, ConfigError, CplNetError
from cplnet.schemas import RunConfig

logger = logging.getLogger(__name__)

# ============================================================================
# COMMAND TABLE
# ============================================================================

COMMANDS: Dict[str, Callable[[RunContext], int]] = {
    "analyze": cmd_analyze,
    "sweep-r": cmd_sweep_r,
    "sweep-n": cmd_sweep_n,
    "simulate": cmd_simulate,
    "design": cmd_design,
    "gains": cmd_gains,
}

# config block each command needs; analyze and gains fall back to defaults
REQUIRED_BLOCKS = {
    "sweep-r": "sweep_r",
    "sweep-n": "sweep_n",
    "simulate": "simulate",
    "design": "design",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cplnet",
        description="Stability analysis and simulation of buck converters feeding constant power loads",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="JSON run config")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps")
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
    )
    return parser


def load_config(path: Path) -> RunConfig:
    """
    Read and validate a run config

    Raises:
        ConfigError: If the file is unreadable, not JSON or fails validation
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc


def _output_dir(args: argparse.Namespace, config: RunConfig) -> Path:
    if args.out is not None:
        return args.out
    if config.out_dir is not None:
        return args.config.parent / config.out_dir
    return Path(settings.OUTPUT_DIR)


# ============================================================================
# ENTRY POINT
# ============================================================================


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.config.dictConfig(settings.get_log_config(args.log_level))
    logger.info(f"Starting {settings.APP_NAME} v{settings.APP_VERSION}: {args.command}")
    for warning in settings.validate_config():
        logger.warning(f"Configuration warning: {warning}")

    try:
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        config = load_config(args.config)
        block = REQUIRED_BLOCKS.get(args.command)
        if block is not None and getattr(config, block) is None:
            raise ConfigError(f"command {args.command} needs a '{block}' block in the config")

        ctx = RunContext(
            config=config,
            config_path=args.config,
            out_dir=_output_dir(args, config),
            jobs=args.jobs,
        )
        code = COMMANDS[args.command](ctx)

    except CplNetError as exc:
        logger.error(f"{type(exc).__name__}: {exc.detail}")
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code

    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.error(f"Numerical failure: {exc}", exc_info=True)
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    logger.info(f"Finished {args.command} (exit {code})")
    return code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
