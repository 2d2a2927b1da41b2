"""
Main entry point for the Forchheimer rotating porous-media simulator and audit harness.

Subcommands: simulate, audit, verify-kernel, sweep and mms. Every subcommand reads one
JSON configuration and writes its artifacts, plus a log file, into the output directory.
"""
import argparse
import logging
import signal
import sys
from pathlib import Path
from typing import List, Optional

from src.config.config_manager import ConfigManager
from src.config.config_schema import create_default_config
from src.core.app import EXIT_CONFIG, EXIT_FAILURE, SUBCOMMANDS, ForchheimerApp, write_error
from src.utils.errors import ConfigError

LOG_FILE = "forchheimer.log"


def setup_logging(level: int = logging.INFO, log_file: Optional[Path] = None):
    """Configure the logging system."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forchheimer",
                                     description="Rotating Forchheimer flow simulator and estimate auditor")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="JSON configuration (defaults to the reference problem)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, help="override the random seed")
    parser.add_argument("--samples", type=int, help="override kernel.samples for verify-kernel")
    parser.add_argument("--estimates", help="comma-separated estimate ids to audit")
    parser.add_argument("--mode", choices=("space", "time"), help="override mms.mode")
    parser.add_argument("--levels", help="comma-separated refinement levels for mms")
    parser.add_argument("--quiet", action="store_true", help="log warnings and errors only")
    return parser


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def load_manager(args: argparse.Namespace) -> ConfigManager:
    if args.config is not None:
        manager = ConfigManager(config_file=args.config)
    else:
        manager = ConfigManager(config=create_default_config())
    levels = _split(args.levels)
    try:
        levels = [int(v) for v in levels] if levels is not None else None
    except ValueError:
        raise ConfigError(f"--levels must be integers, got '{args.levels}'", [("mms.levels", "not an integer")])
    manager.update(seed=args.seed, samples=args.samples, estimates=_split(args.estimates),
                   **{"mms.mode": args.mode, "mms.levels": levels})
    return manager


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)
    setup_logging(logging.WARNING if args.quiet else logging.INFO, args.out / LOG_FILE)
    logger = logging.getLogger(__name__)

    logger.info(f"Starting forchheimer {args.subcommand}")

    # Handle graceful shutdown
    def signal_handler(sig, frame):
        logger.info("Received interrupt signal, shutting down...")
        sys.exit(EXIT_FAILURE)

    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    try:
        manager = load_manager(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        args.out.mkdir(parents=True, exist_ok=True)
        write_error(args.out, e)
        return EXIT_CONFIG

    app = ForchheimerApp(manager, args.out)
    try:
        return app.run(args.subcommand)
    except KeyboardInterrupt:
        logger.info("Run interrupted by user")
        return EXIT_FAILURE
    finally:
        logger.info("Shutting down")


if __name__ == "__main__":
    sys.exit(main())
