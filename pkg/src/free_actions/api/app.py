import argparse
import sys
from pathlib import Path
from typing import List, Optional

from loguru import logger

from src.free_actions import __version__
from src.free_actions.api.endpoints import (
    cmd_build,
    cmd_counterexample,
    cmd_orbits,
    cmd_spectra,
    cmd_verify,
)
from src.free_actions.core.errors import exit_code_for
from src.free_actions.data_manager.data_manager import DataManager
from src.free_actions.utils.logger import setup_logging

COMMANDS = {
    "orbits": cmd_orbits,
    "build": cmd_build,
    "verify": cmd_verify,
    "spectra": cmd_spectra,
    "counterexample": cmd_counterexample,
}

# CLI flag -> RunConfig field
OVERRIDES = (
    "oracle",
    "seed",
    "level",
    "max_level",
    "rounds",
    "cert_depth",
    "schreier_radius",
    "rmax",
    "tol",
    "out",
    "pair",
    "window_file",
    "workers",
    "samples",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="free-actions",
        description="Free actions of free groups on countable homogeneous structures",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sub = commands.add_parser(name, help=(func.__doc__ or "").strip().splitlines()[0])
        sub.add_argument("--config", type=Path, help="INI config file")
        sub.add_argument("--oracle", help="PureSet, DenseLinearOrder, RandomGraph or EquivTower")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--level", type=int, help="window level to start from")
        sub.add_argument("--max-level", dest="max_level", type=int, help="refuse to grow windows past this level")
        sub.add_argument("--rounds", type=int, help="back-and-forth rounds")
        sub.add_argument("--cert-depth", dest="cert_depth", type=int, help="reduced word length certified")
        sub.add_argument("--schreier-radius", dest="schreier_radius", type=int, help="orbit ball radius certified")
        sub.add_argument("--rmax", type=int, help="largest Cayley ball radius")
        sub.add_argument("--tol", type=float, help="eigensolver tolerance")
        sub.add_argument("--samples", type=int, help="random unit vectors for the displacement check")
        sub.add_argument("--workers", type=int)
        sub.add_argument("--out", type=Path, help="write the JSON report here")
        sub.add_argument("--pair", type=Path, help="FREEPAIR/1 file to write or read")
        sub.add_argument("--export-window", dest="window_file", type=Path, help="orbits: write the level window here")
        sub.add_argument("--log-level", dest="log_level", default="INFO")
        sub.add_argument("--log-file", dest="log_file", type=Path, help="also log to this rotating file")
        sub.add_argument("--progress", action="store_true", help="show progress bars")
    return parser


def run(args: argparse.Namespace, data_manager: Optional[DataManager] = None) -> int:
    data_manager = data_manager or DataManager()
    overrides = {name: getattr(args, name, None) for name in OVERRIDES}
    config = data_manager.load_config(args.config, overrides)
    report = COMMANDS[args.command](config, data_manager=data_manager, progress=args.progress)
    if config.out is None:
        print(report.to_json())
    failed = [c.name for c in report.checks if not c.passed]
    if failed:
        logger.warning(f"{args.command}: failed checks {failed}")
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, log_file=args.log_file)
    try:
        return run(args)
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} failed ({type(e).__name__}): {e}")
        if code == 1 and not hasattr(e, "exit_code"):
            logger.exception("Unexpected error")
        return code


if __name__ == "__main__":
    sys.exit(main())
