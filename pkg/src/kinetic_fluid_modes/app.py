"""kinetic-fluid-modes 명령행 엔트리."""

import argparse
import logging
import sys

from . import __version__
from .commands import evolve, scaling, spectrum, verify
from .config import PARAMETER_SET_NAMES, apply_fast, load_config, parameter_set
from .errors import ConfigError, KineticModesError, ParameterDomain

log = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kinetic-fluid-modes",
        description="Fluid eigenvalues of a weighted BGK operator and their small-eta scaling.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument(
        "--set", dest="set_name", metavar="NAME",
        help=f"Shipped parameter set ({', '.join(PARAMETER_SET_NAMES)})",
    )
    common.add_argument("--out", metavar="DIR", help="Output directory (default: output_dir)")
    common.add_argument("--fast", action="store_true", help="Reduced grids, relaxed tolerances")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    subparsers.add_parser("spectrum", parents=[common], help="Track the four fluid branches")
    subparsers.add_parser("scaling", parents=[common], help="Fit exponents and limit constants")
    subparsers.add_parser("evolve", parents=[common], help="Macroscopic-limit trajectories")
    verify_parser = subparsers.add_parser(
        "verify", parents=[common], help="Run every check for the shipped parameter sets"
    )
    verify_parser.add_argument(
        "--workers", type=int, default=1, help="Parameter sets run in parallel (default: 1)"
    )
    return parser


def resolve_config(args):
    """--config 가 --set 보다 우선. 둘 다 없으면 gaussian."""
    if args.config:
        config = load_config(args.config)
    else:
        config = parameter_set(args.set_name or "gaussian")
    if args.fast:
        config = apply_fast(config)
    return config


def _dispatch(args):
    if args.command == "verify":
        if args.workers < 1:
            raise ConfigError(f"--workers must be at least 1, got {args.workers}.")
        if args.config:
            return verify.run(resolve_config(args), args.out)
        names = [args.set_name] if args.set_name else None
        return verify.run(None, args.out, names, args.fast, args.workers)

    config = resolve_config(args)
    command = {"spectrum": spectrum, "scaling": scaling, "evolve": evolve}[args.command]
    passed, _ = command.run(config, args.out)
    return passed


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_PASS

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        passed = _dispatch(args)
    except ConfigError as e:
        log.error("configuration error: %s", e)
        return EXIT_CONFIG
    except ParameterDomain as e:
        log.error("parameter out of domain: %s", e)
        return EXIT_DOMAIN
    except KineticModesError as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_FAILURE
    return EXIT_PASS if passed else EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
