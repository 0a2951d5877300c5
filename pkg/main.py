import sys
from argparse import ArgumentParser
from typing import List, Optional

from welcome import print_welcome

try:
    import asyncio

    from core.config import load_config
    from core.defs import EXIT_CONFIG_ERROR, EXIT_VERIFICATION_FAILED
    from core.exceptions import ConfigMalformedExc, SimulationCancelledExc
    from core.launchers import reach, simulate, verify
    from core.logger import configure_logger, logger
except Exception as e:
    print(f"[{e.__class__.__name__}] App stopped ({e})")
    sys.exit(1)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog='RuntimeAssurance',
        description='Runtime assurance filter with embedding-system reachability',
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate_parser = commands.add_parser("simulate", help="Run the closed-loop simulation and write CSV and SVG")
    simulate_parser.add_argument("config", help="Path to the YAML config")
    simulate_parser.add_argument(
        '-m',
        '--mode',
        help="Controller mode: desired-only, vanilla-cbf, asif or backup-only"
    )
    simulate_parser.add_argument('-s', '--seed', type=int, help="Disturbance seed")
    simulate_parser.add_argument('-o', '--out', help="Output path without extension")

    verify_parser = commands.add_parser("verify", help="Run the offline certificate checks")
    verify_parser.add_argument("config", help="Path to the YAML config")
    verify_parser.add_argument('-j', '--json', help="Also write the combined report as JSON")

    reach_parser = commands.add_parser("reach", help="Print the forward embedding tube from x0 as CSV")
    reach_parser.add_argument("config", help="Path to the YAML config")
    reach_parser.add_argument('-t', '--horizon', type=float, required=True, help="Tube horizon in seconds")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        conf = load_config(args.config)
        if args.command == "simulate":
            conf.override(mode=args.mode, seed=args.seed, out=args.out)
    except ConfigMalformedExc as e:
        logger.critical(f"Config error: {e}")
        return EXIT_CONFIG_ERROR
    configure_logger(conf)

    try:
        if args.command == "simulate":
            print_welcome()
            return asyncio.run(simulate(conf))
        if args.command == "verify":
            return asyncio.run(verify(conf, args.json))
        return asyncio.run(reach(conf, args.horizon))
    except SimulationCancelledExc as e:
        logger.warning(f"{e}")
        return EXIT_VERIFICATION_FAILED


if __name__ == "__main__":
    try:
        sys.exit(main())
    except Exception as e:
        print(f"[{e.__class__.__name__}] App stopped with: {e}")
        raise
