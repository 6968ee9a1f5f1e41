"""
CLI Definitions Module for the Consensus Simulator

Argument parser with the simulate, check-graph and phi subcommands.
"""

import argparse
from typing import Optional, Tuple


def create_parser() -> argparse.ArgumentParser:
    """Create command line parser

    Returns:
        argparse.ArgumentParser: Configured parser with all subcommands
    """

    parser = argparse.ArgumentParser(
        prog="consensus",
        description="Fixed-time consensus simulator for linear multi-agent systems",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  ./run.sh simulate --config scenarios/hexagon6.yml --out runs/hexagon6
  ./run.sh simulate --config scenarios/a.yml --config scenarios/b.yml --out runs --jobs 2
  ./run.sh check-graph --config scenarios/disconnected.yml
  ./run.sh phi --config scenarios/hexagon6.yml --delta 100

Exit codes:
  0 success, 1 negative verdict, 2 input error, 3 simulation failure
        """
    )

    # Options shared by every subcommand
    parser.add_argument("--verbose", "-v", action="store_true",
                        help="Log run-level events and show full error details")
    parser.add_argument("--debug", action="store_true",
                        help="Log per-interval details")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")

    simulate = subparsers.add_parser("simulate", help="Run scenarios and write trajectories and metrics")
    simulate.add_argument("--config", "-c", action="append", required=True, metavar="PATH",
                          help="Scenario document (repeat for several scenarios)")
    simulate.add_argument("--out", "-o", required=True, metavar="DIR",
                          help="Output directory")
    simulate.add_argument("--jobs", "-j", type=int, default=1, metavar="K",
                          help="Scenarios to run concurrently (default: 1)")
    simulate.add_argument("--no-report", action="store_true",
                          help="Skip the markdown run report")

    check_graph = subparsers.add_parser("check-graph", help="Check the spanning-tree condition of a scenario graph")
    check_graph.add_argument("--config", "-c", required=True, metavar="PATH", help="Scenario document")

    phi = subparsers.add_parser("phi", help="Show Phi(delta), its determinant and conditioning")
    phi.add_argument("--config", "-c", required=True, metavar="PATH", help="Scenario document")
    phi.add_argument("--delta", type=float, required=True, metavar="SECONDS",
                     help="Interval length")

    return parser


def validate_arguments(args) -> Tuple[bool, Optional[str]]:
    """Validate argument values argparse cannot check on its own

    Args:
        args: Parsed command line arguments

    Returns:
        tuple: (is_valid, error_message)
    """

    if args.command == "simulate" and args.jobs < 1:
        return False, f"--jobs must be at least 1, got {args.jobs}"
    if args.command == "phi" and not args.delta > 0:
        return False, f"--delta must be positive, got {args.delta}"
    return True, None
