#!/usr/bin/env python3
"""
Fixed-Time Consensus Simulator - Command Line Entry Point

Usage Examples:
  ./consensus.py simulate --config ../../scenarios/hexagon6.yml --out runs/hexagon6
  ./consensus.py simulate -c a.yml -c b.yml --out runs --jobs 2
  ./consensus.py check-graph --config ../../scenarios/disconnected.yml
  ./consensus.py phi --config ../../scenarios/ring6_double_integrator.yml --delta 1
"""

import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

try:
    from rich.console import Console
    from rich.logging import RichHandler
except ImportError:
    print("❌ Missing required 'rich' library. Install with: pip install -r requirements.txt")
    sys.exit(1)

SCRIPT_DIR = Path(__file__).resolve().parent
if str(SCRIPT_DIR) not in sys.path:
    sys.path.insert(0, str(SCRIPT_DIR))

import numpy as np

from consensus_modules.cli_definitions import create_parser, validate_arguments
from consensus_modules.command_router import EXIT_INPUT, EXIT_NEGATIVE, EXIT_OK, EXIT_RUNTIME, CommandRouter
from consensus_modules.message_orchestrator import MessageOrchestrator
from consensus_modules.user_experience import UserExperience
from errors import DomainError
from graph import consensus_weights, has_spanning_tree, laplacian, off_consensus_radius
from numlin import condition_estimate, determinant, is_controllable, numerical_rank
from output_writers import summarize, write_outputs
from protocol import gramian_phi
from scenario_document import load_graph, load_plant, load_scenario
from settings import ProjectSettings, load_settings
from sim import run, run_many

console = Console()
logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False, debug: bool = False):
    """Route library logging through a RichHandler on stderr"""
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=debug)],
        force=True,
    )


def _timed_run(scenario):
    start = time.perf_counter()
    record, metrics = run(scenario)
    return record, metrics, time.perf_counter() - start


class ConsensusManager:
    """Operations behind the subcommands; each returns an exit code"""

    def __init__(self, console: Console, settings: Optional[ProjectSettings] = None):
        self.console = console
        self.settings = settings or ProjectSettings()
        self.message_orchestrator = MessageOrchestrator(console)
        self.ux = UserExperience(console)
        self.command_router = CommandRouter()
        self.verbose = False

    def add_message(self, message_type: str, title: str, details: str = None,
                    context: str = None, duration: float = None):
        return self.message_orchestrator.add_message(message_type, title, details, context, duration)

    def start_operation(self, operation_name: str):
        self.message_orchestrator.set_verbose(self.verbose)
        return self.message_orchestrator.start_operation(operation_name)

    def end_operation(self, success: bool, message: str = None):
        return self.message_orchestrator.end_operation(success, message)

    def report_failure(self, title: str, error: BaseException, code: int):
        """Record a failed operation and show input diagnostics immediately"""
        if self.message_orchestrator.current_operation is not None:
            self.end_operation(False, str(error))
        else:
            self.add_message('errors', title, str(error))
        if code == EXIT_INPUT:
            self.ux.show_input_error(str(error))

    def show_final_summary(self):
        self.message_orchestrator.set_verbose(self.verbose)
        return self.message_orchestrator.show_final_summary()

    # Subcommands

    def run_simulations(self, configs: List[str], out_dir: str, jobs: int = 1,
                        no_report: bool = False) -> int:
        """Load every scenario first, then simulate and write outputs"""
        loaded = []
        for config in configs:
            self.start_operation(f"Load {config}")
            loaded.append(load_scenario(config, self.settings))
            self.end_operation(True)

        out_dir = Path(out_dir)
        targets = [out_dir] if len(loaded) == 1 else self._scenario_dirs(out_dir, [l.name for l in loaded])

        self.start_operation(f"Simulate {len(loaded)} scenario(s)")
        results = run_many([l.scenario for l in loaded], jobs=jobs, runner=_timed_run)
        self.end_operation(True)

        summaries = []
        for item, target, (record, metrics, wall_time) in zip(loaded, targets, results):
            self.start_operation(f"Write {item.name}")
            summary = summarize(item, record, metrics, wall_time)
            written = write_outputs(target, item, record, metrics, summary,
                                    names=self.settings.outputs,
                                    report=self.settings.report_enabled and not no_report)
            self.end_operation(True, f"{len(written)} files in {target}")
            if self.verbose:
                self.ux.show_written_files(written)
            summaries.append(summary)

        self.ux.show_run_summary(summaries)
        return EXIT_OK

    @staticmethod
    def _scenario_dirs(out_dir: Path, names: List[str]) -> List[Path]:
        seen = {}
        dirs = []
        for name in names:
            count = seen.get(name, 0)
            seen[name] = count + 1
            dirs.append(out_dir / (name if count == 0 else f"{name}_{count + 1}"))
        return dirs

    def check_graph(self, config: str) -> int:
        """Spanning-tree verdict, roots, consensus weights and off-consensus radius"""
        G = load_graph(config, self.settings)
        tree = has_spanning_tree(G)
        rows = [
            ("Agents", G.agent_count),
            ("Edges", len(G.edges)),
            ("Laplacian rank", numerical_rank(laplacian(G), self.settings.rank_rtol)),
            ("Roots", ", ".join(str(r) for r in sorted(tree.roots)) or "none"),
        ]
        if tree:
            weights = consensus_weights(G, self.settings.power_iteration_tol, self.settings.power_iteration_max)
            rows.append(("Consensus weights xi", np.array2string(weights.xi, precision=6, separator=', ')))
            rows.append(("Off-consensus radius", f"{off_consensus_radius(G):.6f}"))
        else:
            rows.append(("Consensus weights xi", "n/a"))

        self.ux.show_verdict("Directed spanning tree (Assumption 1)", bool(tree))
        self.ux.show_key_values("Communication graph", rows)
        return EXIT_OK if tree else EXIT_NEGATIVE

    def show_phi(self, config: str, delta: float) -> int:
        """Phi(delta) with determinant, conditioning and the controllability verdict"""
        if not delta > 0:
            raise DomainError(f"delta must be positive, got {delta}")
        plant = load_plant(config, self.settings)
        phi = gramian_phi(plant, delta)
        det = determinant(phi)
        column_product = float(np.prod(np.linalg.norm(phi, axis=0)))
        hadamard_ratio = abs(det) / column_product if column_product > 0 else 0.0
        near_singular = hadamard_ratio <= self.settings.near_singular_det
        controllable = is_controllable(plant.A, plant.B, self.settings.rank_rtol)

        self.ux.show_matrix(f"Phi(delta = {delta:g} s)", phi)
        self.ux.show_key_values("Phi diagnostics", [
            ("Determinant", f"{det:.12g}"),
            ("Condition estimate (1-norm)", f"{condition_estimate(phi):.6e}"),
            ("|det| / Hadamard bound", f"{hadamard_ratio:.3e}"),
        ])
        if near_singular:
            self.ux.show_input_error("Phi is numerically singular: determinant is near zero")
        self.ux.show_verdict("Controllable (Phi invertible, Lemma 3)", controllable)
        return EXIT_OK if controllable and not near_singular else EXIT_NEGATIVE


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""

    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return EXIT_OK

    configure_logging(args.verbose, args.debug)

    manager = ConsensusManager(console, load_settings(Path.cwd()))
    manager.verbose = args.verbose
    manager.message_orchestrator.set_verbose(args.verbose)

    valid, error = validate_arguments(args)
    if not valid:
        manager.ux.show_input_error(error)
        return EXIT_INPUT

    configs = args.config if isinstance(args.config, list) else [args.config]
    manager.ux.show_welcome_panel({'command': args.command, 'configs': configs, 'verbose': args.verbose})

    flow_key = manager.command_router.route_commands(args)
    code = EXIT_RUNTIME
    try:
        code = manager.command_router.execute_command_flow(flow_key, args, manager)
    except KeyboardInterrupt:
        console.print("\n🛑 Operation cancelled by user")
        manager.add_message('warnings', 'Operation Cancelled', 'User interrupted the operation', 'User Action')
    finally:
        if manager.command_router.should_show_summary(flow_key):
            manager.show_final_summary()
    return code


if __name__ == "__main__":
    sys.exit(main())
