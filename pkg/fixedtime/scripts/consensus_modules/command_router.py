"""
Command Router Module for the Consensus Simulator

Maps a parsed subcommand onto a flow of manager operations and turns the
outcome into one of the exit codes 0 (success), 1 (negative verdict),
2 (input error) or 3 (simulation failure).
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from errors import ConsensusError, SimulationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_RUNTIME = 3


@dataclass
class CommandAction:
    """Represents a command action to be executed"""
    operation: str
    kwargs: Dict[str, Any]
    title: str


@dataclass
class CommandFlow:
    """Represents a complete command execution flow"""
    actions: List[CommandAction]
    show_summary: bool = True


def exit_code_for(error: BaseException) -> int:
    """Exit code for an exception raised by an operation"""
    if isinstance(error, SimulationError):
        return EXIT_RUNTIME
    if isinstance(error, ConsensusError):
        return EXIT_INPUT
    return EXIT_RUNTIME


class CommandRouter:
    """Handles subcommand routing and exit-code mapping"""

    def __init__(self):
        self.command_flows: Dict[str, CommandFlow] = {}
        self._setup_command_flows()

    def _setup_command_flows(self):
        """Setup all command flow definitions"""

        # Keys ending in _key reference attributes of the parsed arguments
        self.command_flows.update({
            'simulate': CommandFlow(
                actions=[CommandAction('run_simulations',
                                       {'configs_key': 'config', 'out_dir_key': 'out',
                                        'jobs_key': 'jobs', 'no_report_key': 'no_report'},
                                       'Simulate scenarios')]
            ),
            'check-graph': CommandFlow(
                actions=[CommandAction('check_graph', {'config_key': 'config'}, 'Check graph')],
                show_summary=False
            ),
            'phi': CommandFlow(
                actions=[CommandAction('show_phi', {'config_key': 'config', 'delta_key': 'delta'},
                                       'Inspect Phi')],
                show_summary=False
            ),
        })

    def route_commands(self, args) -> str:
        """Flow key for the parsed arguments ('help' when no subcommand was given)"""
        return args.command if args.command in self.command_flows else 'help'

    def get_command_flow(self, flow_key: str) -> Optional[CommandFlow]:
        return self.command_flows.get(flow_key)

    def should_show_summary(self, flow_key: str) -> bool:
        flow = self.get_command_flow(flow_key)
        return flow.show_summary if flow else False

    def execute_command_flow(self, flow_key: str, args, manager) -> int:
        """Execute a complete command flow

        Args:
            flow_key: Command flow key to execute
            args: Parsed command line arguments
            manager: ConsensusManager instance

        Returns:
            int: Exit code of the first action that did not succeed, else 0
        """

        if flow_key == 'help':
            from consensus_modules.cli_definitions import create_parser
            create_parser().print_help()
            return EXIT_OK

        flow = self.get_command_flow(flow_key)
        if not flow:
            manager.add_message('errors', 'Invalid Command Flow', f'Unknown flow: {flow_key}')
            return EXIT_INPUT

        for action in flow.actions:
            code = self._execute_action(action, args, manager)
            if code != EXIT_OK:
                return code
        return EXIT_OK

    def _execute_action(self, action: CommandAction, args, manager) -> int:
        """Execute a single action and map its outcome onto an exit code"""

        if not hasattr(manager, action.operation):
            manager.add_message('errors', 'Invalid Operation', f'Unknown operation: {action.operation}')
            return EXIT_INPUT

        operation_func = getattr(manager, action.operation)

        kwargs = {}
        for key, value in action.kwargs.items():
            if key.endswith('_key'):
                kwargs[key[:-4]] = getattr(args, value, None)
            else:
                kwargs[key] = value

        try:
            result = operation_func(**kwargs)
        except ConsensusError as e:
            code = exit_code_for(e)
            logger.debug("%s failed with %s", action.operation, type(e).__name__)
            manager.report_failure(action.title, e, code)
            return code
        except Exception as e:
            logger.exception("unexpected failure in %s", action.operation)
            manager.report_failure(action.title, e, EXIT_RUNTIME)
            return EXIT_RUNTIME

        return EXIT_OK if result is None else int(result)
