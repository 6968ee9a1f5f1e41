"""
User Experience Module for the Consensus Simulator

Rich panels and tables for verdicts, matrices and run summaries.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table


class UserExperience:
    """Handles rich UI components for every subcommand"""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    def show_welcome_panel(self, info: Dict[str, Any]):
        """Show the simulator welcome panel

        Args:
            info: Dictionary with:
                - command: Subcommand being run
                - configs: Scenario documents involved
                - verbose: Whether in verbose mode
        """

        verbose_indicator = " [dim](verbose mode)[/dim]" if info.get('verbose', False) else ""
        configs = ", ".join(str(c) for c in info.get('configs', [])) or "-"
        self.console.print(Panel.fit(
            f"🛰️ [bold]Fixed-Time Consensus[/bold]{verbose_indicator}\n"
            f"Command: [cyan]{info.get('command', '-')}[/cyan]\n"
            f"Scenarios: [yellow]{escape(configs)}[/yellow]",
            border_style="green"
        ))

    def show_input_error(self, message: str):
        """Print an input diagnostic on one unwrapped line"""
        self.console.print(f"❌ {escape(message)}", soft_wrap=True)

    def show_verdict(self, title: str, holds: bool, detail: str = ""):
        """Print a true/false verdict"""
        mark = "[green]✅ true[/green]" if holds else "[red]❌ false[/red]"
        suffix = f" [dim]{escape(detail)}[/dim]" if detail else ""
        self.console.print(f"{title}: {mark}{suffix}", soft_wrap=True)

    def show_matrix(self, title: str, matrix: np.ndarray):
        """Print a matrix as a table with full-precision entries"""
        matrix = np.atleast_2d(matrix)
        table = Table(title=title, show_header=True, header_style="bold cyan")
        table.add_column("", style="dim")
        for j in range(matrix.shape[1]):
            table.add_column(str(j + 1), justify="right")
        for i, row in enumerate(matrix):
            table.add_row(str(i + 1), *[f"{value:.12g}" for value in row])
        self.console.print(table)

    def show_key_values(self, title: str, rows: Iterable[tuple]):
        """Print a two-column table of labelled values"""
        table = Table(title=title, show_header=False, box=None)
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="white")
        for key, value in rows:
            table.add_row(str(key), escape(str(value)))
        self.console.print(table)

    def show_run_summary(self, summaries: List[Any]):
        """Print one row per finished scenario"""
        table = Table(title="Simulation Results", show_header=True, header_style="bold cyan")
        table.add_column("Scenario", style="white")
        table.add_column("Stop", justify="right")
        table.add_column("Reason")
        table.add_column("Initial d", justify="right")
        table.add_column("d at stop", justify="right")
        table.add_column("Value error", justify="right")
        table.add_column("Formation r/v", justify="right")
        table.add_column("Time", justify="right", style="dim")
        for s in summaries:
            formation = "-"
            if s.formation:
                formation = (f"{s.formation['final_position_error_m']:.2e} m / "
                             f"{s.formation['final_velocity_error_m_s']:.2e} m/s")
            table.add_row(escape(s.name), str(s.stop_index), s.stop_reason,
                          f"{s.initial_disagreement:.3e}", f"{s.final_disagreement:.3e}",
                          f"{s.consensus_value_error:.3e}", formation, f"{s.wall_time_s:.2f}s")
        self.console.print(table)

    def show_written_files(self, paths: List[Path]):
        for path in paths:
            self.console.print(f"  • [dim]{escape(str(path))}[/dim]", soft_wrap=True)
