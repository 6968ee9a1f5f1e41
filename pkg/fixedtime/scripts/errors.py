"""
Error Types for the Fixed-Time Consensus Simulator

Every failure raised by the library derives from ConsensusError so the CLI can
map it onto an exit code in one place.
"""

from typing import Optional


class ConsensusError(Exception):
    """Base class for all simulator errors"""
    pass


class DimensionError(ConsensusError, ValueError):
    """Matrix or vector shapes are incompatible"""
    pass


class DomainError(ConsensusError, ValueError):
    """An argument lies outside the domain of an operation (negative duration, NaN entry)"""
    pass


class SingularMatrixError(ConsensusError, ArithmeticError):
    """A linear solve met a pivot that is zero to working precision"""

    def __init__(self, message: str, pivot: float):
        super().__init__(f"{message} (pivot magnitude {pivot:.3e})")
        self.pivot = pivot


class ScheduleIndexError(ConsensusError, IndexError):
    """A sampling interval or instant index is outside the schedule"""
    pass


class GraphStructureError(ConsensusError, ValueError):
    """The communication graph is malformed or has no directed spanning tree"""
    pass


class ControllabilityError(ConsensusError, ValueError):
    """The pair (A, B) is not controllable, so Phi is singular"""
    pass


class ScenarioDocumentError(ConsensusError):
    """A scenario document could not be parsed into a valid scenario"""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, field: Optional[str] = None):
        self.path = path
        self.line = line
        self.field = field
        self.reason = message
        super().__init__(self.render())

    def render(self) -> str:
        location = self.path or "<document>"
        if self.line is not None:
            location = f"{location}:{self.line}"
        field = f" [{self.field}]" if self.field else ""
        return f"{location}:{field} {self.reason}"


class SimulationError(ConsensusError, RuntimeError):
    """Fatal failure inside the closed-loop run, tagged with the interval"""

    def __init__(self, message: str, k: int, delta: float):
        super().__init__(f"interval k={k}, delta={delta:.6g} s: {message}")
        self.k = k
        self.delta = delta
