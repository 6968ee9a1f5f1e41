"""
Closed-Loop Scenario Runner

Executes the sampled protocol over a SamplingSchedule, recording dense
trajectories with exact intra-interval propagation, then lets every agent
drift freely (u = 0) from the stop instant to t0 + Ts.

Relative sums are formed from in-neighbor states only; the averaging matrix,
Laplacian and consensus weights are used by the oracles, never by run().
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from errors import ControllabilityError, DimensionError, GraphStructureError, SimulationError, SingularMatrixError
from graph import DirectedGraph, averaging_matrix, consensus_weights, has_spanning_tree, neighbor_lists
from numlin import as_matrix, kron, mat_exp, matrix_power
from protocol import (
    PlantModel, SamplingSchedule, control, costate_init, interval_length, propagate_interval,
    sampling_instant, transition_matrices,
)

if TYPE_CHECKING:
    from hill import FormationContext

logger = logging.getLogger(__name__)


class StopReason(str, Enum):
    K_MAX = "k_max"
    DELTA_MIN = "delta_min"
    TOLERANCE = "tolerance"


@dataclass(frozen=True)
class Scenario:
    """Complete simulation input: topology, dynamics, schedule and initial states"""
    graph: DirectedGraph
    plant: PlantModel
    schedule: SamplingSchedule
    initial_states: np.ndarray
    dense_points_per_interval: int = 20
    consensus_tolerance: float = 1e-12
    formation: Optional["FormationContext"] = None

    def __post_init__(self):
        if not has_spanning_tree(self.graph):
            raise GraphStructureError(
                "communication graph has no directed spanning tree (Assumption 1)")
        if not self.plant.controllable:
            raise ControllabilityError("(A, B) is not controllable; Phi would be singular (Lemma 3)")

        X0 = as_matrix(self.initial_states, "initial_states")
        if X0.shape != (self.graph.agent_count, self.plant.n):
            raise DimensionError(
                f"initial_states must be {self.graph.agent_count} x {self.plant.n}, got {X0.shape}")
        object.__setattr__(self, 'initial_states', X0)
        if self.dense_points_per_interval < 0:
            raise DimensionError("dense_points_per_interval must be >= 0")

    @property
    def agent_count(self) -> int:
        return self.graph.agent_count


@dataclass(frozen=True)
class Sample:
    """States (N x n) and controls (N x m) of every agent at time t"""
    t: float
    X: np.ndarray
    U: np.ndarray
    k: int


@dataclass
class TrajectoryRecord:
    """Dense samples plus the states at each executed sampling instant"""
    samples: List[Sample] = field(default_factory=list)
    instants: List[Tuple[float, np.ndarray]] = field(default_factory=list)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def final(self) -> Sample:
        return self.samples[-1]


@dataclass
class Metrics:
    """Per-instant disagreement, its discrete-oracle prediction and consensus-value error"""
    disagreement_per_instant: List[float]
    predicted_disagreement: List[float]
    consensus_value_error: List[float]
    stop_index: int
    stop_reason: StopReason

    @property
    def initial_disagreement(self) -> float:
        return self.disagreement_per_instant[0]

    @property
    def final_disagreement(self) -> float:
        return self.disagreement_per_instant[-1]


def disagreement(X, n: Optional[int] = None) -> float:
    """
    Max pairwise Euclidean distance between agent states.

    Args:
        X: N x n array, or a stacked vector of length N*n together with n

    Returns:
        max_{i<j} ||x_i - x_j||_2 (0 for a single agent)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        if n is None or X.size % n:
            raise DimensionError("stacked states need the agent dimension n")
        X = X.reshape(-1, n)
    if X.shape[0] < 2:
        return 0.0
    return float(pdist(X).max())


def _relative_sums(X: np.ndarray, neighbors: Sequence[Sequence[int]]) -> np.ndarray:
    R = np.zeros_like(X)
    for i, sources in enumerate(neighbors):
        if sources:
            idx = [j - 1 for j in sources]
            R[i] = (X[idx] - X[i]).sum(axis=0) / (len(sources) + 1)
    return R


def _stop_reason(s: Scenario, k: int, current: float, initial: float) -> Optional[StopReason]:
    if k >= s.schedule.k_max:
        return StopReason.K_MAX
    if current == 0.0 or current < s.consensus_tolerance * initial:
        return StopReason.TOLERANCE
    if interval_length(s.schedule, k + 1) < s.schedule.delta_min:
        return StopReason.DELTA_MIN
    return None


def _run_interval(s: Scenario, k: int, X: np.ndarray, neighbors, record: TrajectoryRecord) -> np.ndarray:
    """Advance every agent across [t_k, t_{k+1}] and return the states at t_{k+1}"""
    plant = s.plant
    tk = sampling_instant(s.schedule, k)
    delta = interval_length(s.schedule, k + 1)
    transition = transition_matrices(plant, delta)
    rel = _relative_sums(X, neighbors)

    try:
        P = np.stack([costate_init(plant, delta, rel[i], transition).p for i in range(s.agent_count)])
    except SingularMatrixError as e:
        raise SimulationError(f"costate solve failed on interval {k + 1}: {e}", k=k + 1, delta=delta) from e

    points = s.dense_points_per_interval
    last_t = record.samples[-1].t if record.samples else -np.inf
    for q in range(points + 1):
        tau = delta * q / (points + 1)
        t = tk + tau
        if t <= last_t:
            continue
        Xq, _ = propagate_interval(plant, X.T, P.T, tau)
        Uq = control(plant, t, tk, P.T)
        record.samples.append(Sample(t=t, X=Xq.T, U=Uq.T, k=k + 1))
        last_t = t

    X_next, _ = propagate_interval(plant, X.T, P.T, delta)
    logger.debug("interval %d: delta=%.3e disagreement=%.3e", k + 1, delta, disagreement(X_next.T))
    return X_next.T


def _free_drift(s: Scenario, k_stop: int, X: np.ndarray, record: TrajectoryRecord) -> None:
    t_stop = sampling_instant(s.schedule, k_stop)
    horizon = s.schedule.horizon
    span = horizon - t_stop
    points = max(s.dense_points_per_interval, 1)
    zeros = np.zeros((s.agent_count, s.plant.m))
    last_t = record.samples[-1].t if record.samples else -np.inf
    for q in range(points + 1):
        t = horizon if q == points else t_stop + span * q / points
        if t <= last_t:
            continue
        Xq = X @ mat_exp(s.plant.A, t - t_stop).T
        record.samples.append(Sample(t=t, X=Xq, U=zeros, k=k_stop + 1))
        last_t = t


def oracle_discrete(s: Scenario, k: int) -> np.ndarray:
    """Stacked X(t_k) = ((I - N L)^k kron e^{A(t_k - t0)}) X(t0), independent of run()"""
    tk = sampling_instant(s.schedule, k)
    step = kron(matrix_power(averaging_matrix(s.graph), k), mat_exp(s.plant.A, tk - s.schedule.t0))
    return step @ s.initial_states.reshape(-1)


def predicted_consensus(s: Scenario, t: float) -> np.ndarray:
    """x*(t) = sum_i xi_i e^{A(t - t0)} x_i(t0)"""
    xi = consensus_weights(s.graph).xi
    return mat_exp(s.plant.A, t - s.schedule.t0) @ (s.initial_states.T @ xi)


def run(s: Scenario) -> Tuple[TrajectoryRecord, Metrics]:
    """
    Simulate the closed loop until the stopping policy fires, then drift freely.

    The stopping policy ends the sampled phase at the first k where k = k_max,
    the disagreement fell below consensus_tolerance times its initial value,
    or the next interval would be shorter than delta_min.

    Raises:
        SimulationError: a Phi solve failed mid-run
    """
    neighbors = neighbor_lists(s.graph)
    record = TrajectoryRecord()
    X = np.array(s.initial_states)
    record.instants.append((s.schedule.t0, X.copy()))
    initial = disagreement(X)

    k = 0
    while True:
        reason = _stop_reason(s, k, disagreement(X), initial)
        if reason is not None:
            break
        X = _run_interval(s, k, X, neighbors, record)
        k += 1
        record.instants.append((sampling_instant(s.schedule, k), X.copy()))

    logger.info("sampled phase stopped at k=%d (%s)", k, reason.value)
    _free_drift(s, k, X, record)
    return record, _metrics(s, record, k, reason)


def _metrics(s: Scenario, record: TrajectoryRecord, k_stop: int, reason: StopReason) -> Metrics:
    n = s.plant.n
    xi = consensus_weights(s.graph).xi
    drifted_mean = s.initial_states.T @ xi
    measured, predicted, value_error = [], [], []
    for k, (tk, X) in enumerate(record.instants):
        measured.append(disagreement(X))
        predicted.append(disagreement(oracle_discrete(s, k), n))
        x_star = mat_exp(s.plant.A, tk - s.schedule.t0) @ drifted_mean
        value_error.append(float(np.max(np.linalg.norm(X - x_star, axis=1))))
    return Metrics(measured, predicted, value_error, k_stop, reason)


def interval_peak_disagreement(record: TrajectoryRecord) -> List[float]:
    """Largest disagreement observed on the dense samples of each executed interval"""
    peaks = {}
    for sample in record.samples:
        peaks[sample.k] = max(peaks.get(sample.k, 0.0), disagreement(sample.X))
    executed = len(record.instants) - 1
    return [peaks.get(k, 0.0) for k in range(1, executed + 1)]


def run_many(scenarios: Sequence[Scenario], jobs: int = 1,
             runner: Callable[[Scenario], Any] = run) -> List[Any]:
    """
    Run independent scenarios, concurrently when jobs > 1.

    Results keep input order; runner defaults to run() and may wrap it
    (for instance to time each scenario).
    """
    if jobs <= 1 or len(scenarios) <= 1:
        return [runner(s) for s in scenarios]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(runner, scenarios))
