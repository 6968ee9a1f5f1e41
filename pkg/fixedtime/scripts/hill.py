"""
Spacecraft Formation Flying on a Circular Reference Orbit

Hill (Clohessy-Wiltshire) relative dynamics and the offset reduction of the
formation law to plain consensus. Agents keep constant separations h_i; in
shifted coordinates x~_i = (r_i - h_i, r'_i) the feedforward -A1 h_i cancels
the offset exactly, so the sampled protocol runs unchanged on x~.

States are ordered (x, y, z, x', y', z') with x radial, y along-track and
z cross-track. Units are meters and seconds throughout.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import DimensionError, DomainError
from graph import DirectedGraph
from numlin import as_matrix
from protocol import PlantModel, SamplingSchedule
from sim import Sample, Scenario, TrajectoryRecord

logger = logging.getLogger(__name__)

# Relative tolerance for n_r against sqrt(mu / R0^3)
ORBIT_RATE_RTOL = 1e-3


@dataclass(frozen=True)
class HillParams:
    """Reference orbit: angular rate n_r, optionally with its radius and gravitational parameter"""
    n_r: float
    R0: Optional[float] = None
    mu: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.n_r) and self.n_r > 0):
            raise DomainError(f"orbit rate n_r must be positive, got {self.n_r}")
        if (self.R0 is None) != (self.mu is None):
            raise DomainError("R0 and mu must be given together")
        if self.R0 is not None:
            if self.R0 <= 0 or self.mu <= 0:
                raise DomainError("R0 and mu must be positive")
            expected = math.sqrt(self.mu / self.R0 ** 3)
            if abs(self.n_r - expected) > ORBIT_RATE_RTOL * expected:
                raise DomainError(
                    f"n_r={self.n_r:.6e} disagrees with sqrt(mu/R0^3)={expected:.6e} by more than 0.1%")


@dataclass(frozen=True)
class FormationSpec:
    """Desired constant position offsets h_i (N x 3); velocity offsets are zero"""
    offsets: np.ndarray

    def __post_init__(self):
        offsets = as_matrix(self.offsets, "formation offsets")
        if offsets.shape[1] != 3:
            raise DimensionError(f"formation offsets must be N x 3, got {offsets.shape}")
        object.__setattr__(self, 'offsets', offsets)
        if offsets.shape[0] > 1 and not np.any(offsets != offsets[0]):
            logger.info("all formation offsets coincide; the formation reduces to plain consensus")

    @property
    def agent_count(self) -> int:
        return self.offsets.shape[0]


@dataclass(frozen=True)
class FormationContext:
    """What a formation scenario keeps to rebuild physical outputs"""
    params: HillParams
    spec: FormationSpec
    physical_initial: np.ndarray
    mass_kg: Optional[float] = None

    @property
    def feedforward(self) -> np.ndarray:
        """-A1 h_i per agent (N x 3)"""
        A1, _ = hill_blocks(self.params.n_r)
        return -(self.spec.offsets @ A1.T)


def hill_params_from_orbit(R0: float, mu: float) -> HillParams:
    """Circular-orbit rate n_r = sqrt(mu / R0^3)"""
    if R0 <= 0 or mu <= 0:
        raise DomainError("R0 and mu must be positive")
    return HillParams(n_r=math.sqrt(mu / R0 ** 3), R0=R0, mu=mu)


def hill_blocks(n_r: float) -> Tuple[np.ndarray, np.ndarray]:
    """Position (A1) and velocity (A2) coupling blocks of Hill's equations"""
    A1 = np.diag([3.0 * n_r ** 2, 0.0, -n_r ** 2])
    A2 = np.array([[0.0, 2.0 * n_r, 0.0],
                   [-2.0 * n_r, 0.0, 0.0],
                   [0.0, 0.0, 0.0]])
    return A1, A2


def hill_plant(p: HillParams) -> PlantModel:
    """A = [[0, I3], [A1, A2]], B = [0; I3]"""
    A1, A2 = hill_blocks(p.n_r)
    A = np.zeros((6, 6))
    A[:3, 3:] = np.eye(3)
    A[3:, :3] = A1
    A[3:, 3:] = A2
    B = np.zeros((6, 3))
    B[3:, :] = np.eye(3)
    return PlantModel(A, B)


def hexagon_offsets(side: float = 1000.0) -> np.ndarray:
    """Regular hexagon in the radial/along-track plane, vertex 1 on the +y axis"""
    angles = np.pi / 2 + np.arange(6) * np.pi / 3
    return np.column_stack([side * np.cos(angles), side * np.sin(angles), np.zeros(6)])


def _physical_initial(init, agent_count: int) -> np.ndarray:
    rows = []
    for entry in init:
        if isinstance(entry, dict):
            rows.append(np.concatenate([np.asarray(entry['r'], dtype=float),
                                        np.asarray(entry['v'], dtype=float)]))
        else:
            rows.append(np.asarray(entry, dtype=float).reshape(-1))
    physical = as_matrix(np.array(rows, dtype=float) if rows else np.zeros((0, 6)), "initial states")
    if physical.shape != (agent_count, 6):
        raise DimensionError(f"formation initial states must be {agent_count} x 6, got {physical.shape}")
    return physical


def formation_scenario(p: HillParams, spec: FormationSpec, G: DirectedGraph, init, Ts: float,
                       t0: float = 0.0, k_max: int = 60, delta_min: Optional[float] = None,
                       dense_points_per_interval: int = 20, consensus_tolerance: float = 1e-12,
                       mass_kg: Optional[float] = None) -> Scenario:
    """
    Build the shifted-coordinate scenario for a Hill formation.

    Args:
        p: Reference orbit parameters
        spec: Formation offsets, one row per agent
        G: Communication graph with a spanning tree
        init: N physical (r, v) pairs, either {r, v} mappings or 6-vectors
        Ts: Settling time in seconds

    Returns:
        Scenario on x~_i = (r_i - h_i, r'_i) carrying a FormationContext
    """
    if spec.agent_count != G.agent_count:
        raise DimensionError(f"{spec.agent_count} offsets for {G.agent_count} agents")
    physical = _physical_initial(init, G.agent_count)
    shifted = physical.copy()
    shifted[:, :3] -= spec.offsets

    context = FormationContext(params=p, spec=spec, physical_initial=physical, mass_kg=mass_kg)
    schedule = SamplingSchedule(t0=t0, Ts=Ts, k_max=k_max, delta_min=delta_min)
    return Scenario(graph=G, plant=hill_plant(p), schedule=schedule, initial_states=shifted,
                    dense_points_per_interval=dense_points_per_interval,
                    consensus_tolerance=consensus_tolerance, formation=context)


def physical_sample(sample: Sample, context: FormationContext) -> Sample:
    """Shift one sample back: r_i = x~_pos + h_i, u_i = -A1 h_i + protocol control"""
    X = np.array(sample.X)
    X[:, :3] += context.spec.offsets
    return Sample(t=sample.t, X=X, U=sample.U + context.feedforward, k=sample.k)


def physical_states(traj: TrajectoryRecord, context: FormationContext) -> List[Sample]:
    """Every recorded sample in the physical frame"""
    return [physical_sample(sample, context) for sample in traj.samples]


def _pairwise_norms(values: np.ndarray) -> np.ndarray:
    diffs = values[:, None, :] - values[None, :, :]
    return np.linalg.norm(diffs, axis=2)


def _pairwise_max(values: np.ndarray) -> float:
    if values.shape[0] < 2:
        return 0.0
    return float(_pairwise_norms(values).max())


def _check_agents(traj: TrajectoryRecord, spec: FormationSpec) -> None:
    if traj.samples and traj.samples[0].X.shape[0] != spec.agent_count:
        raise DimensionError(
            f"trajectory has {traj.samples[0].X.shape[0]} agents, formation has {spec.agent_count}")


def formation_error_components(traj: TrajectoryRecord, spec: FormationSpec) -> Tuple[List[float], List[float]]:
    """Per sample: max pairwise ||(r_i - h_i) - (r_j - h_j)|| and max pairwise ||r'_i - r'_j||"""
    _check_agents(traj, spec)
    positions, velocities = [], []
    for sample in traj.samples:
        # shifted positions are r_i - h_i already
        positions.append(_pairwise_max(sample.X[:, :3]))
        velocities.append(_pairwise_max(sample.X[:, 3:]))
    return positions, velocities


def formation_error(traj: TrajectoryRecord, spec: FormationSpec) -> List[float]:
    """Per sample: max over pairs (i, j) of ||position gap|| + ||velocity gap||, both in shifted coordinates"""
    _check_agents(traj, spec)
    errors = []
    for sample in traj.samples:
        if sample.X.shape[0] < 2:
            errors.append(0.0)
            continue
        # the same pair must supply both terms
        combined = _pairwise_norms(sample.X[:, :3]) + _pairwise_norms(sample.X[:, 3:])
        errors.append(float(combined.max()))
    return errors


def adjacent_separations(positions, order: Optional[Sequence[int]] = None) -> List[float]:
    """Distances between consecutive agents (cyclic) given N x 3 physical positions"""
    positions = np.asarray(positions, dtype=float)
    order = list(order) if order is not None else list(range(1, positions.shape[0] + 1))
    return [float(np.linalg.norm(positions[a - 1] - positions[b - 1]))
            for a, b in zip(order, order[1:] + order[:1])]
