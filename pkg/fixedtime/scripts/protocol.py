"""
Sampled Fixed-Time Consensus Protocol

Plant model, the shrinking sampling schedule T_k = 6 Ts / (pi k)^2, the
Gramian-type matrix Phi, costate initialization, the control signal
u = B^T e^{-A^T (t - t_k)} p(t_k) and exact propagation of the joint
state/costate flow with e^{M tau}.

Costate and state arguments of control() and propagate_interval() may be a
single n-vector or an n x N array holding one agent per column.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from errors import (
    ControllabilityError, DimensionError, DomainError, ScheduleIndexError, SingularMatrixError,
)
from numlin import as_matrix, as_vector, is_controllable, kron, mat_exp, solve

logger = logging.getLogger(__name__)

# T_k = BASEL_FACTOR * Ts / k^2 sums to Ts over k = 1, 2, ...
BASEL_FACTOR = 6.0 / math.pi ** 2


@dataclass(frozen=True)
class PlantModel:
    """Identical agent dynamics x' = A x + B u"""
    A: np.ndarray
    B: np.ndarray
    require_controllable: bool = True

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'B', B)
        if self.require_controllable and not is_controllable(A, B):
            raise ControllabilityError(
                "(A, B) is not controllable; Phi is singular for every interval (Lemma 3)")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def controllable(self) -> bool:
        return is_controllable(self.A, self.B)


@dataclass(frozen=True)
class SamplingSchedule:
    """Sampling instants t_k = t0 + sum_{j<=k} T_j with a stopping index"""
    t0: float
    Ts: float
    k_max: int = 60
    delta_min: Optional[float] = None
    _instants: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.Ts)):
            raise DomainError("t0 and Ts must be finite")
        if self.Ts <= 0:
            raise DomainError(f"settling time Ts must be positive, got {self.Ts}")
        if int(self.k_max) < 1:
            raise DomainError(f"k_max must be >= 1, got {self.k_max}")
        object.__setattr__(self, 'k_max', int(self.k_max))
        if self.delta_min is None:
            object.__setattr__(self, 'delta_min', 1e-9 * self.Ts)
        elif self.delta_min < 0:
            raise DomainError(f"delta_min must be non-negative, got {self.delta_min}")

        k = np.arange(1, self.k_max + 1, dtype=float)
        lengths = BASEL_FACTOR * self.Ts / (k * k)
        instants = np.empty(self.k_max + 1)
        instants[0] = self.t0
        instants[1:] = self.t0 + np.cumsum(lengths)
        instants.setflags(write=False)
        object.__setattr__(self, '_instants', instants)

    @property
    def horizon(self) -> float:
        """t0 + Ts, the instant every agent must agree by"""
        return self.t0 + self.Ts


@dataclass(frozen=True)
class Costate:
    """Costate of one agent at the start of an interval"""
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'p', as_vector(self.p, "costate"))


@dataclass(frozen=True)
class IntervalTransition:
    """e^{A delta} and Phi(delta) for one sampling interval"""
    delta: float
    exp_a: np.ndarray
    phi: np.ndarray


def interval_length(sched: SamplingSchedule, k: int) -> float:
    """T_k = 6 Ts / (pi^2 k^2) for k >= 1"""
    if k < 1:
        raise ScheduleIndexError(f"sampling intervals are numbered from 1, got k={k}")
    return BASEL_FACTOR * sched.Ts / (float(k) * float(k))


def sampling_instant(sched: SamplingSchedule, k: int) -> float:
    """t_k from the cached cumulative sum (t0 for k = 0)"""
    if not 0 <= k <= sched.k_max:
        raise ScheduleIndexError(f"instant index {k} outside [0, {sched.k_max}]")
    return float(sched._instants[k])


def hamiltonian_block(plant: PlantModel) -> np.ndarray:
    """M = [[A, B B^T], [0, -A^T]]"""
    n = plant.n
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = plant.A
    M[:n, n:] = plant.B @ plant.B.T
    M[n:, n:] = -plant.A.T
    return M


def _require_positive(delta: float, name: str = "delta") -> float:
    if not delta > 0 or not math.isfinite(delta):
        raise DomainError(f"{name} must be a positive duration, got {delta}")
    return float(delta)


def gramian_phi(plant: PlantModel, delta: float) -> np.ndarray:
    """
    Phi(delta): upper-right n x n block of e^{M delta}.

    Equals the integral of e^{A(delta - tau)} B B^T e^{-A^T tau} over
    [0, delta]; invertible exactly when (A, B) is controllable.
    """
    delta = _require_positive(delta)
    n = plant.n
    return mat_exp(hamiltonian_block(plant), delta)[:n, n:]


def transition_matrices(plant: PlantModel, delta: float) -> IntervalTransition:
    """e^{A delta} and Phi(delta) in one call"""
    delta = _require_positive(delta)
    return IntervalTransition(delta=delta, exp_a=mat_exp(plant.A, delta), phi=gramian_phi(plant, delta))


def costate_init(plant: PlantModel, delta: float, rel_sum,
                 transition: Optional[IntervalTransition] = None) -> Costate:
    """
    Costate p(t_k) solving Phi p = e^{A delta} rel_sum.

    Args:
        plant: Agent dynamics
        delta: Interval length t_{k+1} - t_k
        rel_sum: (1/(|N_i|+1)) * sum over in-neighbors of (x_j - x_i) at t_k
        transition: Precomputed matrices for this delta (optional)

    Raises:
        SingularMatrixError: Phi is singular (plant not controllable or delta degenerate)
    """
    rel_sum = as_vector(rel_sum, "rel_sum")
    if rel_sum.size != plant.n:
        raise DimensionError(f"rel_sum has {rel_sum.size} entries, expected {plant.n}")
    if transition is None:
        transition = transition_matrices(plant, delta)
    if not np.any(rel_sum):
        return Costate(np.zeros(plant.n))

    try:
        p = solve(transition.phi, transition.exp_a @ rel_sum)
    except SingularMatrixError as e:
        raise SingularMatrixError(
            "Phi is singular: (A, B) must be controllable and delta non-degenerate (Lemma 3)",
            e.pivot) from e
    return Costate(p)


def _costate_array(p) -> np.ndarray:
    return p.p if isinstance(p, Costate) else np.asarray(p, dtype=float)


def control(plant: PlantModel, t: float, tk: float, p) -> np.ndarray:
    """u(t) = B^T e^{-A^T (t - t_k)} p(t_k) for t_k <= t"""
    if t < tk:
        raise DomainError(f"control requested at t={t} before interval start {tk}")
    p = _costate_array(p)
    return plant.B.T @ (mat_exp(-plant.A.T, t - tk) @ p)


def propagate_interval(plant: PlantModel, x_k, p_k, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact joint flow [x; p](t_k + tau) = e^{M tau} [x; p](t_k).

    Returns:
        (x(t_k + tau), p(t_k + tau)) with the same shape as the inputs
    """
    if tau < 0:
        raise DomainError(f"propagation time must be non-negative, got {tau}")
    x_k = np.asarray(x_k, dtype=float)
    p_k = _costate_array(p_k)
    if x_k.shape != p_k.shape or x_k.shape[0] != plant.n:
        raise DimensionError(f"state {x_k.shape} and costate {p_k.shape} must both lead with n={plant.n}")

    n = plant.n
    stacked = np.concatenate([x_k, p_k], axis=0)
    flowed = mat_exp(hamiltonian_block(plant), tau) @ stacked
    return flowed[:n], flowed[n:]


def terminal_map(avg, plant: PlantModel, delta: float, X_k) -> np.ndarray:
    """Closed-form step X(t_{k+1}) = ((I - N L) kron e^{A delta}) X(t_k) on stacked states"""
    avg = np.asarray(avg, dtype=float)
    X_k = np.asarray(X_k, dtype=float).reshape(-1)
    N = avg.shape[0]
    if avg.shape != (N, N) or X_k.size != N * plant.n:
        raise DimensionError(
            f"averaging matrix {avg.shape} and stacked state of size {X_k.size} do not match n={plant.n}")
    return kron(avg, mat_exp(plant.A, delta)) @ X_k


def protocol_gain(plant: PlantModel, t: float, tk: float, delta: float) -> np.ndarray:
    """Full feedback gain B^T e^{-A^T (t - t_k)} Phi^{-1} e^{A delta} applied to rel_sum"""
    transition = transition_matrices(plant, delta)
    return plant.B.T @ mat_exp(-plant.A.T, t - tk) @ solve(transition.phi, transition.exp_a)


def single_integrator(dimension: int = 1) -> PlantModel:
    """x' = u with n = m = dimension"""
    return PlantModel(np.zeros((dimension, dimension)), np.eye(dimension))


def double_integrator(dimension: int = 1) -> PlantModel:
    """Position/velocity pairs: A = [[0, I], [0, 0]], B = [0; I]"""
    d = dimension
    A = np.zeros((2 * d, 2 * d))
    A[:d, d:] = np.eye(d)
    B = np.zeros((2 * d, d))
    B[d:, :] = np.eye(d)
    return PlantModel(A, B)


def harmonic_oscillator(omega: float, require_controllable: bool = True) -> PlantModel:
    """A = [[0, omega], [-omega, 0]], B = [0; 1]; omega = 0 is not controllable"""
    return PlantModel(np.array([[0.0, omega], [-omega, 0.0]]), np.array([[0.0], [1.0]]),
                      require_controllable=require_controllable)
