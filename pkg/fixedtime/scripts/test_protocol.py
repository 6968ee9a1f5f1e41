"""
Tests for the sampled protocol: schedule, Phi, costate, control and exact flow
"""

import math

import numpy as np
import pytest

from errors import ControllabilityError, DimensionError, DomainError, ScheduleIndexError, SingularMatrixError
from graph import averaging_matrix, neighbor_lists
from numlin import determinant, mat_exp, numerical_rank, solve
from oracle_utils import (
    EndpointKernel, gramian_quadrature, random_controllable_pair, random_spanning_graph, random_uncontrollable_pair,
    relative_error, rk4_flow,
)
from protocol import (
    BASEL_FACTOR, Costate, PlantModel, SamplingSchedule, control, costate_init, double_integrator,
    gramian_phi, hamiltonian_block, harmonic_oscillator, interval_length, propagate_interval,
    protocol_gain, sampling_instant, single_integrator, terminal_map, transition_matrices,
)


# --- schedule ---

def test_interval_lengths():
    sched = SamplingSchedule(t0=0.0, Ts=1.0)
    assert interval_length(sched, 1) == pytest.approx(6 / math.pi ** 2)
    assert interval_length(sched, 2) == pytest.approx(6 / (4 * math.pi ** 2))
    assert BASEL_FACTOR == pytest.approx(0.6079271018540267)


def test_instants_start_at_t0_and_accumulate():
    sched = SamplingSchedule(t0=5.0, Ts=2.0, k_max=4)
    assert sampling_instant(sched, 0) == 5.0
    expected = 5.0 + sum(interval_length(sched, j) for j in range(1, 4))
    assert sampling_instant(sched, 3) == pytest.approx(expected, rel=1e-15)
    assert sched.horizon == 7.0


def test_instants_never_reach_horizon():
    sched = SamplingSchedule(t0=0.0, Ts=1.0, k_max=10 ** 6)
    last = sampling_instant(sched, 10 ** 6)
    assert 1.0 - 1e-5 <= last < 1.0
    instants = sched._instants
    assert (instants < sched.horizon).all()
    assert (np.diff(instants) > 0).all()


def test_default_delta_min_scales_with_ts():
    assert SamplingSchedule(t0=0.0, Ts=200.0).delta_min == pytest.approx(2e-7)
    assert SamplingSchedule(t0=0.0, Ts=1.0, delta_min=0.0).delta_min == 0.0


@pytest.mark.parametrize("kwargs", [
    {"Ts": 0.0}, {"Ts": -1.0}, {"Ts": float('inf')}, {"Ts": 1.0, "k_max": 0},
    {"Ts": 1.0, "delta_min": -1e-3},
])
def test_schedule_rejects_invalid(kwargs):
    with pytest.raises(DomainError):
        SamplingSchedule(t0=0.0, **kwargs)


def test_schedule_index_errors():
    sched = SamplingSchedule(t0=0.0, Ts=1.0, k_max=3)
    with pytest.raises(ScheduleIndexError):
        interval_length(sched, 0)
    with pytest.raises(ScheduleIndexError):
        sampling_instant(sched, 4)
    with pytest.raises(ScheduleIndexError):
        sampling_instant(sched, -1)


# --- plant ---

def test_plant_validation():
    with pytest.raises(DimensionError):
        PlantModel(np.zeros((2, 3)), np.zeros((2, 1)))
    with pytest.raises(DimensionError):
        PlantModel(np.zeros((2, 2)), np.zeros((3, 1)))
    with pytest.raises(ControllabilityError, match="not controllable.*Lemma 3"):
        PlantModel(np.diag([1.0, 2.0]), np.array([[1.0], [0.0]]))
    relaxed = PlantModel(np.diag([1.0, 2.0]), np.array([[1.0], [0.0]]), require_controllable=False)
    assert not relaxed.controllable


def test_builtin_plants_shapes():
    assert (single_integrator(3).n, single_integrator(3).m) == (3, 3)
    assert (double_integrator(2).n, double_integrator(2).m) == (4, 2)
    assert (harmonic_oscillator(1.5).n, harmonic_oscillator(1.5).m) == (2, 1)


def test_hamiltonian_block_layout(double_integrator_plant):
    M = hamiltonian_block(double_integrator_plant)
    np.testing.assert_array_equal(M, [[0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 0, 0], [0, 0, -1, 0]])


# --- Phi ---

def test_phi_double_integrator_unit_interval(double_integrator_plant):
    phi = gramian_phi(double_integrator_plant, 1.0)
    np.testing.assert_allclose(phi, [[-1 / 6, 1 / 2], [-1 / 2, 1.0]], atol=1e-12)


def test_phi_single_integrator_is_delta_identity():
    np.testing.assert_allclose(gramian_phi(single_integrator(2), 0.25), 0.25 * np.eye(2), atol=1e-15)


def test_phi_matches_quadrature(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, n + 1))
        A, B = random_controllable_pair(rng, n, m)
        delta = float(rng.uniform(0.1, 2.0))
        plant = PlantModel(A, B)
        assert relative_error(gramian_phi(plant, delta), gramian_quadrature(A, B, delta)) <= 1e-9


@pytest.mark.parametrize("delta", [0.1, 1.0])
def test_phi_invertible_for_controllable_pairs(rng, delta):
    # m >= n/2 keeps the controllability index at 2; single-input pairs with
    # n = 6 have sigma_min / sigma_max near 1e-17 at delta = 0.1
    for _ in range(50):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(math.ceil(n / 2), n + 1))
        A, B = random_controllable_pair(rng, n, m)
        phi = gramian_phi(PlantModel(A, B), delta)
        # n - m directions are reached through A B only and scale as delta^2 / 12
        scale = np.linalg.norm(phi, 2) ** n * (delta ** 2 / 12) ** (n - m)
        assert abs(determinant(phi)) > 1e-14 * scale
        assert numerical_rank(phi) == n
        solve(phi, np.ones(n))


def test_phi_singular_for_uncontrollable_pairs(rng):
    for _ in range(10):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, n + 1))
        A, B = random_uncontrollable_pair(rng, n, m)
        plant = PlantModel(A, B, require_controllable=False)
        assert not plant.controllable
        phi = gramian_phi(plant, float(rng.uniform(0.5, 2.0)))
        assert numerical_rank(phi) < n
        singular_values = np.linalg.svd(phi, compute_uv=False)
        assert singular_values[-1] <= 1e-12 * singular_values[0]


def test_phi_rejects_non_positive_delta(double_integrator_plant):
    for delta in (0.0, -1.0, float('nan')):
        with pytest.raises(DomainError):
            gramian_phi(double_integrator_plant, delta)


# --- costate and control ---

def test_costate_zero_rel_sum_gives_zero(double_integrator_plant):
    costate = costate_init(double_integrator_plant, 1.0, np.zeros(2))
    np.testing.assert_array_equal(costate.p, np.zeros(2))


def test_costate_solves_phi_system(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        A, B = random_controllable_pair(rng, n, int(rng.integers(math.ceil(n / 2), n + 1)))
        plant = PlantModel(A, B)
        delta = float(rng.uniform(0.2, 2.0))
        rel = rng.standard_normal(n)
        costate = costate_init(plant, delta, rel)
        transition = transition_matrices(plant, delta)
        residual = transition.phi @ costate.p - transition.exp_a @ rel
        assert np.linalg.norm(residual) <= 1e-10 * max(1.0, np.linalg.norm(transition.exp_a @ rel))


def test_costate_rejects_wrong_size(double_integrator_plant):
    with pytest.raises(DimensionError):
        costate_init(double_integrator_plant, 1.0, np.ones(3))


def test_costate_on_uncontrollable_plant_is_singular():
    plant = PlantModel(np.zeros((2, 2)), np.array([[1.0], [0.0]]), require_controllable=False)
    with pytest.raises(SingularMatrixError, match="Phi is singular.*Lemma 3"):
        costate_init(plant, 1.0, np.array([1.0, 1.0]))


def test_endpoint_reaches_drifted_neighbor_average(rng):
    for _ in range(20):
        n = int(rng.integers(1, 6))
        A, B = random_controllable_pair(rng, n, int(rng.integers(math.ceil(n / 2), n + 1)))
        plant = PlantModel(A, B)
        delta = float(rng.uniform(0.2, 2.0))
        x, rel = rng.standard_normal(n), rng.standard_normal(n)
        p = costate_init(plant, delta, rel)
        x_end, _ = propagate_interval(plant, x, p, delta)
        expected = mat_exp(A, delta) @ (x + rel)
        assert relative_error(x_end, expected) <= 1e-9


def test_control_at_interval_start_is_bt_p(double_integrator_plant):
    p = Costate(np.array([3.0, -2.0]))
    np.testing.assert_allclose(control(double_integrator_plant, 4.0, 4.0, p), [-2.0])
    # B^T e^{-A^T tau} p = p2 - tau p1
    np.testing.assert_allclose(control(double_integrator_plant, 4.5, 4.0, p), [-3.5])


def test_control_accepts_agent_columns(double_integrator_plant):
    P = np.array([[3.0, 1.0], [-2.0, 0.0]])
    np.testing.assert_allclose(control(double_integrator_plant, 1.0, 0.0, P), [[-5.0, -1.0]])


def test_control_before_interval_start(double_integrator_plant):
    with pytest.raises(DomainError):
        control(double_integrator_plant, 0.9, 1.0, np.zeros(2))


def test_control_matches_costate_flow(rng):
    A, B = random_controllable_pair(rng, 4, 2)
    plant = PlantModel(A, B)
    x, p = rng.standard_normal(4), rng.standard_normal(4)
    for tau in (0.0, 0.3, 1.1):
        _, p_tau = propagate_interval(plant, x, p, tau)
        np.testing.assert_allclose(control(plant, 2.0 + tau, 2.0, p), B.T @ p_tau, atol=1e-12)


def test_protocol_gain_matches_costate_control(rng):
    A, B = random_controllable_pair(rng, 3, 2)
    plant = PlantModel(A, B)
    rel = rng.standard_normal(3)
    delta, tk, t = 0.8, 1.0, 1.5
    p = costate_init(plant, delta, rel)
    np.testing.assert_allclose(protocol_gain(plant, t, tk, delta) @ rel, control(plant, t, tk, p),
                               rtol=1e-9, atol=1e-12)


# --- exact flow ---

def test_propagate_matches_rk4(rng):
    for _ in range(20):
        n = int(rng.integers(1, 5))
        A, B = random_controllable_pair(rng, n, int(rng.integers(1, n + 1)))
        plant = PlantModel(A, B)
        tau = float(rng.uniform(0.2, 1.5))
        x, p = rng.standard_normal(n), rng.standard_normal(n)
        x_exact, p_exact = propagate_interval(plant, x, p, tau)
        x_rk, p_rk = rk4_flow(A, B, x, p, tau)
        assert relative_error(np.concatenate([x_exact, p_exact]), np.concatenate([x_rk, p_rk])) <= 1e-6


def test_propagate_at_zero_is_identity(double_integrator_plant):
    x, p = np.array([1.0, 2.0]), np.array([3.0, 4.0])
    x0, p0 = propagate_interval(double_integrator_plant, x, p, 0.0)
    np.testing.assert_array_equal(x0, x)
    np.testing.assert_array_equal(p0, p)


def test_propagate_validation(double_integrator_plant):
    with pytest.raises(DomainError):
        propagate_interval(double_integrator_plant, np.zeros(2), np.zeros(2), -0.1)
    with pytest.raises(DimensionError):
        propagate_interval(double_integrator_plant, np.zeros(2), np.zeros(3), 0.1)


@pytest.mark.parametrize("delta", [1e-3, 1e-2, 0.1, 1.0])
def test_terminal_map_matches_per_agent_step(rng, delta):
    eps = np.finfo(float).eps
    for _ in range(10):
        N = int(rng.integers(2, 9))
        n = int(rng.integers(1, 7))
        m = int(rng.integers(math.ceil(n / 2), n + 1))
        G = random_spanning_graph(rng, N)
        plant = PlantModel(*random_controllable_pair(rng, n, m))
        X = rng.standard_normal((N, n))

        expected = []
        for i, sources in enumerate(neighbor_lists(G)):
            rel = sum(X[j - 1] - X[i] for j in sources) / (len(sources) + 1)
            x_end, _ = propagate_interval(plant, X[i], costate_init(plant, delta, rel), delta)
            expected.append(x_end)
        stacked = terminal_map(averaging_matrix(G), plant, delta, X.reshape(-1))

        # the per-agent path carries Phi^{-1} through e^{M delta}; small delta
        # leaves Phi ill-conditioned, so the agreement floor rises with cond(Phi)
        sigma = np.linalg.svd(gramian_phi(plant, delta), compute_uv=False)
        flow_norm = np.linalg.norm(mat_exp(hamiltonian_block(plant), delta), 2)
        tol = max(1e-8, 1000 * eps * flow_norm / sigma[-1])
        assert relative_error(stacked, np.concatenate(expected)) <= tol


def test_terminal_map_rejects_mismatch(double_integrator_plant):
    with pytest.raises(DimensionError):
        terminal_map(np.eye(3), double_integrator_plant, 1.0, np.zeros(4))


# --- optimality ---

def test_protocol_control_is_minimum_energy(rng):
    for _ in range(10):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(math.ceil(n / 2), n + 1))
        A, B = random_controllable_pair(rng, n, m)
        plant = PlantModel(A, B)
        delta = float(rng.uniform(0.3, 1.5))
        p = costate_init(plant, delta, rng.standard_normal(n))

        kernel = EndpointKernel(A, B, delta)
        u = np.stack([control(plant, tau, 0.0, p) for tau in kernel.nodes])
        base = kernel.cost(u)
        for _ in range(100):
            v = kernel.sample(rng)
            assert np.linalg.norm(kernel.endpoint_shift(v)) <= 1e-9 * max(1.0, np.abs(v).max())
            gain = kernel.cost(u + v) - base
            assert gain >= -1e-10 * max(1.0, base)
            assert gain == pytest.approx(kernel.cost(v), rel=1e-6, abs=1e-10 * max(1.0, base))
