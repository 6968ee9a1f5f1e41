"""
Tests for Hill relative dynamics and the hexagon formation scenario
"""

import math

import numpy as np
import pytest

from conftest import SCENARIO_DIR
from errors import DimensionError, DomainError
from graph import directed_ring
from hill import (
    FormationSpec, HillParams, adjacent_separations, formation_error, formation_error_components,
    formation_scenario, hexagon_offsets, hill_blocks, hill_params_from_orbit, hill_plant, physical_sample,
    physical_states,
)
from oracle_utils import relative_error
from protocol import SamplingSchedule
from scenario_document import load_scenario
from sim import Sample, Scenario, TrajectoryRecord, oracle_discrete, run

N_R = 7.273e-5


@pytest.fixture(scope="module")
def hexagon_run():
    loaded = load_scenario(SCENARIO_DIR / 'hexagon6.yml')
    record, metrics = run(loaded.scenario)
    return loaded, record, metrics


def test_hill_blocks_values():
    A1, A2 = hill_blocks(N_R)
    np.testing.assert_allclose(np.diag(A1), [3 * N_R ** 2, 0.0, -N_R ** 2])
    assert A2[0, 1] == pytest.approx(2 * N_R)
    assert A2[1, 0] == pytest.approx(-2 * N_R)
    assert not A2[2].any()


def test_hill_plant_is_controllable():
    plant = hill_plant(HillParams(N_R))
    assert plant.n == 6 and plant.m == 3
    assert plant.controllable
    np.testing.assert_array_equal(plant.A[:3, 3:], np.eye(3))


def test_params_from_orbit():
    params = hill_params_from_orbit(4.224e7, 3.986e14)
    assert params.n_r == pytest.approx(N_R, rel=1e-3)
    HillParams(n_r=N_R, R0=4.224e7, mu=3.986e14)


@pytest.mark.parametrize("kwargs", [
    {"n_r": 0.0}, {"n_r": -1e-4}, {"n_r": N_R, "R0": 4.224e7},
    {"n_r": 1.1 * N_R, "R0": 4.224e7, "mu": 3.986e14},
])
def test_params_validation(kwargs):
    with pytest.raises(DomainError):
        HillParams(**kwargs)


def test_hexagon_offsets_geometry():
    offsets = hexagon_offsets(1000.0)
    np.testing.assert_allclose(offsets[0], [0.0, 1000.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(offsets[1], [-500 * math.sqrt(3), 500.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(adjacent_separations(offsets), np.full(6, 1000.0))


def test_offset_shift_cancels_in_dynamics(rng):
    params = HillParams(N_R)
    plant = hill_plant(params)
    A1, _ = hill_blocks(N_R)
    h = rng.uniform(-1000, 1000, 3)
    x_shifted = rng.standard_normal(6)
    u_protocol = rng.standard_normal(3)
    x_physical = x_shifted + np.concatenate([h, np.zeros(3)])
    physical_rate = plant.A @ x_physical + plant.B @ (u_protocol - A1 @ h)
    shifted_rate = plant.A @ x_shifted + plant.B @ u_protocol
    np.testing.assert_allclose(physical_rate, shifted_rate, atol=1e-12)


def test_formation_scenario_shifts_initial_states():
    offsets = hexagon_offsets()
    init = [{'r': [10.0 * i, 0.0, 0.0], 'v': [0.0, 1.0, 0.0]} for i in range(6)]
    s = formation_scenario(HillParams(N_R), FormationSpec(offsets), directed_ring(6), init, Ts=3600.0)
    np.testing.assert_allclose(s.initial_states[:, :3], np.array([r['r'] for r in init]) - offsets)
    np.testing.assert_array_equal(s.initial_states[:, 3:], np.tile([0.0, 1.0, 0.0], (6, 1)))
    np.testing.assert_array_equal(s.formation.physical_initial[:, :3], [r['r'] for r in init])


def test_formation_scenario_dimension_checks():
    with pytest.raises(DimensionError):
        formation_scenario(HillParams(N_R), FormationSpec(hexagon_offsets()), directed_ring(5),
                           np.zeros((5, 6)), Ts=100.0)
    with pytest.raises(DimensionError):
        formation_scenario(HillParams(N_R), FormationSpec(hexagon_offsets()), directed_ring(6),
                           np.zeros((6, 4)), Ts=100.0)
    with pytest.raises(DimensionError):
        FormationSpec(np.zeros((3, 2)))


def test_formation_matches_discrete_oracle(rng):
    offsets = hexagon_offsets()
    init = rng.standard_normal((6, 6)) * np.array([100, 100, 100, 0.1, 0.1, 0.1]) + \
        np.hstack([offsets, np.zeros((6, 3))])
    s = formation_scenario(HillParams(N_R), FormationSpec(offsets), directed_ring(6), init,
                           Ts=1800.0, k_max=15, dense_points_per_interval=2)
    record, _ = run(s)
    for k, (_, X) in enumerate(record.instants):
        assert relative_error(X.reshape(-1), oracle_discrete(s, k)) <= 1e-8


def test_physical_sample_adds_offsets_and_feedforward():
    offsets = hexagon_offsets()
    s = formation_scenario(HillParams(N_R), FormationSpec(offsets), directed_ring(6),
                           np.hstack([offsets, np.zeros((6, 3))]), Ts=600.0, k_max=2)
    record, _ = run(s)
    first = physical_sample(record.samples[0], s.formation)
    np.testing.assert_allclose(first.X[:, :3], offsets)
    A1, _ = hill_blocks(N_R)
    np.testing.assert_allclose(first.U, -(offsets @ A1.T), atol=1e-15)
    assert len(physical_states(record, s.formation)) == len(record.samples)


def test_hexagon_settles_within_tolerance(hexagon_run):
    loaded, record, _ = hexagon_run
    assert loaded.scenario.schedule.Ts == pytest.approx(720000.0)
    positions, velocities = formation_error_components(record, loaded.scenario.formation.spec)
    assert record.final().t == pytest.approx(720000.0)
    assert positions[-1] <= 1.0
    assert velocities[-1] <= 1e-3
    totals = formation_error(record, loaded.scenario.formation.spec)
    assert max(positions[-1], velocities[-1]) <= totals[-1] <= positions[-1] + velocities[-1] + 1e-12
    assert totals[0] > 1e5


def test_hexagon_adjacent_separations(hexagon_run):
    loaded, record, _ = hexagon_run
    final = physical_sample(record.final(), loaded.scenario.formation)
    separations = adjacent_separations(final.X[:, :3])
    assert len(separations) == 6
    for separation in separations:
        assert separation == pytest.approx(1000.0, abs=1.0)


def test_hexagon_stops_on_k_max(hexagon_run):
    _, _, metrics = hexagon_run
    assert metrics.stop_index == 150
    assert metrics.final_disagreement < 1e-6 * metrics.initial_disagreement


def test_adjacent_separations_with_order():
    positions = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0], [3.0, 0.0, 0.0]])
    assert adjacent_separations(positions, order=[1, 3, 2]) == pytest.approx([3.0, 4.0, 5.0])


def test_hill_blocks_example_values_and_limit():
    A1, _ = hill_blocks(N_R)
    assert A1[0, 0] == pytest.approx(1.5869e-8, rel=1e-4)
    assert A1[2, 2] == pytest.approx(-5.2897e-9, rel=1e-4)
    A1, A2 = hill_blocks(0.0)
    assert not A1.any() and not A2.any()


def test_formation_equals_plain_consensus_on_shifted_states(rng):
    offsets = hexagon_offsets()
    physical = rng.standard_normal((6, 6)) * 50.0
    s = formation_scenario(HillParams(N_R), FormationSpec(offsets), directed_ring(6), physical,
                           Ts=900.0, k_max=6, dense_points_per_interval=2)
    plain = Scenario(directed_ring(6), hill_plant(HillParams(N_R)), SamplingSchedule(0.0, 900.0, k_max=6),
                     physical - np.hstack([offsets, np.zeros((6, 3))]), dense_points_per_interval=2)
    formation_record, _ = run(s)
    plain_record, _ = run(plain)
    for a, b in zip(physical_states(formation_record, s.formation), plain_record.samples):
        shifted_back = physical_sample(b, s.formation)
        assert a.t == b.t
        np.testing.assert_array_equal(a.X, shifted_back.X)
        np.testing.assert_array_equal(a.U, shifted_back.U)


def test_formation_error_zero_for_exact_formation():
    offsets = hexagon_offsets()
    X = np.hstack([np.tile([1.0, 2.0, 3.0], (6, 1)), np.tile([0.1, 0.0, -0.1], (6, 1))])
    record = TrajectoryRecord(samples=[Sample(t=0.0, X=X, U=np.zeros((6, 3)), k=1)])
    assert formation_error(record, FormationSpec(offsets)) == [0.0]
    with pytest.raises(DimensionError):
        formation_error(record, FormationSpec(offsets[:4]))


def test_formation_error_takes_both_gaps_from_one_pair():
    # pair (1, 2) has the widest position gap, pair (1, 3) the widest velocity gap
    X = np.zeros((3, 6))
    X[1, 0] = 10.0
    X[2, 0] = 5.0
    X[2, 3] = 1.0
    record = TrajectoryRecord(samples=[Sample(t=0.0, X=X, U=np.zeros((3, 3)), k=1)])
    spec = FormationSpec(np.zeros((3, 3)))
    positions, velocities = formation_error_components(record, spec)
    assert (positions[0], velocities[0]) == (10.0, 1.0)
    assert formation_error(record, spec) == [10.0]
