"""
Energy model tests
Channel, propulsion and ground-radio values at the table defaults, and the weighted objective
"""
import math

import numpy as np
import pytest

from core.config import EnergyParams
from core.energy import (
    CostModel,
    avg_path_loss,
    build_report,
    ch_uplink_energy,
    collection_energy,
    crossover_distance,
    data_rate,
    flight_energy_per_meter,
    flight_energy_terms,
    ground_cluster_energy,
    hover_core_power,
    hover_power,
    intra_cluster_energies,
    leg_energy,
    los_probability,
    member_tx_energy,
    move_power,
    total_weighted_energy,
)
from core.errors import ConstraintViolationError, DomainError
from core.instances import generate
from core.models import Tour


class TestChannel:
    def test_los_probability_at_vertical_elevation(self, energy_params):
        assert los_probability(energy_params) == pytest.approx(0.5244, abs=1e-3)

    def test_average_path_loss(self, energy_params):
        assert avg_path_loss(energy_params) == pytest.approx(118.7, abs=0.2)

    def test_data_rate(self, energy_params):
        assert data_rate(energy_params) == pytest.approx(5.45e6, rel=0.01)

    def test_higher_altitude_lowers_rate(self, energy_params):
        high = EnergyParams(altitude=150.0)
        assert data_rate(high) < data_rate(energy_params)


class TestPropulsion:
    def test_hover_power(self, energy_params):
        assert hover_power(energy_params) == pytest.approx(9.77, abs=0.05)
        assert move_power(energy_params, 0.0) == hover_core_power(energy_params)

    def test_full_speed_adds_full_power(self, energy_params):
        assert move_power(energy_params, energy_params.v_full) == pytest.approx(hover_core_power(energy_params) + 5.0)

    def test_static_power_adds_at_hover(self):
        params = EnergyParams(p_static=2.0)
        assert move_power(params, 0.0) == pytest.approx(hover_core_power(params) + 2.0)

    def test_speed_outside_range_raises(self, energy_params):
        with pytest.raises(DomainError):
            move_power(energy_params, -1.0)
        with pytest.raises(DomainError):
            move_power(energy_params, energy_params.v_full + 0.1)

    def test_leg_energy_over_150_meters(self, energy_params):
        assert leg_energy(energy_params, (0.0, 0.0), (150.0, 0.0)) == pytest.approx(147.7, abs=1.0)

    def test_flight_energy_decreases_with_speed(self):
        per_meter = [flight_energy_per_meter(EnergyParams(v_uav=v)) for v in (5.0, 10.0, 15.0)]
        assert per_meter[0] > per_meter[1] > per_meter[2]

    def test_flight_terms_sum_to_flight_energy(self, energy_params):
        hardware, hover = flight_energy_terms(energy_params, 320.0)
        assert hardware + hover == pytest.approx(320.0 * flight_energy_per_meter(energy_params))

    def test_collection_energy(self, energy_params):
        assert collection_energy(energy_params, 20) == pytest.approx(19 * 8e6 / data_rate(energy_params) * (hover_power(energy_params) + 0.0126))
        assert collection_energy(energy_params, 20) == pytest.approx(273.0, rel=0.01)

    def test_one_second_upload(self):
        """A two-node cluster whose message takes exactly one second to upload"""
        rate = data_rate(EnergyParams())
        params = EnergyParams(msg_bits=rate)
        assert collection_energy(params, 2) == pytest.approx(hover_power(params) + params.p_com)


class TestGroundRadio:
    def test_crossover_distance(self, energy_params):
        assert crossover_distance(energy_params) == pytest.approx(87.7, abs=0.1)

    def test_member_transmit_at_zero_distance(self, energy_params):
        assert float(member_tx_energy(energy_params, 0.0)) == pytest.approx(0.4)

    def test_member_transmit_at_50_meters(self, energy_params):
        assert float(member_tx_energy(energy_params, 50.0)) == pytest.approx(0.6)

    def test_multipath_regime_beyond_crossover(self, energy_params):
        d = 120.0
        expected = 8e6 * 50e-9 + 8e6 * 0.0013e-12 * d**4
        assert float(member_tx_energy(energy_params, d)) == pytest.approx(expected)

    def test_collocated_pair_intra_energy(self, energy_params):
        """Two nodes at one point: member transmit 0.4 J plus CH receive 0.4 J"""
        energies = intra_cluster_energies(energy_params, [[10.0, 10.0], [10.0, 10.0]])
        np.testing.assert_allclose(energies, [0.8, 0.8])

    def test_ground_cluster_energy_adds_uplink(self, energy_params):
        cluster = [[0.0, 0.0], [30.0, 0.0], [0.0, 40.0]]
        expected = intra_cluster_energies(energy_params, cluster)[1] + ch_uplink_energy(energy_params, 3)
        assert ground_cluster_energy(energy_params, cluster, 1) == pytest.approx(expected)

    def test_ground_cluster_energy_bad_index(self, energy_params):
        with pytest.raises(DomainError):
            ground_cluster_energy(energy_params, [[0.0, 0.0], [1.0, 1.0]], 2)

    def test_central_head_is_cheapest(self, energy_params):
        cluster = [[0.0, 0.0], [40.0, 0.0], [80.0, 0.0]]
        assert int(np.argmin(intra_cluster_energies(energy_params, cluster))) == 1


class TestObjective:
    def test_omega_one_is_ground_only(self, small_instance):
        tour = Tour.from_pairs([(0, 0), (1, 1), (2, 2)])
        b = total_weighted_energy(EnergyParams(omega=1.0), small_instance, tour)
        assert b.total_weighted == pytest.approx(b.ground)

    def test_omega_zero_is_uav_only(self, small_instance):
        tour = Tour.from_pairs([(0, 0), (1, 1), (2, 2)])
        b = total_weighted_energy(EnergyParams(omega=0.0), small_instance, tour)
        assert b.total_weighted == pytest.approx(b.uav)

    def test_breakdown_recomposes(self, energy_params, table_instance):
        tour = Tour.from_pairs([(2, 3), (0, 5), (3, 0), (1, 19)])
        b = total_weighted_energy(energy_params, table_instance, tour)
        assert b.recomposes(energy_params.omega)

    def test_reversed_tour_has_same_energy(self, energy_params, table_instance):
        tour = Tour.from_pairs([(2, 3), (0, 5), (3, 0), (1, 19)])
        forward = total_weighted_energy(energy_params, table_instance, tour).total_weighted
        backward = total_weighted_energy(energy_params, table_instance, tour.reversed()).total_weighted
        assert backward == pytest.approx(forward, rel=1e-12)

    def test_symmetric_pair_orders_agree(self, energy_params, two_cluster_instance):
        a = total_weighted_energy(energy_params, two_cluster_instance, Tour.from_pairs([(0, 1), (1, 0)]))
        b = total_weighted_energy(energy_params, two_cluster_instance, Tour.from_pairs([(1, 0), (0, 1)]))
        assert a.total_weighted == pytest.approx(b.total_weighted, rel=1e-12)

    def test_flight_is_path_length(self, energy_params, two_cluster_instance):
        tour = Tour.from_pairs([(0, 1), (1, 0)])
        b = total_weighted_energy(energy_params, two_cluster_instance, tour)
        length = 2 * math.hypot(290.0, 200.0) + 580.0
        assert b.uav_flight == pytest.approx(length * flight_energy_per_meter(energy_params))

    def test_invalid_tour_raises(self, energy_params, small_instance):
        with pytest.raises(ConstraintViolationError):
            total_weighted_energy(energy_params, small_instance, Tour.from_pairs([(0, 0), (0, 1), (2, 2)]))
        with pytest.raises(ConstraintViolationError):
            total_weighted_energy(energy_params, small_instance, Tour.from_pairs([(0, 0), (1, 5), (2, 2)]))

    def test_build_report_carries_fingerprint(self, energy_params, small_instance):
        report = build_report("greedy", energy_params, small_instance, Tour.from_pairs([(0, 0), (1, 0), (2, 0)]))
        assert report.fingerprint.seed == small_instance.seed
        assert report.fingerprint.params_hash == energy_params.fingerprint()
        assert report.energy == report.breakdown.total_weighted


class TestCostModel:
    @pytest.mark.parametrize("omega", [0.0, 0.3, 0.5, 1.0])
    def test_tour_cost_matches_objective(self, omega):
        instance = generate(4, 6, seed=3)
        params = EnergyParams(omega=omega)
        model = CostModel(params, instance)
        rng = np.random.default_rng(int(omega * 10))
        for _ in range(10):
            order = rng.permutation(4)
            tour = Tour.from_pairs([(int(k), int(rng.integers(6))) for k in order])
            expected = total_weighted_energy(params, instance, tour).total_weighted
            assert model.tour_cost(tour) == pytest.approx(expected, rel=1e-9)

    def test_point_indexing(self, small_instance, energy_params):
        model = CostModel(energy_params, small_instance)
        assert model.point_index(2, 1) == 1 + 2 * 3 + 1
        assert model.visit_of(model.point_index(1, 2)) == (1, 2)
        np.testing.assert_array_equal(model.points[model.point_index(1, 2)], small_instance.nodes[1, 2])

    def test_cluster_edges_slice(self, small_instance, energy_params):
        model = CostModel(energy_params, small_instance)
        edges = model.cluster_edges(0, 2)
        assert edges.shape == (3,)
        assert edges[1] == pytest.approx(model.edge(0, model.point_index(2, 1)))
