"""
Energy models of the UAV-IoT system
Air-to-ground channel, rotary-wing propulsion, first-order ground radio, and the
weighted objective evaluated over a tour.

Hover points sit at altitude H vertically above their CH, so the UAV-to-CH
distance is H for every cluster and the channel quantities are CH-independent.
All leg distances are horizontal distances between hover points.
"""
import math
from typing import Tuple

import numpy as np

from core.config import EnergyParams, noise_power_watts
from core.errors import DomainError
from core.instances import Instance
from core.models import ConfigFingerprint, EnergyBreakdown, SolveReport, Tour
from core.validation import validate_tour


# Channel

def los_probability(params: EnergyParams) -> float:
    """Probability of a line-of-sight link at elevation 90 degrees"""
    distance = params.altitude
    tau = math.degrees(math.asin(params.altitude / distance))
    exponent = -params.beta * (tau - params.eta)
    if exponent > 700:
        return 0.0
    return 1.0 / (1.0 + params.eta * math.exp(exponent))


def free_space_loss_db(params: EnergyParams) -> float:
    return 10.0 * params.path_loss_exponent * math.log10(
        4.0 * math.pi * params.carrier_freq * params.altitude / params.light_speed
    )


def avg_path_loss(params: EnergyParams) -> float:
    """Mean path loss in dB, LoS and NLoS excess losses mixed by probability"""
    p_los = los_probability(params)
    base = free_space_loss_db(params)
    return p_los * (base + params.mu_los) + (1.0 - p_los) * (base + params.mu_nlos)


def data_rate(params: EnergyParams) -> float:
    """CH-to-UAV rate in bits/s"""
    loss_linear = 10.0 ** (avg_path_loss(params) / 10.0)
    snr = params.ch_tx_power / (loss_linear * noise_power_watts(params))
    return params.bandwidth * math.log2(1.0 + snr)


# UAV

def move_power(params: EnergyParams, v: float) -> float:
    """Propulsion power in W at constant speed v"""
    if v < 0 or v > params.v_full:
        raise DomainError(f"speed {v} m/s outside [0, {params.v_full}]")
    return hover_core_power(params) + (params.p_full - params.p_static) / params.v_full * v + params.p_static


def hover_core_power(params: EnergyParams) -> float:
    weight = params.uav_mass * params.gravity
    return math.sqrt(weight**3 / (2.0 * math.pi * params.prop_radius**2 * params.prop_count * params.air_density))


def hover_power(params: EnergyParams) -> float:
    return move_power(params, 0.0)


def cluster_data_bits(params: EnergyParams, cluster_size: int) -> float:
    return (cluster_size - 1) * params.msg_bits


def collection_energy(params: EnergyParams, cluster_size: int) -> float:
    """Hover-and-receive energy while one CH uploads its cluster's data"""
    hover_time = cluster_data_bits(params, cluster_size) / data_rate(params)
    return hover_time * (hover_power(params) + params.p_com)


def flight_energy_per_meter(params: EnergyParams) -> float:
    return move_power(params, params.v_uav) / params.v_uav


def leg_energy(params: EnergyParams, start, end) -> float:
    """Energy to fly between two hover points"""
    distance = float(np.linalg.norm(np.asarray(start, dtype=np.float64) - np.asarray(end, dtype=np.float64)))
    return distance / params.v_uav * move_power(params, params.v_uav)


def flight_energy_terms(params: EnergyParams, distance: float) -> Tuple[float, float]:
    """
    Split flight energy over `distance` into its two summands

    Returns:
        (hardware term d(P_full - P_s)/v_full, hover term d(P_hover_core + P_s)/v_uav)
    """
    hardware = distance * (params.p_full - params.p_static) / params.v_full
    hover = distance / params.v_uav * (hover_core_power(params) + params.p_static)
    return hardware, hover


# Ground network

def crossover_distance(params: EnergyParams) -> float:
    """d0 separating the free-space and multipath amplifier regimes"""
    return math.sqrt(params.eps_fs / params.eps_mp)


def member_tx_energy(params: EnergyParams, distance) -> np.ndarray:
    """Energy for a member to send l bits over `distance` meters"""
    d = np.asarray(distance, dtype=np.float64)
    amplifier = np.where(
        d <= crossover_distance(params),
        params.eps_fs * d**2,
        params.eps_mp * d**4,
    )
    return params.msg_bits * params.e_elec + params.msg_bits * amplifier


def ch_uplink_energy(params: EnergyParams, cluster_size: int) -> float:
    return params.ch_tx_power * cluster_data_bits(params, cluster_size) / data_rate(params)


def intra_cluster_energies(params: EnergyParams, cluster) -> np.ndarray:
    """Member-transmit plus CH-receive energy for every candidate CH, shape (N,)"""
    nodes = np.asarray(cluster, dtype=np.float64)
    n = len(nodes)
    distances = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=-1)
    tx = member_tx_energy(params, distances)
    np.fill_diagonal(tx, 0.0)
    receive = (n - 1) * params.msg_bits * params.e_elec
    return tx.sum(axis=1) + receive


def ground_cluster_energy(params: EnergyParams, cluster, ch_index: int) -> float:
    """Ground energy of one cluster when node ch_index serves as CH"""
    nodes = np.asarray(cluster, dtype=np.float64)
    if not 0 <= ch_index < len(nodes):
        raise DomainError(f"CH index {ch_index} outside cluster of size {len(nodes)}")
    return float(intra_cluster_energies(params, nodes)[ch_index]) + ch_uplink_energy(params, len(nodes))


# Objective

def total_weighted_energy(params: EnergyParams, instance: Instance, tour: Tour) -> EnergyBreakdown:
    """Weighted energy of one data-collection round along `tour`"""
    validate_tour(instance, tour)

    path = tour.path(instance)
    distance = float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())
    uav_flight = distance * flight_energy_per_meter(params)
    uav_collect = instance.K * collection_energy(params, instance.N)

    ground_intra = 0.0
    for cluster, node in tour.visits:
        ground_intra += float(intra_cluster_energies(params, instance.nodes[cluster])[node])
    ground_ch_tx = instance.K * ch_uplink_energy(params, instance.N)

    omega = params.omega
    total = omega * (ground_intra + ground_ch_tx) + (1.0 - omega) * (uav_flight + uav_collect)
    return EnergyBreakdown(
        ground_intra=ground_intra,
        ground_ch_tx=ground_ch_tx,
        uav_flight=uav_flight,
        uav_collect=uav_collect,
        total_weighted=total,
    )


class CostModel:
    """
    Precomputed weighted costs for one (params, instance) pair

    Points are indexed 0 for the depot and 1 + k*N + n for node n of cluster k.
    edge(u, v) = (1 - omega) * leg(u, v) + vertex(v) is the cost of flying from
    point u to node v and serving v's cluster with v as CH; closing the tour
    adds (1 - omega) * leg(v, depot).
    """

    def __init__(self, params: EnergyParams, instance: Instance):
        self.params = params
        self.instance = instance
        self.K, self.N = instance.K, instance.N
        self.omega = params.omega

        self.points = np.vstack([instance.depot_xy[None, :], instance.nodes.reshape(-1, 2)])
        self.distances = np.linalg.norm(self.points[:, None, :] - self.points[None, :, :], axis=-1)
        self.legs = self.distances * flight_energy_per_meter(params)

        collect = collection_energy(params, self.N)
        uplink = ch_uplink_energy(params, self.N)
        self.ground = np.stack([intra_cluster_energies(params, c) for c in instance.nodes]) + uplink
        # (K, N): weighted per-node service cost
        self.vertex = self.omega * self.ground + (1.0 - self.omega) * collect
        self.flat_vertex = np.concatenate([[0.0], self.vertex.reshape(-1)])

    def point_index(self, cluster: int, node: int) -> int:
        return 1 + cluster * self.N + node

    def visit_of(self, point: int) -> Tuple[int, int]:
        return divmod(point - 1, self.N)

    def edge(self, u: int, v: int) -> float:
        return (1.0 - self.omega) * self.legs[u, v] + self.flat_vertex[v]

    def edges_from(self, u: int) -> np.ndarray:
        """Edge costs from point u to every point, shape (1 + K*N,)"""
        return (1.0 - self.omega) * self.legs[u] + self.flat_vertex

    def closing(self, u: int) -> float:
        return (1.0 - self.omega) * self.legs[u, 0]

    def cluster_edges(self, u: int, cluster: int) -> np.ndarray:
        """Edge costs from point u to each node of `cluster`, shape (N,)"""
        start = self.point_index(cluster, 0)
        return self.edges_from(u)[start:start + self.N]

    def tour_cost(self, tour: Tour) -> float:
        current, total = 0, 0.0
        for cluster, node in tour.visits:
            nxt = self.point_index(cluster, node)
            total += self.edge(current, nxt)
            current = nxt
        return total + self.closing(current)

    def mean_edge_cost(self) -> float:
        """Mean cost over all edges between points of different clusters (incl. depot)"""
        cluster_of = np.concatenate([[-1], np.repeat(np.arange(self.K), self.N)])
        mask = cluster_of[:, None] != cluster_of[None, :]
        mask[:, 0] = False
        weights = (1.0 - self.omega) * self.legs + self.flat_vertex[None, :]
        return float(weights[mask].mean())

    def weight_matrix(self) -> np.ndarray:
        """Full edge-cost matrix over points, shape (1 + K*N, 1 + K*N)"""
        return (1.0 - self.omega) * self.legs + self.flat_vertex[None, :]

    def closing_costs(self) -> np.ndarray:
        """Closing-leg cost from every point back to the depot"""
        return (1.0 - self.omega) * self.legs[:, 0]


def build_report(
    solver: str,
    params: EnergyParams,
    instance: Instance,
    tour: Tour,
    seed: int | None = None,
    **extras,
) -> SolveReport:
    """Validate `tour`, evaluate its energy and wrap it in a report"""
    breakdown = total_weighted_energy(params, instance, tour)
    fingerprint = ConfigFingerprint(
        seed=instance.seed if seed is None else seed,
        omega=params.omega,
        params_hash=params.fingerprint(),
    )
    return SolveReport(solver=solver, tour=tour, breakdown=breakdown, fingerprint=fingerprint, extras=extras)
