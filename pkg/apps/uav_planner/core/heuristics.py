"""
Construction heuristics
Greedy nearest-choice tour building and an ant colony for the clustered tour problem
"""
import time
from typing import List, Optional, Tuple

import numpy as np
import structlog

from core.config import AcoConfig, EnergyParams
from core.energy import CostModel, build_report
from core.instances import Instance
from core.models import SolveReport, Tour

logger = structlog.get_logger(__name__)

INITIAL_TRAIL = 1.0
TRAIL_FLOOR = 1e-12


def solve_greedy(instance: Instance, params: EnergyParams) -> SolveReport:
    """
    From the depot, repeatedly take the cheapest (cluster, node) move

    A move costs flight + collection + ground of the entered node. When a
    single cluster remains the forced return leg is part of the move.
    """
    model = CostModel(params, instance)
    K, N = model.K, model.N
    remaining = list(range(K))
    current = 0
    visits: List[Tuple[int, int]] = []

    while remaining:
        candidates = np.concatenate([model.cluster_edges(current, k) for k in remaining])
        if len(remaining) == 1:
            candidates = candidates + model.closing_costs()[1 + remaining[0] * N:1 + (remaining[0] + 1) * N]
        pick = int(candidates.argmin())
        cluster, node = remaining[pick // N], pick % N
        visits.append((cluster, node))
        remaining.remove(cluster)
        current = model.point_index(cluster, node)

    report = build_report("greedy", params, instance, Tour(visits=tuple(visits)))
    logger.info("solver_finished", solver="greedy", K=K, N=N, energy=report.energy)
    return report


class AntColony:
    """
    Ant colony search over hover points

    Each ant leaves the depot and picks its next node among the clusters it has
    not served with probability proportional to
    trail ** pheromone_weight * (Q / edge) ** visibility_weight.
    After every iteration all trails evaporate and the iteration-best ant
    deposits Q / energy on its edges, Q being the instance's mean edge cost.
    """

    def __init__(self, config: Optional[AcoConfig] = None):
        self.config = config or AcoConfig()
        self.history: List[float] = []
        self.trail: Optional[np.ndarray] = None

    def _construct(self, model: CostModel, scores: np.ndarray, rng: np.random.Generator) -> List[int]:
        N = model.N
        allowed = np.ones(scores.shape[0], dtype=bool)
        allowed[0] = False
        current, points = 0, []
        for _ in range(model.K):
            weights = np.where(allowed, scores[current], 0.0)
            cumulative = np.cumsum(weights)
            if cumulative[-1] > 0:
                draw = rng.random() * cumulative[-1]
                nxt = int(np.searchsorted(cumulative, draw, side="right"))
                if nxt >= len(weights) or not allowed[nxt]:
                    nxt = int(np.flatnonzero(weights > 0)[-1])
            else:
                # every score underflowed; fall back to the first open node
                nxt = int(np.flatnonzero(allowed)[0])
            points.append(nxt)
            start = 1 + ((nxt - 1) // N) * N
            allowed[start:start + N] = False
            current = nxt
        return points

    def _deposit(self, points: List[int], amount: float):
        route = [0, *points, 0]
        for u, v in zip(route[:-1], route[1:]):
            self.trail[u, v] += amount

    def solve(self, instance: Instance, params: EnergyParams) -> SolveReport:
        cfg = self.config
        started = time.perf_counter()
        model = CostModel(params, instance)
        rng = np.random.default_rng(cfg.rng_seed)

        size = 1 + model.K * model.N
        q = model.mean_edge_cost()
        edges = np.maximum(model.weight_matrix(), TRAIL_FLOOR)
        visibility = (q / edges) ** cfg.visibility_weight
        self.trail = np.full((size, size), INITIAL_TRAIL)
        self.history = []

        best_cost, best_points = np.inf, None
        for iteration in range(cfg.n_iterations):
            scores = self.trail**cfg.pheromone_weight * visibility
            iteration_cost, iteration_points = np.inf, None
            for _ in range(cfg.n_ants):
                points = self._construct(model, scores, rng)
                cost = model.tour_cost(self._as_tour(model, points))
                if cost < iteration_cost:
                    iteration_cost, iteration_points = cost, points

            self.trail *= 1.0 - cfg.evaporation
            self._deposit(iteration_points, q / iteration_cost)
            np.maximum(self.trail, TRAIL_FLOOR, out=self.trail)

            if iteration_cost < best_cost:
                best_cost, best_points = iteration_cost, iteration_points
                logger.debug("aco_improved", iteration=iteration, energy=best_cost)
            self.history.append(best_cost)

        report = build_report(
            "aco",
            params,
            instance,
            self._as_tour(model, best_points),
            iterations=cfg.n_iterations,
            ants=cfg.n_ants,
        )
        logger.info(
            "solver_finished",
            solver="aco",
            K=model.K,
            N=model.N,
            energy=report.energy,
            wall_clock=time.perf_counter() - started,
        )
        return report

    @staticmethod
    def _as_tour(model: CostModel, points: List[int]) -> Tour:
        return Tour.from_pairs(model.visit_of(p) for p in points)


def solve_aco(instance: Instance, params: EnergyParams, config: Optional[AcoConfig] = None) -> SolveReport:
    return AntColony(config).solve(instance, params)
