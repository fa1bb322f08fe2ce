"""
Exact solvers
Subset dynamic program over (visited clusters, last CH) and exhaustive enumeration
"""
import itertools
import math
import time

import numpy as np
import structlog

from core.config import EnergyParams
from core.energy import CostModel, build_report
from core.errors import CapacityError
from core.instances import Instance
from core.models import SolveReport, Tour

logger = structlog.get_logger(__name__)

MAX_EXACT_CLUSTERS = 16
BRUTE_FORCE_BUDGET = 10_000_000

# successor marker for states whose next move is the return to the depot
TO_DEPOT = -1

# relative band within which two energies count as equal
TIE_TOLERANCE = 1e-12


def _first_minimum(totals: np.ndarray) -> np.ndarray:
    """Index of the first entry within TIE_TOLERANCE of each row's minimum"""
    lowest = totals.min(axis=-1, keepdims=True)
    return np.argmax(totals <= lowest + TIE_TOLERANCE * np.abs(lowest), axis=-1)


def solve_exact(instance: Instance, params: EnergyParams) -> SolveReport:
    """
    Globally optimal joint CH selection and visiting order

    togo[mask, j, v] is the cheapest weighted energy of finishing the tour from
    node v of cluster j when the clusters in `mask` (j among them) are already
    served: visit every other cluster once, then return to the depot. Vertex
    costs ride on the entering edge, so the objective is edge-additive and the
    recursion over subsets is exact.

    The tour is rebuilt forward from the depot taking the first minimum at
    every step, which yields the lexicographically smallest optimal sequence
    of (cluster, node) visits.
    """
    K, N = instance.K, instance.N
    if K > MAX_EXACT_CLUSTERS:
        raise CapacityError(f"Exact solver supports K <= {MAX_EXACT_CLUSTERS}, got K={K}")

    started = time.perf_counter()
    model = CostModel(params, instance)
    weights = model.weight_matrix()
    from_depot = weights[0, 1:].reshape(K, N)
    # between[i*N + u, j, v]: node u of cluster i -> node v of cluster j
    between = weights[1:, 1:].reshape(K * N, K, N)
    closing = model.closing_costs()[1:].reshape(K, N)

    n_masks = 1 << K
    full = n_masks - 1
    togo = np.full((n_masks, K, N), np.inf)
    succ = np.full((n_masks, K, N), TO_DEPOT, dtype=np.int32)
    togo[full] = closing
    nodes = np.arange(N)

    for mask in range(full - 1, 0, -1):
        members = np.array([j for j in range(K) if mask >> j & 1])
        outside = np.array([k for k in range(K) if not mask >> k & 1])
        # (O, N) cost-to-go after entering node w of each outside cluster
        after = togo[mask | (1 << outside), outside]
        rows = (members[:, None] * N + nodes[None, :]).reshape(-1)
        # (J*N, O*N) candidates in (cluster, node) order
        totals = (between[rows][:, outside, :] + after[None, :, :]).reshape(len(rows), -1)
        choice = _first_minimum(totals)
        best = totals[np.arange(len(rows)), choice].reshape(len(members), N)
        togo[mask, members] = best
        succ[mask, members] = (outside[choice // N] * N + choice % N).reshape(len(members), N)

    starts = from_depot + togo[1 << np.arange(K), np.arange(K)]
    first = int(_first_minimum(starts.reshape(-1)))

    visits = []
    mask, point = 0, first
    while point != TO_DEPOT:
        cluster, node = divmod(point, N)
        visits.append((cluster, node))
        mask |= 1 << cluster
        point = int(succ[mask, cluster, node])
    tour = Tour(visits=tuple(visits))

    report = build_report("exact", params, instance, tour, states=int(n_masks * K * N))
    logger.info(
        "solver_finished",
        solver="exact",
        K=K,
        N=N,
        energy=report.energy,
        dp_energy=float(starts.reshape(-1)[first]),
        wall_clock=time.perf_counter() - started,
    )
    return report


def brute_force_size(K: int, N: int) -> int:
    return math.factorial(K) * N**K


def brute_force(instance: Instance, params: EnergyParams, budget: int = BRUTE_FORCE_BUDGET) -> SolveReport:
    """
    Enumerate every cluster permutation and every CH assignment

    Permutations are walked in lexicographic order and CH assignments in
    lexicographic order within each. Equal energies resolve to the
    lexicographically smallest sequence of (cluster, node) visits.
    """
    K, N = instance.K, instance.N
    size = brute_force_size(K, N)
    if size > budget:
        raise CapacityError(f"Brute force would enumerate {size} tours, budget is {budget}")

    model = CostModel(params, instance)
    weights = model.weight_matrix()
    closing = model.closing_costs()
    heads = np.array(list(itertools.product(range(N), repeat=K)), dtype=np.int64)

    best_cost, best_tour = np.inf, None
    for order in itertools.permutations(range(K)):
        points = 1 + np.array(order, dtype=np.int64)[None, :] * N + heads
        totals = weights[0, points[:, 0]] + closing[points[:, -1]]
        for step in range(1, K):
            totals = totals + weights[points[:, step - 1], points[:, step]]
        idx = int(_first_minimum(totals))
        cost = float(totals[idx])
        band = TIE_TOLERANCE * abs(min(cost, best_cost))
        if cost > best_cost + band:
            continue
        candidate = Tour.from_pairs(zip(order, heads[idx]))
        if cost < best_cost - band or candidate.visits < best_tour.visits:
            best_cost = min(cost, best_cost)
            best_tour = candidate

    report = build_report("brute_force", params, instance, best_tour, enumerated=size)
    logger.info("solver_finished", solver="brute_force", K=K, N=N, energy=report.energy, enumerated=size)
    return report
