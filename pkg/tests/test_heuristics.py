"""
Greedy and ant colony tests
"""
import numpy as np
import pytest

from core.config import AcoConfig, EnergyParams
from core.exact import brute_force, solve_exact
from core.heuristics import TRAIL_FLOOR, AntColony, solve_aco, solve_greedy
from core.instances import generate
from core.validation import TourValidator

FAST_ACO = AcoConfig(n_ants=10, n_iterations=20)


def test_greedy_is_optimal_for_one_cluster(energy_params):
    instance = generate(1, 8, seed=5)
    assert solve_greedy(instance, energy_params).energy == pytest.approx(
        solve_exact(instance, energy_params).energy, rel=1e-9
    )


def test_greedy_returns_valid_tour(energy_params, table_instance):
    report = solve_greedy(table_instance, energy_params)
    assert TourValidator(table_instance).check(report.tour)["valid"]
    assert report.solver == "greedy"


def test_greedy_is_deterministic(energy_params, table_instance):
    assert solve_greedy(table_instance, energy_params).tour == solve_greedy(table_instance, energy_params).tour


def test_greedy_can_be_suboptimal():
    """Nearest-choice construction misses the optimum on some layouts"""
    params = EnergyParams(omega=0.0)
    gaps = 0
    for seed in range(50):
        instance = generate(4, 5, seed=seed)
        greedy = solve_greedy(instance, params).energy
        exact = solve_exact(instance, params).energy
        assert greedy >= exact * (1 - 1e-12)
        gaps += greedy > exact * (1 + 1e-9)
    assert gaps > 0


def test_aco_default_hyperparameters():
    config = AcoConfig()
    assert (config.n_ants, config.n_iterations) == (30, 200)
    assert config.evaporation == 0.1
    assert (config.pheromone_weight, config.visibility_weight) == (1.0, 5.0)


def test_aco_history_is_monotone(energy_params, table_instance):
    colony = AntColony(FAST_ACO)
    report = colony.solve(table_instance, energy_params)

    assert len(colony.history) == FAST_ACO.n_iterations
    assert all(b <= a for a, b in zip(colony.history, colony.history[1:]))
    assert report.energy == pytest.approx(colony.history[-1], rel=1e-9)


def test_aco_trail_stays_above_floor(energy_params, small_instance):
    colony = AntColony(AcoConfig(n_ants=5, n_iterations=50, evaporation=0.9))
    colony.solve(small_instance, energy_params)
    assert colony.trail.min() >= TRAIL_FLOOR
    assert np.all(np.isfinite(colony.trail))


def test_aco_is_seeded(energy_params, table_instance):
    first = solve_aco(table_instance, energy_params, FAST_ACO)
    second = solve_aco(table_instance, energy_params, FAST_ACO)
    assert first.tour == second.tour


def test_aco_never_beats_exact(energy_params):
    for seed in range(5):
        instance = generate(3, 4, seed=seed)
        aco = solve_aco(instance, energy_params, FAST_ACO)
        assert TourValidator(instance).check(aco.tour)["valid"]
        assert aco.energy >= solve_exact(instance, energy_params).energy * (1 - 1e-12)


@pytest.mark.slow
def test_aco_finds_optimum_on_small_instances(energy_params):
    hits = 0
    for seed in range(20):
        instance = generate(3, 3, seed=seed)
        aco = solve_aco(instance, energy_params)
        hits += aco.energy <= brute_force(instance, energy_params).energy * (1 + 1e-9)
    assert hits >= 18
