"""Pytest configuration and fixtures"""
import pytest
import sys
from pathlib import Path

import numpy as np

# Add app directory to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "apps" / "uav_planner"))

from core.config import EnergyParams  # noqa: E402
from core.instances import Instance, derive_seed, generate, save  # noqa: E402
from core.policy import PolicyParams, CriticParams  # noqa: E402


@pytest.fixture
def energy_params():
    """Simulation-table defaults at omega = 0.5"""
    return EnergyParams()


@pytest.fixture
def small_instance():
    """K=3, N=3: small enough for brute force"""
    return generate(3, 3, seed=7)


@pytest.fixture
def table_instance():
    """K=4, N=20 as in the reference experiments"""
    return generate(4, 20, seed=11)


@pytest.fixture
def two_cluster_instance():
    """K=2, N=2 fixture with hand-checkable geometry"""
    nodes = np.array(
        [
            [[190.0, 200.0], [210.0, 200.0]],
            [[790.0, 200.0], [810.0, 200.0]],
        ]
    )
    return Instance.from_arrays(nodes, centers=np.array([[200.0, 200.0], [800.0, 200.0]]))


@pytest.fixture
def tiny_policy():
    """D=8 actor and critic"""
    return PolicyParams.init(8, 3), CriticParams.init(8, 4)


@pytest.fixture
def tmp_corpus(tmp_path):
    """Directory of five K=3, N=4 instance files"""
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(5):
        save(generate(3, 4, seed=derive_seed(5, i)), corpus / f"instance_{i:04d}.yml")
    return corpus
