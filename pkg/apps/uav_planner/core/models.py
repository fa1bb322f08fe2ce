"""
Result models
Tours, energy breakdowns and solver reports
"""
from typing import Any, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.errors import ConstraintViolationError

Visit = Tuple[int, int]


class Tour(BaseModel):
    """
    Ordered (cluster index, CH node index) visits

    The depot is implicit at both ends: the UAV leaves b0, visits the hover
    point above each listed CH in order, and returns to b0.
    """

    model_config = ConfigDict(frozen=True)

    visits: Tuple[Visit, ...] = Field(..., description="(cluster, node) pairs in visiting order")

    @property
    def order(self) -> List[int]:
        return [cluster for cluster, _ in self.visits]

    @property
    def heads(self) -> Dict[int, int]:
        """Chosen CH node per cluster"""
        return {cluster: node for cluster, node in self.visits}

    def __len__(self) -> int:
        return len(self.visits)

    def reversed(self) -> "Tour":
        return Tour(visits=tuple(reversed(self.visits)))

    def path(self, instance) -> np.ndarray:
        """Closed polyline depot -> CHs -> depot, shape (K + 2, 2)"""
        points = [instance.depot_xy]
        points.extend(instance.nodes[cluster, node] for cluster, node in self.visits)
        points.append(instance.depot_xy)
        return np.array(points, dtype=np.float64)

    def as_string(self) -> str:
        return ">".join(f"{cluster}:{node}" for cluster, node in self.visits)

    @classmethod
    def parse(cls, text: str) -> "Tour":
        try:
            visits = tuple(
                (int(cluster), int(node))
                for cluster, node in (item.split(":") for item in text.strip().split(">"))
            )
        except ValueError as e:
            raise ConstraintViolationError(f"Malformed tour string '{text}'") from e
        return cls(visits=visits)

    @classmethod
    def from_pairs(cls, pairs) -> "Tour":
        return cls(visits=tuple((int(c), int(n)) for c, n in pairs))


class EnergyBreakdown(BaseModel):
    """Per-term energy of one data-collection round, in joules"""

    model_config = ConfigDict(frozen=True)

    ground_intra: float = Field(..., description="Member transmit + CH receive")
    ground_ch_tx: float = Field(..., description="CH uplink to the UAV")
    uav_flight: float = Field(..., description="All legs including the return to b0")
    uav_collect: float = Field(..., description="Hovering + communication while collecting")
    total_weighted: float

    @property
    def ground(self) -> float:
        return self.ground_intra + self.ground_ch_tx

    @property
    def uav(self) -> float:
        return self.uav_flight + self.uav_collect

    def recompose(self, omega: float) -> float:
        return omega * self.ground + (1.0 - omega) * self.uav

    def recomposes(self, omega: float, rtol: float = 1e-9) -> bool:
        expected = self.recompose(omega)
        return abs(expected - self.total_weighted) <= rtol * max(abs(expected), 1e-300)


class ConfigFingerprint(BaseModel):
    """What a report was computed under"""

    model_config = ConfigDict(frozen=True)

    seed: int
    omega: float
    params_hash: str


class SolveReport(BaseModel):
    """Output of one solver run on one instance"""

    model_config = ConfigDict(frozen=True)

    solver: str
    tour: Tour
    breakdown: EnergyBreakdown
    wall_clock: float = Field(default=0.0, ge=0, description="Seconds spent inside the solver")
    fingerprint: ConfigFingerprint
    instance_name: str = ""
    extras: Dict[str, Any] = Field(default_factory=dict)

    @property
    def energy(self) -> float:
        return self.breakdown.total_weighted

    def with_timing(self, wall_clock: float, instance_name: str = "") -> "SolveReport":
        return self.model_copy(
            update={"wall_clock": wall_clock, "instance_name": instance_name or self.instance_name}
        )
