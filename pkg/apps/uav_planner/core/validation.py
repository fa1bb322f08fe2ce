"""
Constraint Validator
Checks tours against the visiting constraints and instances against their layout invariants
"""
from typing import Any, Dict

import numpy as np
import structlog

from core.errors import ConstraintViolationError, InstanceValidationError
from core.instances import Instance
from core.models import Tour

logger = structlog.get_logger(__name__)


class TourValidator:
    """
    Validates a tour for one instance

    A valid tour leaves the depot, enters every cluster exactly once (in- and
    out-degree one at every hover point), picks an existing node as CH, and
    returns to the depot without a partial loop.
    """

    def __init__(self, instance: Instance):
        self.K = instance.K
        self.N = instance.N

    def check(self, tour: Tour) -> Dict[str, Any]:
        """
        Returns:
            {"valid": bool, "reason": str}
        """
        if len(tour.visits) != self.K:
            return {
                "valid": False,
                "reason": f"Tour has {len(tour.visits)} visits for {self.K} clusters",
            }

        for cluster, node in tour.visits:
            if not 0 <= cluster < self.K:
                return {"valid": False, "reason": f"Cluster index {cluster} out of range"}
            if not 0 <= node < self.N:
                return {"valid": False, "reason": f"Node index {node} out of range in cluster {cluster}"}

        seen = set()
        for cluster in tour.order:
            if cluster in seen:
                return {"valid": False, "reason": f"Cluster {cluster} visited more than once"}
            seen.add(cluster)

        # K distinct clusters in one sequence closed at the depot is a single loop
        return {"valid": True, "reason": "Tour satisfies the visiting constraints"}

    def validate(self, tour: Tour) -> Tour:
        result = self.check(tour)
        if not result["valid"]:
            raise ConstraintViolationError(result["reason"])
        return tour


def validate_tour(instance: Instance, tour: Tour) -> Tour:
    return TourValidator(instance).validate(tour)


def check_instance(instance: Instance) -> Dict[str, Any]:
    """
    Returns:
        {"valid": bool, "reason": str}
    """
    nodes = instance.nodes
    centers = np.array(instance.centers)
    zeta, area = instance.zeta, instance.area_size

    low = centers - zeta
    high = centers + zeta
    if np.any(low <= 0) or np.any(high >= area):
        k = int(np.argmax(np.any(low <= 0, axis=1) | np.any(high >= area, axis=1)))
        return {"valid": False, "reason": f"Cluster {k} box leaves the area (0, {area})"}

    inside = (nodes >= low[:, None, :]) & (nodes <= high[:, None, :])
    if not inside.all():
        k = int(np.argmax(~inside.all(axis=(1, 2))))
        return {"valid": False, "reason": f"Cluster {k} has a node outside its box"}

    for i in range(instance.K):
        for j in range(i + 1, instance.K):
            if np.all(np.abs(centers[i] - centers[j]) <= 2 * zeta):
                return {"valid": False, "reason": f"Clusters {i} and {j} overlap"}

    return {"valid": True, "reason": "Instance satisfies the layout invariants"}


def validate_instance(instance: Instance) -> Instance:
    result = check_instance(instance)
    if not result["valid"]:
        logger.warning("instance_rejected", seed=instance.seed, reason=result["reason"])
        raise InstanceValidationError(result["reason"])
    return instance
