"""
Problem instances
Seeded generation, YAML persistence and validation of clustered node layouts
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import structlog
import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from core.config import settings
from core.errors import ConfigError, GenerationError, InstanceFormatError, StorageError

logger = structlog.get_logger(__name__)

Point = Tuple[float, float]

DEFAULT_DEPOT: Point = (500.0, 0.0)
DEFAULT_ZETA = 100.0
DEFAULT_AREA = 1000.0
MAX_PLACEMENT_ATTEMPTS = 10_000


class Instance(BaseModel):
    """
    Depot b0 plus K clusters of N ground nodes, coordinates in meters

    Cluster k's nodes lie in the box centers[k] +/- zeta; boxes are pairwise
    disjoint and inside (0, area_size)^2.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    depot: Point = DEFAULT_DEPOT
    centers: Tuple[Point, ...]
    clusters: Tuple[Tuple[Point, ...], ...]
    zeta: float = Field(default=DEFAULT_ZETA, gt=0)
    seed: int = Field(default=0, ge=0)
    area_size: float = Field(default=DEFAULT_AREA, gt=0)

    _nodes: np.ndarray = PrivateAttr(default=None)
    _depot_xy: np.ndarray = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_shape(self) -> "Instance":
        if not self.clusters:
            raise ValueError("an instance needs at least one cluster")
        if len(self.centers) != len(self.clusters):
            raise ValueError(f"{len(self.centers)} centers for {len(self.clusters)} clusters")
        sizes = {len(cluster) for cluster in self.clusters}
        if len(sizes) != 1:
            raise ValueError(f"clusters must all have the same size, got {sorted(sizes)}")
        if sizes.pop() < 2:
            raise ValueError("clusters need at least two nodes")
        return self

    def model_post_init(self, __context: Any) -> None:
        self._nodes = np.array(self.clusters, dtype=np.float64)
        self._nodes.setflags(write=False)
        self._depot_xy = np.array(self.depot, dtype=np.float64)
        self._depot_xy.setflags(write=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self.model_dump() == other.model_dump()

    def __hash__(self) -> int:
        return hash((self.depot, self.centers, self.clusters, self.zeta, self.seed, self.area_size))

    @property
    def K(self) -> int:
        return len(self.clusters)

    @property
    def N(self) -> int:
        return len(self.clusters[0])

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (K, N, 2)"""
        return self._nodes

    @property
    def depot_xy(self) -> np.ndarray:
        return self._depot_xy

    @classmethod
    def from_arrays(
        cls,
        nodes: np.ndarray,
        centers: Optional[np.ndarray] = None,
        depot: Point = DEFAULT_DEPOT,
        zeta: float = DEFAULT_ZETA,
        seed: int = 0,
        area_size: float = DEFAULT_AREA,
    ) -> "Instance":
        nodes = np.asarray(nodes, dtype=np.float64)
        if centers is None:
            centers = (nodes.min(axis=1) + nodes.max(axis=1)) / 2.0
        return cls(
            depot=(float(depot[0]), float(depot[1])),
            centers=tuple((float(x), float(y)) for x, y in np.asarray(centers)),
            clusters=tuple(tuple((float(x), float(y)) for x, y in cluster) for cluster in nodes),
            zeta=zeta,
            seed=seed,
            area_size=area_size,
        )

    def with_nodes(self, nodes: np.ndarray) -> "Instance":
        """Same instance with a different node set (same centers and box size)"""
        return Instance.from_arrays(
            nodes,
            centers=np.array(self.centers),
            depot=self.depot,
            zeta=self.zeta,
            seed=self.seed,
            area_size=self.area_size,
        )


def _box_inside(center: np.ndarray, zeta: float, area_size: float) -> bool:
    return bool(np.all(center - zeta > 0) and np.all(center + zeta < area_size))


def _boxes_overlap(a: np.ndarray, b: np.ndarray, zeta: float) -> bool:
    return bool(np.all(np.abs(a - b) <= 2 * zeta))


def generate(
    K: int,
    N: int,
    zeta: float = DEFAULT_ZETA,
    seed: int = 0,
    area_size: float = DEFAULT_AREA,
    depot: Point = DEFAULT_DEPOT,
    max_attempts: int = MAX_PLACEMENT_ATTEMPTS,
) -> Instance:
    """
    Sample an instance with a PCG64 stream seeded by `seed`

    Centers are drawn uniformly over the area and redrawn until their box is
    inside the area and disjoint from every accepted box; nodes are then drawn
    uniformly inside each box.
    """
    if K < 1 or N < 2 or zeta <= 0:
        raise GenerationError(f"Invalid generation request K={K}, N={N}, zeta={zeta}")
    if seed < 0:
        raise ConfigError(f"Seed must be non-negative, got {seed}")

    rng = np.random.default_rng(seed)
    centers: List[np.ndarray] = []
    attempts = 0
    while len(centers) < K:
        if attempts >= max_attempts:
            raise GenerationError(
                f"Could not place {K} disjoint clusters of half-width {zeta} m "
                f"in {area_size} m after {max_attempts} draws"
            )
        attempts += 1
        candidate = rng.uniform(0.0, area_size, size=2)
        if not _box_inside(candidate, zeta, area_size):
            continue
        if any(_boxes_overlap(candidate, c, zeta) for c in centers):
            continue
        centers.append(candidate)

    nodes = np.stack([rng.uniform(c - zeta, c + zeta, size=(N, 2)) for c in centers])
    instance = Instance.from_arrays(
        nodes, centers=np.stack(centers), depot=depot, zeta=zeta, seed=seed, area_size=area_size
    )
    logger.debug("instance_generated", K=K, N=N, seed=seed, attempts=attempts)
    return instance


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit seed for a sub-stream identified by integer parts"""
    if any(part < 0 for part in parts):
        raise ConfigError(f"Seeds must be non-negative, got {parts}")
    state = np.random.SeedSequence(list(parts)).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)


def generate_corpus(count: int, K: int, N: int, zeta: float = DEFAULT_ZETA, seed: int = 0, area_size: float = DEFAULT_AREA) -> List[Instance]:
    return [generate(K, N, zeta, derive_seed(seed, i), area_size) for i in range(count)]


def to_document(instance: Instance) -> Dict[str, Any]:
    return {
        "version": settings.INSTANCE_SCHEMA_VERSION,
        "seed": instance.seed,
        "K": instance.K,
        "N": instance.N,
        "zeta": instance.zeta,
        "area_size": instance.area_size,
        "depot": list(instance.depot),
        "centers": [list(c) for c in instance.centers],
        "clusters": [[list(p) for p in cluster] for cluster in instance.clusters],
    }


def save(instance: Instance, path: str | Path) -> None:
    """Write the instance as YAML (floats round-trip exactly)"""
    try:
        with open(path, "w") as f:
            yaml.safe_dump(to_document(instance), f, sort_keys=False, default_flow_style=None, width=120)
    except OSError as e:
        raise StorageError(f"Cannot write instance {path}: {e}") from e


def _key_line(text: str, key: str) -> Optional[int]:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return None
    if isinstance(root, yaml.MappingNode):
        for key_node, _ in root.value:
            if key_node.value == key:
                return key_node.start_mark.line + 1
    return None


def _parse_document(text: str, path: str) -> Instance:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise InstanceFormatError(path, f"malformed YAML ({getattr(e, 'problem', e)})", line=line) from e

    if not isinstance(doc, dict):
        raise InstanceFormatError(path, "expected a mapping at top level", line=1)

    version = doc.pop("version", None)
    if version != settings.INSTANCE_SCHEMA_VERSION:
        raise InstanceFormatError(path, f"unsupported schema version {version!r}", field="version")
    declared_k = doc.pop("K", None)
    declared_n = doc.pop("N", None)

    try:
        instance = Instance(**doc)
    except ValidationError as e:
        err = e.errors()[0]
        loc = [str(part) for part in err.get("loc", ())]
        field = ".".join(loc) if loc else None
        line = _key_line(text, loc[0]) if loc else None
        raise InstanceFormatError(path, err.get("msg", "invalid value"), line=line, field=field) from e

    if declared_k != instance.K:
        raise InstanceFormatError(path, f"K={declared_k} but {instance.K} clusters listed", line=_key_line(text, "K"), field="K")
    if declared_n != instance.N:
        raise InstanceFormatError(path, f"N={declared_n} but clusters hold {instance.N} nodes", line=_key_line(text, "N"), field="N")
    return instance


def load(path: str | Path) -> Instance:
    """Read and validate an instance file"""
    from core.validation import validate_instance

    try:
        text = Path(path).read_text()
    except OSError as e:
        raise StorageError(f"Cannot read instance {path}: {e}") from e
    instance = _parse_document(text, str(path))
    validate_instance(instance)
    return instance


def list_instance_files(location: str | Path) -> List[Path]:
    """Instance files in a directory (sorted), or the single given file"""
    location = Path(location)
    if location.is_dir():
        return sorted(p for p in location.iterdir() if p.suffix in (".yml", ".yaml"))
    if location.exists():
        return [location]
    raise StorageError(f"No instance file or directory at {location}")
