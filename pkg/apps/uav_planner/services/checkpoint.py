"""
Checkpoint Store
Persists actor, critic and optimizer state as a versioned .npz archive
"""
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict

import numpy as np
import structlog

from core.config import settings
from core.errors import StorageError
from core.policy import CriticParams, PolicyParams

logger = structlog.get_logger(__name__)

_SECTIONS = ("policy", "critic", "actor_adam", "critic_adam")


@dataclass
class Checkpoint:
    """
    Everything needed to run or resume a policy

    meta holds the embedding width, the K trained on, the reward scale, the
    last completed step, the training config and held-out exact energies.
    """

    policy: PolicyParams
    critic: CriticParams
    meta: Dict[str, Any]
    actor_adam: Dict[str, np.ndarray] = field(default_factory=dict)
    critic_adam: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def step(self) -> int:
        return int(self.meta.get("step", 0))

    @property
    def reward_scale(self) -> float:
        return float(self.meta["reward_scale"])


class CheckpointStore:
    """Reads and writes checkpoints at one path"""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def exists(self) -> bool:
        return self.path.exists()

    def save(self, checkpoint: Checkpoint):
        arrays: Dict[str, np.ndarray] = {}
        for name, values in (
            ("policy", checkpoint.policy.to_arrays()),
            ("critic", checkpoint.critic.to_arrays()),
            ("actor_adam", checkpoint.actor_adam),
            ("critic_adam", checkpoint.critic_adam),
        ):
            for key, value in values.items():
                arrays[f"{name}/{key}"] = np.asarray(value)
        meta = {**checkpoint.meta, "version": settings.CHECKPOINT_VERSION}
        arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))

        tmp = self.path.with_name(self.path.name + ".tmp")
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(tmp, "wb") as f:
                np.savez(f, **arrays)
            os.replace(tmp, self.path)
        except OSError as e:
            raise StorageError(f"Cannot write checkpoint {self.path}: {e}") from e
        logger.info("checkpoint_saved", path=str(self.path), step=checkpoint.step)

    def load(self) -> Checkpoint:
        try:
            with np.load(self.path, allow_pickle=False) as archive:
                contents = {key: archive[key] for key in archive.files}
        except (OSError, ValueError) as e:
            raise StorageError(f"Cannot read checkpoint {self.path}: {e}") from e

        if "meta" not in contents:
            raise StorageError(f"Checkpoint {self.path} has no metadata record")
        meta = json.loads(str(contents.pop("meta")))
        if meta.get("version") != settings.CHECKPOINT_VERSION:
            raise StorageError(f"Checkpoint {self.path} has unsupported version {meta.get('version')!r}")

        sections: Dict[str, Dict[str, np.ndarray]] = {name: {} for name in _SECTIONS}
        for key, value in contents.items():
            section, _, name = key.partition("/")
            if section in sections:
                sections[section][name] = value
        try:
            policy = PolicyParams.from_arrays(sections["policy"])
            critic = CriticParams.from_arrays(sections["critic"])
        except KeyError as e:
            raise StorageError(f"Checkpoint {self.path} is missing tensor {e}") from e

        logger.info("checkpoint_loaded", path=str(self.path), step=meta.get("step"))
        return Checkpoint(
            policy=policy,
            critic=critic,
            meta=meta,
            actor_adam=sections["actor_adam"],
            critic_adam=sections["critic_adam"],
        )


def load_checkpoint(path: str | Path) -> Checkpoint:
    store = CheckpointStore(path)
    if not store.exists():
        raise StorageError(f"No checkpoint at {path}")
    return store.load()
