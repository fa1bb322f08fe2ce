"""
Policy training
REINFORCE with a learned critic baseline over a seeded stream of generated instances
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog

from core.config import EnergyParams, TrainConfig, settings
from core.energy import CostModel
from core.errors import ContractError, StorageError, TrainingDivergenceError
from core.exact import solve_exact
from core.heuristics import solve_greedy
from core.instances import Instance, derive_seed, generate
from core.numerics import AdamState, Tensor, adam_step, backward, clip_grad_norm
from core.policy import (
    SAMPLE,
    CriticParams,
    PolicyParams,
    attention_context,
    critic_forward,
    greedy_tour,
    rollout,
)
from services.checkpoint import Checkpoint, CheckpointStore
from services.reports import TrainingLog

logger = structlog.get_logger(__name__)

# sub-stream identifiers mixed into derive_seed
INIT_STREAM = 2**31 - 1
EVAL_STREAM = 2**31
SAMPLE_STREAM = 1


@dataclass(frozen=True)
class RolloutJob:
    instance: Instance
    seed: int


@dataclass
class BatchGradients:
    """Summed per-instance gradients of a slice of the batch"""

    actor: List[np.ndarray]
    critic: List[np.ndarray]
    rewards: List[float] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    critic_loss: float = 0.0

    def merge(self, other: "BatchGradients") -> "BatchGradients":
        return BatchGradients(
            actor=[a + b for a, b in zip(self.actor, other.actor)],
            critic=[a + b for a, b in zip(self.critic, other.critic)],
            rewards=self.rewards + other.rewards,
            energies=self.energies + other.energies,
            values=self.values + other.values,
            critic_loss=self.critic_loss + other.critic_loss,
        )


@dataclass
class StepStats:
    step: int
    mean_reward: float
    mean_energy: float
    grad_norm: float
    critic_loss: float

    def as_row(self, eval_ratio: Optional[float] = None) -> Dict[str, object]:
        return {
            "step": self.step,
            "mean_reward": self.mean_reward,
            "mean_energy": self.mean_energy,
            "grad_norm": self.grad_norm,
            "critic_loss": self.critic_loss,
            "eval_ratio": eval_ratio,
        }


def batch_gradients(
    snapshot: Dict[str, Dict[str, np.ndarray]],
    jobs: Sequence[RolloutJob],
    params: EnergyParams,
    reward_scale: float,
    batch_size: int,
) -> BatchGradients:
    """
    Gradients of the actor and critic losses over `jobs`, from a parameter snapshot

    actor loss  = -(1/B) sum (R_i - V_i) log p(Y_i | C_i)
    critic loss =  (1/B) sum (V_i - R_i)^2
    Pure in its arguments, so slices of a batch can run in separate processes.
    """
    policy = PolicyParams.from_arrays(snapshot["policy"])
    critic = CriticParams.from_arrays(snapshot["critic"])
    result = BatchGradients(
        actor=[np.zeros_like(p.data) for p in policy.parameters()],
        critic=[np.zeros_like(p.data) for p in critic.parameters()],
    )

    for job in jobs:
        sampled = rollout(job.instance, policy, params, SAMPLE, seed=job.seed)
        reward = sampled.reward / reward_scale
        value = critic_forward(critic, attention_context(sampled.first_attention, sampled.embeddings))
        advantage = reward - value.item()

        backward((-advantage / batch_size) * sampled.log_prob)
        diff = value - Tensor([[reward]])
        critic_loss = (1.0 / batch_size) * (diff * diff).sum()
        backward(critic_loss)

        result.rewards.append(reward)
        result.energies.append(sampled.energy)
        result.values.append(value.item())
        result.critic_loss += critic_loss.item()

    result.actor = [p.grad.copy() for p in policy.parameters()]
    result.critic = [p.grad.copy() for p in critic.parameters()]
    return result


def _batch_worker(args) -> BatchGradients:
    return batch_gradients(*args)


def _split(jobs: Sequence[RolloutJob], parts: int) -> List[List[RolloutJob]]:
    chunks = np.array_split(np.arange(len(jobs)), parts)
    return [[jobs[i] for i in chunk] for chunk in chunks if len(chunk)]


def collect_gradients(
    policy: PolicyParams,
    critic: CriticParams,
    jobs: Sequence[RolloutJob],
    params: EnergyParams,
    reward_scale: float,
    workers: int = 1,
) -> BatchGradients:
    """Run batch_gradients inline or across a process pool, merging slices in order"""
    snapshot = {"policy": policy.to_arrays(), "critic": critic.to_arrays()}
    batch_size = len(jobs)
    if workers <= 1 or batch_size < 2:
        return batch_gradients(snapshot, jobs, params, reward_scale, batch_size)

    chunks = _split(jobs, min(workers, batch_size))
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(_batch_worker, [(snapshot, c, params, reward_scale, batch_size) for c in chunks]))
    merged = parts[0]
    for part in parts[1:]:
        merged = merged.merge(part)
    return merged


def reinforce_step(
    jobs: Sequence[RolloutJob],
    policy: PolicyParams,
    critic: CriticParams,
    actor_adam: AdamState,
    critic_adam: AdamState,
    params: EnergyParams,
    reward_scale: float,
    grad_clip: float = 2.0,
    workers: int = 1,
    step: int = 0,
) -> StepStats:
    """One actor and one critic Adam update from a freshly sampled batch"""
    if not jobs:
        raise ContractError("reinforce_step needs at least one instance")

    grads = collect_gradients(policy, critic, jobs, params, reward_scale, workers)
    if not np.isfinite(grads.critic_loss) or not np.all(np.isfinite(grads.rewards)):
        raise TrainingDivergenceError(f"Non-finite loss at step {step}")

    for tensor, grad in zip(policy.parameters(), grads.actor):
        tensor.grad[...] = grad
    for tensor, grad in zip(critic.parameters(), grads.critic):
        tensor.grad[...] = grad

    if not all(np.all(np.isfinite(g)) for g in grads.actor + grads.critic):
        raise TrainingDivergenceError(f"Non-finite gradient at step {step}")
    grad_norm = clip_grad_norm(policy, grad_clip)
    clip_grad_norm(critic, grad_clip)
    adam_step(policy, actor_adam)
    adam_step(critic, critic_adam)

    return StepStats(
        step=step,
        mean_reward=float(np.mean(grads.rewards)),
        mean_energy=float(np.mean(grads.energies)),
        grad_norm=grad_norm,
        critic_loss=grads.critic_loss,
    )


# Data streams

def training_batch(config: TrainConfig, step: int) -> List[RolloutJob]:
    """Batch for `step`, a pure function of (seed, step, index)"""
    return [
        RolloutJob(
            instance=generate(config.K, config.N, config.zeta, derive_seed(config.seed, step, i), config.area_size),
            seed=derive_seed(config.seed, step, i, SAMPLE_STREAM),
        )
        for i in range(config.batch_size)
    ]


def held_out_instances(config: TrainConfig, K: Optional[int] = None) -> List[Instance]:
    """Evaluation set drawn from a stream the training batches never touch"""
    K = K or config.K
    return [
        generate(K, config.N, config.zeta, derive_seed(config.seed, EVAL_STREAM, K, i), config.area_size)
        for i in range(config.eval_size)
    ]


def reward_scale(instances: Sequence[Instance], params: EnergyParams) -> float:
    """Mean greedy-solver energy over `instances`"""
    return float(np.mean([solve_greedy(instance, params).energy for instance in instances]))


def evaluation_ratio(
    policy: PolicyParams, instances: Sequence[Instance], exact_energies: Sequence[float], params: EnergyParams
) -> float:
    """Mean greedy-decoded energy over exact energy"""
    ratios = []
    for instance, optimum in zip(instances, exact_energies):
        tour = greedy_tour(instance, policy, params)
        ratios.append(CostModel(params, instance).tour_cost(tour) / optimum)
    return float(np.mean(ratios))


# Driver

@dataclass
class TrainResult:
    checkpoint_path: Path
    policy: PolicyParams
    critic: CriticParams
    history: List[StepStats]
    eval_ratios: Dict[int, float]
    reward_scale: float


class Trainer:
    """Owns the training state between steps and its persistence"""

    def __init__(self, config: TrainConfig, params: EnergyParams, workers: Optional[int] = None):
        self.config = config
        self.params = params
        self.workers = workers or settings.WORKERS
        self.store = CheckpointStore(config.checkpoint_path)
        self.log = TrainingLog(config.log_path)

        self.policy: Optional[PolicyParams] = None
        self.critic: Optional[CriticParams] = None
        self.actor_adam: Optional[AdamState] = None
        self.critic_adam: Optional[AdamState] = None
        self.step = 0
        self.reward_scale = 1.0
        self.eval_instances = held_out_instances(config)
        self.eval_exact: List[float] = []
        self.eval_ratios: Dict[int, float] = {}

    def initialize(self):
        cfg = self.config
        self.policy = PolicyParams.init(cfg.embed_dim, derive_seed(cfg.seed, INIT_STREAM, 0))
        self.critic = CriticParams.init(cfg.embed_dim, derive_seed(cfg.seed, INIT_STREAM, 1))
        self._new_optimizers()
        self.step = 0
        self.reward_scale = reward_scale([job.instance for job in training_batch(cfg, 1)], self.params)
        self.eval_exact = [solve_exact(instance, self.params).energy for instance in self.eval_instances]
        self.log.start()
        logger.info("training_initialized", reward_scale=self.reward_scale, eval_size=len(self.eval_instances))

    def _new_optimizers(self):
        self.actor_adam = AdamState(self.policy, self.config.actor_lr)
        self.critic_adam = AdamState(self.critic, self.config.critic_lr)

    def resume(self):
        checkpoint = self.store.load()
        meta = checkpoint.meta
        if meta.get("embed_dim") != self.config.embed_dim or meta.get("K") != self.config.K:
            raise StorageError(
                f"Checkpoint {self.store.path} was trained with D={meta.get('embed_dim')}, K={meta.get('K')}"
            )
        self.policy, self.critic = checkpoint.policy, checkpoint.critic
        self._new_optimizers()
        if checkpoint.actor_adam:
            self.actor_adam.load_arrays(checkpoint.actor_adam)
            self.critic_adam.load_arrays(checkpoint.critic_adam)
        self.step = checkpoint.step
        self.reward_scale = checkpoint.reward_scale
        self.eval_exact = list(meta["eval_exact"])
        self.eval_ratios = {int(k): v for k, v in meta.get("eval_ratios", {}).items()}
        self.log.truncate_after(self.step)
        logger.info("training_resumed", step=self.step, path=str(self.store.path))

    def checkpoint(self):
        meta = {
            "embed_dim": self.config.embed_dim,
            "K": self.config.K,
            "N": self.config.N,
            "step": self.step,
            "reward_scale": self.reward_scale,
            "eval_exact": self.eval_exact,
            "eval_ratios": {str(k): v for k, v in self.eval_ratios.items()},
            "train_config": self.config.model_dump(),
            "params_hash": self.params.fingerprint(),
            "omega": self.params.omega,
        }
        self.store.save(
            Checkpoint(
                policy=self.policy,
                critic=self.critic,
                meta=meta,
                actor_adam=self.actor_adam.state_arrays(),
                critic_adam=self.critic_adam.state_arrays(),
            )
        )

    def evaluate(self) -> float:
        ratio = evaluation_ratio(self.policy, self.eval_instances, self.eval_exact, self.params)
        self.eval_ratios[self.step] = ratio
        logger.info("evaluation", step=self.step, eval_ratio=ratio)
        return ratio

    def run(self) -> List[StepStats]:
        cfg = self.config
        history: List[StepStats] = []
        if self.step == 0 and 0 not in self.eval_ratios:
            self.log.append({"step": 0, "eval_ratio": self.evaluate()})

        while self.step < cfg.n_steps:
            step = self.step + 1
            try:
                stats = reinforce_step(
                    training_batch(cfg, step),
                    self.policy,
                    self.critic,
                    self.actor_adam,
                    self.critic_adam,
                    self.params,
                    self.reward_scale,
                    cfg.grad_clip,
                    self.workers,
                    step,
                )
            except TrainingDivergenceError:
                logger.error("training_diverged", step=step, exc_info=True)
                self.checkpoint()
                raise
            self.step = step
            history.append(stats)

            ratio = None
            if step % cfg.eval_every == 0 or step == cfg.n_steps:
                ratio = self.evaluate()
            self.log.append(stats.as_row(ratio))
            logger.info(
                "training_step",
                step=step,
                mean_reward=stats.mean_reward,
                grad_norm=stats.grad_norm,
                critic_loss=stats.critic_loss,
            )
            if ratio is not None:
                self.checkpoint()

        self.checkpoint()
        return history


def train(
    config: TrainConfig, params: EnergyParams, resume: bool = False, workers: Optional[int] = None
) -> TrainResult:
    """Run (or continue) training and return the final checkpoint location"""
    trainer = Trainer(config, params, workers)
    if resume and trainer.store.exists():
        trainer.resume()
    else:
        trainer.initialize()
    history = trainer.run()
    return TrainResult(
        checkpoint_path=trainer.store.path,
        policy=trainer.policy,
        critic=trainer.critic,
        history=history,
        eval_ratios=dict(trainer.eval_ratios),
        reward_scale=trainer.reward_scale,
    )
