"""
Sequence policy
Cluster embedding, LSTM decoder with two-stage attention, logit clipping and
masking, cost-based CH selection, and the critic network
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from core.config import EnergyParams
from core.energy import CostModel
from core.errors import ContractError, DimensionError
from core.instances import Instance
from core.models import Tour
from core.numerics import Tensor, log_softmax, matmul, no_grad, softmax

FEATURE_DIM = 4
LOGIT_CLIP = 10.0

SAMPLE = "sample"
GREEDY = "greedy"


class ParameterBlock:
    """Named learnable tensors with a fixed iteration order"""

    NAMES: Tuple[str, ...] = ()

    def __init__(self, tensors: Dict[str, Tensor]):
        missing = set(self.NAMES) - set(tensors)
        if missing:
            raise ContractError(f"{type(self).__name__} is missing {sorted(missing)}")
        self.tensors = {name: tensors[name] for name in self.NAMES}

    def __getattr__(self, name: str) -> Tensor:
        tensors = self.__dict__.get("tensors", {})
        if name in tensors:
            return tensors[name]
        raise AttributeError(name)

    def parameters(self) -> List[Tensor]:
        return [self.tensors[name] for name in self.NAMES]

    @property
    def dim(self) -> int:
        return self.parameters()[0].shape[0]

    def to_arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.tensors.items()}

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], requires_grad: bool = True):
        return cls({name: Tensor(arrays[name], requires_grad=requires_grad) for name in cls.NAMES})

    @classmethod
    def shapes(cls, dim: int) -> Dict[str, Tuple[int, ...]]:
        raise NotImplementedError

    @classmethod
    def init(cls, dim: int, rng: Union[int, np.random.Generator] = 0):
        """Uniform in [-1/sqrt(D), 1/sqrt(D)]"""
        if dim < 1:
            raise ContractError(f"embedding width must be positive, got {dim}")
        rng = np.random.default_rng(rng)
        bound = 1.0 / np.sqrt(dim)
        return cls.from_arrays({name: rng.uniform(-bound, bound, size=shape) for name, shape in cls.shapes(dim).items()})

    def check_finite(self):
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t.data)):
                raise ContractError(f"{type(self).__name__}.{name} holds non-finite values")


class PolicyParams(ParameterBlock):
    """Actor weights: embedding W_b, one LSTM cell, glimpse (phi_a, W1, W2) and pointer (phi_g, W3, W4)"""

    NAMES = ("W_b", "lstm_wx", "lstm_wh", "lstm_b", "phi_a", "W1", "W2", "phi_g", "W3", "W4")

    @classmethod
    def shapes(cls, dim: int) -> Dict[str, Tuple[int, ...]]:
        return {
            "W_b": (dim, FEATURE_DIM),
            "lstm_wx": (4 * dim, dim),
            "lstm_wh": (4 * dim, dim),
            "lstm_b": (1, 4 * dim),
            "phi_a": (1, dim),
            "W1": (dim, dim),
            "W2": (dim, dim),
            "phi_g": (1, dim),
            "W3": (dim, dim),
            "W4": (dim, dim),
        }


class CriticParams(ParameterBlock):
    """Two dense layers: fc1 (D x D) with ReLU, then fc2 to a single value"""

    NAMES = ("fc1_w", "fc1_b", "fc2_w", "fc2_b")

    @classmethod
    def shapes(cls, dim: int) -> Dict[str, Tuple[int, ...]]:
        return {"fc1_w": (dim, dim), "fc1_b": (1, dim), "fc2_w": (1, dim), "fc2_b": (1, 1)}


# Encoder

def features(instance: Instance) -> np.ndarray:
    """
    Permutation-invariant inputs, shape (K + 1, 4)

    Row 0 is the depot (x, y, 0, 0); row k is cluster k's centroid and the
    mean absolute deviation of its nodes per axis, all divided by the area size.
    """
    nodes = instance.nodes
    centroid = nodes.mean(axis=1)
    spread = np.abs(nodes - centroid[:, None, :]).mean(axis=1)
    depot = np.concatenate([instance.depot_xy, [0.0, 0.0]])
    return np.vstack([depot[None, :], np.hstack([centroid, spread])]) / instance.area_size


def embed(instance: Instance, policy: PolicyParams) -> Tensor:
    """e_k = W_b . feature(k) for the depot and every cluster, shape (K + 1, D)"""
    return matmul(Tensor(features(instance)), policy.W_b.T)


# Decoder

@dataclass
class DecoderState:
    """LSTM memory, mask over the K + 1 elements, and the last emitted element"""

    hidden: Tensor
    cell: Tensor
    mask: np.ndarray
    step: int = 0
    last: int = 0

    @classmethod
    def initial(cls, n_elements: int, dim: int) -> "DecoderState":
        # depot is emitted at t = 0 and never again
        mask = np.zeros(n_elements)
        mask[0] = -np.inf
        return cls(hidden=Tensor(np.zeros((1, dim))), cell=Tensor(np.zeros((1, dim))), mask=mask, step=1, last=0)

    @property
    def finished(self) -> bool:
        return bool(np.all(np.isneginf(self.mask)))

    def select(self, element: int) -> "DecoderState":
        if np.isneginf(self.mask[element]):
            raise ContractError(f"element {element} is already masked")
        mask = self.mask.copy()
        mask[element] = -np.inf
        return DecoderState(self.hidden, self.cell, mask, self.step + 1, element)


@dataclass
class StepOutput:
    probabilities: np.ndarray
    log_probs: Tensor
    attention: np.ndarray
    logits: np.ndarray


def _ones(rows: int) -> Tensor:
    return Tensor(np.ones((rows, 1)))


def lstm_cell(policy: PolicyParams, x: Tensor, hidden: Tensor, cell: Tensor) -> Tuple[Tensor, Tensor]:
    """Gate order: input, forget, candidate, output"""
    dim = hidden.shape[1]
    gates = matmul(x, policy.lstm_wx.T) + matmul(hidden, policy.lstm_wh.T) + policy.lstm_b
    i = gates[:, 0:dim].sigmoid()
    f = gates[:, dim:2 * dim].sigmoid()
    g = gates[:, 2 * dim:3 * dim].tanh()
    o = gates[:, 3 * dim:4 * dim].sigmoid()
    cell = f * cell + i * g
    return o * cell.tanh(), cell


def attention_weights(policy: PolicyParams, embeddings: Tensor, hidden: Tensor) -> Tensor:
    """a_t = softmax(phi_a . tanh(W1 e_k + W2 h_t)), shape (K + 1,)"""
    n = embeddings.shape[0]
    scores = (matmul(embeddings, policy.W1.T) + matmul(_ones(n), matmul(hidden, policy.W2.T))).tanh()
    return softmax(matmul(scores, policy.phi_a.T).reshape(n))


def pointer_logits(policy: PolicyParams, embeddings: Tensor, context: Tensor) -> Tensor:
    """Clipped logits C_L * tanh(phi_g . tanh(W3 e_k + W4 g_t)), shape (K + 1,)"""
    n = embeddings.shape[0]
    scores = (matmul(embeddings, policy.W3.T) + matmul(_ones(n), matmul(context, policy.W4.T))).tanh()
    return LOGIT_CLIP * matmul(scores, policy.phi_g.T).reshape(n).tanh()


def decode_step(policy: PolicyParams, state: DecoderState, embeddings: Tensor) -> Tuple[StepOutput, DecoderState]:
    """
    Advance the LSTM with the last emitted element and score the next one

    The returned state carries the new memory but not yet the choice; call
    `select` on it once an element is picked.
    """
    n, dim = embeddings.shape
    if state.mask.shape != (n,):
        raise DimensionError(f"mask of shape {state.mask.shape} for {n} elements")
    if state.hidden.shape != (1, dim):
        raise DimensionError(f"hidden state {state.hidden.shape} for width {dim}")

    x = embeddings[state.last:state.last + 1]
    hidden, cell = lstm_cell(policy, x, state.hidden, state.cell)

    a = attention_weights(policy, embeddings, hidden)
    context = matmul(a.reshape(1, n), embeddings)
    clipped = pointer_logits(policy, embeddings, context)
    log_probs = log_softmax(clipped + Tensor(state.mask))

    output = StepOutput(
        probabilities=np.exp(log_probs.data),
        log_probs=log_probs,
        attention=a.data.copy(),
        logits=clipped.data.copy(),
    )
    return output, DecoderState(hidden, cell, state.mask, state.step, state.last)


def select_cluster_head(model: CostModel, previous_point: int, cluster: int) -> int:
    """
    Node of `cluster` minimizing omega * ground + (1 - omega) * (leg + collection)
    from the hover point `previous_point` (0 for the depot); lowest index on ties
    """
    return int(model.cluster_edges(previous_point, cluster).argmin())


def sample_index(probabilities: np.ndarray, rng: np.random.Generator) -> int:
    cumulative = np.cumsum(probabilities)
    idx = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    if idx >= len(probabilities) or probabilities[idx] == 0.0:
        idx = int(np.flatnonzero(probabilities > 0)[-1])
    return idx


@dataclass
class Rollout:
    """A decoded tour with its log-likelihood and reward (negative joules)"""

    tour: Tour
    log_prob: Tensor
    reward: float
    embeddings: Tensor
    first_attention: np.ndarray
    steps: List[StepOutput] = field(default_factory=list)

    @property
    def energy(self) -> float:
        return -self.reward


def rollout(
    instance: Instance,
    policy: PolicyParams,
    params: EnergyParams,
    mode: str = GREEDY,
    seed: Union[int, np.random.Generator, None] = None,
    model: Optional[CostModel] = None,
) -> Rollout:
    """
    Decode one tour: depot first, then K clusters, each with its CH chosen on arrival

    In `sample` mode elements are drawn from the step distribution with a
    PCG64 stream from `seed`; in `greedy` mode the modal element is taken.
    """
    if mode not in (SAMPLE, GREEDY):
        raise ContractError(f"Unknown decoding mode '{mode}'")
    rng = np.random.default_rng(seed) if mode == SAMPLE else None
    model = model or CostModel(params, instance)

    embeddings = embed(instance, policy)
    state = DecoderState.initial(instance.K + 1, embeddings.shape[1])
    log_prob: Optional[Tensor] = None
    visits = []
    steps: List[StepOutput] = []
    point = 0

    while not state.finished:
        output, state = decode_step(policy, state, embeddings)
        if mode == SAMPLE:
            element = sample_index(output.probabilities, rng)
        else:
            element = int(output.probabilities.argmax())
        term = output.log_probs[element]
        log_prob = term if log_prob is None else log_prob + term
        steps.append(output)
        state = state.select(element)

        cluster = element - 1
        node = select_cluster_head(model, point, cluster)
        visits.append((cluster, node))
        point = model.point_index(cluster, node)

    tour = Tour(visits=tuple(visits))
    return Rollout(
        tour=tour,
        log_prob=log_prob,
        reward=-model.tour_cost(tour),
        embeddings=embeddings,
        first_attention=steps[0].attention,
        steps=steps,
    )


def greedy_tour(instance: Instance, policy: PolicyParams, params: EnergyParams) -> Tour:
    with no_grad():
        return rollout(instance, policy, params, GREEDY).tour


# Critic

def critic_forward(critic: CriticParams, context: Tensor) -> Tensor:
    hidden = (matmul(context, critic.fc1_w.T) + critic.fc1_b).relu()
    return matmul(hidden, critic.fc2_w.T) + critic.fc2_b


def attention_context(first_attention: np.ndarray, embeddings: Tensor) -> Tensor:
    """Constant weighted sum of embeddings; carries no gradient to the actor"""
    weights = Tensor(np.asarray(first_attention).reshape(1, -1))
    return matmul(weights, embeddings.detach())


def first_step_attention(instance: Instance, policy: PolicyParams) -> Tuple[np.ndarray, Tensor]:
    with no_grad():
        embeddings = embed(instance, policy)
        state = DecoderState.initial(instance.K + 1, embeddings.shape[1])
        output, _ = decode_step(policy, state, embeddings)
    return output.attention, embeddings


def critic_value(instance: Instance, policy: PolicyParams, critic: CriticParams) -> Tensor:
    """V(C) in normalized reward units, shape (1, 1)"""
    attention, embeddings = first_step_attention(instance, policy)
    return critic_forward(critic, attention_context(attention, embeddings))
