"""
Dense tensors with reverse-mode differentiation
Float64 numpy arrays, a dynamic tape rebuilt per rollout, and Adam
"""
import contextlib
from typing import Callable, Dict, Iterable, Iterator, List, Protocol, Sequence, Tuple, Union

import numpy as np

from core.errors import AllMaskedError, ConfigError, ContractError, DimensionError, TrainingDivergenceError

_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording them on the tape"""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    """
    Float64 array node of the computation graph

    Leaf tensors created with requires_grad=True own a grad buffer of the same
    shape; backward() accumulates into it until zero_grad() is called.
    """

    __slots__ = ("data", "requires_grad", "grad", "_ctx")

    def __init__(self, data, requires_grad: bool = False, _ctx: "Function | None" = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self._ctx = _ctx
        self.grad = np.zeros_like(self.data) if requires_grad and _ctx is None else None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return Transpose.apply(self)

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self):
        backward(self)

    # Operators
    def __add__(self, other: "Tensor") -> "Tensor":
        return Add.apply(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return Sub.apply(self, other)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        if isinstance(other, Tensor):
            return Mul.apply(self, other)
        return Scale.apply(self, factor=float(other))

    def __rmul__(self, other: float) -> "Tensor":
        return Scale.apply(self, factor=float(other))

    def __neg__(self) -> "Tensor":
        return Scale.apply(self, factor=-1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return MatMul.apply(self, other)

    def __getitem__(self, idx) -> "Tensor":
        return GetItem.apply(self, idx=idx)

    def sum(self) -> "Tensor":
        return Sum.apply(self)

    def reshape(self, *shape: int) -> "Tensor":
        return Reshape.apply(self, shape=shape)

    def tanh(self) -> "Tensor":
        return Tanh.apply(self)

    def sigmoid(self) -> "Tensor":
        return Sigmoid.apply(self)

    def relu(self) -> "Tensor":
        return Relu.apply(self)


class Function:
    """One recorded operation: forward on arrays, backward to parent grads"""

    def __init__(self, *parents: Tensor):
        self.parents = parents

    @classmethod
    def apply(cls, *tensors: Tensor, **kwargs) -> Tensor:
        for t in tensors:
            if not isinstance(t, Tensor):
                raise ContractError(f"{cls.__name__} expects Tensor operands, got {type(t).__name__}")
        fn = cls(*tensors)
        out = fn.forward(*[t.data for t in tensors], **kwargs)
        requires_grad = _grad_enabled and any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, _ctx=fn if requires_grad else None)

    def forward(self, *arrays: np.ndarray, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        raise NotImplementedError


def _same_shape(name: str, a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DimensionError(f"{name}: shape {a.shape} does not match {b.shape}")


class MatMul(Function):
    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return grad @ self.b.T, self.a.T @ grad


class Add(Function):
    def forward(self, a, b):
        _same_shape("add", a, b)
        return a + b

    def backward(self, grad):
        return grad, grad


class Sub(Function):
    def forward(self, a, b):
        _same_shape("sub", a, b)
        return a - b

    def backward(self, grad):
        return grad, -grad


class Mul(Function):
    def forward(self, a, b):
        _same_shape("mul", a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, grad * self.a


class Scale(Function):
    def forward(self, a, factor: float):
        self.factor = factor
        return a * factor

    def backward(self, grad):
        return (grad * self.factor,)


class Tanh(Function):
    def forward(self, a):
        self.y = np.tanh(a)
        return self.y

    def backward(self, grad):
        return (grad * (1.0 - self.y**2),)


class Sigmoid(Function):
    def forward(self, a):
        self.y = 0.5 * (1.0 + np.tanh(0.5 * a))
        return self.y

    def backward(self, grad):
        return (grad * self.y * (1.0 - self.y),)


class Relu(Function):
    def forward(self, a):
        self.active = a > 0
        return np.where(self.active, a, 0.0)

    def backward(self, grad):
        return (grad * self.active,)


class Sum(Function):
    def forward(self, a):
        self.in_shape = a.shape
        return np.asarray(a.sum())

    def backward(self, grad):
        return (np.full(self.in_shape, float(grad)),)


class Reshape(Function):
    def forward(self, a, shape):
        self.in_shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError as e:
            raise DimensionError(f"reshape: {a.shape} -> {shape}") from e

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class Transpose(Function):
    def forward(self, a):
        if a.ndim != 2:
            raise DimensionError(f"transpose expects a matrix, got {a.shape}")
        return a.T

    def backward(self, grad):
        return (grad.T,)


class GetItem(Function):
    def forward(self, a, idx):
        self.in_shape, self.idx = a.shape, idx
        return np.array(a[idx])

    def backward(self, grad):
        out = np.zeros(self.in_shape)
        np.add.at(out, self.idx, grad)
        return (out,)


def _masked_exp(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    if x.ndim != 1 or x.size == 0:
        raise DimensionError(f"softmax expects a non-empty vector, got {x.shape}")
    masked = np.isneginf(x)
    if masked.all():
        raise AllMaskedError("softmax over an all -inf vector")
    shift = x[~masked].max()
    e = np.where(masked, 0.0, np.exp(np.where(masked, 0.0, x - shift)))
    return e, masked, shift


class Softmax(Function):
    def forward(self, x):
        e, _, _ = _masked_exp(x)
        self.p = e / e.sum()
        return self.p

    def backward(self, grad):
        return (self.p * (grad - np.dot(self.p, grad)),)


class LogSoftmax(Function):
    def forward(self, x):
        e, self.masked, shift = _masked_exp(x)
        total = e.sum()
        self.p = e / total
        return np.where(self.masked, -np.inf, x - shift - np.log(total))

    def backward(self, grad):
        g = np.where(self.masked, 0.0, grad)
        return (np.where(self.masked, 0.0, g - self.p * g.sum()),)


# Functional surface

def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


_ELEMENTWISE: Dict[str, Callable[..., Tensor]] = {
    "tanh": lambda a: Tanh.apply(a),
    "sigmoid": lambda a: Sigmoid.apply(a),
    "relu": lambda a: Relu.apply(a),
    "add": lambda a, b: Add.apply(a, b),
    "sub": lambda a, b: Sub.apply(a, b),
    "mul": lambda a, b: Mul.apply(a, b),
    "scale": lambda a, factor: Scale.apply(a, factor=float(factor)),
}


def elementwise(op: str, *args) -> Tensor:
    """Apply a named elementwise operation"""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ContractError(f"Unknown elementwise op '{op}'") from None
    return fn(*args)


def softmax(x: Tensor) -> Tensor:
    """Softmax over a vector; -inf entries map to exactly 0"""
    return Softmax.apply(x)


def log_softmax(x: Tensor) -> Tensor:
    return LogSoftmax.apply(x)


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor):
    """Accumulate d(loss)/d(leaf) into every reachable leaf's grad buffer"""
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if node._ctx is None:
            node.grad += grad
            continue
        for parent, parent_grad in zip(node._ctx.parents, node._ctx.backward(grad)):
            if not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + parent_grad
            else:
                grads[id(parent)] = parent_grad


class ParameterSet(Protocol):
    def parameters(self) -> List[Tensor]:
        ...


def _as_list(params: Union[ParameterSet, Iterable[Tensor]]) -> List[Tensor]:
    if hasattr(params, "parameters"):
        return list(params.parameters())
    return list(params)


def zero_grad(params: Union[ParameterSet, Iterable[Tensor]]):
    for p in _as_list(params):
        p.zero_grad()


def global_grad_norm(params: Union[ParameterSet, Iterable[Tensor]]) -> float:
    return float(np.sqrt(sum(float(np.sum(p.grad**2)) for p in _as_list(params))))


def clip_grad_norm(params: Union[ParameterSet, Iterable[Tensor]], max_norm: float) -> float:
    """Rescale grads so their global norm is at most max_norm; returns the norm before clipping"""
    tensors = _as_list(params)
    norm = global_grad_norm(tensors)
    if np.isfinite(norm) and norm > max_norm:
        factor = max_norm / (norm + 1e-12)
        for p in tensors:
            p.grad *= factor
    return norm


class AdamState:
    """Adam moments and step counter for one parameter set"""

    def __init__(
        self,
        params: Union[ParameterSet, Sequence[Tensor]],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        if learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {learning_rate}")
        if not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise ConfigError(f"betas must lie in (0, 1), got {beta1}, {beta2}")
        if epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {epsilon}")
        tensors = _as_list(params)
        self.first_moment = [np.zeros_like(p.data) for p in tensors]
        self.second_moment = [np.zeros_like(p.data) for p in tensors]
        self.step_count = 0
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon

    def state_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {"step_count": np.asarray(self.step_count)}
        for i, (m, v) in enumerate(zip(self.first_moment, self.second_moment)):
            arrays[f"m{i}"] = m
            arrays[f"v{i}"] = v
        return arrays

    def load_arrays(self, arrays: Dict[str, np.ndarray]):
        self.step_count = int(arrays["step_count"])
        for i in range(len(self.first_moment)):
            self.first_moment[i] = np.array(arrays[f"m{i}"], dtype=np.float64)
            self.second_moment[i] = np.array(arrays[f"v{i}"], dtype=np.float64)


def adam_step(params: Union[ParameterSet, Sequence[Tensor]], state: AdamState):
    """Bias-corrected Adam update; grads are zeroed afterwards"""
    tensors = _as_list(params)
    if len(tensors) != len(state.first_moment):
        raise ContractError("Adam state does not match the parameter set")
    for p in tensors:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingDivergenceError("Non-finite gradient reached the optimizer")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for p, m, v in zip(tensors, state.first_moment, state.second_moment):
        m *= b1
        m += (1 - b1) * p.grad
        v *= b2
        v += (1 - b2) * p.grad**2
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
        p.grad.fill(0.0)


def numerical_gradient(fn: Callable[[], float], tensor: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function w.r.t. one tensor"""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = fn()
            flat[i] = original - h
            minus = fn()
            flat[i] = original
            out[i] = (plus - minus) / (2 * h)
    return grad
