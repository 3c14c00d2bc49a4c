from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from bandtint import constants
from bandtint.errors import (
    GradCheckError,
    GraphError,
    NonFiniteError,
    OptimizerError,
    PrecisionError,
    ShapeError,
)

logger = logging.getLogger(__name__)

type Array = np.ndarray
type Operand = Tensor | float
type BackwardRule = Callable[[Array], tuple[Array | None, ...]]

_dtype: ContextVar[type[np.floating]] = ContextVar('bandtint_dtype', default=np.float32)
_graph: ContextVar[Graph | None] = ContextVar('bandtint_graph', default=None)
# sign patterns of ReLU and abs while grad_check perturbs a parameter
_kinks: ContextVar[list[Array] | None] = ContextVar('bandtint_kinks', default=None)


def default_dtype() -> type[np.floating]:
    return _dtype.get()


@contextmanager
def double_precision() -> Iterator[None]:
    """
    Create parameters and constants in float64 while active (gradient checking).
    """
    token = _dtype.set(np.float64)
    try:
        yield
    finally:
        _dtype.reset(token)


class Tensor:
    __slots__ = ('data', 'grad', 'requires_grad', 'name')

    def __init__(
        self,
        data: Array | float | Sequence,
        *,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(default_dtype())
        self.data: Array = array
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def constant(cls, data: Array | float | Sequence) -> Tensor:
        """
        Non-differentiable tensor in the current default precision.
        """
        return cls(np.asarray(data, dtype=default_dtype()))

    @classmethod
    def parameter(cls, data: Array, *, name: str) -> Tensor:
        return cls(np.array(data, dtype=default_dtype()), requires_grad=True, name=name)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f'item() needs a single element, got shape {self.shape}')
        return float(self.data.reshape(()))

    def numpy(self) -> Array:
        return self.data.copy()

    def detach(self) -> Tensor:
        return Tensor(self.data, name=self.name)

    def __repr__(self) -> str:
        label = f'{self.name}, ' if self.name else ''
        return f'Tensor({label}shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})'

    def __add__(self, other: Operand) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Operand) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Operand) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: Operand) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Operand) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Operand) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: Operand) -> Tensor:
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> Tensor:
        return div(other, self)

    def __neg__(self) -> Tensor:
        return mul(self, -1.0)


@dataclass(frozen=True, slots=True)
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    rule: BackwardRule


@dataclass
class Graph:
    """
    Ordered record of executed operations; one graph per training step.
    """

    nodes: list[Node] = field(default_factory=list)
    _produced: set[int] = field(default_factory=set, repr=False)
    _tokens: list = field(default_factory=list, repr=False)

    def __enter__(self) -> Graph:
        self._tokens.append(_graph.set(self))
        return self

    def __exit__(self, *exc_info: object) -> None:
        _graph.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._produced

    def record(self, node: Node) -> None:
        self.nodes.append(node)
        self._produced.add(id(node.output))


def _emit(op: str, value: Array, inputs: tuple[Tensor, ...], rule: BackwardRule) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f'{op} produced non-finite values')
    graph = _graph.get()
    tracked = graph is not None and any(tensor.requires_grad for tensor in inputs)
    out = Tensor(value, requires_grad=tracked)
    if tracked:
        graph.record(Node(op, inputs, out, rule))
    return out


def backward(loss: Tensor, graph: Graph) -> None:
    """
    Accumulate d(loss)/d(leaf) into `.grad` of every leaf tensor that requires a gradient.

    Intermediate results keep no gradient.
    """
    if loss.size != 1:
        raise GraphError(f'loss must be a scalar, got shape {loss.shape}')
    if loss not in graph:
        raise GraphError('loss was not produced by the recorded graph')

    grads: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(graph.nodes):
        upstream = grads.pop(id(node.output), None)
        if upstream is None:
            continue
        for tensor, grad in zip(node.inputs, node.rule(upstream), strict=True):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            grads[key] = grads[key] + grad if key in grads else grad
            if tensor not in graph:
                leaves[key] = tensor

    for key, tensor in leaves.items():
        grad = np.asarray(grads[key], dtype=tensor.data.dtype).reshape(tensor.shape)
        tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad


# elementwise arithmetic; a 0-d operand broadcasts, nothing else does


def _lift(value: Operand, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _pair(op: str, a: Operand, b: Operand) -> tuple[Tensor, Tensor]:
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise ShapeError(f'{op} needs at least one tensor operand')
    a = _lift(a, b if isinstance(b, Tensor) else a)
    b = _lift(b, a)
    if a.shape != b.shape and a.data.ndim and b.data.ndim:
        raise ShapeError(f'{op}: shape {a.shape} does not match shape {b.shape}')
    return a, b


def _fit(grad: Array, tensor: Tensor) -> Array:
    if grad.shape == tensor.shape:
        return grad
    return np.asarray(grad.sum()).reshape(tensor.shape)


def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair('add', a, b)
    return _emit('add', a.data + b.data, (a, b), lambda g: (_fit(g, a), _fit(g, b)))


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair('sub', a, b)
    return _emit('sub', a.data - b.data, (a, b), lambda g: (_fit(g, a), _fit(-g, b)))


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair('mul', a, b)
    return _emit(
        'mul',
        a.data * b.data,
        (a, b),
        lambda g: (_fit(g * b.data, a), _fit(g * a.data, b)),
    )


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _pair('div', a, b)
    return _emit(
        'div',
        a.data / b.data,
        (a, b),
        lambda g: (_fit(g / b.data, a), _fit(-g * a.data / (b.data * b.data), b)),
    )


def _record_kink(pattern: Array) -> None:
    kinks = _kinks.get()
    if kinks is not None:
        kinks.append(pattern)


def absolute(x: Tensor) -> Tensor:
    sign = np.sign(x.data)
    _record_kink(sign)
    return _emit('abs', np.abs(x.data), (x,), lambda g: (g * sign,))


def total(x: Tensor) -> Tensor:
    return _emit(
        'sum',
        np.asarray(x.data.sum()),
        (x,),
        lambda g: (np.broadcast_to(g, x.shape).copy(),),
    )


def mean(x: Tensor) -> Tensor:
    scale = 1.0 / x.size
    return _emit(
        'mean',
        np.asarray(x.data.mean()),
        (x,),
        lambda g: (np.full(x.shape, g * scale, dtype=x.data.dtype),),
    )


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """
    Stack (C_i, H, W) tensors along the channel axis.
    """
    spatial = {tensor.shape[1:] for tensor in tensors}
    if len(spatial) != 1:
        raise ShapeError(f'concat needs matching spatial extents, got {sorted(spatial)}')
    bounds = np.cumsum([tensor.shape[0] for tensor in tensors])[:-1]
    return _emit(
        'concat',
        np.concatenate([tensor.data for tensor in tensors]),
        tuple(tensors),
        lambda g: tuple(np.split(g, bounds)),
    )


def channel_broadcast(v: Tensor, height: int, width: int) -> Tensor:
    """
    Repeat a (C,) vector over every spatial position of a (C, height, width) map.
    """
    if v.data.ndim != 1:
        raise ShapeError(f'channel_broadcast expects a vector, got shape {v.shape}')
    value = np.broadcast_to(v.data[:, None, None], (v.shape[0], height, width)).copy()
    return _emit('channel_broadcast', value, (v,), lambda g: (g.sum(axis=(1, 2)),))


def activation(x: Tensor, kind: constants.Activation) -> Tensor:
    match kind:
        case constants.Activation.RELU:
            mask = x.data > 0
            _record_kink(mask)
            return _emit('relu', np.where(mask, x.data, 0), (x,), lambda g: (g * mask,))
        case constants.Activation.SIGMOID:
            tiny = np.finfo(x.data.dtype).tiny
            value = 0.5 * (1 + np.tanh(0.5 * x.data))
            value = np.clip(value, tiny, 1 - np.finfo(x.data.dtype).epsneg)
            return _emit('sigmoid', value, (x,), lambda g: (g * value * (1 - value),))
    raise ValueError(f'unknown activation {kind!r}')


def resample(x: Tensor, kind: constants.Resample) -> Tensor:
    if x.data.ndim != 3:
        raise ShapeError(f'resample expects (C, H, W), got shape {x.shape}')
    c, h, w = x.shape
    match kind:
        case constants.Resample.DOWN2_MEAN:
            if h % 2 or w % 2:
                raise ShapeError(f'down2_mean needs even extents, got height {h} and width {w}')
            value = x.data.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))
            return _emit(
                'down2_mean',
                value,
                (x,),
                lambda g: (np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) * 0.25,),
            )
        case constants.Resample.UP2_NEAREST:
            value = np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2)
            return _emit(
                'up2_nearest',
                value,
                (x,),
                lambda g: (g.reshape(c, h, 2, w, 2).sum(axis=(2, 4)),),
            )
    raise ValueError(f'unknown resample kind {kind!r}')


def _windows(padded: Array, k: int, stride: int) -> Array:
    """
    (C, H', W', k, k) view of every kernel-sized window.
    """
    return sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::stride, ::stride]


def _scatter_windows(grad_windows: Array, padded_shape: tuple[int, ...], stride: int) -> Array:
    """
    Adjoint of `_windows`: add every window gradient back into the padded input.
    """
    _, out_h, out_w, k, _ = grad_windows.shape
    grad = np.zeros(padded_shape, dtype=grad_windows.dtype)
    for i in range(k):
        for j in range(k):
            grad[:, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += grad_windows[
                :, :, :, i, j
            ]
    return grad


def conv2d(
    input: Tensor,
    kernel: Tensor,
    bias: Tensor | None = None,
    *,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    Cross-correlate a (C_in, H, W) input with (C_out, C_in, k, k) kernels.
    """
    if input.data.ndim != 3:
        raise ShapeError(f'conv2d input must be (C_in, H, W), got shape {input.shape}')
    if kernel.data.ndim != 4:
        raise ShapeError(f'conv2d kernel must be (C_out, C_in, k, k), got shape {kernel.shape}')
    c_in, h, w = input.shape
    c_out, kernel_in, k, k_w = kernel.shape
    if kernel_in != c_in:
        raise ShapeError(f'conv2d channel dimension: input has {c_in}, kernel expects {kernel_in}')
    if k != k_w or k % 2 == 0:
        raise ShapeError(f'conv2d kernel must be square with odd side, got {k}x{k_w}')
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f'conv2d bias dimension: expected ({c_out},), got {bias.shape}')
    if stride < 1 or padding < 0:
        raise ShapeError(f'conv2d needs stride >= 1 and padding >= 0, got {stride} and {padding}')
    out_h = (h + 2 * padding - k) // stride + 1
    out_w = (w + 2 * padding - k) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ShapeError(f'conv2d height/width {h}x{w} too small for kernel {k} with padding {padding}')

    padded = np.pad(input.data, ((0, 0), (padding, padding), (padding, padding)))
    # (C_in * k * k, H' * W') column matrix
    columns = _windows(padded, k, stride).transpose(0, 3, 4, 1, 2).reshape(c_in * k * k, -1)
    weights = kernel.data.reshape(c_out, -1)
    value = (weights @ columns).reshape(c_out, out_h, out_w)
    if bias is not None:
        value = value + bias.data[:, None, None]

    def rule(g: Array) -> tuple[Array | None, ...]:
        flat = g.reshape(c_out, -1)
        grad_kernel = (flat @ columns.T).reshape(kernel.shape)
        grad_windows = (weights.T @ flat).reshape(c_in, k, k, out_h, out_w).transpose(0, 3, 4, 1, 2)
        grad_padded = _scatter_windows(grad_windows, padded.shape, stride)
        grad_input = grad_padded[:, padding : padding + h, padding : padding + w]
        grads: tuple[Array | None, ...] = (grad_input, grad_kernel)
        if bias is not None:
            grads += (g.sum(axis=(1, 2)),)
        return grads

    inputs = (input, kernel) if bias is None else (input, kernel, bias)
    return _emit('conv2d', value, inputs, rule)


def filter2d(x: Tensor, window: Array) -> Tensor:
    """
    Valid-mode correlation of every channel with one fixed (k, k) window.
    """
    k = window.shape[0]
    c, h, w = x.shape
    if h < k or w < k:
        raise ShapeError(f'filter2d: image {h}x{w} smaller than window {k}x{k}')
    weights = window.astype(x.data.dtype)
    value = np.einsum('chwij,ij->chw', _windows(x.data, k, 1), weights)

    def rule(g: Array) -> tuple[Array]:
        grad_windows = g[:, :, :, None, None] * weights
        return (_scatter_windows(grad_windows, x.shape, 1),)

    return _emit('filter2d', value, (x,), rule)


def linear(input: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    if input.data.ndim != 1 or weight.data.ndim != 2:
        raise ShapeError(f'linear expects a vector and a matrix, got {input.shape} and {weight.shape}')
    m, n = weight.shape
    if input.shape[0] != n:
        raise ShapeError(f'linear inner dimension: weight takes {n} inputs, got {input.shape[0]}')
    if bias.shape != (m,):
        raise ShapeError(f'linear bias dimension: expected ({m},), got {bias.shape}')
    return _emit(
        'linear',
        weight.data @ input.data + bias.data,
        (input, weight, bias),
        lambda g: (weight.data.T @ g, np.outer(g, input.data), g),
    )


# initialization and optimization


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> Array:
    """
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)) in the current default precision.
    """
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(default_dtype())


@dataclass
class OptimState:
    """
    Adaptive-moment estimator state, one accumulator pair per parameter.
    """

    learning_rate: float
    first: list[Array]
    second: list[Array]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Tensor], *, learning_rate: float = 1e-3) -> OptimState:
        if learning_rate < 0:
            raise OptimizerError(f'learning rate must be non-negative, got {learning_rate}')
        return cls(
            learning_rate=learning_rate,
            first=[np.zeros_like(param.data) for param in params],
            second=[np.zeros_like(param.data) for param in params],
        )


def optim_step(params: Sequence[Tensor], state: OptimState) -> None:
    """
    One Adam update in place, then clear the gradients.
    """
    if len(params) != len(state.first):
        raise OptimizerError(f'state tracks {len(state.first)} parameters, got {len(params)}')
    for index, param in enumerate(params):
        if param.grad is None:
            raise OptimizerError(f'parameter {param.name or index} has no gradient')

    state.step_count += 1
    t = state.step_count
    first_correction = 1 - state.beta1**t
    second_correction = 1 - state.beta2**t
    for param, m, v in zip(params, state.first, state.second, strict=True):
        grad = param.grad
        m *= state.beta1
        m += (1 - state.beta1) * grad
        v *= state.beta2
        v += (1 - state.beta2) * grad * grad
        update = state.learning_rate * (m / first_correction) / (np.sqrt(v / second_correction) + state.eps)
        param.data = (param.data - update).astype(param.data.dtype, copy=False)
        param.grad = None


# verification


def _loss_value(model_forward: Callable[[Tensor], Tensor], input: Tensor, where: str) -> tuple[float, list[Array]]:
    kinks: list[Array] = []
    token = _kinks.set(kinks)
    try:
        value = model_forward(input).item()
    except NonFiniteError as e:
        raise GradCheckError(f'non-finite value while perturbing {where}') from e
    finally:
        _kinks.reset(token)
    if not math.isfinite(value):
        raise GradCheckError(f'non-finite loss while perturbing {where}')
    return value, kinks


def _same_kinks(a: list[Array], b: list[Array]) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b, strict=True))


def grad_check(
    model_forward: Callable[[Tensor], Tensor],
    params: Sequence[Tensor],
    input: Tensor,
    epsilon: float = 1e-4,
    *,
    samples: int | None = None,
    seed: int = 0,
) -> float:
    """
    Max relative error between backward() gradients and central finite differences.

    `samples` limits the checked entries per parameter to a seeded random subset.
    Entries whose perturbation flips a ReLU or abs sign are skipped.
    """
    if epsilon <= 0:
        raise GradCheckError(f'epsilon must be positive, got {epsilon}')
    for tensor in (*params, input):
        if tensor.data.dtype != np.float64:
            raise PrecisionError(
                f'grad_check needs double precision, {tensor.name or "input"} is {tensor.data.dtype}'
            )

    for param in params:
        param.grad = None
    with Graph() as graph:
        loss = model_forward(input)
    backward(loss, graph)
    analytic = [param.grad if param.grad is not None else np.zeros_like(param.data) for param in params]
    for param in params:
        param.grad = None

    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = skipped = 0
    for position, (param, exact) in enumerate(zip(params, analytic, strict=True)):
        name = param.name or f'param[{position}]'
        entries = range(param.size)
        if samples is not None and samples < param.size:
            entries = sorted(rng.choice(param.size, size=samples, replace=False))
        for entry in entries:
            index = np.unravel_index(entry, param.shape)
            where = f'{name}{list(index)}'
            original = param.data[index]
            param.data[index] = original + epsilon
            plus, plus_kinks = _loss_value(model_forward, input, where)
            param.data[index] = original - epsilon
            minus, minus_kinks = _loss_value(model_forward, input, where)
            param.data[index] = original

            if not _same_kinks(plus_kinks, minus_kinks):
                logger.debug('perturbation crosses a kink', extra={'where': where})
                skipped += 1
                continue
            checked += 1
            numeric = (plus - minus) / (2 * epsilon)
            value = float(exact[index])
            if not math.isfinite(value):
                raise GradCheckError(f'non-finite analytic gradient at {where}')
            error = abs(value - numeric) / max(abs(value), abs(numeric), 1e-8)
            if error > worst:
                logger.debug('gradient mismatch', extra={'where': where, 'error': error})
                worst = error
    if skipped and not checked:
        raise GradCheckError(f'every one of {skipped} checked entries crosses a ReLU or abs kink')
    return worst
