# -*- coding: utf-8 -*-
"""Reverse-mode automatic differentiation over dense float64 arrays.

Operations on :class:`Tensor` objects are recorded on the innermost active
:class:`Tape`. A tape is an append-only list of nodes; every node lists the
node ids of its inputs, so the list is topologically ordered by construction
and the backward pass walks it once, in reverse insertion order.

Outside of a tape nothing is recorded, which is how inference runs.

    with Tape() as tape:
        loss = (x @ w).relu().sum()
    grads = tape.gradients(loss, [w])
"""
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.special import logsumexp as _logsumexp

from . import defaults
from .exceptions import ContractViolation

Node = namedtuple("Node", ["op", "inputs", "saved", "vjp"])

_active_tapes = []


def current_tape():
    return _active_tapes[-1] if _active_tapes else None


class Tape(object):
    """Append-only graph of recorded operations."""

    def __init__(self):
        self.nodes = []
        self._leaf_ids = {}
        self._leaf_tensors = {}

    def __enter__(self):
        _active_tapes.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active_tapes.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def leaf(self, tensor):
        """Node id of a requires_grad leaf, registering it on first use."""
        key = id(tensor)
        if key not in self._leaf_ids:
            node_id = len(self.nodes)
            self.nodes.append(Node("leaf", (), None, None))
            self._leaf_ids[key] = node_id
            self._leaf_tensors[node_id] = tensor
        return self._leaf_ids[key]

    def node_of(self, tensor):
        if tensor._tape is self:
            return tensor._node
        if tensor._tape is None and tensor.requires_grad:
            return self.leaf(tensor)
        return None

    def record(self, op, inputs, data, vjp, saved=None):
        ids = tuple(self.node_of(t) for t in inputs)
        out = Tensor(data)
        if all(i is None for i in ids):
            return out
        for i in ids:
            if i is not None and i >= len(self.nodes):
                raise ContractViolation("node input %d does not precede node %d" % (i, len(self.nodes)))
        out.requires_grad = True
        out._tape = self
        out._node = len(self.nodes)
        self.nodes.append(Node(op, ids, saved, vjp))
        return out

    def backward(self, output):
        """Gradient map ``{leaf node id: array}`` of a scalar output."""
        if output.data.size != 1:
            raise ContractViolation("backward needs a scalar output, got shape %s" % (output.shape,))
        if output._tape is not self:
            return {}
        grads = {output._node: np.ones_like(output.data)}
        for node_id in range(output._node, -1, -1):
            node = self.nodes[node_id]
            if node.op == "leaf":
                continue
            g = grads.pop(node_id, None)
            if g is None:
                continue
            for input_id, input_grad in zip(node.inputs, node.vjp(g)):
                if input_id is None or input_grad is None:
                    continue
                if input_id in grads:
                    grads[input_id] = grads[input_id] + input_grad
                else:
                    grads[input_id] = input_grad
        leaf_grads = {}
        for node_id, tensor in self._leaf_tensors.items():
            g = grads.get(node_id)
            if g is None:
                g = np.zeros_like(tensor.data)
            tensor.grad = g
            leaf_grads[node_id] = g
        return leaf_grads

    def gradients(self, output, params):
        """Gradients of ``output`` w.r.t. each tensor in ``params`` (zeros if unused)."""
        grads = self.backward(output)
        result = []
        for p in params:
            node_id = self._leaf_ids.get(id(p))
            if node_id is None or node_id not in grads:
                result.append(np.zeros_like(p.data))
            else:
                result.append(grads[node_id])
        return result


def backward(tape, output):
    return tape.backward(output)


class Tensor(object):
    """Dense float64 array with optional gradient tracking."""

    # ndarray <op> Tensor dispatches to the Tensor's reflected operator.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=defaults.DTYPE)
        self.requires_grad = requires_grad
        self.grad = None
        self._tape = None
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return "Tensor(shape=%s, requires_grad=%s)" % (self.shape, self.requires_grad)

    def __len__(self):
        return len(self.data)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def relu(self):
        return relu(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def softplus(self):
        return softplus(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def square(self):
        return square(self)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(op, inputs, data, vjp, saved=None):
    tape = current_tape()
    if tape is None:
        return Tensor(data)
    return tape.record(op, inputs, data, vjp, saved)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _record("add", (a, b), a.data + b.data,
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _record("sub", (a, b), a.data - b.data,
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    x, y = a.data, b.data
    return _record("mul", (a, b), x * y,
                   lambda g: (_unbroadcast(g * y, a.shape), _unbroadcast(g * x, b.shape)), saved=(x, y))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    x, y = a.data, b.data
    return _record("div", (a, b), x / y,
                   lambda g: (_unbroadcast(g / y, a.shape), _unbroadcast(-g * x / (y * y), b.shape)), saved=(x, y))


def neg(a):
    a = as_tensor(a)
    return _record("neg", (a,), -a.data, lambda g: (-g,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractViolation("matmul shapes %s and %s do not align" % (a.shape, b.shape))
    x, y = a.data, b.data
    return _record("matmul", (a, b), x @ y, lambda g: (g @ y.T, x.T @ g), saved=(x, y))


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return _record("relu", (a,), a.data * mask, lambda g: (g * mask,), saved=mask)


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _record("tanh", (a,), out, lambda g: (g * (1.0 - out * out),), saved=out)


def sigmoid(a):
    a = as_tensor(a)
    out = expit(a.data)
    return _record("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),), saved=out)


def softplus(a):
    a = as_tensor(a)
    x = a.data
    return _record("softplus", (a,), np.logaddexp(0.0, x), lambda g: (g * expit(x),), saved=x)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record("exp", (a,), out, lambda g: (g * out,), saved=out)


def log(a):
    a = as_tensor(a)
    x = a.data
    return _record("log", (a,), np.log(x), lambda g: (g / x,), saved=x)


def square(a):
    a = as_tensor(a)
    x = a.data
    return _record("square", (a,), x * x, lambda g: (2.0 * g * x,), saved=x)


def _expand(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(np.reshape(g, (1,) * len(shape)), shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    shape = a.shape
    return _record("sum", (a,), np.sum(a.data, axis=axis, keepdims=keepdims),
                   lambda g: (np.array(_expand(g, shape, axis, keepdims)),))


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    shape = a.shape
    count = a.data.size if axis is None else np.prod([shape[i] for i in np.atleast_1d(axis)])
    return _record("mean", (a,), np.mean(a.data, axis=axis, keepdims=keepdims),
                   lambda g: (np.array(_expand(g, shape, axis, keepdims)) / count,))


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    return _record("reshape", (a,), np.reshape(a.data, shape), lambda g: (np.reshape(g, old),))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _record("concat", tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis), vjp)


def take_rows(table, index):
    """Rows ``table[index]`` of a 2-D table; gradients scatter back with add."""
    table = as_tensor(table)
    index = np.asarray(index, dtype=np.int64)
    shape = table.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return _record("take_rows", (table,), table.data[index], vjp, saved=index)


def logsumexp(a, axis=-1, keepdims=False):
    a = as_tensor(a)
    x = a.data
    out = _logsumexp(x, axis=axis, keepdims=True)
    weights = np.exp(x - out)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * weights,)

    data = out if keepdims else np.squeeze(out, axis=axis)
    return _record("logsumexp", (a,), data, vjp, saved=weights)


def log_softmax(a, axis=-1):
    return a - logsumexp(a, axis=axis, keepdims=True)


def reparam_sample(mu, logvar, noise):
    """``mu + exp(0.5 * logvar) * noise``, differentiable in mu and logvar."""
    mu, logvar, noise = as_tensor(mu), as_tensor(logvar), as_tensor(noise)
    if not (mu.shape == logvar.shape == noise.shape):
        raise ContractViolation("reparam_sample shapes differ: %s, %s, %s" % (mu.shape, logvar.shape, noise.shape))
    return mu + exp(0.5 * logvar) * noise


def numerical_gradient(fn, x, h=1e-5):
    """Central finite-difference gradient of a scalar ``fn`` at array ``x``."""
    x = np.array(x, dtype=defaults.DTYPE)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = float(fn(x))
        flat[i] = old - h
        down = float(fn(x))
        flat[i] = old
        out[i] = (up - down) / (2.0 * h)
    return grad


@dataclass
class AdamState(object):
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 1e-4
    beta1: float = defaults.ADAM_BETA1
    beta2: float = defaults.ADAM_BETA2
    eps: float = defaults.ADAM_EPS

    @classmethod
    def fresh(cls, size, lr=1e-4, beta1=defaults.ADAM_BETA1, beta2=defaults.ADAM_BETA2, eps=defaults.ADAM_EPS):
        return cls(np.zeros(size), np.zeros(size), 0, lr, beta1, beta2, eps)


def adam_step(params, grads, state):
    """One bias-corrected Adam update.

    Parameters
    ----------
    params : Tensor or ndarray
        Current parameter values (any shape; updated as a flat vector).
    grads : Tensor or ndarray
        Gradient with the same number of elements.
    state : AdamState
        Moments and step counter; not modified.

    Returns
    -------
    (ndarray, AdamState)
        The new parameter values, shaped like ``params``, and the new state.
    """
    p = np.asarray(params.data if isinstance(params, Tensor) else params, dtype=defaults.DTYPE)
    g = np.asarray(grads.data if isinstance(grads, Tensor) else grads, dtype=defaults.DTYPE).ravel()
    flat = p.ravel()
    if not (flat.size == g.size == state.m.size == state.v.size):
        raise ContractViolation("adam_step length mismatch: params %d, grads %d, m %d, v %d"
                                % (flat.size, g.size, state.m.size, state.v.size))
    step = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    new = flat - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, step, state.lr, state.beta1, state.beta2, state.eps)
    return new.reshape(p.shape), new_state


@dataclass
class Adam(object):
    """Adam over a list of parameter tensors, updated in place."""

    params: list
    lr: float = 1e-4
    beta1: float = defaults.ADAM_BETA1
    beta2: float = defaults.ADAM_BETA2
    eps: float = defaults.ADAM_EPS
    states: list = field(default_factory=list)

    def __post_init__(self):
        self.states = [AdamState.fresh(p.size, self.lr, self.beta1, self.beta2, self.eps) for p in self.params]

    @property
    def step_count(self):
        return self.states[0].step_count if self.states else 0

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ContractViolation("got %d gradients for %d parameters" % (len(grads), len(self.params)))
        for i, (p, g) in enumerate(zip(self.params, grads)):
            state = self.states[i]
            state.lr = self.lr
            p.data[...], self.states[i] = adam_step(p, g, state)
