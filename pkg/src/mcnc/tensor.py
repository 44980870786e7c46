"""Dense float64 tensors with define-by-run reverse-mode autodiff.

The graph is rebuilt on every forward pass: each operation returns a new
Tensor holding its inputs and a closure that scatters the output gradient
back to them. ``backward`` on a scalar root walks the recorded operations
in reverse topological order. Arrays are contiguous row-major float64;
reshape copies.
"""
import numpy as np

from .errors import (
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
    TapeError,
)

ACTIVATIONS = ("sine", "relu", "leaky_relu", "elu", "sigmoid", "identity")

_LEAKY_SLOPE = 0.01
_ELU_ALPHA = 1.0


class Tensor:
    """A node of the autodiff tape: value, gradient slot, and backward rule."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_op", "_backward_done")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None, _op="leaf"):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward_fn = _backward_fn
        self._op = _op
        self._backward_done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), _as_tensor(-1.0)))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return narrow(self, key)

    def sum(self, axis=None):
        return tensor_sum(self, axis=axis)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def backward(self):
        backward(self)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to ``shape`` after a numpy broadcast."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- core operations ------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out_data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add shapes {a.shape} and {b.shape} do not broadcast") from None

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward_fn, _op="add")


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out_data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul shapes {a.shape} and {b.shape} do not broadcast") from None

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward_fn, _op="mul")


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not conform")
    out_data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward_fn, _op="matmul")


def activation(x, kind):
    x = _as_tensor(x)
    if kind == "sine":
        out_data = np.sin(x.data)
        deriv = np.cos(x.data)
    elif kind == "relu":
        out_data = np.maximum(x.data, 0.0)
        deriv = (x.data > 0.0).astype(np.float64)
    elif kind == "leaky_relu":
        out_data = np.where(x.data > 0.0, x.data, _LEAKY_SLOPE * x.data)
        deriv = np.where(x.data > 0.0, 1.0, _LEAKY_SLOPE)
    elif kind == "elu":
        out_data = np.where(x.data > 0.0, x.data, _ELU_ALPHA * (np.exp(x.data) - 1.0))
        deriv = np.where(x.data > 0.0, 1.0, _ELU_ALPHA * np.exp(x.data))
    elif kind == "sigmoid":
        out_data = 1.0 / (1.0 + np.exp(-x.data))
        deriv = out_data * (1.0 - out_data)
    elif kind == "identity":
        out_data = x.data.copy()
        deriv = None
    else:
        raise ConfigError(f"unknown activation kind {kind!r}; expected one of {ACTIVATIONS}")

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g if deriv is None else g * deriv)

    return Tensor(out_data, _parents=(x,), _backward_fn=backward_fn, _op=f"act:{kind}")


def tensor_sum(x, axis=None):
    x = _as_tensor(x)
    out_data = x.data.sum(axis=axis)

    def backward_fn(g):
        if not x.requires_grad:
            return
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.data.shape))
        else:
            x._accumulate(np.broadcast_to(np.expand_dims(g, axis), x.data.shape))

    return Tensor(out_data, _parents=(x,), _backward_fn=backward_fn, _op="sum")


def reshape(x, *shape):
    x = _as_tensor(x)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    try:
        out_data = x.data.reshape(shape).copy()
    except ValueError:
        raise ShapeError(f"cannot reshape {x.shape} ({x.size} values) to {shape}") from None

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g.reshape(x.data.shape))

    return Tensor(out_data, _parents=(x,), _backward_fn=backward_fn, _op="reshape")


def narrow(x, key):
    """Basic slicing with gradient scatter back into the source."""
    x = _as_tensor(x)
    out_data = x.data[key].copy()

    def backward_fn(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[key] = g
            x._accumulate(full)

    return Tensor(out_data, _parents=(x,), _backward_fn=backward_fn, _op="narrow")


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    logits = _as_tensor(logits)
    if logits.data.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got shape {logits.shape}")
    labels = np.asarray(labels)
    batch, n_classes = logits.shape
    if labels.shape != (batch,):
        raise DataError(f"labels shape {labels.shape} does not match batch size {batch}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes}); got range [{labels.min()}, {labels.max()}]")
    labels = labels.astype(np.int64)

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    exp_z = np.exp(z)
    sum_exp = exp_z.sum(axis=1, keepdims=True)
    log_probs = z - np.log(sum_exp)
    loss = -log_probs[np.arange(batch), labels].mean()

    def backward_fn(g):
        if not logits.requires_grad:
            return
        grad = exp_z / sum_exp
        grad[np.arange(batch), labels] -= 1.0
        logits._accumulate(g * grad / batch)

    return Tensor(loss, _parents=(logits,), _backward_fn=backward_fn, _op="softmax_ce")


def from_op(data, parents, backward_fn, op="custom"):
    """Hook for modules that define their own fused ops (e.g. sliced-W2 loss)."""
    return Tensor(data, _parents=tuple(parents), _backward_fn=backward_fn, _op=op)


# -- backward pass --------------------------------------------------------


def backward(root):
    """Reverse-accumulate gradients from a scalar ``root`` through the tape.

    Raises on a non-scalar root and on a second call for the same root;
    the graph is meant to be rebuilt per step.
    """
    if root.data.size != 1:
        raise ShapeError(f"backward root must be scalar, got shape {root.shape}")
    if root._backward_done:
        raise TapeError("backward already ran on this root; rebuild the graph before calling again")

    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    # cycles are impossible by construction (nodes only reference pre-existing
    # parents); the DFS above would loop forever otherwise, so assert via the
    # visited bookkeeping
    assert len(topo) == len(visited)

    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
    root._backward_done = True


def finite_difference_check(f, x, step=1e-5):
    """Max relative error between tape gradients of ``f`` and central differences.

    ``f`` maps a Tensor to a scalar Tensor and must be re-runnable (it is
    called 2 * x.size + 1 times). Relative error per coordinate is
    |a - n| / max(|a|, |n|, 1e-12).
    """
    if not step > 0:
        raise ConfigError(f"finite-difference step must be positive, got {step}")
    x.requires_grad = True
    x.zero_grad()
    out = f(x)
    value = out.item()
    if not np.isfinite(value):
        raise NumericError(f"f(x) is not finite: {value}")
    backward(out)
    analytic = x.grad.reshape(-1).copy()

    flat = x.data.reshape(-1)
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(x).item()
        flat[i] = orig - step
        lo = f(x).item()
        flat[i] = orig
        numeric[i] = (hi - lo) / (2.0 * step)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom))
