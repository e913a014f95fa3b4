"""Minimal dense-tensor reverse-mode autodiff and Adam, in float64 numpy.

Supports the ops needed by the acquisition model: matmul (with numpy-style
leading batch dims), broadcasting add/sub/mul/div, relu, exp, log, square,
softplus, softmax / layer_norm / concat / slicing on the last axis, a last
two axes transpose and a full mean reduction.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(v) -> Tensor:
    return v if isinstance(v, Tensor) else Tensor(v)


def _make(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad or p._parents for p in parents):
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to the given shape (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


def _shape_error(op, *tensors):
    shapes = ", ".join(str(t.data.shape) for t in tensors)
    return ValueError(f"{op}: incompatible shapes {shapes}")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise _shape_error("add", a, b) from None
    return _make(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise _shape_error("sub", a, b) from None
    return _make(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise _shape_error("mul", a, b) from None
    return _make(data, (a, b), lambda g: (
        _unbroadcast(g * b.data, a.shape),
        _unbroadcast(g * a.data, b.shape),
    ))


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data / b.data
    except ValueError:
        raise _shape_error("div", a, b) from None
    return _make(data, (a, b), lambda g: (
        _unbroadcast(g / b.data, a.shape),
        _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
    ))


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    # batched input x 2D weight: collapse leading axes into one gemm
    if a.data.ndim > 2 and b.data.ndim == 2:
        lead = a.data.shape[:-1]
        k = a.data.shape[-1]
        if k != b.data.shape[0]:
            raise _shape_error("matmul", a, b)
        a2 = a.data.reshape(-1, k)
        data = (a2 @ b.data).reshape(lead + (b.data.shape[1],))

        def backward(g):
            g2 = g.reshape(-1, b.data.shape[1])
            ga = (g2 @ b.data.T).reshape(a.data.shape) if _needs_grad(a) else None
            gb = a2.T @ g2 if _needs_grad(b) else None
            return ga, gb

        return _make(data, (a, b), backward)
    try:
        data = a.data @ b.data
    except ValueError:
        raise _shape_error("matmul", a, b) from None

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(data, (a, b), backward)


def _needs_grad(t: Tensor) -> bool:
    return t.requires_grad or bool(t._parents)


def linear(x, w, b) -> Tensor:
    """Fused x @ w + b for a 2D weight and 1D bias; x may be batched."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if w.data.ndim != 2 or b.data.ndim != 1 or x.data.shape[-1] != w.data.shape[0] \
            or w.data.shape[1] != b.data.shape[0]:
        raise _shape_error("linear", x, w, b)
    lead = x.data.shape[:-1]
    x2 = x.data.reshape(-1, x.data.shape[-1])
    data = (x2 @ w.data + b.data).reshape(lead + (w.data.shape[1],))

    def backward(g):
        g2 = g.reshape(-1, w.data.shape[1])
        gx = (g2 @ w.data.T).reshape(x.data.shape) if _needs_grad(x) else None
        return gx, x2.T @ g2, g2.sum(axis=0)

    return _make(data, (x, w, b), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise _shape_error(f"reshape to {shape}", a) from None
    return _make(data, (a,), lambda g: (g.reshape(a.data.shape),))


def swap_axes(a, ax1: int, ax2: int) -> Tensor:
    a = _as_tensor(a)
    data = np.swapaxes(a.data, ax1, ax2)
    return _make(data, (a,), lambda g: (np.swapaxes(g, ax1, ax2),))


def transpose_last2(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim < 2:
        raise _shape_error("transpose_last2", a)
    data = np.swapaxes(a.data, -1, -2)
    return _make(data, (a,), lambda g: (np.swapaxes(g, -1, -2),))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    data = np.exp(a.data)
    return _make(data, (a,), lambda g: (g * data,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def square(a) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def softplus(a) -> Tensor:
    a = _as_tensor(a)
    data = np.logaddexp(0.0, a.data)
    sig = 1.0 / (1.0 + np.exp(-a.data))
    return _make(data, (a,), lambda g: (g * sig,))


def softmax(a) -> Tensor:
    """Softmax over the last axis."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = np.sum(g * p, axis=-1, keepdims=True)
        return (p * (g - dot),)

    return _make(p, (a,), backward)


def layer_norm(a, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to mean 0 and variance 1 (no learned affine)."""
    a = _as_tensor(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = centered * inv
    n = a.data.shape[-1]

    def backward(g):
        gy = g * inv
        term1 = gy - gy.mean(axis=-1, keepdims=True)
        term2 = y * np.sum(g * y, axis=-1, keepdims=True) * inv / n
        return (term1 - term2,)

    return _make(y, (a,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise _shape_error("concat", *tensors) from None
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(data, tensors, backward)


def slice_last(a, start: int, stop: int) -> Tensor:
    """Slice [start:stop] along the last axis."""
    a = _as_tensor(a)
    data = a.data[..., start:stop]

    def backward(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        return (full,)

    return _make(data, (a,), backward)


def reduce_mean(a) -> Tensor:
    """Mean over all elements, returning a scalar tensor."""
    a = _as_tensor(a)
    n = a.data.size
    return _make(a.data.mean(), (a,), lambda g: (np.full(a.data.shape, g / n),))


def backward(loss: Tensor, leaves=None):
    """Reverse-accumulate gradients of a scalar loss into all tracked leaves.

    Leaves listed in ``leaves`` that are not connected to the loss receive a
    zero gradient instead of None.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    topo: list[Tensor] = []
    seen = set()

    def visit(node):
        stack = [(node, False)]
        while stack:
            t, done = stack.pop()
            if done:
                topo.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for p in t._parents:
                stack.append((p, False))

    visit(loss)
    grads = {id(loss): np.ones(())}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g
        if node._backward_fn is None:
            continue
        for parent, pg in zip(node._parents, node._backward_fn(g)):
            if pg is None:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    if leaves is not None:
        for leaf in leaves:
            if leaf.requires_grad and leaf.grad is None:
                leaf.grad = np.zeros(leaf.shape)


def zero_grads(params):
    for p in params:
        p.grad = None


def check_gradients(f, xs, eps: float = 1e-5) -> float:
    """Max relative error between backward() and central finite differences.

    ``f`` maps a list of leaf tensors to a scalar tensor.
    """
    xs = list(xs)
    for x in xs:
        x.requires_grad = True
        x.grad = None
    loss = f(xs)
    backward(loss)
    analytic = [np.zeros(x.shape) if x.grad is None else np.array(x.grad) for x in xs]
    worst = 0.0
    for x, a in zip(xs, analytic):
        flat = x.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f(xs).data)
            flat[i] = orig - eps
            lo = float(f(xs).data)
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            an = a.reshape(-1)[i]
            err = abs(an - numeric) / max(abs(an), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


class AdamState:
    """Standard Adam with bias correction over a list of parameter tensors."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]

    def step(self, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros(p.shape)
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / b1c
            v_hat = self.v[i] / b2c
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(state: AdamState, lr: float | None = None):
    state.step(lr)
