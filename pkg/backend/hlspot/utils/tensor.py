"""
Dense f64 tensor with reverse-mode automatic differentiation

This module provides:
- Tensor: numpy-backed value that records the operation that produced it
- Graph: topologically ordered record of a computation, used by backward()
- Differentiable ops for the spotter: linear maps, attention, bilinear sampling,
  convolution, normalization and the pointwise functions of the losses

Broadcasting is restricted to leading (batch) dimensions: the shape of the
smaller operand must be a suffix of the larger one.
"""

import contextlib
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from hlspot.errors import ContractError, ShapeError

EPS_INVERSE_SIGMOID = 1e-6
EPS_LAYER_NORM = 1e-5
# Out-of-range sampling reads zero (zero padding), no clamping
SAMPLE_PADDING = 'zeros'

_GRAD_ENABLED = [True]
_TAPE = [None]


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block"""
    previous = _GRAD_ENABLED[0]
    _GRAD_ENABLED[0] = False
    try:
        yield
    finally:
        _GRAD_ENABLED[0] = previous


class ConstantTape:
    """
    Values cut from the graph with constant(), recorded on the first pass
    and replayed in order afterwards.

    Finite-difference checks replay the tape so that perturbed forwards see
    the same detached values (reference points, top-k indices) autodiff did.
    """

    def __init__(self):
        self.values: List[np.ndarray] = []
        self.cursor: Optional[int] = None

    def replay(self):
        self.cursor = 0

    def take(self, value: np.ndarray) -> np.ndarray:
        if self.cursor is None:
            self.values.append(value.copy())
            return value
        if self.cursor >= len(self.values):
            raise ContractError("ConstantTape: replay além dos valores gravados")
        recorded = self.values[self.cursor]
        self.cursor += 1
        return recorded.copy()


@contextlib.contextmanager
def constant_tape(tape: ConstantTape):
    previous = _TAPE[0]
    _TAPE[0] = tape
    try:
        yield tape
    finally:
        _TAPE[0] = previous


def constant(value) -> np.ndarray:
    """Detached ndarray copy of a Tensor or array (recorded/replayed under a tape)"""
    data = np.array(value.data if isinstance(value, Tensor) else value, copy=True)
    tape = _TAPE[0]
    return data if tape is None else tape.take(data)


class Tensor:
    """Dense f64 value with an optional gradient buffer"""

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple['Tensor', ...] = ()
        self._backward: Optional[Callable] = None
        self._op = ''

    # --- introspection -------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() exige um único elemento, recebido shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ', requires_grad=True' if self.requires_grad else ''
        return f"Tensor(shape={self.shape}{flag})"

    # --- autodiff --------------------------------------------------------
    def backward(self):
        """Populate .grad of every requires_grad leaf reachable from this scalar"""
        if self.data.size != 1:
            raise ContractError(f"backward() exige loss escalar, recebido shape {self.shape}")
        Graph.from_output(self).backward()

    # --- operators -------------------------------------------------------
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

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sigmoid(self):
        return sigmoid(self)

    def relu(self):
        return relu(self)

    def abs(self):
        return tabs(self)


class Graph:
    """Topologically ordered record of the operations behind one output"""

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> 'Graph':
        order: List[Tensor] = []
        visited = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    @property
    def output(self) -> Tensor:
        return self.nodes[-1]

    def backward(self):
        out = self.output
        if out.data.size != 1:
            raise ContractError(f"backward() exige loss escalar, recebido shape {out.shape}")
        if not out.requires_grad:
            return
        pending = {id(out): np.ones_like(out.data)}
        for node in reversed(self.nodes):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            if not node._parents:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    out = Tensor(data)
    out._op = op
    if _GRAD_ENABLED[0] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_leading(op, a_shape, b_shape):
    """The shorter shape must be a suffix of the longer one"""
    short, long_ = (a_shape, b_shape) if len(a_shape) <= len(b_shape) else (b_shape, a_shape)
    if len(short) == 0:
        return
    if tuple(long_[len(long_) - len(short):]) != tuple(short):
        raise ShapeError(op, a_shape, b_shape)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    return grad


# ---------------------------------------------------------------------------
# elementwise binary
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_leading('add', a.shape, b.shape)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _result(a.data + b.data, (a, b), backward, 'add')


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_leading('sub', a.shape, b.shape)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _result(a.data - b.data, (a, b), backward, 'sub')


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_leading('mul', a.shape, b.shape)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return _result(a.data * b.data, (a, b), backward, 'mul')


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_leading('div', a.shape, b.shape)

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data ** 2), b.shape))
    return _result(a.data / b.data, (a, b), backward, 'div')


def maximum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_leading('maximum', a.shape, b.shape)
    pick_a = a.data >= b.data

    def backward(g):
        return _unbroadcast(g * pick_a, a.shape), _unbroadcast(g * ~pick_a, b.shape)
    return _result(np.where(pick_a, a.data, b.data), (a, b), backward, 'maximum')


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_leading('minimum', a.shape, b.shape)
    pick_a = a.data <= b.data

    def backward(g):
        return _unbroadcast(g * pick_a, a.shape), _unbroadcast(g * ~pick_a, b.shape)
    return _result(np.where(pick_a, a.data, b.data), (a, b), backward, 'minimum')


def matmul(a, b) -> Tensor:
    """a[..., p, q] @ b[..., q, r]; b may be 2-D and shared across a's batch"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError('matmul', a.shape, b.shape)
    _check_leading('matmul', a.shape[:-2], b.shape[:-2])

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return _result(np.matmul(a.data, b.data), (a, b), backward, 'matmul')


# ---------------------------------------------------------------------------
# elementwise unary
# ---------------------------------------------------------------------------

def neg(x) -> Tensor:
    x = as_tensor(x)
    return _result(-x.data, (x,), lambda g: (-g,), 'neg')


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _result(out, (x,), lambda g: (g * out,), 'exp')


def log(x) -> Tensor:
    x = as_tensor(x)
    return _result(np.log(x.data), (x,), lambda g: (g / x.data,), 'log')


def tabs(x) -> Tensor:
    x = as_tensor(x)
    return _result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), 'abs')


def square(x) -> Tensor:
    x = as_tensor(x)
    return _result(x.data ** 2, (x,), lambda g: (2.0 * g * x.data,), 'square')


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return _result(out, (x,), lambda g: (g / (2.0 * out),), 'sqrt')


def power(x, p: float) -> Tensor:
    x = as_tensor(x)
    return _result(x.data ** p, (x,), lambda g: (g * p * x.data ** (p - 1),), 'power')


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = expit(x.data)
    return _result(out, (x,), lambda g: (g * out * (1.0 - out),), 'sigmoid')


def log_sigmoid(x) -> Tensor:
    """log(sigmoid(x)) without overflow"""
    x = as_tensor(x)
    out = -np.logaddexp(0.0, -x.data)
    return _result(out, (x,), lambda g: (g * (1.0 - expit(x.data)),), 'log_sigmoid')


def inverse_sigmoid(x, eps: float = EPS_INVERSE_SIGMOID) -> Tensor:
    """log(x / (1 - x)) with x clamped to [eps, 1 - eps]"""
    x = as_tensor(x)
    clamped = np.clip(x.data, eps, 1.0 - eps)
    inside = (x.data >= eps) & (x.data <= 1.0 - eps)

    def backward(g):
        return (g * inside / (clamped * (1.0 - clamped)),)
    return _result(np.log(clamped / (1.0 - clamped)), (x,), backward, 'inverse_sigmoid')


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _result(x.data * mask, (x,), lambda g: (g * mask,), 'relu')


# ---------------------------------------------------------------------------
# reductions and normalizations
# ---------------------------------------------------------------------------

def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape).copy()
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(a % len(shape) for a in axes)
    if not keepdims:
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape).copy()


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        return (_expand_reduced(g, x.shape, axis, keepdims),)
    return _result(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward, 'sum')


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size / max(out.size, 1) if x.data.size else 1.0

    def backward(g):
        return (_expand_reduced(g, x.shape, axis, keepdims) / count,)
    return _result(out, (x,), backward, 'mean')


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return _result(out, (x,), backward, 'softmax')


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)
    return _result(out, (x,), backward, 'log_softmax')


def layer_norm(x, gamma=None, beta=None, eps: float = EPS_LAYER_NORM) -> Tensor:
    """Normalize over the last axis, then apply the optional affine"""
    x = as_tensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(x.data.var(axis=-1, keepdims=True) + eps)
    xhat = (x.data - mu) * inv_std

    def backward(g):
        gm = g.mean(axis=-1, keepdims=True)
        gxm = (g * xhat).mean(axis=-1, keepdims=True)
        return (inv_std * (g - gm - xhat * gxm),)
    out = _result(xhat, (x,), backward, 'layer_norm')
    if gamma is not None:
        out = mul(out, gamma)
    if beta is not None:
        out = add(out, beta)
    return out


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError('reshape', x.shape, shape)
    return _result(out, (x,), lambda g: (g.reshape(x.shape),), 'reshape')


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes) if axes else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    return _result(x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),), 'transpose')


def getitem(x, index) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)
    return _result(x.data[index], (x,), backward, 'getitem')


def embedding_lookup(table, indices) -> Tensor:
    """Rows of table[V, d] selected by integer indices"""
    return getitem(as_tensor(table), np.asarray(indices, dtype=np.int64))


def broadcast_to(x, shape) -> Tensor:
    """Repeat x along new leading dimensions"""
    x = as_tensor(x)
    shape = tuple(shape)
    _check_leading('broadcast_to', x.shape, shape)
    if len(shape) < x.ndim:
        raise ShapeError('broadcast_to', x.shape, shape)
    return _result(np.broadcast_to(x.data, shape).copy(), (x,),
                   lambda g: (_unbroadcast(g, x.shape),), 'broadcast_to')


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError('concat', *[t.shape for t in tensors])
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))
    return _result(out, tensors, backward, 'concat')


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError('stack', *[t.shape for t in tensors])

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))
    return _result(out, tensors, backward, 'stack')


# ---------------------------------------------------------------------------
# sampling and convolution
# ---------------------------------------------------------------------------

def bilinear_sample(feature_map, points) -> Tensor:
    """
    Read feature_map[C, H, W] at normalized (x, y) locations.

    points has shape [..., 2]; the result has shape [..., C]. Texel (i, j) is
    centered at ((j + 0.5) / W, (i + 0.5) / H). Locations outside [0, 1]^2
    read zero and neighbours outside the grid count as zero.
    """
    fmap, pts = as_tensor(feature_map), as_tensor(points)
    if fmap.ndim != 3 or pts.shape[-1] != 2:
        raise ShapeError('bilinear_sample', fmap.shape, pts.shape)
    C, H, W = fmap.shape
    lead = pts.shape[:-1]
    flat = pts.data.reshape(-1, 2)
    x, y = flat[:, 0], flat[:, 1]
    inside = ((x >= 0.0) & (x <= 1.0) & (y >= 0.0) & (y <= 1.0)).astype(np.float64)
    px, py = x * W - 0.5, y * H - 0.5
    x0, y0 = np.floor(px), np.floor(py)
    fx, fy = px - x0, py - y0

    corners = []
    out = np.zeros((flat.shape[0], C))
    for dx in (0, 1):
        for dy in (0, 1):
            xi = (x0 + dx).astype(np.int64)
            yi = (y0 + dy).astype(np.int64)
            valid = ((xi >= 0) & (xi < W) & (yi >= 0) & (yi < H)).astype(np.float64) * inside
            xc, yc = np.clip(xi, 0, W - 1), np.clip(yi, 0, H - 1)
            wx = fx if dx else 1.0 - fx
            wy = fy if dy else 1.0 - fy
            values = fmap.data[:, yc, xc].T
            out += (wx * wy * valid)[:, None] * values
            corners.append((dx, dy, xc, yc, wx, wy, valid, values))

    def backward(g):
        g = g.reshape(-1, C)
        gmap = np.zeros_like(fmap.data)
        gpts = np.zeros_like(flat)
        for dx, dy, xc, yc, wx, wy, valid, values in corners:
            w = wx * wy * valid
            np.add.at(gmap, (slice(None), yc, xc), (g * w[:, None]).T)
            dot = (g * values).sum(axis=1) * valid
            gpts[:, 0] += dot * (1.0 if dx else -1.0) * wy * W
            gpts[:, 1] += dot * (1.0 if dy else -1.0) * wx * H
        return gmap, gpts.reshape(pts.shape)
    return _result(out.reshape(lead + (C,)), (fmap, pts), backward, 'bilinear_sample')


def _im2col_indices(C, H, W, kh, kw, padding, stride):
    Ho = (H + 2 * padding - kh) // stride + 1
    Wo = (W + 2 * padding - kw) // stride + 1
    i0 = np.tile(np.repeat(np.arange(kh), kw), C)
    j0 = np.tile(np.arange(kw), kh * C)
    i1 = stride * np.repeat(np.arange(Ho), Wo)
    j1 = stride * np.tile(np.arange(Wo), Ho)
    i = i0.reshape(-1, 1) + i1.reshape(1, -1)
    j = j0.reshape(-1, 1) + j1.reshape(1, -1)
    k = np.repeat(np.arange(C), kh * kw).reshape(-1, 1)
    return k, i, j, Ho, Wo


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """x[Cin, H, W] * weight[Cout, Cin, kh, kw] (+ bias[Cout]) -> [Cout, Ho, Wo]"""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 3 or weight.ndim != 4 or weight.shape[1] != x.shape[0]:
        raise ShapeError('conv2d', x.shape, weight.shape)
    C, H, W = x.shape
    Cout, _, kh, kw = weight.shape
    k, i, j, Ho, Wo = _im2col_indices(C, H, W, kh, kw, padding, stride)
    padded = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    cols = padded[k, i, j]
    w2 = weight.data.reshape(Cout, -1)
    out = w2 @ cols
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[:, None]
        parents.append(bias)

    def backward(g):
        g2 = g.reshape(Cout, -1)
        gw = (g2 @ cols.T).reshape(weight.shape)
        gcols = w2.T @ g2
        gpad = np.zeros_like(padded)
        np.add.at(gpad, (k, i, j), gcols)
        gx = gpad[:, padding:padding + H, padding:padding + W] if padding else gpad
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=1))
        return tuple(grads)
    return _result(out.reshape(Cout, Ho, Wo), parents, backward, 'conv2d')


def pointwise(kind: str, *args, **kwargs) -> Tensor:
    """Dispatch by name over the pointwise family"""
    table = {
        'add': add, 'mul': mul, 'sigmoid': sigmoid, 'inverse_sigmoid': inverse_sigmoid,
        'relu': relu, 'layer_norm': layer_norm, 'embedding_lookup': embedding_lookup,
        'concat': concat, 'reshape': reshape,
    }
    if kind not in table:
        raise ContractError(f"pointwise: operação desconhecida '{kind}'")
    return table[kind](*args, **kwargs)
