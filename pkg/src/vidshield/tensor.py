"""Dense float64 tensors with reverse-mode automatic differentiation.

Just enough machinery for the surrogate networks and the perturbation
optimizer: elementwise arithmetic, matmul, NCHW convolution, pooling,
nearest-neighbor upsampling, and an L1 distance reduction. Values are
float64 throughout and every op is deterministic, so forward results and
gradients are bit-reproducible for identical inputs.

Broadcasting is restricted to scalar operands; mismatched shapes raise
``ShapeError`` immediately instead of silently broadcasting.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested operation."""


class Tensor:
    """N-dimensional float64 array node in a dynamically built graph.

    ``grad`` is populated by ``backward`` and accumulates additively
    across repeated backward passes; call ``zero_grad`` to reset.
    Treat ``data`` as immutable once the tensor participates in a graph.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None  # go -> tuple of per-parent grads (or None)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the module-level functions are the primary API
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data, parents, backward_fn, requires_grad) -> Tensor:
    out = Tensor(data)
    if requires_grad:
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _binary_shapes(a: Tensor, b: Tensor, opname: str):
    """Allow equal shapes, or a scalar (size-1) operand on either side."""
    if a.shape == b.shape:
        return
    if a.size == 1 or b.size == 1:
        return
    raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not conform")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Collapse a full-shape gradient onto a scalar operand.
    if g.shape == shape:
        return g
    return np.asarray(g.sum(), dtype=np.float64).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "add")

    def bw(go):
        return _reduce_to(go, a.shape), _reduce_to(go, b.shape)

    return _make(a.data + b.data, (a, b), bw, a.requires_grad or b.requires_grad)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "sub")

    def bw(go):
        return _reduce_to(go, a.shape), _reduce_to(-go, b.shape)

    return _make(a.data - b.data, (a, b), bw, a.requires_grad or b.requires_grad)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "mul")

    def bw(go):
        return _reduce_to(go * b.data, a.shape), _reduce_to(go * a.data, b.shape)

    return _make(a.data * b.data, (a, b), bw, a.requires_grad or b.requires_grad)


def matmul(a, b) -> Tensor:
    """Matrix product: 2-D @ 2-D or 2-D @ 1-D."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")

    def bw(go):
        if b.data.ndim == 1:
            return np.outer(go, b.data), a.data.T @ go
        return go @ b.data.T, a.data.T @ go

    return _make(a.data @ b.data, (a, b), bw, a.requires_grad or b.requires_grad)


def relu(x) -> Tensor:
    x = _as_tensor(x)

    def bw(go):
        return (go * (x.data > 0.0),)

    return _make(np.maximum(x.data, 0.0), (x,), bw, x.requires_grad)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    y = np.tanh(x.data)

    def bw(go):
        return (go * (1.0 - y * y),)

    return _make(y, (x,), bw, x.requires_grad)


def tsum(x) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    x = _as_tensor(x)

    def bw(go):
        return (np.full_like(x.data, float(go)),)

    return _make(x.data.sum(), (x,), bw, x.requires_grad)


def l1_sum(a, b) -> Tensor:
    """Scalar sum of absolute differences, sum_i |a_i - b_i|.

    The subgradient at zero difference is taken as 0.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"l1_sum: shapes {a.shape} and {b.shape} do not conform")
    sgn = np.sign(a.data - b.data)

    def bw(go):
        return float(go) * sgn, -float(go) * sgn

    return _make(np.abs(a.data - b.data).sum(), (a, b), bw, a.requires_grad or b.requires_grad)


def conv2d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation on NCHW input with OIHW weights."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d: expected NCHW and OIHW, got {x.shape} and {w.shape}")
    n, c, h, wd = x.shape
    co, ci, kh, kw = w.shape
    if ci != c:
        raise ShapeError(f"conv2d: input channels {x.shape} vs weight channels {w.shape}")
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d: kernel {w.shape} larger than padded input {x.shape}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (N, C, Ho, Wo, kh, kw)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    out = (cols @ w.data.reshape(co, -1).T).reshape(n, ho, wo, co).transpose(0, 3, 1, 2)

    def bw(go):
        gw = None
        if w.requires_grad:
            gflat = go.transpose(0, 2, 3, 1).reshape(n * ho * wo, co)
            gw = (gflat.T @ cols).reshape(co, c, kh, kw)
        gx = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for ki in range(kh):
                for kj in range(kw):
                    # (N,O,Ho,Wo) x (O,C) -> (N,C,Ho,Wo) scattered at stride
                    contrib = np.tensordot(go, w.data[:, :, ki, kj], axes=([1], [0]))
                    gxp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride] += (
                        contrib.transpose(0, 3, 1, 2)
                    )
            gx = gxp[:, :, padding:-padding or None, padding:-padding or None]
        return gx, gw

    return _make(out, (x, w), bw, x.requires_grad or w.requires_grad)


def add_channel_bias(x, b) -> Tensor:
    """Add a per-channel vector to every spatial position of NCHW input."""
    x, b = _as_tensor(x), _as_tensor(b)
    if x.data.ndim != 4 or b.data.ndim != 1 or b.shape[0] != x.shape[1]:
        raise ShapeError(f"add_channel_bias: shapes {x.shape} and {b.shape} do not conform")

    def bw(go):
        return go, go.sum(axis=(0, 2, 3))

    return _make(x.data + b.data[None, :, None, None], (x, b), bw,
                 x.requires_grad or b.requires_grad)


def avg_pool(x, k: int) -> Tensor:
    """Non-overlapping k x k average pooling on NCHW input."""
    x = _as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeError(f"avg_pool: expected NCHW, got {x.shape}")
    n, c, h, w = x.shape
    if h % k or w % k:
        raise ShapeError(f"avg_pool: spatial dims {x.shape} not divisible by {k}")
    y = x.data.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def bw(go):
        return (np.repeat(np.repeat(go, k, axis=2), k, axis=3) / (k * k),)

    return _make(y, (x,), bw, x.requires_grad)


def upsample(x, factor: int) -> Tensor:
    """Nearest-neighbor upsampling by an integer factor on NCHW input."""
    x = _as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeError(f"upsample: expected NCHW, got {x.shape}")
    y = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def bw(go):
        n, c, h, w = x.shape
        return (go.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return _make(y, (x,), bw, x.requires_grad)


def backward(loss: Tensor) -> None:
    """Accumulate dloss/dleaf into ``grad`` for every tensor below ``loss``.

    Each call computes its own gradient and adds it onto whatever is
    already stored, so repeated calls without zeroing accumulate and
    a*loss1 + b*loss2 may be differentiated one term at a time.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    # Per-call gradients flow through a local map; only the final values
    # are added onto the persistent .grad buffers.
    local: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        go = local.get(id(node))
        if go is None or node._backward is None:
            continue
        for parent, g in zip(node._parents, node._backward(go)):
            if not parent.requires_grad:
                continue
            acc = local.get(id(parent))
            local[id(parent)] = g if acc is None else acc + g

    for node in topo:
        g = local.get(id(node))
        if g is not None:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g
