"""Minimal reverse-mode autodiff over float64 numpy arrays.

Only the operations the cell search needs are implemented. Gradients are
accumulated in a fixed topological order, so runs are deterministic.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A numpy array with an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False, _prev=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _prev)
        self._backward = None
        self._prev = _prev

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Backprop from this scalar through the recorded graph."""
        if self.data.shape != ():
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in seen:
                    stack.append((child, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ---- arithmetic ----

    def __add__(self, other):
        other = _wrap(other)
        out = Tensor(self.data + other.data, _prev=(self, other))

        def bwd(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g, other.data.shape))
        out._backward = bwd
        return out

    def __mul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data * other.data, _prev=(self, other))

        def bwd(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g * self.data, other.data.shape))
        out._backward = bwd
        return out

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-_wrap(other))

    __radd__ = __add__
    __rmul__ = __mul__

    def matmul(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data @ other.data, _prev=(self, other))

        def bwd(g):
            if self.requires_grad:
                self._accum(g @ other.data.T)
            if other.requires_grad:
                other._accum(self.data.T @ g)
        out._backward = bwd
        return out

    def relu(self) -> "Tensor":
        mask = self.data > 0
        out = Tensor(self.data * mask, _prev=(self,))

        def bwd(g):
            if self.requires_grad:
                self._accum(g * mask)
        out._backward = bwd
        return out

    def sum(self) -> "Tensor":
        out = Tensor(self.data.sum(), _prev=(self,))

        def bwd(g):
            if self.requires_grad:
                self._accum(np.full_like(self.data, g))
        out._backward = bwd
        return out

    def mean_pool(self) -> "Tensor":
        """Global average pool: (b, c, h, w) -> (b, c)."""
        b, c, h, w = self.data.shape
        out = Tensor(self.data.mean(axis=(2, 3)), _prev=(self,))

        def bwd(g):
            if self.requires_grad:
                self._accum(np.broadcast_to(g[:, :, None, None] / (h * w),
                                            self.data.shape).copy())
        out._backward = bwd
        return out

    def item(self, index: int) -> "Tensor":
        """Scalar element of a 1-D tensor."""
        out = Tensor(self.data[index], _prev=(self,))

        def bwd(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[index] = g
                self._accum(full)
        out._backward = bwd
        return out

    def softmax(self) -> "Tensor":
        """Softmax along the last axis."""
        shifted = self.data - self.data.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=-1, keepdims=True)
        out = Tensor(s, _prev=(self,))

        def bwd(g):
            if self.requires_grad:
                dot = (g * s).sum(axis=-1, keepdims=True)
                self._accum(s * (g - dot))
        out._backward = bwd
        return out


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back down to a broadcast operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def conv2d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Stride-1 same-padding convolution: x (b,c,h,w), w (o,c,k,k), b (o,)."""
    k = w.data.shape[2]
    pad = (k - 1) // 2
    bs, _, h, wd = x.data.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out_data = np.zeros((bs, w.data.shape[0], h, wd))
    for di in range(k):
        for dj in range(k):
            out_data += np.einsum("oc,bcij->boij", w.data[:, :, di, dj],
                                  xp[:, :, di:di + h, dj:dj + wd])
    out_data += b.data[None, :, None, None]
    out = Tensor(out_data, _prev=(x, w, b))

    def bwd(g):
        if b.requires_grad:
            b._accum(g.sum(axis=(0, 2, 3)))
        if w.requires_grad or x.requires_grad:
            gxp = np.zeros_like(xp)
            gw = np.zeros_like(w.data)
            for di in range(k):
                for dj in range(k):
                    patch = xp[:, :, di:di + h, dj:dj + wd]
                    gw[:, :, di, dj] = np.einsum("boij,bcij->oc", g, patch)
                    gxp[:, :, di:di + h, dj:dj + wd] += np.einsum(
                        "oc,boij->bcij", w.data[:, :, di, dj], g)
            if w.requires_grad:
                w._accum(gw)
            if x.requires_grad:
                if pad:
                    x._accum(gxp[:, :, pad:-pad, pad:-pad])
                else:
                    x._accum(gxp)
    out._backward = bwd
    return out


def avg_pool3x3(x: Tensor) -> Tensor:
    """3x3 mean pool, stride 1, same padding, padded zeros excluded from counts."""
    bs, c, h, w = x.data.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ones = np.pad(np.ones((h, w)), 1)
    winsum = np.zeros_like(x.data)
    counts = np.zeros((h, w))
    for di in range(3):
        for dj in range(3):
            winsum += xp[:, :, di:di + h, dj:dj + w]
            counts += ones[di:di + h, dj:dj + w]
    out = Tensor(winsum / counts, _prev=(x,))

    def bwd(g):
        if x.requires_grad:
            gn = g / counts
            gxp = np.zeros_like(xp)
            for di in range(3):
                for dj in range(3):
                    gxp[:, :, di:di + h, dj:dj + w] += gn
            x._accum(gxp[:, :, 1:-1, 1:-1])
    out._backward = bwd
    return out


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x (b, f) @ w (f, o) + b (o,)."""
    return x.matmul(w) + b


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy over the batch."""
    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsumexp
    n = z.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    out = Tensor(loss, _prev=(logits,))

    def bwd(g):
        if logits.requires_grad:
            probs = np.exp(logp)
            probs[np.arange(n), labels] -= 1.0
            logits._accum(g * probs / n)
    out._backward = bwd
    return out
