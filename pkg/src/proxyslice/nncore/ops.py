"""The five candidate edge operations and their parameter shapes."""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from .tensor import Tensor, avg_pool3x3, conv2d


class OpKind(IntEnum):
    """Fixed operation order; the index is used wherever logits or
    genotypes are serialized."""

    CONV3X3 = 0
    CONV1X1 = 1
    AVG_POOL3X3 = 2
    SKIP = 3
    ZEROIZE = 4


OP_NAMES = {
    OpKind.CONV3X3: "nor_conv_3x3",
    OpKind.CONV1X1: "nor_conv_1x1",
    OpKind.AVG_POOL3X3: "avg_pool_3x3",
    OpKind.SKIP: "skip_connect",
    OpKind.ZEROIZE: "none",
}
OP_BY_NAME = {name: kind for kind, name in OP_NAMES.items()}

_KERNEL = {OpKind.CONV3X3: 3, OpKind.CONV1X1: 1}


def op_param_shapes(kind: OpKind, channels: int) -> dict[str, tuple]:
    """Learnable parameter shapes for one edge operation."""
    k = _KERNEL.get(kind)
    if k is None:
        return {}
    return {"w": (channels, channels, k, k), "b": (channels,)}


def op_param_count(kind: OpKind, channels: int) -> int:
    return sum(int(np.prod(s)) for s in op_param_shapes(kind, channels).values())


def op_forward(kind: OpKind, x: Tensor, params: dict[str, Tensor] | None = None) -> Tensor:
    """Apply one edge operation; convolutions are ReLU-then-conv."""
    if kind == OpKind.ZEROIZE:
        return Tensor(np.zeros_like(x.data))
    if kind == OpKind.SKIP:
        return x
    if kind == OpKind.AVG_POOL3X3:
        return avg_pool3x3(x)
    if params is None or "w" not in params:
        raise ValueError(f"{kind.name} requires conv parameters")
    return conv2d(x.relu(), params["w"], params["b"])
