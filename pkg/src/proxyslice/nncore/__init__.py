from .ops import OP_BY_NAME, OP_NAMES, OpKind, op_forward, op_param_count, op_param_shapes
from .cell import (EDGES, N_EDGES, N_NODES, N_OPS, Genotype, MicroNet,
                   cell_param_count, load_checkpoint, save_checkpoint)
from .tensor import (Tensor, avg_pool3x3, conv2d, constant, cross_entropy,
                     linear, parameter)

__all__ = [
    "OP_BY_NAME", "OP_NAMES", "OpKind", "op_forward", "op_param_count",
    "op_param_shapes", "EDGES", "N_EDGES", "N_NODES", "N_OPS", "Genotype",
    "MicroNet", "cell_param_count", "load_checkpoint", "save_checkpoint",
    "Tensor", "avg_pool3x3", "conv2d", "constant", "cross_entropy", "linear",
    "parameter",
]
