"""The 4-node cell DAG, genotypes, and the desk-scale macro network."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ops import OP_BY_NAME, OP_NAMES, OpKind, op_forward, op_param_count, op_param_shapes
from .tensor import Tensor, conv2d, cross_entropy, linear, parameter

N_NODES = 4
# ordered pairs (i, j), i < j, lexicographic; edge ids are 1-based positions
EDGES: tuple[tuple[int, int], ...] = tuple(
    (i, j) for i in range(N_NODES) for j in range(i + 1, N_NODES))
N_EDGES = len(EDGES)
N_OPS = len(OpKind)


@dataclass(frozen=True)
class Genotype:
    """One operation per cell edge, in edge-id order."""

    ops: tuple[OpKind, ...]

    def __post_init__(self):
        if len(self.ops) != N_EDGES:
            raise ValueError(f"genotype needs {N_EDGES} ops, got {len(self.ops)}")

    def to_string(self) -> str:
        """Canonical form `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|`."""
        groups = []
        for node in range(1, N_NODES):
            parts = []
            for src in range(node):
                kind = self.ops[EDGES.index((src, node))]
                parts.append(f"{OP_NAMES[kind]}~{src}")
            groups.append("|" + "|".join(parts) + "|")
        return "+".join(groups)

    @classmethod
    def from_string(cls, text: str) -> "Genotype":
        ops: dict[tuple[int, int], OpKind] = {}
        groups = text.split("+")
        if len(groups) != N_NODES - 1:
            raise ValueError(f"expected {N_NODES - 1} node groups in {text!r}")
        for node, group in enumerate(groups, start=1):
            parts = [p for p in group.split("|") if p]
            if len(parts) != node:
                raise ValueError(f"node {node} needs {node} edges in {text!r}")
            for part in parts:
                name, src = part.rsplit("~", 1)
                if name not in OP_BY_NAME:
                    raise ValueError(f"unknown operation {name!r}")
                ops[(int(src), node)] = OP_BY_NAME[name]
        return cls(tuple(ops[e] for e in EDGES))

    @classmethod
    def uniform(cls, kind: OpKind) -> "Genotype":
        return cls((kind,) * N_EDGES)


def cell_param_count(genotype: Genotype, channels: int, n_cells: int) -> int:
    """Exact learnable-parameter count of the stacked cells (stem and
    classifier excluded)."""
    per_cell = sum(op_param_count(kind, channels) for kind in genotype.ops)
    return per_cell * n_cells


def _kaiming_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class MicroNet:
    """Stem conv -> N stacked cells -> global average pool -> linear head.

    In genotype mode each edge owns parameters for its one chosen operation;
    in relaxed mode every edge owns parameters for all candidate operations
    so mixture or sampled forwards can be taken.
    """

    def __init__(self, in_channels: int, channels: int, n_cells: int,
                 n_classes: int, seed: int, genotype: Genotype | None = None):
        self.channels = channels
        self.n_cells = n_cells
        self.n_classes = n_classes
        self.genotype = genotype
        self.relaxed = genotype is None
        self.params: dict[str, Tensor] = {}
        rng = np.random.default_rng(seed)
        self._add("stem.w", _kaiming_uniform(rng, (channels, in_channels, 3, 3)))
        self._add("stem.b", np.zeros(channels))
        for ci in range(n_cells):
            for e in range(N_EDGES):
                kinds = (list(OpKind) if self.relaxed else [genotype.ops[e]])
                for kind in kinds:
                    for pname, shape in op_param_shapes(kind, channels).items():
                        key = f"cell{ci}.edge{e + 1}.{kind.name.lower()}.{pname}"
                        init = (np.zeros(shape) if pname == "b"
                                else _kaiming_uniform(rng, shape))
                        self._add(key, init)
        self._add("fc.w", _kaiming_uniform(rng, (channels, n_classes)))
        self._add("fc.b", np.zeros(n_classes))

    def _add(self, name: str, data: np.ndarray) -> None:
        self.params[name] = parameter(data)

    def _edge_params(self, ci: int, e: int, kind: OpKind) -> dict[str, Tensor]:
        prefix = f"cell{ci}.edge{e + 1}.{kind.name.lower()}."
        return {name[len(prefix):]: t for name, t in self.params.items()
                if name.startswith(prefix)}

    # ---- forward paths ----

    def _stem(self, x: np.ndarray) -> Tensor:
        return conv2d(Tensor(x), self.params["stem.w"], self.params["stem.b"])

    def _head(self, feat: Tensor) -> Tensor:
        return linear(feat.mean_pool(), self.params["fc.w"], self.params["fc.b"])

    def _cell(self, ci: int, x: Tensor, edge_out) -> Tensor:
        """Run one cell; edge_out(ci, e, kind_inputs) -> edge output tensor."""
        nodes = [x]
        for node in range(1, N_NODES):
            acc = None
            for src in range(node):
                e = EDGES.index((src, node))
                contrib = edge_out(ci, e, nodes[src])
                acc = contrib if acc is None else acc + contrib
            nodes.append(acc)
        return nodes[-1]

    def forward(self, x: np.ndarray) -> Tensor:
        """Discrete forward with the fixed genotype. Returns class logits."""
        if self.genotype is None:
            raise ValueError("forward() needs a genotype; use forward_relaxed")

        def edge_out(ci, e, inp):
            kind = self.genotype.ops[e]
            return op_forward(kind, inp, self._edge_params(ci, e, kind))

        feat = self._stem(x)
        for ci in range(self.n_cells):
            feat = self._cell(ci, feat, edge_out)
        return self._head(feat)

    def forward_relaxed(self, x: np.ndarray, edge_weights: list[Tensor]) -> Tensor:
        """Mixture forward: per edge, the softmax-weighted sum of all ops.

        edge_weights holds one length-5 tensor per edge (already softmaxed);
        the same weights are shared by every cell.
        """
        if not self.relaxed:
            raise ValueError("network was built in genotype mode")

        def edge_out(ci, e, inp):
            acc = None
            for kind in OpKind:
                if kind == OpKind.ZEROIZE:
                    continue  # weighted zeros contribute nothing
                term = edge_weights[e].item(int(kind)) * op_forward(
                    kind, inp, self._edge_params(ci, e, kind))
                acc = term if acc is None else acc + term
            return acc

        feat = self._stem(x)
        for ci in range(self.n_cells):
            feat = self._cell(ci, feat, edge_out)
        return self._head(feat)

    def forward_sampled(self, x: np.ndarray, samples: list) -> Tensor:
        """Sampled forward: per edge one (op index, straight-through gain).

        The gain is a scalar tensor equal to 1 in value whose gradient flows
        into the architecture logits.
        """
        if not self.relaxed:
            raise ValueError("network was built in genotype mode")

        def edge_out(ci, e, inp):
            kind, gain = samples[e]
            return gain * op_forward(OpKind(kind), inp,
                                     self._edge_params(ci, e, OpKind(kind)))

        feat = self._stem(x)
        for ci in range(self.n_cells):
            feat = self._cell(ci, feat, edge_out)
        return self._head(feat)

    def loss(self, logits: Tensor, labels: np.ndarray) -> Tensor:
        return cross_entropy(logits, labels)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None


def save_checkpoint(params: dict[str, Tensor], prefix) -> None:
    """Flat binary of concatenated float64 arrays plus a JSON manifest."""
    prefix = Path(prefix)
    manifest = []
    offset = 0
    chunks = []
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name].data)
        manifest.append({"name": name, "shape": list(arr.shape),
                         "offset": offset, "dtype": "float64"})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    prefix.with_suffix(".bin").write_bytes(b"".join(chunks))
    prefix.with_suffix(".json").write_text(json.dumps(manifest, indent=2))


def load_checkpoint(prefix) -> dict[str, np.ndarray]:
    prefix = Path(prefix)
    manifest = json.loads(prefix.with_suffix(".json").read_text())
    raw = prefix.with_suffix(".bin").read_bytes()
    out = {}
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype=np.float64, count=count,
                            offset=entry["offset"])
        out[entry["name"]] = arr.reshape(shape).copy()
    return out
