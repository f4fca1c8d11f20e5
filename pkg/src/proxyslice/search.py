"""Cell search on a (proxy) dataset.

Three algorithms are available: first-order differentiable search with a
softmax mixture over edge operations (darts1), Gumbel-softmax sampled search
with a straight-through estimator (gdas), and a random-search baseline over
the 5^6 genotype space.
"""

from __future__ import annotations

import itertools
import json
import time
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .datasets import LabeledDataset, ProxyIndex
from .nncore import (EDGES, N_EDGES, N_OPS, Genotype, MicroNet, OpKind,
                     Tensor, constant, parameter)

SPACE_SIZE = N_OPS ** N_EDGES  # 15,625 genotypes


@dataclass
class ArchParams:
    """Per-edge operation logits, 6 edges x 5 ops."""

    edge_logits: list[Tensor]

    @classmethod
    def zeros(cls) -> "ArchParams":
        return cls([parameter(np.zeros(N_OPS)) for _ in range(N_EDGES)])

    def snapshot(self) -> list[list[float]]:
        return [[float(v) for v in t.data] for t in self.edge_logits]

    def softmax_weights(self) -> list[Tensor]:
        return [t.softmax() for t in self.edge_logits]


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str = "darts1"
    epochs: int = 50
    batch_size: int = 16
    lr_weights: float = 0.05
    lr_arch: float = 0.3
    momentum: float = 0.9
    tau_start: float = 10.0
    tau_end: float = 0.1
    seed: int = 0
    split_fraction: float = 0.5
    channels: int = 4
    n_cells: int = 2

    def __post_init__(self):
        if self.algorithm == "darts2":
            raise NotImplementedError(
                "second-order differentiable search is not supported")
        if self.algorithm not in ("darts1", "gdas", "random"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.tau_start >= self.tau_end > 0:
            raise ValueError("need tau_start >= tau_end > 0")
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must lie in (0, 1)")


@dataclass
class SearchLog:
    """Per-epoch search record plus final genotype and provenance."""

    records: list[dict] = field(default_factory=list)
    final_genotype: str = ""
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def write_jsonl(self, path) -> None:
        lines = [json.dumps(r) for r in self.records]
        lines.append(json.dumps({
            "final": True, "genotype": self.final_genotype,
            "config": self.config, "provenance": self.provenance,
        }))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "SearchLog":
        log = cls()
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("final"):
                log.final_genotype = rec["genotype"]
                log.config = rec.get("config", {})
                log.provenance = rec.get("provenance", {})
            else:
                log.records.append(rec)
        return log

    @property
    def total_wall_clock_ms(self) -> float:
        return self.records[-1]["wall_clock_ms"] if self.records else 0.0


class NumericFailure(RuntimeError):
    """Raised when a search loss becomes non-finite."""


def derive_genotype(arch: ArchParams) -> Genotype:
    """Per-edge argmax over op logits; ties go to the lowest op index."""
    ops = []
    for t in arch.edge_logits:
        if not np.all(np.isfinite(t.data)):
            raise ValueError("architecture logits must be finite")
        ops.append(OpKind(int(np.argmax(t.data))))
    return Genotype(tuple(ops))


def detect_degenerate(genotype: Genotype) -> dict:
    """Flag the all-Skip local optimum and parameter-free cells."""
    all_skip = all(k == OpKind.SKIP for k in genotype.ops)
    zero_param = all(k not in (OpKind.CONV3X3, OpKind.CONV1X1)
                     for k in genotype.ops)
    return {"all_skip": all_skip, "zero_param": zero_param}


def gumbel_softmax_sample(logits: np.ndarray, tau: float,
                          rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """One Gumbel-softmax draw: the hard argmax index and the soft vector."""
    g = rng.gumbel(size=logits.shape)
    z = (logits + g) / tau
    z = z - z.max()
    soft = np.exp(z)
    soft /= soft.sum()
    return int(np.argmax(soft)), soft


def _st_gain(logits_t: Tensor, tau: float, rng: np.random.Generator):
    """Sample an op for one edge; the gain is 1.0 in value and carries the
    straight-through gradient of the soft sample's max entry."""
    g = rng.gumbel(size=N_OPS)
    y = ((logits_t + constant(g)) * (1.0 / tau)).softmax()
    idx = int(np.argmax(y.data))
    gain = y.item(idx) + constant(1.0 - float(y.data[idx]))
    return idx, gain


class _SGD:
    """Plain SGD with optional momentum over a named tensor dict."""

    def __init__(self, tensors: dict[str, Tensor], lr: float, momentum: float = 0.0):
        self.tensors = tensors
        self.lr = lr
        self.momentum = momentum
        self.velocity = {k: np.zeros_like(t.data) for k, t in tensors.items()}

    def step(self) -> None:
        for name in sorted(self.tensors):
            t = self.tensors[name]
            if t.grad is None:
                continue
            if self.momentum:
                v = self.velocity[name]
                v *= self.momentum
                v += t.grad
                t.data -= self.lr * v
            else:
                t.data -= self.lr * t.grad
            t.grad = None


def _check_finite(loss: Tensor, stage: str, arch: ArchParams):
    if not np.isfinite(loss.data):
        raise NumericFailure(
            f"non-finite {stage} loss; logits snapshot: {arch.snapshot()}")


def darts_step(net: MicroNet, arch: ArchParams, train_batch, val_batch,
               weight_opt: _SGD, arch_opt: _SGD) -> tuple[float, float]:
    """First-order alternating update: weights on the train batch, then
    logits on the validation batch with weights held fixed."""
    xs, ys = train_batch
    weights = [t.softmax() for t in arch.edge_logits]
    loss = net.loss(net.forward_relaxed(xs, weights), ys)
    _check_finite(loss, "train", arch)
    net.zero_grad()
    for t in arch.edge_logits:
        t.grad = None
    loss.backward()
    for t in arch.edge_logits:
        t.grad = None  # weights-only step
    weight_opt.step()

    xv, yv = val_batch
    weights = [t.softmax() for t in arch.edge_logits]
    val_loss = net.loss(net.forward_relaxed(xv, weights), yv)
    _check_finite(val_loss, "val", arch)
    net.zero_grad()
    val_loss.backward()
    net.zero_grad()  # logits-only step
    arch_opt.step()
    return float(loss.data), float(val_loss.data)


def gdas_step(net: MicroNet, arch: ArchParams, train_batch, val_batch,
              tau: float, rng: np.random.Generator,
              weight_opt: _SGD, arch_opt: _SGD) -> tuple[float, float]:
    """Sampled update: per edge one Gumbel-softmax draw with a straight-
    through gain, weights then logits as in the differentiable step."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    xs, ys = train_batch
    samples = [_st_gain(t, tau, rng) for t in arch.edge_logits]
    loss = net.loss(net.forward_sampled(xs, samples), ys)
    _check_finite(loss, "train", arch)
    net.zero_grad()
    for t in arch.edge_logits:
        t.grad = None
    loss.backward()
    for t in arch.edge_logits:
        t.grad = None
    weight_opt.step()

    xv, yv = val_batch
    samples = [_st_gain(t, tau, rng) for t in arch.edge_logits]
    val_loss = net.loss(net.forward_sampled(xv, samples), yv)
    _check_finite(val_loss, "val", arch)
    net.zero_grad()
    val_loss.backward()
    net.zero_grad()
    arch_opt.step()
    return float(loss.data), float(val_loss.data)


def gather_pool(ds: LabeledDataset, indices) -> tuple[np.ndarray, np.ndarray]:
    """Materialize (x, y) arrays for the given sample indices in nchw order."""
    xs = np.stack([ds.samples[i].pixels.transpose(2, 0, 1) for i in indices])
    ys = np.array([ds.samples[i].label for i in indices], dtype=np.int64)
    return xs, ys


def run_search(ds: LabeledDataset, cfg: SearchConfig,
               proxy: ProxyIndex | None = None) -> SearchLog:
    """Full cell search on the dataset (restricted to the proxy if given)."""
    indices = list(proxy.indices) if proxy is not None else list(range(len(ds)))
    xs, ys = gather_pool(ds, indices)
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(indices))
    n_train = max(1, int(round(cfg.split_fraction * len(indices))))
    n_train = min(n_train, len(indices) - 1) if len(indices) > 1 else 1
    train_ids, val_ids = perm[:n_train], perm[n_train:]
    if len(val_ids) == 0:
        val_ids = train_ids

    net = MicroNet(in_channels=ds.shape[2], channels=cfg.channels,
                   n_cells=cfg.n_cells, n_classes=ds.n_classes, seed=cfg.seed)
    arch = ArchParams.zeros()
    weight_opt = _SGD(net.params, cfg.lr_weights, cfg.momentum)
    arch_opt = _SGD({f"edge{e}": t for e, t in enumerate(arch.edge_logits)},
                    cfg.lr_arch)

    log = SearchLog(config=asdict(cfg))
    if proxy is not None:
        log.provenance = {"method": proxy.method, "ratio": proxy.ratio,
                          "seed": proxy.seed, "source_hash": proxy.source_hash}
    else:
        log.provenance = {"method": "full", "ratio": 1.0, "seed": cfg.seed,
                          "source_hash": ds.content_hash()}

    start = time.perf_counter()
    last_ms = 0.0
    for epoch in range(cfg.epochs):
        tau = cfg.tau_start + (cfg.tau_end - cfg.tau_start) * (
            epoch / max(1, cfg.epochs - 1))
        train_order = rng.permutation(train_ids)
        val_order = rng.permutation(val_ids)
        epoch_train, epoch_val, n_steps = 0.0, 0.0, 0
        for bstart in range(0, len(train_order), cfg.batch_size):
            tb = train_order[bstart:bstart + cfg.batch_size]
            vb = val_order[np.arange(bstart, bstart + len(tb)) % len(val_order)]
            batches = ((xs[tb], ys[tb]), (xs[vb], ys[vb]))
            if cfg.algorithm == "darts1":
                tl, vl = darts_step(net, arch, *batches, weight_opt, arch_opt)
            elif cfg.algorithm == "gdas":
                tl, vl = gdas_step(net, arch, *batches, tau, rng,
                                   weight_opt, arch_opt)
            else:
                raise ValueError(
                    f"run_search does not drive {cfg.algorithm!r}; "
                    "use random_search")
            epoch_train += tl
            epoch_val += vl
            n_steps += 1
        now_ms = (time.perf_counter() - start) * 1000.0
        if now_ms <= last_ms:  # keep the cumulative clock strictly increasing
            now_ms = np.nextafter(last_ms, np.inf)
        last_ms = now_ms
        log.records.append({
            "epoch": epoch,
            "arch_logits": arch.snapshot(),
            "genotype": derive_genotype(arch).to_string(),
            "train_loss": epoch_train / n_steps,
            "val_loss": epoch_val / n_steps,
            "wall_clock_ms": now_ms,
        })
    log.final_genotype = derive_genotype(arch).to_string()
    return log


def genotype_space():
    """All 15,625 genotypes in lexicographic op-index order."""
    for combo in itertools.product(list(OpKind), repeat=N_EDGES):
        yield Genotype(combo)


def random_search(evaluator, budget: int, seed: int) -> Genotype:
    """Uniform random search without replacement over the genotype space.

    Returns the genotype with the highest evaluator score; ties keep the
    first one found.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > SPACE_SIZE:
        warnings.warn(f"budget {budget} exceeds space size {SPACE_SIZE}; capped")
        budget = SPACE_SIZE
    rng = np.random.default_rng(seed)
    order = rng.permutation(SPACE_SIZE)[:budget]
    best, best_score = None, -np.inf
    for code in order:
        ops = []
        rem = int(code)
        for _ in range(N_EDGES):
            ops.append(OpKind(rem % N_OPS))
            rem //= N_OPS
        geno = Genotype(tuple(ops))
        score = evaluator(geno)
        if score > best_score:
            best, best_score = geno, score
    return best
