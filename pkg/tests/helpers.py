"""Shared test fixtures: synthetic tasks and tiny training loops."""

import numpy as np

from proxyslice.datasets import Sample, from_samples
from proxyslice.nncore import Genotype, MicroNet, OpKind
from proxyslice.search import _SGD

# 3x3 patterns with the same number of lit pixels, so global-mean features
# cannot tell the classes apart while a 3x3 convolution can
CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.float64)
DIAG = np.array([[1, 0, 1], [0, 1, 0], [1, 0, 1]], dtype=np.float64)


def make_pattern_task(n_per_class: int, seed: int, size: int = 8):
    """Two-class task: a cross vs. a diagonal 3x3 stamp at a random offset."""
    rng = np.random.default_rng(seed)
    samples = []
    for cls, pattern in enumerate((CROSS, DIAG)):
        for _ in range(n_per_class):
            img = np.zeros((size, size))
            i, j = rng.integers(0, size - 2, 2)
            img[i:i + 3, j:j + 3] = pattern
            samples.append(Sample(img[:, :, None], cls))
    return from_samples(samples, f"pattern-{n_per_class}x2-s{seed}")


def as_batch(ds, indices=None):
    indices = range(len(ds)) if indices is None else indices
    xs = np.stack([ds.samples[i].pixels.transpose(2, 0, 1) for i in indices])
    ys = np.array([ds.samples[i].label for i in indices], dtype=np.int64)
    return xs, ys


def train_steps(genotype: Genotype, ds, steps: int, channels: int = 4,
                lr: float = 0.1, seed: int = 0, batch_size: int = 16,
                n_cells: int = 1) -> tuple[MicroNet, float]:
    """Train a fixed genotype for `steps` minibatch steps; returns the net
    and the final full-data training loss."""
    xs, ys = as_batch(ds)
    net = MicroNet(ds.shape[2], channels, n_cells, ds.n_classes, seed,
                   genotype=genotype)
    opt = _SGD(net.params, lr, 0.9)
    rng = np.random.default_rng(seed)
    for _ in range(steps):
        b = rng.choice(len(xs), min(batch_size, len(xs)), replace=False)
        loss = net.loss(net.forward(xs[b]), ys[b])
        net.zero_grad()
        loss.backward()
        opt.step()
    return net, float(net.loss(net.forward(xs), ys).data)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-10)


def has_conv_edge(genotype: Genotype) -> bool:
    return any(k in (OpKind.CONV3X3, OpKind.CONV1X1) for k in genotype.ops)
