"""Dataset ingestion, synthetic data generation, and proxy-index file I/O."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CIFAR10_RECORD = 3073
CIFAR100_RECORD = 3074
CIFAR_IMAGE_BYTES = 3072  # 3 x 32 x 32, channel-major


class DataFormatError(ValueError):
    """Raised for malformed dataset or proxy files."""


@dataclass(frozen=True)
class Sample:
    """One image with its class id. Pixels are float64 in [0, 1], shape (h, w, c)."""

    pixels: np.ndarray
    label: int

    def __post_init__(self):
        if self.pixels.ndim != 3:
            raise ValueError(f"pixels must be h x w x c, got shape {self.pixels.shape}")


@dataclass(frozen=True)
class LabeledDataset:
    """Immutable in-memory dataset with a per-class index partition."""

    samples: tuple[Sample, ...]
    class_index: tuple[tuple[int, ...], ...]
    name: str

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_classes(self) -> int:
        return sum(1 for idx in self.class_index if idx)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.samples[0].pixels.shape

    @property
    def dim(self) -> int:
        h, w, c = self.shape
        return h * w * c

    def flat_pixels(self) -> np.ndarray:
        """All samples flattened to an (n, dim) float64 matrix."""
        return np.stack([s.pixels.reshape(-1) for s in self.samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.name.encode())
        for s in self.samples:
            h.update(np.int64(s.label).tobytes())
            h.update(np.ascontiguousarray(s.pixels).tobytes())
        return h.hexdigest()

    def subset(self, indices, name: str | None = None) -> "LabeledDataset":
        """New dataset restricted to the given indices, relabelled class index."""
        picked = tuple(self.samples[i] for i in indices)
        return from_samples(picked, name or f"{self.name}-subset")


def from_samples(samples, name: str) -> LabeledDataset:
    """Build a LabeledDataset, deriving the class partition from sample labels."""
    samples = tuple(samples)
    if not samples:
        raise ValueError("dataset must contain at least one sample")
    shape = samples[0].pixels.shape
    n_classes = max(s.label for s in samples) + 1
    buckets: list[list[int]] = [[] for _ in range(n_classes)]
    for i, s in enumerate(samples):
        if s.pixels.shape != shape:
            raise ValueError(f"sample {i} shape {s.pixels.shape} != {shape}")
        buckets[s.label].append(i)
    return LabeledDataset(samples, tuple(tuple(b) for b in buckets), name)


def parse_cifar(raw: bytes, fmt: str) -> LabeledDataset:
    """Parse the CIFAR-10/100 binary format into a dataset.

    cifar10 records are 3073 bytes (label + pixels); cifar100 records are
    3074 bytes (coarse label, fine label, pixels). Pixels are channel-major
    and get normalized to [0, 1]. The cifar100 coarse label is discarded.
    """
    if fmt == "cifar10":
        record, n_classes, label_off = CIFAR10_RECORD, 10, 0
    elif fmt == "cifar100":
        record, n_classes, label_off = CIFAR100_RECORD, 100, 1
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if len(raw) % record != 0:
        offset = (len(raw) // record) * record
        raise DataFormatError(
            f"truncated stream: {len(raw)} bytes is not a multiple of "
            f"{record}; trailing partial record starts at offset {offset}"
        )
    samples = []
    for start in range(0, len(raw), record):
        label = raw[start + label_off]
        if label >= n_classes:
            raise DataFormatError(
                f"corrupt record at offset {start}: label {label} >= {n_classes}"
            )
        pix = np.frombuffer(raw, dtype=np.uint8, count=CIFAR_IMAGE_BYTES,
                            offset=start + label_off + 1)
        # channel-major rows -> (h, w, c)
        pixels = pix.reshape(3, 32, 32).transpose(1, 2, 0).astype(np.float64) / 255.0
        samples.append(Sample(pixels, int(label)))
    ds = from_samples(samples, fmt)
    if ds.n_classes < 1:
        raise DataFormatError("no samples parsed")
    return ds


def synth_blobs(n_classes: int, per_class: int, dim: int, spread: float,
                seed: int) -> LabeledDataset:
    """Gaussian blob dataset for oracle-scale tests, one blob per class.

    Samples are shaped (1, dim, 1). Deterministic for a fixed seed.
    """
    if n_classes < 1 or per_class < 1 or dim < 1:
        raise ValueError("n_classes, per_class and dim must all be >= 1")
    if spread <= 0:
        raise ValueError("spread must be > 0")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.2, 0.8, size=(n_classes, dim))
    samples = []
    for cls in range(n_classes):
        pts = means[cls] + spread * rng.standard_normal((per_class, dim))
        for row in np.clip(pts, 0.0, 1.0):
            samples.append(Sample(row.reshape(1, dim, 1), cls))
    return from_samples(samples, f"blobs-{n_classes}x{per_class}-s{seed}")


@dataclass(frozen=True)
class ProxyIndex:
    """Sorted index subset of a dataset plus sampling provenance."""

    indices: tuple[int, ...]
    ratio: float
    method: str
    seed: int
    source_hash: str

    def __post_init__(self):
        idx = self.indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("proxy indices must be strictly increasing")
        if idx and idx[0] < 0:
            raise ValueError("proxy indices must be non-negative")
        if not 0 < self.ratio <= 1:
            raise ValueError(f"ratio must lie in (0, 1], got {self.ratio}")

    def __len__(self) -> int:
        return len(self.indices)


def write_proxy(proxy: ProxyIndex, path) -> None:
    """Write a proxy index: one JSON header line, then one index per line."""
    header = {
        "method": proxy.method,
        "ratio": proxy.ratio,
        "seed": proxy.seed,
        "source_hash": proxy.source_hash,
        "count": len(proxy.indices),
    }
    lines = [json.dumps(header)]
    lines.extend(str(i) for i in proxy.indices)
    Path(path).write_text("\n".join(lines) + "\n")


def read_proxy(path, dataset: LabeledDataset | None = None) -> ProxyIndex:
    """Read a proxy file; optionally check its source hash against a dataset."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty proxy file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: bad header: {exc}") from exc
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != header["count"]:
        raise DataFormatError(
            f"{path}: header claims {header['count']} indices, found {len(body)}"
        )
    try:
        indices = tuple(int(ln) for ln in body)
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-integer index line: {exc}") from exc
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise DataFormatError(f"{path}: indices out of sorted order")
    if dataset is not None:
        if header["source_hash"] != dataset.content_hash():
            raise DataFormatError(
                f"{path}: source_hash does not match dataset {dataset.name!r}"
            )
        if indices and indices[-1] >= len(dataset):
            raise DataFormatError(f"{path}: index {indices[-1]} out of range")
    return ProxyIndex(indices, header["ratio"], header["method"],
                      header["seed"], header["source_hash"])
