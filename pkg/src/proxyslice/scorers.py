"""Score producers for loss-value-based sampling.

The built-in reconstruction scorer is a linear autoencoder: a rank-k PCA
basis fitted by seeded randomized subspace iteration. Classifier losses are
produced by an external model and ingested from CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import LabeledDataset
from .sampling import ScoreVector


@dataclass(frozen=True)
class ReconstructionScorer:
    """Mean vector and rank-k orthonormal basis of the fitted data."""

    mean: np.ndarray
    components: np.ndarray  # (rank, dim), rows orthonormal
    rank: int


def fit_reconstruction(ds: LabeledDataset, rank: int, seed: int,
                       max_iters: int = 5000,
                       tol: float = 1e-13) -> ReconstructionScorer:
    """Fit the top-`rank` principal components by randomized subspace iteration."""
    flat = ds.flat_pixels()
    dim = flat.shape[1]
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must lie in [1, {dim}], got {rank}")
    mean = flat.mean(axis=0)
    centered = flat - mean
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, rank)))
    cov = centered.T @ centered / len(ds)
    for _ in range(max_iters):
        q_next, _ = np.linalg.qr(cov @ q)
        # subspace change, invariant to per-column sign flips
        drift = np.linalg.norm(q_next @ (q_next.T @ q) - q)
        q = q_next
        if drift < tol:
            break
    # rotate the converged subspace onto the eigenbasis
    small = q.T @ cov @ q
    evals, evecs = np.linalg.eigh(small)
    order = np.argsort(evals)[::-1]
    components = (q @ evecs[:, order]).T
    return ReconstructionScorer(mean, components, rank)


def score(scorer: ReconstructionScorer, ds: LabeledDataset) -> ScoreVector:
    """Per-sample mean squared reconstruction error under the fitted basis."""
    flat = ds.flat_pixels()
    dim = flat.shape[1]
    if dim != scorer.mean.shape[0]:
        raise ValueError(
            f"dataset dim {dim} != scorer dim {scorer.mean.shape[0]}")
    centered = flat - scorer.mean
    coeffs = centered @ scorer.components.T
    residual = centered - coeffs @ scorer.components
    return ScoreVector(np.sum(residual ** 2, axis=1) / dim,
                       "reconstruction_loss")


def load_scores(path, ds: LabeledDataset) -> ScoreVector:
    """Ingest external classifier losses from a CSV of `index,score` rows."""
    n = len(ds)
    values = np.full(n, np.nan)
    seen = np.zeros(n, dtype=bool)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty score file")
        for row in reader:
            if not row:
                continue
            idx, val = int(row[0]), float(row[1])
            if not 0 <= idx < n:
                raise ValueError(f"{path}: index {idx} out of range [0, {n})")
            if seen[idx]:
                raise ValueError(f"{path}: duplicate index {idx}")
            if not math.isfinite(val):
                raise ValueError(f"{path}: non-finite score at index {idx}")
            seen[idx] = True
            values[idx] = val
    missing = np.flatnonzero(~seen)
    if missing.size:
        raise ValueError(f"{path}: missing score for index {int(missing[0])}")
    return ScoreVector(values, "classifier_loss")


def write_scores(scores: ScoreVector, path) -> None:
    """Write a ScoreVector in the same CSV format load_scores reads."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "score"])
        for i, v in enumerate(scores.scores):
            writer.writerow([i, repr(float(v))])
