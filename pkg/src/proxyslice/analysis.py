"""Post-hoc analytics: per-edge operation frequencies across runs, search
time vs. proxy ratio, and figure/CSV emission."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .nncore import N_EDGES, N_OPS, OP_NAMES, Genotype, OpKind
from .search import SearchLog

OP_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"]


@dataclass(frozen=True)
class EdgeDistribution:
    """Empirical op probabilities per edge id, from a group of search runs."""

    probs: tuple[tuple[Fraction, ...], ...]  # (edge, op), exact fractions
    run_count: int
    key: str

    def as_array(self) -> np.ndarray:
        return np.array([[float(p) for p in edge] for edge in self.probs])


@dataclass(frozen=True)
class TimingCurve:
    """Mean/std of total search wall-clock per proxy ratio."""

    points: tuple[tuple[float, float, float], ...]  # (ratio, mean_ms, std_ms)
    machine: str = ""


def edge_distribution(genotypes, key: str = "") -> EdgeDistribution:
    """Count op choices per edge over the genotype list; exact fractions."""
    genotypes = list(genotypes)
    if not genotypes:
        raise ValueError("genotype list must be non-empty")
    counts = np.zeros((N_EDGES, N_OPS), dtype=np.int64)
    for geno in genotypes:
        for e, kind in enumerate(geno.ops):
            counts[e, int(kind)] += 1
    n = len(genotypes)
    probs = tuple(tuple(Fraction(int(c), n) for c in row) for row in counts)
    return EdgeDistribution(probs, n, key)


def timing_curve(logs, machine: str = "") -> TimingCurve:
    """Group logs by proxy ratio; mean/std of final cumulative wall clock."""
    groups: dict[float, list[float]] = {}
    for log in logs:
        if "ratio" not in log.provenance:
            raise ValueError("search log is missing proxy ratio provenance")
        groups.setdefault(float(log.provenance["ratio"]), []).append(
            log.total_wall_clock_ms)
    points = []
    for ratio in sorted(groups):
        times = np.array(groups[ratio])
        std = float(times.std(ddof=1)) if len(times) > 1 else 0.0
        points.append((ratio, float(times.mean()), std))
    return TimingCurve(tuple(points), machine)


def genotypes_from_logs(logs) -> list[Genotype]:
    return [Genotype.from_string(log.final_genotype) for log in logs]


# ---- emission ----

def emit_distribution_csv(dist: EdgeDistribution, path) -> None:
    """One row per (edge, op, probability); 12 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["edge", "op", "probability"])
        for e, row in enumerate(dist.probs, start=1):
            for kind in OpKind:
                writer.writerow([e, OP_NAMES[kind], f"{float(row[int(kind)]):.12g}"])


def read_distribution_csv(path) -> np.ndarray:
    probs = np.zeros((N_EDGES, N_OPS))
    name_to_idx = {name: int(kind) for kind, name in OP_NAMES.items()}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for edge, op, prob in reader:
            probs[int(edge) - 1, name_to_idx[op]] = float(prob)
    return probs


def emit_distribution_figure(dist: EdgeDistribution, path) -> None:
    """Grid of one pie chart per edge, colored by operation."""
    fig, axes = plt.subplots(1, N_EDGES, figsize=(2.2 * N_EDGES, 2.6))
    for e, ax in enumerate(axes):
        row = [float(p) for p in dist.probs[e]]
        shown = [(v, OP_COLORS[i]) for i, v in enumerate(row) if v > 0]
        ax.pie([v for v, _ in shown], colors=[c for _, c in shown],
               startangle=90, counterclock=False)
        ax.set_title(f"edge {e + 1}", fontsize=9)
    handles = [plt.Line2D([], [], marker="s", linestyle="", color=OP_COLORS[i],
                          label=OP_NAMES[OpKind(i)]) for i in range(N_OPS)]
    fig.legend(handles=handles, loc="lower center", ncol=N_OPS, fontsize=8)
    title = f"{dist.key} ({dist.run_count} runs)" if dist.key else \
        f"{dist.run_count} runs"
    fig.suptitle(f"Cell edge distribution: {title}", fontsize=10)
    fig.tight_layout(rect=(0, 0.08, 1, 0.95))
    fig.savefig(path)
    plt.close(fig)


def emit_timing_csv(curve: TimingCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ratio", "mean_ms", "std_ms"])
        for ratio, mean, std in curve.points:
            writer.writerow([f"{ratio:.12g}", f"{mean:.12g}", f"{std:.12g}"])


def read_timing_csv(path) -> list[tuple[float, float, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(float(r), float(m), float(s)) for r, m, s in reader]


def emit_timing_figure(curve: TimingCurve, path) -> None:
    """Search time vs. proxy ratio with error bars."""
    ratios = [p[0] for p in curve.points]
    means = [p[1] for p in curve.points]
    stds = [p[2] for p in curve.points]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(ratios, means, yerr=stds, marker="o", capsize=3)
    ax.set_xlabel("proxy ratio r")
    ax.set_ylabel("search wall clock (ms)")
    title = "Search time vs. dataset ratio"
    if curve.machine:
        title += f" ({curve.machine})"
    ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
