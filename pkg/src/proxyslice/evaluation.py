"""Cell evaluation: train a derived genotype from scratch on the full
dataset at several channel widths and seeds, and report mean/std accuracy."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .datasets import LabeledDataset
from .nncore import Genotype, MicroNet
from .search import _SGD, gather_pool


@dataclass(frozen=True)
class EvalConfig:
    epochs: int = 20
    batch_size: int = 16
    lr: float = 0.05
    momentum: float = 0.9
    n_cells: int = 2


@dataclass
class EvalReport:
    genotype: str
    dataset: str
    epochs: int
    runs: list[dict] = field(default_factory=list)  # {width, seed, accuracy, failed}
    summary: dict = field(default_factory=dict)     # width -> {mean, std, n}

    def summarize(self) -> None:
        widths = sorted({r["width"] for r in self.runs})
        self.summary = {}
        for width in widths:
            accs = [r["accuracy"] for r in self.runs
                    if r["width"] == width and not r["failed"]]
            self.summary[str(width)] = {
                "mean": float(np.mean(accs)) if accs else float("nan"),
                "std": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
                "n": len(accs),
            }

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))

    def to_markdown(self) -> str:
        lines = [f"Genotype: `{self.genotype}`", "",
                 "| width | top-1 mean | top-1 std | runs |",
                 "| --- | --- | --- | --- |"]
        for width, stats in sorted(self.summary.items(), key=lambda kv: int(kv[0])):
            lines.append(f"| {width} | {stats['mean']:.4f} | "
                         f"{stats['std']:.4f} | {stats['n']} |")
        return "\n".join(lines)


def train_genotype(genotype: Genotype, train_ds: LabeledDataset,
                   width: int, seed: int, cfg: EvalConfig) -> MicroNet:
    """Train a fixed-genotype network from scratch; returns the trained net.

    Raises FloatingPointError if the loss goes non-finite.
    """
    xs, ys = gather_pool(train_ds, range(len(train_ds)))
    net = MicroNet(in_channels=train_ds.shape[2], channels=width,
                   n_cells=cfg.n_cells, n_classes=train_ds.n_classes,
                   seed=seed, genotype=genotype)
    opt = _SGD(net.params, cfg.lr, cfg.momentum)
    rng = np.random.default_rng(seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(xs))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss = net.loss(net.forward(xs[batch]), ys[batch])
            if not np.isfinite(loss.data):
                raise FloatingPointError("non-finite training loss")
            net.zero_grad()
            loss.backward()
            opt.step()
    return net


def top1_accuracy(net: MicroNet, ds: LabeledDataset) -> float:
    xs, ys = gather_pool(ds, range(len(ds)))
    logits = net.forward(xs)
    return float(np.mean(np.argmax(logits.data, axis=1) == ys))


def mean_train_loss(net: MicroNet, ds: LabeledDataset) -> float:
    xs, ys = gather_pool(ds, range(len(ds)))
    return float(net.loss(net.forward(xs), ys).data)


def evaluate_cell(genotype: Genotype, train_ds: LabeledDataset,
                  test_ds: LabeledDataset, widths, seeds,
                  cfg: EvalConfig | None = None) -> EvalReport:
    """Train-from-scratch evaluation over (width, seed) pairs.

    Failed runs (non-finite loss) are recorded and excluded from the stats.
    """
    if not widths:
        raise ValueError("widths must be non-empty")
    cfg = cfg or EvalConfig()
    report = EvalReport(genotype.to_string(), train_ds.name, cfg.epochs)
    for width in widths:
        for seed in seeds:
            try:
                net = train_genotype(genotype, train_ds, width, seed, cfg)
                acc = top1_accuracy(net, test_ds)
                report.runs.append({"width": width, "seed": seed,
                                    "accuracy": acc, "failed": False})
            except FloatingPointError:
                report.runs.append({"width": width, "seed": seed,
                                    "accuracy": None, "failed": True})
    report.summarize()
    return report


def compare_to_baseline(report_proxy: EvalReport,
                        report_full: EvalReport) -> list[dict]:
    """Per-width accuracy deltas (proxy minus full) with combined std."""
    if set(report_proxy.summary) != set(report_full.summary):
        raise ValueError("reports cover different channel widths")
    table = []
    for width in sorted(report_proxy.summary, key=int):
        a, b = report_proxy.summary[width], report_full.summary[width]
        table.append({
            "width": int(width),
            "delta": a["mean"] - b["mean"],
            "combined_std": float(np.hypot(a["std"], b["std"])),
        })
    return table


def write_report(report: EvalReport, json_path, md_path=None) -> None:
    Path(json_path).write_text(report.to_json() + "\n")
    if md_path is not None:
        Path(md_path).write_text(report.to_markdown() + "\n")
