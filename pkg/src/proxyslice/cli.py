"""proxyslice command line: sample / score / search / eval / analyze / pipeline.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import analysis, evaluation, sampling, scorers
from .datasets import (DataFormatError, LabeledDataset, parse_cifar,
                       read_proxy, synth_blobs, write_proxy)
from .nncore import Genotype
from .search import NumericFailure, SearchConfig, run_search

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
METHODS = ("rs", "cc-rs", "km-or", "cc-or", "ae", "tl")


class UsageError(ValueError):
    pass


def resolve_data_dir(arg: str | None) -> Path:
    path = arg or os.environ.get("PROXYSLICE_DATA_DIR")
    if path is None:
        raise UsageError("no data directory: pass --data-dir or set "
                         "PROXYSLICE_DATA_DIR")
    return Path(path)


def load_dataset(spec: str, data_dir: str | None) -> LabeledDataset:
    """Resolve a dataset spec: `cifar10`, `cifar100`, or
    `synth:classes=C,per_class=P,dim=D,spread=S,seed=N`."""
    if spec.startswith("synth:"):
        kv = dict(part.split("=") for part in spec[len("synth:"):].split(","))
        return synth_blobs(int(kv.get("classes", 4)),
                           int(kv.get("per_class", 40)),
                           int(kv.get("dim", 32)),
                           float(kv.get("spread", 0.1)),
                           int(kv.get("seed", 0)))
    if spec in ("cifar10", "cifar100"):
        root = resolve_data_dir(data_dir)
        names = (["data_batch_%d.bin" % i for i in range(1, 6)]
                 if spec == "cifar10" else ["train.bin"])
        raw = b""
        for name in names:
            fp = root / name
            if not fp.exists():
                raise DataFormatError(f"missing dataset file {fp}")
            raw += fp.read_bytes()
        return parse_cifar(raw, spec)
    raise UsageError(f"unknown dataset spec {spec!r}")


def _sample(ds: LabeledDataset, method: str, ratio: float, seed: int,
            k: int | None, direction: str, scores_file: str | None):
    if method == "rs":
        return sampling.sample_random(ds, ratio, seed)
    if method == "cc-rs":
        return sampling.sample_cc_random(ds, ratio, seed)
    if method == "km-or":
        return sampling.sample_km_or(ds, ratio, k=k, seed=seed)
    if method == "cc-or":
        return sampling.sample_cc_or(ds, ratio)
    if method in ("ae", "tl"):
        if method == "ae":
            rank = min(k or 32, ds.dim)
            scorer = scorers.fit_reconstruction(ds, rank, seed)
            vec = scorers.score(scorer, ds)
        else:
            if scores_file is None:
                raise UsageError("method tl requires --scores FILE")
            vec = scorers.load_scores(scores_file, ds)
        dirn = "keep_lowest" if direction == "lowest" else "keep_highest"
        return sampling.sample_by_score(ds, vec, ratio, dirn, method=method,
                                        seed=seed)
    raise UsageError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")


def cmd_sample(args) -> int:
    ds = load_dataset(args.dataset, args.data_dir)
    proxy = _sample(ds, args.method, args.ratio, args.seed, args.k,
                    args.direction, args.scores)
    write_proxy(proxy, args.out)
    print(f"wrote {args.out}: {len(proxy)} / {len(ds)} indices "
          f"({args.method}, r={args.ratio}, seed={args.seed})")
    return EXIT_OK


def cmd_score(args) -> int:
    ds = load_dataset(args.dataset, args.data_dir)
    rank = min(args.rank, ds.dim)
    scorer = scorers.fit_reconstruction(ds, rank, args.seed)
    vec = scorers.score(scorer, ds)
    scorers.write_scores(vec, args.out)
    print(f"wrote {args.out}: {len(vec.scores)} reconstruction scores "
          f"(rank={rank})")
    return EXIT_OK


def _search_config(args, overrides: dict | None = None) -> SearchConfig:
    cfg: dict = {}
    if args.config:
        with open(args.config, "rb") as fh:
            cfg.update(tomllib.load(fh).get("search", {}))
    if overrides:
        cfg.update(overrides)
    cfg.setdefault("algorithm", args.algo)
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        return SearchConfig(**cfg)
    except TypeError as exc:
        raise UsageError(f"bad search config: {exc}") from exc


def cmd_search(args) -> int:
    ds = load_dataset(args.dataset, args.data_dir)
    proxy = read_proxy(args.proxy, ds) if args.proxy else None
    cfg = _search_config(args)
    log = run_search(ds, cfg, proxy)
    log.write_jsonl(args.log)
    print(f"wrote {args.log}: {cfg.epochs} epochs, genotype "
          f"{log.final_genotype}")
    return EXIT_OK


def cmd_eval(args) -> int:
    train_ds = load_dataset(args.dataset, args.data_dir)
    test_ds = (load_dataset(args.test_dataset, args.data_dir)
               if args.test_dataset else train_ds)
    genotype = Genotype.from_string(args.genotype)
    widths = [int(w) for w in args.widths.split(",")]
    seeds = list(range(args.seeds))
    cfg = evaluation.EvalConfig(epochs=args.epochs)
    report = evaluation.evaluate_cell(genotype, train_ds, test_ds, widths,
                                      seeds, cfg)
    md_path = Path(args.out).with_suffix(".md")
    evaluation.write_report(report, args.out, md_path)
    print(f"wrote {args.out} and {md_path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    paths = sorted(glob.glob(args.logs))
    if not paths:
        raise UsageError(f"no logs match {args.logs!r}")
    logs = [analysis.SearchLog.read_jsonl(p) for p in paths]
    if args.what == "edges":
        dist = analysis.edge_distribution(analysis.genotypes_from_logs(logs))
        if args.out_csv:
            analysis.emit_distribution_csv(dist, args.out_csv)
        if args.out_fig:
            analysis.emit_distribution_figure(dist, args.out_fig)
    else:
        curve = analysis.timing_curve(logs)
        if args.out_csv:
            analysis.emit_timing_csv(curve, args.out_csv)
        if args.out_fig:
            analysis.emit_timing_figure(curve, args.out_fig)
    wrote = [p for p in (args.out_csv, args.out_fig) if p]
    print(f"analyzed {len(logs)} logs -> {', '.join(wrote)}")
    return EXIT_OK


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_pipeline(args) -> int:
    with open(args.config, "rb") as fh:
        cfg = tomllib.load(fh)
    out_dir = Path(args.out_dir or cfg.get("output_dir", "runs"))
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))

    ds = load_dataset(cfg["dataset"], args.data_dir)
    samp = cfg.get("sampling", {})
    proxy = _sample(ds, samp.get("method", "rs"), float(samp.get("ratio", 0.5)),
                    seed, samp.get("k"), samp.get("direction", "lowest"),
                    samp.get("scores"))
    proxy_path = out_dir / "proxy.json"
    write_proxy(proxy, proxy_path)

    search_cfg = SearchConfig(seed=seed, **cfg.get("search", {}))
    log = run_search(ds, search_cfg, proxy)
    log_path = out_dir / "search.jsonl"
    log.write_jsonl(log_path)

    ev = cfg.get("eval", {})
    genotype = Genotype.from_string(log.final_genotype)
    report = evaluation.evaluate_cell(
        genotype, ds, ds,
        widths=[int(w) for w in ev.get("widths", [4, 8])],
        seeds=list(range(int(ev.get("seeds", 3)))),
        cfg=evaluation.EvalConfig(epochs=int(ev.get("epochs", 5))))
    report_path = out_dir / "eval.json"
    evaluation.write_report(report, report_path, out_dir / "eval.md")

    dist = analysis.edge_distribution([genotype], key=search_cfg.algorithm)
    dist_csv = out_dir / "edges.csv"
    dist_fig = out_dir / "edges.svg"
    analysis.emit_distribution_csv(dist, dist_csv)
    analysis.emit_distribution_figure(dist, dist_fig)

    manifest = {
        "config": cfg,
        "seed": seed,
        "dataset_hash": ds.content_hash(),
        "genotype": log.final_genotype,
        "artifacts": {p.name: _file_hash(p) for p in
                      (proxy_path, log_path, report_path, dist_csv)},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"pipeline complete in {out_dir}: proxy.json, search.jsonl, "
          f"eval.json, edges.csv, edges.svg, manifest.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxyslice",
        description="Proxy-dataset sampling and desk-scale cell search")
    parser.add_argument("--data-dir", default=None,
                        help="dataset directory (or PROXYSLICE_DATA_DIR)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="derive a proxy index from a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--direction", choices=["lowest", "highest"],
                   default="lowest")
    p.add_argument("--scores", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("score", help="fit the reconstruction scorer")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", choices=["ae"], default="ae")
    p.add_argument("--rank", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("search", help="run cell search on a proxy")
    p.add_argument("--dataset", required=True)
    p.add_argument("--algo", choices=["darts1", "gdas", "random"],
                   default="darts1")
    p.add_argument("--proxy", default=None)
    p.add_argument("--config", default=None, help="TOML with a [search] table")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="train a genotype from scratch")
    p.add_argument("--dataset", required=True)
    p.add_argument("--test-dataset", default=None)
    p.add_argument("--genotype", required=True)
    p.add_argument("--widths", default="4,8,16")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="aggregate search logs")
    p.add_argument("--logs", required=True, help="glob of .jsonl search logs")
    p.add_argument("--what", choices=["edges", "timing"], required=True)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-fig", default=None,
                   help="figure path (.svg or any matplotlib format)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("pipeline", help="sample -> search -> eval -> analyze")
    p.add_argument("--config", required=True, help="TOML pipeline config")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, FileNotFoundError, KeyError) as exc:
        print(f"{args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericFailure, FloatingPointError) as exc:
        print(f"{args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
