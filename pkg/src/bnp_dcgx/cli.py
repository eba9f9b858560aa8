"""Command-line entry points: simulate, fit, predict, export-graph, evaluate."""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .errors import BNPDCGxError, InvalidConfig, ValidationError
from .evaluate import curve_recovery, drop_corner, scenario1_metrics, slice_grid
from .model import Hyperparams
from .predict import fitted_graphs, predict_many
from .simulate import GroundTruth, gen_scenario1, gen_scenario2, scenario2_B
from .stability import is_stable
from .tempering import run_tempered

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SAMPLER = 0, 2, 3, 4

PATH_KEYS = ("expr_csv", "coords_csv", "out_dir")


@dataclass
class RunConfig:
    hp: Hyperparams = field(default_factory=Hyperparams)
    expr_csv: Optional[str] = None
    coords_csv: Optional[str] = None
    out_dir: Optional[str] = None
    points: list = field(default_factory=list)
    grid: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        paths = {k: d.pop(k) for k in PATH_KEYS if k in d}
        points = d.pop("points", [])
        grid = d.pop("grid", None)
        return cls(hp=Hyperparams.from_dict(d), points=list(points), grid=grid, **paths)


def _load_config(args, base: Optional[dict] = None) -> RunConfig:
    d = dict(base or {})
    if getattr(args, "config", None):
        cfg = io.read_json(args.config)
        if not isinstance(cfg, dict):
            raise InvalidConfig("config must be a JSON object")
        d.update(cfg)
    overrides = {
        "seed": getattr(args, "seed", None),
        "n_iter": getattr(args, "n_iter", None),
        "n_burn": getattr(args, "n_burn", None),
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "strict_paper_det", False):
        d["strict_paper_det"] = True
    if getattr(args, "include_x_in_swap", False):
        d["include_x_in_swap"] = True
    try:
        return RunConfig.from_dict(d)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc


def _data_paths(args, cfg: RunConfig):
    expr = args.expr or cfg.expr_csv
    coords = args.coords or cfg.coords_csv
    if not expr or not coords:
        raise InvalidConfig("both --expr and --coords are required")
    return expr, coords


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _trace_paths(trace_arg) -> tuple[Path, Path]:
    p = Path(trace_arg)
    if p.is_dir():
        return p / "trace.jsonl", p / "meta.json"
    return p, p.with_name("meta.json")


def _fit_hyperparams(meta_path: Path) -> dict:
    if meta_path.exists():
        return io.read_json(meta_path).get("hyperparams", {})
    return {}


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    seed = cfg.hp.seed
    if args.scenario == 1:
        data, truth = gen_scenario1(n_per_cluster=args.n or 250, seed=seed)
    else:
        data, truth = gen_scenario2(n=args.n or 800, seed=seed)
    out = _out_dir(args, cfg)
    io.write_dataset(out, data)
    io.write_json(out / "truth.json", truth.to_json())
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    data = io.read_dataset(*_data_paths(args, cfg))
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    trace = run_tempered(data, cfg.hp)
    wall = time.perf_counter() - t0
    bad = sum(not is_stable(c.B, cfg.hp.eps_stab) for s in trace.samples for c in s.clusters)
    meta = dict(trace.meta)
    meta["config"] = {"hyperparams": cfg.hp.to_dict(),
                      "expr_csv": str(args.expr or cfg.expr_csv),
                      "coords_csv": str(args.coords or cfg.coords_csv)}
    meta["unstable_retained"] = int(bad)
    meta["gene_names"] = list(data.gene_names or [])
    io.write_trace(out / "trace.jsonl", trace)
    io.write_json(out / "meta.json", meta)
    print(f"fit: {len(trace.samples)} samples in {wall:.1f}s", file=sys.stderr)
    return EXIT_OK


def _query_points(args, cfg: RunConfig, q: int) -> np.ndarray:
    pts = [io.parse_point(s, q) for s in (args.at or [])]
    pts += [np.asarray(p, dtype=float) for p in cfg.points]
    spec = args.grid or cfg.grid
    if spec:
        pts += list(io.parse_grid(spec, q))
    if not pts:
        raise InvalidConfig("no query points: use --at or --grid")
    return np.array(pts)


def cmd_predict(args) -> int:
    trace_path, meta_path = _trace_paths(args.trace)
    cfg = _load_config(args, _fit_hyperparams(meta_path))
    data = io.read_dataset(*_data_paths(args, cfg))
    trace = io.read_trace(trace_path, meta_path)
    X_new = _query_points(args, cfg, data.q)
    preds = predict_many(X_new, trace, data, cfg.hp, seed=cfg.hp.seed)
    doc = {"seed": cfg.hp.seed, "n_samples": len(trace.samples),
           "gene_names": list(data.gene_names or []),
           "predictions": [p.to_json(x) for x, p in zip(X_new, preds)]}
    out = _out_dir(args, cfg)
    io.write_json(out / "predictions.json", doc)
    return EXIT_OK


def cmd_export_graph(args) -> int:
    """Per-point or per-unit DOT graphs plus ``union.dot``.

    The union keeps every edge selected somewhere, drawn with the mean
    inclusion probability over points (or units) as its weight.
    """
    cfg = _load_config(args)
    thr = args.threshold
    if not 0.0 < thr < 1.0:
        raise InvalidConfig("--threshold must lie in (0, 1)")
    graphs = {}
    if args.predictions:
        doc = io.read_json(args.predictions)
        probs = np.array([r["edge_prob"] for r in doc["predictions"]], dtype=float)
        names = doc.get("gene_names") or [f"g{j + 1}" for j in range(probs.shape[1])]
        for k, pr in enumerate(probs):
            graphs[f"point_{k:04d}"] = pr
        selected = probs >= thr
    elif args.trace:
        trace_path, _ = _trace_paths(args.trace)
        data = io.read_dataset(*_data_paths(args, cfg))
        fg = fitted_graphs(io.read_trace(trace_path), data, thr)
        probs = fg.unit_prob
        names = list(data.gene_names or [f"g{j + 1}" for j in range(data.p)])
        for i in args.units or []:
            if not 0 <= i < data.n:
                raise InvalidConfig(f"unit {i} out of range")
            graphs[f"unit_{i:04d}"] = probs[i]
        selected = fg.unit_edges
    else:
        raise InvalidConfig("give --predictions or --trace")
    out = _out_dir(args, cfg)
    for name, pr in graphs.items():
        (out / f"{name}.dot").write_text(io.to_dot(pr, names, thr, name))
    union = np.where(selected.any(axis=0), probs.mean(axis=0), 0.0)
    (out / "union.dot").write_text(io.to_dot(union, names, 0.0, "union"))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    trace_path, meta_path = _trace_paths(args.trace)
    cfg = _load_config(args, _fit_hyperparams(meta_path))
    data = io.read_dataset(*_data_paths(args, cfg))
    trace = io.read_trace(trace_path, meta_path)
    truth = GroundTruth.from_json(io.read_json(args.truth))
    doc = {"scenario": truth.scenario, "threshold": args.threshold,
           "mcc_definition": "square-root denominator"}
    if truth.scenario == 1:
        doc.update(scenario1_metrics(trace, data, truth.true_xi, truth.edge_matrices(),
                                     args.threshold))
    else:
        grid = drop_corner(slice_grid())
        rec = curve_recovery(trace, scenario2_B, grid, data, cfg.hp, seed=cfg.hp.seed)
        doc.update({"rmse": rec.rmse, "coverage": rec.coverage, "n_grid": int(len(grid))})
    out = _out_dir(args, cfg)
    io.write_json(out / "metrics.json", doc)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bnp-dcgx", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="JSON file of hyperparameters and paths")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        if data:
            p.add_argument("--expr", help="expression CSV (header of gene names)")
            p.add_argument("--coords", help="covariate CSV (header x1..xq)")

    p = sub.add_parser("simulate", help="write a synthetic dataset and its ground truth")
    common(p, data=False)
    p.add_argument("--scenario", type=int, choices=(1, 2), required=True)
    p.add_argument("--n", type=int, help="units per cluster (scenario 1) or in total (scenario 2)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the tempered sampler and write trace.jsonl and meta.json")
    common(p)
    p.add_argument("--n-iter", type=int)
    p.add_argument("--n-burn", type=int)
    p.add_argument("--strict-paper-det", action="store_true")
    p.add_argument("--include-x-in-swap", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="partition-averaged B at new covariate points")
    common(p)
    p.add_argument("--trace", required=True, help="fit output directory or trace.jsonl")
    p.add_argument("--at", action="append", help="comma-separated point, repeatable")
    p.add_argument("--grid", help='e.g. "x1=0:1:0.1 at x2=0.5"; join several with ";"')
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-graph", help="DOT files weighted by inclusion probability")
    common(p)
    p.add_argument("--predictions", help="predictions.json from the predict command")
    p.add_argument("--trace", help="fit output directory, for per-unit graphs")
    p.add_argument("--units", type=int, nargs="*", help="unit indices to export (0-based)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_export_graph)

    p = sub.add_parser("evaluate", help="recovery metrics against a ground-truth file")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BNPDCGxError as exc:
        print(f"sampler error: {exc}", file=sys.stderr)
        return EXIT_SAMPLER


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
