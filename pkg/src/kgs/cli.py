"""Command-line entry point: ``kgs <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import _kernels
from .errors import ConfigError, KGSError
from .experiments import grid_from_config, report, run_grid
from .graph import Dag, read_edge_list, write_edge_list
from .knowledge import build_knowledge, format_knowledge, read_knowledge, sample_knowledge
from .metrics import evaluate
from .scoring import read_csv
from .search import SearchConfig, run_kgs, trace_lines
from .synth import SemConfig, write_simulation

log = logging.getLogger("kgs")


def _truth_for(path, names) -> Dag:
    g, _ = read_edge_list(path, names)
    if g.undirected:
        raise KGSError(f"{path}: ground truth must be fully directed")
    return Dag(g.d, g.directed)


def cmd_discover(args) -> int:
    data = read_csv(args.data)
    constraints = read_knowledge(args.knowledge, data.names) if args.knowledge else []
    K = build_knowledge(constraints, data.d)
    config = SearchConfig(emit_trace=bool(args.trace), orient_with_knowledge=args.oriented)
    est, stats = run_kgs(data, K, config)
    write_edge_list(args.out, est, data.names)
    out = stats.as_dict()
    out["n_constraints"] = len(constraints)
    out["backend"] = _kernels.BACKEND
    if args.truth:
        out["metrics"] = evaluate(est, _truth_for(args.truth, data.names)).as_dict()
    Path(args.stats).write_text(json.dumps(out, indent=2) + "\n")
    if args.trace:
        Path(args.trace).write_text(trace_lines(stats))
    log.info("%d edges, score %.4f, %d models", est.n_edges, stats.final_score, stats.models_estimated)
    return 0


def cmd_evaluate(args) -> int:
    truth_g, names = read_edge_list(args.truth)
    if truth_g.undirected:
        raise KGSError(f"{args.truth}: ground truth must be fully directed")
    est, _ = read_edge_list(args.estimate, names)
    rep = evaluate(est, Dag(truth_g.d, truth_g.directed), strict=args.strict)
    text = json.dumps(rep.as_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    cfg = SemConfig(d=args.d, e_target=args.e, n=args.n, noise_std=args.noise_std,
                    weight_low=args.weight_low, weight_high=args.weight_high, seed=args.seed)
    meta = write_simulation(args.out_dir, cfg, args.prefix)
    log.info("wrote %s (realized edges: %d)", args.out_dir, meta["realized_edges"])
    return 0


def cmd_sample_knowledge(args) -> int:
    g, names = read_edge_list(args.truth)
    if g.undirected:
        raise KGSError(f"{args.truth}: ground truth must be fully directed")
    constraints = sample_knowledge(Dag(g.d, g.directed), args.type, args.fraction, args.seed)
    Path(args.out).write_text(format_knowledge(constraints, names))
    return 0


def cmd_bench(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text())
        grid = grid_from_config(cfg, Path(args.config).parent)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        log.error("invalid config: %s", exc)
        return 3
    if args.workers:
        grid = replace(grid, workers=args.workers)
    out_dir = args.out_dir or cfg.get("out_dir", "results")
    result = run_grid(grid, out_dir)
    if result.rows:
        sys.stdout.write(report(result.rows, args.format))
    for f in result.failures:
        log.error("cell failed: %s", f)
    return 2 if result.failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgs", description="Knowledge-guided greedy equivalence search")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("discover", help="learn a CPDAG from a CSV dataset")
    d.add_argument("--data", required=True)
    d.add_argument("--knowledge")
    d.add_argument("--truth")
    d.add_argument("--out", required=True)
    d.add_argument("--stats", required=True)
    d.add_argument("--trace", help="write per-step JSON lines here")
    d.add_argument("--oriented", action="store_true", help="output the knowledge-oriented graph")
    d.set_defaults(func=cmd_discover)

    e = sub.add_parser("evaluate", help="SHD/TPR/FDR of an estimate against a truth DAG")
    e.add_argument("--estimate", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--out")
    e.add_argument("--strict", action="store_true", help="FDR = fp / (tp + fp)")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", help="write an ER ground truth and linear-SEM data")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--e", type=float, default=None, help="expected edge count (default 2d)")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--noise-std", type=float, default=1.0)
    s.add_argument("--weight-low", type=float, default=0.5)
    s.add_argument("--weight-high", type=float, default=2.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--prefix", default="sim")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("sample-knowledge", help="sample true constraints from a ground truth")
    k.add_argument("--truth", required=True)
    k.add_argument("--type", choices=["d", "f", "u", "c"], required=True)
    k.add_argument("--fraction", type=float, required=True)
    k.add_argument("--seed", type=int, required=True)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_sample_knowledge)

    b = sub.add_parser("bench", help="run an experiment grid from a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out-dir")
    b.add_argument("--workers", type=int)
    b.add_argument("--format", choices=["json", "csv", "markdown"], default="markdown")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (KGSError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
