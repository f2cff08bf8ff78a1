"""Command-line orchestration of the pipeline.

Commands: sample, train, generate, eval, recover, stats. Every command is
a pure function of (inputs, config, seed): outputs are byte-identical
across runs on the same platform. Exit codes: 0 success, 1 usage error,
2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import PipelineConfig, resolve_config
from .degrees import fit_degree_model, perturb_degrees, sample_degrees
from .errors import (CheckpointError, ConvergenceError, DegenerateDataError,
                     EdgeListFormatError, GenerationError, InfeasibleDegreesError,
                     MetricUndefinedError, RolloutError, SamplingError,
                     SolverScopeError, TrainingDivergedError, WalkgenError)
from .graphs import edge_set_distance, is_connected, load_edge_list, save_edge_list
from .infer import (SolveOptions, repair_connectivity, residual_objective,
                    round_weighted, solve_convex, solve_exact)
from .metrics import METRICS, error_report, statistic, write_report
from .model import (CheckpointBundle, ModelConfig, TrainingOptions, init_model,
                    load_checkpoint, save_checkpoint, train)
from .rwt import binning_stats, build_training_set, start_function_set
from .samplers import (sample_barabasi_albert, sample_chung_lu, sample_sbm,
                       sample_watts_strogatz)
from .trajectories import build_diagnostic_system, generate_trajectories


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_json(path, doc):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _parallel_map(fn, items, workers):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _graph_seed(base, index):
    return int(base) + index


def _load_corpus(directory):
    paths = sorted(Path(directory).glob("*.txt"))
    if not paths:
        raise ValueError(f"no edge-list (*.txt) files in {directory}")
    return [load_edge_list(p) for p in paths]


def _solver_options(config: PipelineConfig, seed) -> SolveOptions:
    return SolveOptions(max_iters=config.solver_max_iters,
                        learning_rate=config.solver_learning_rate,
                        degree_penalty=config.degree_penalty,
                        huber_delta=config.huber_delta,
                        tolerance=config.solver_tolerance,
                        seed=seed)


def cmd_sample(args, config: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.seed

    if args.family == "sbm":
        fractions = tuple(float(tok) for tok in args.fractions.split(","))
        params = {"n": args.n, "fractions": list(fractions), "p": args.p, "q": args.q}
        make = lambda s: sample_sbm(args.n, fractions, args.p, args.q, s)
    elif args.family == "ws":
        params = {"n": args.n, "ring_neighbors": args.ring_neighbors,
                  "rewire_prob": args.rewire_prob}
        make = lambda s: sample_watts_strogatz(args.n, args.ring_neighbors,
                                               args.rewire_prob, s)
    elif args.family == "ba":
        params = {"n": args.n, "edges_per_node": args.edges_per_node}
        make = lambda s: sample_barabasi_albert(args.n, args.edges_per_node, s)
    elif args.family == "chunglu":
        source = load_edge_list(args.source_graph)
        params = {"source_graph": str(args.source_graph), "n": source.n}
        target = source.degrees
        make = lambda s: sample_chung_lu(target, s)
    else:
        raise UsageError(f"unknown family {args.family!r}")

    def one(index):
        s = _graph_seed(seed, index)
        g = make(s)
        name = f"g{index:04d}.txt"
        save_edge_list(g, out / name)
        return {"file": name, "seed": s, "n": g.n, "m": g.m, "connected": is_connected(g)}

    records = _parallel_map(one, range(args.count), config.workers)
    _write_json(out / "manifest.json", {
        "command": "sample", "family": args.family, "params": params,
        "count": args.count, "seed": seed, "graphs": records,
        "config": config.to_dict(),
    })
    return 0


def cmd_train(args, config: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graphs = _load_corpus(args.corpus)

    fns = start_function_set(config.exponents)
    pairs = build_training_set(graphs, fns, config.alpha, config.steps)
    stats = binning_stats(pairs, config.bins_per_sigma)
    model_config = ModelConfig(dim=config.model_dim, n_layers=config.model_layers,
                               n_heads=config.model_heads, ffn_dim=config.model_ffn_dim,
                               n_bins=stats.n_bins, n_functions=len(fns),
                               max_step=config.steps, seed=config.seed)
    params = init_model(model_config)
    hyper = TrainingOptions(learning_rate=config.learning_rate, epochs=config.epochs,
                            batch_size=config.batch_size, seed=config.seed)
    params, report = train(params, pairs, stats, hyper)

    bundle = CheckpointBundle(params=params, stats=stats, exponents=config.exponents,
                              alpha=config.alpha, steps=config.steps)
    save_checkpoint(out / "checkpoint.json", bundle)
    with open(out / "loss.csv", "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "holdout_mse"])
        for epoch, train_mse in enumerate(report.train_mse):
            writer.writerow([epoch, repr(train_mse), repr(report.holdout_mse[epoch + 1])])
    _write_json(out / "train_report.json", {
        "command": "train", "corpus": str(args.corpus), "n_graphs": len(graphs),
        "n_pairs": len(pairs), "epochs_run": report.epochs_run,
        "initial_holdout_mse": report.holdout_mse[0],
        "final_holdout_mse": report.holdout_mse[-1],
        "best_epoch": report.best_epoch,
        "best_holdout_mse": report.best_holdout_mse,
        "param_checksum": report.param_checksum,
        "binning": {"mean": stats.mean, "std": stats.std, "n_bins": stats.n_bins},
        "config": config.to_dict(),
    })
    return 0


def _degrees_for_generation(spec_str, index, seed, flip_fraction):
    """Resolve one generated degree sequence from a degree-source string.

    Formats: 'perturb:<dir>', 'powerlaw:<dir>', 'lognormal:<dir>'.
    """
    if ":" not in spec_str:
        raise UsageError("degree source must be '<mode>:<graph_dir>' "
                         "with mode perturb|powerlaw|lognormal")
    mode, directory = spec_str.split(":", 1)
    corpus = _load_corpus(directory)
    rng = np.random.default_rng(_graph_seed(seed, index))
    pick = corpus[int(rng.integers(len(corpus)))]
    if mode == "perturb":
        return perturb_degrees(pick, flip_fraction, _graph_seed(seed, index))
    if mode in ("powerlaw", "lognormal"):
        family = "power-law" if mode == "powerlaw" else "lognormal"
        model = fit_degree_model(corpus, family)
        return sample_degrees(model, pick.n, _graph_seed(seed, index))
    raise UsageError(f"unknown degree source mode {mode!r}")


def cmd_generate(args, config: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = load_checkpoint(args.checkpoint)
    seed = config.seed

    def one(index):
        name = f"g{index:04d}.txt"
        record = {"file": name, "seed": _graph_seed(seed, index), "error": None}
        try:
            degrees = _degrees_for_generation(args.degree_source, index, seed,
                                              config.flip_fraction)
            system = generate_trajectories(bundle, degrees, seed=_graph_seed(seed, index))
            n = system.n
            if n <= config.exact_n_limit:
                graph = solve_exact(system, n_limit=config.exact_n_limit)
                solver = "exact"
                degree_error = float(np.abs(graph.degrees / degrees - 1.0).mean())
            else:
                weighted = solve_convex(system, _solver_options(config, _graph_seed(seed, index)))
                rounding = round_weighted(weighted, degrees)
                graph = rounding.graph
                solver = "convex"
                degree_error = rounding.degree_error
            if config.ensure_connected:
                graph = repair_connectivity(graph, seed=_graph_seed(seed, index))
            save_edge_list(graph, out / name)
            record.update({
                "n": n, "m": graph.m, "solver": solver,
                "residual_objective": residual_objective(graph, system),
                "degree_error": degree_error,
                "connected": is_connected(graph),
            })
        except (WalkgenError, ValueError, np.linalg.LinAlgError) as exc:
            record["error"] = f"{type(exc).__name__}: {exc}"
        return record

    records = _parallel_map(one, range(args.count), config.workers)
    _write_json(out / "manifest.json", {
        "command": "generate", "checkpoint": str(args.checkpoint),
        "degree_source": args.degree_source, "count": args.count, "seed": seed,
        "graphs": records, "config": config.to_dict(),
    })
    return 0


def cmd_eval(args, config: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = tuple(args.metrics.split(",")) if args.metrics else METRICS
    for metric in metrics:
        if metric not in METRICS:
            raise UsageError(f"unknown metric {metric!r}; options: {', '.join(METRICS)}")
    report = error_report(args.gen, args.test, metrics, config.seed)
    doc = report.to_json_dict()
    doc["config"] = config.to_dict()
    _write_json(out / "report.json", doc)
    write_report(report, out / "report_plain.json", out / "report.csv")
    return 0


def cmd_recover(args, config: PipelineConfig) -> int:
    g = load_edge_list(args.graph)
    system = build_diagnostic_system(g, args.n_starts, config.alpha, config.steps,
                                     seed=config.seed)
    if args.solver == "exact":
        recovered = solve_exact(system, n_limit=config.exact_n_limit)
        rounding_error = 0.0
    else:
        weighted = solve_convex(system, _solver_options(config, config.seed))
        rounding = round_weighted(weighted, g.degrees)
        recovered = rounding.graph
        rounding_error = rounding.degree_error
    doc = {
        "command": "recover", "graph": str(args.graph), "n": g.n,
        "n_starts": args.n_starts, "solver": args.solver,
        "hamming_distance": edge_set_distance(g, recovered),
        "residual_truth": residual_objective(g, system),
        "residual_recovered": residual_objective(recovered, system),
        "degree_error": rounding_error,
        "seed": config.seed, "config": config.to_dict(),
    }
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        _write_json(args.out, doc)
    else:
        json.dump(doc, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    return 0


def cmd_stats(args, config: PipelineConfig) -> int:
    g = load_edge_list(args.graph)
    metrics = tuple(args.metrics.split(",")) if args.metrics else METRICS
    doc = {"command": "stats", "graph": str(args.graph), "n": g.n, "m": g.m,
           "connected": is_connected(g), "seed": config.seed,
           "metrics": {}, "config": config.to_dict()}
    for metric in metrics:
        if metric not in METRICS:
            raise UsageError(f"unknown metric {metric!r}; options: {', '.join(METRICS)}")
        vec = statistic(g, metric, config.seed)
        doc["metrics"][metric] = {"values": vec.values.tolist(), "excluded": vec.excluded}
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        _write_json(args.out, doc)
    else:
        json.dump(doc, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="walkgen",
                     description="Learn walk-trajectory patterns and generate graphs")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--workers", type=int, default=None, help="parallel workers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a corpus of graphs")
    p.add_argument("--family", required=True, choices=["sbm", "ws", "ba", "chunglu"])
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--fractions", default="0.5,0.3,0.2")
    p.add_argument("--p", type=float, default=0.8)
    p.add_argument("--q", type=float, default=0.3)
    p.add_argument("--ring-neighbors", type=int, default=4)
    p.add_argument("--rewire-prob", type=float, default=0.3)
    p.add_argument("--edges-per-node", type=int, default=2)
    p.add_argument("--source-graph", default=None, help="degree source for chunglu")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a reverse predictor on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)

    p = sub.add_parser("generate", help="generate graphs from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, default=40)
    p.add_argument("--degree-source", required=True,
                   help="perturb:<dir> | powerlaw:<dir> | lognormal:<dir>")
    p.add_argument("--out", required=True)
    p.add_argument("--ensure-connected", action="store_true", default=None)

    p = sub.add_parser("eval", help="score generated graphs against test graphs")
    p.add_argument("--gen", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--metrics", default=None, help="comma-separated subset")
    p.add_argument("--out", required=True)

    p = sub.add_parser("recover", help="diagnostic: recover a known graph from its own walks")
    p.add_argument("--graph", required=True)
    p.add_argument("--n-starts", type=int, default=10)
    p.add_argument("--solver", choices=["exact", "convex"], default="exact")
    p.add_argument("--exact-n-limit", type=int, default=None,
                   help="size cap for the exact solver (clean diagnostic "
                        "systems tolerate a higher cap than generation)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("stats", help="dump statistic vectors for one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--metrics", default=None)
    p.add_argument("--out", default=None)
    return parser


_COMMANDS = {
    "sample": cmd_sample,
    "train": cmd_train,
    "generate": cmd_generate,
    "eval": cmd_eval,
    "recover": cmd_recover,
    "stats": cmd_stats,
}

_DATA_ERRORS = (EdgeListFormatError, CheckpointError, DegenerateDataError,
                MetricUndefinedError, InfeasibleDegreesError, GenerationError,
                SamplingError, FileNotFoundError, NotADirectoryError, ValueError)
_NUMERICAL_ERRORS = (TrainingDivergedError, ConvergenceError, RolloutError,
                     np.linalg.LinAlgError)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        flag_overrides = {"seed": args.seed, "workers": args.workers}
        for key in ("alpha", "steps", "epochs", "learning_rate", "ensure_connected",
                    "exact_n_limit"):
            if hasattr(args, key):
                flag_overrides[key] = getattr(args, key)
        config = resolve_config(args.config, flag_overrides)
        if args.command == "sample" and args.family == "chunglu" and not args.source_graph:
            raise UsageError("chunglu sampling needs --source-graph")
        return _COMMANDS[args.command](args, config)
    except (UsageError, SolverScopeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
