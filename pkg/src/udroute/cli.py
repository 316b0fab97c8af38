"""Command-line pipeline: generate, analyze, sample, train, and evaluate.

Every stage is a subcommand mapping onto one library operation, and the
``experiment`` subcommand chains them into the full protocol: select a
seed graph from candidates, subsample its shortest paths, train, then
score the learned policy against greedy forwarding on a grid of fresh
graph sizes and densities.

All randomness derives from one root seed expanded into named streams,
so any artifact can be regenerated from its embedded config alone.
Defaults follow the standard simulation parameter table.  Exit codes:
0 ok, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluate, nnet, ranking, sampling, training
from .features import FeatureKind, FeatureSet
from .graphs import (ConnectivityError, GraphParams, generate_graph, is_connected,
                     load_graph, sample_connected_graph, save_graph)
from .ranking import METRIC_DIST, METRIC_DIST_STRETCH, LinearMetric, SimilarityConfig
from .seeds import derive_seed
from .shortest_paths import SpOracle


class UsageError(Exception):
    """Bad flags, config values, or input files; exits with status 1."""


@dataclass
class ExperimentConfig:
    n_train: int = 50
    rho_train: float = 5.0
    n_test: tuple = (27, 64, 125)
    rho_test: tuple = (2.0, 3.0, 4.0, 5.0)
    radius: float = 1000.0
    features: str = "dist-stretch"      # "dist" (2 inputs) or "dist-stretch" (4)
    epsilon: float = 0.05
    phi: int = 3
    gamma: float = 1.0
    iter_sup: int = 5000
    iter_rl: int = 1000
    epi_num: int = 20
    reps: int = 20
    candidates: int = 100
    root_seed: int = 0
    normalize: bool = True
    learning_rate: float = 3e-4     # supervised
    batch: int = 32                 # supervised minibatch size
    rl_learning_rate: float = 1e-4
    rl_explore_eps: float = 0.3
    optimizer: str = "adam"
    max_attempts: int = 200
    workers: int = 1
    min_path_edges: int = 2     # training paths need a relay; 1 = plain lowest-stretch

    def feature_set(self) -> FeatureSet:
        kind = FeatureKind(self.features)
        return FeatureSet(kind, scale=self.radius if self.normalize else 1.0)

    def target_scale(self) -> float:
        return self.radius if self.normalize else 1.0

    def as_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["n_test"] = list(self.n_test)
        doc["rho_test"] = list(self.rho_test)
        return doc

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    values = {}
    if path:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            with open(path, "rb") as fh:
                values.update(tomllib.load(fh))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"bad config file {path}: {exc}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key in ("n_test", "rho_test"):
        if key in values:
            values[key] = tuple(values[key])
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}")


def _metric_for(cfg_features: str, metric_arg: str | None) -> LinearMetric:
    if metric_arg in (None, "ref"):
        return METRIC_DIST if cfg_features == "dist" else METRIC_DIST_STRETCH
    try:
        return LinearMetric(tuple(float(tok) for tok in metric_arg.split(",")))
    except ValueError:
        raise UsageError(f"bad metric weights: {metric_arg!r}")


def _read_graph(path: str):
    try:
        return load_graph(path)
    except FileNotFoundError:
        raise UsageError(f"graph file not found: {path}")
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad graph file {path}: {exc}")


def _write_manifest(path: Path, cfg: ExperimentConfig, **extra) -> None:
    doc = {"config": cfg.as_dict(), "config_hash": cfg.digest()}
    doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


# ---------------------------------------------------------------- subcommands


def cmd_gen(args, cfg: ExperimentConfig) -> int:
    params = GraphParams(args.n, args.rho, args.gen_radius, args.seed)
    if args.connected:
        g = sample_connected_graph(params, cfg.max_attempts)
    else:
        g = generate_graph(params)
    save_graph(g, args.out)
    print(f"{g.id}: {g.n} nodes, {g.edge_count()} edges, "
          f"connected={is_connected(g)} -> {args.out}")
    return 0


def cmd_sim(args, cfg: ExperimentConfig) -> int:
    g = _read_graph(args.graph)
    fset = FeatureSet(FeatureKind(args.sim_features),
                      scale=g.radius if cfg.normalize else 1.0)
    metric = _metric_for(args.sim_features, args.metric)
    sim_cfg = SimilarityConfig(tau=args.tau)
    report = ranking.sim_graph(g, metric, fset, sim_cfg)
    note = f"config_hash={cfg.digest()} metric={report.metric} tau={args.tau}"
    ranking.write_context_csv(report, args.out, note)
    if args.summary_out:
        ranking.write_summary_csv([report], args.summary_out, note)
    print(f"{g.id}: graph_sim={report.graph_sim:.4f} "
          f"({len(report.per_context)} contexts) -> {args.out}")
    return 0


def cmd_seed(args, cfg: ExperimentConfig) -> int:
    fset = cfg.feature_set()
    metric = _metric_for(cfg.features, args.metric)
    graphs, reports = [], []
    for k in range(cfg.candidates):
        seed = derive_seed(cfg.root_seed, f"seed-candidate-{k}")
        g = sample_connected_graph(
            GraphParams(cfg.n_train, cfg.rho_train, cfg.radius, seed),
            cfg.max_attempts)
        graphs.append(g)
        reports.append(ranking.sim_graph(g, metric, fset))
    sims = [r.graph_sim for r in reports]
    best = int(np.argmax(sims))
    save_graph(graphs[best], args.out)
    if args.summary_out:
        ranking.write_summary_csv(reports, args.summary_out,
                                  f"config_hash={cfg.digest()}")
    print(f"selected {graphs[best].id} with graph_sim={sims[best]:.4f} "
          f"out of {cfg.candidates} candidates -> {args.out}")
    return 0


def _subsample(g, cfg: ExperimentConfig, dest_override, graph_sim=None):
    fset = cfg.feature_set()
    metric = _metric_for(cfg.features, None)
    dest_seed = derive_seed(cfg.root_seed, "destination-choice")
    return sampling.select_subsample(g, metric, fset, cfg.phi, dest_seed,
                                     dest=dest_override, graph_sim=graph_sim,
                                     min_edges=cfg.min_path_edges)


def cmd_sample(args, cfg: ExperimentConfig) -> int:
    g = _read_graph(args.graph)
    choice = _subsample(g, cfg, args.dest)
    sp = SpOracle(g).table(choice.destination)
    ds = sampling.build_dataset(g, choice, cfg.feature_set(), sp)
    sampling.write_dataset_csv(ds, args.out,
                               f"config_hash={cfg.digest()} dest={choice.destination} "
                               f"origins={list(choice.origins)}")
    print(f"{g.id}: dest={choice.destination} origins={list(choice.origins)} "
          f"samples={len(ds)} -> {args.out}")
    return 0


def cmd_train_sup(args, cfg: ExperimentConfig) -> int:
    g = _read_graph(args.graph)
    fset = cfg.feature_set()
    choice = _subsample(g, cfg, args.dest)
    sp = SpOracle(g).table(choice.destination)
    if args.all_nodes:
        ds = sampling.build_dataset_all_nodes(g, choice.destination, fset, sp)
    else:
        ds = sampling.build_dataset(g, choice, fset, sp)
    model = nnet.init_model(fset.omega, derive_seed(cfg.root_seed, "model-init"),
                            feature_kind=fset.kind.value, feature_scale=fset.scale,
                            target_scale=cfg.target_scale())
    tc = nnet.TrainConfig(iterations=cfg.iter_sup, learning_rate=cfg.learning_rate,
                          batch=cfg.batch, optimizer=cfg.optimizer)
    model, losses = training.train_supervised(g, ds, model, tc)
    nnet.save_model(model, args.out)
    if args.manifest:
        _write_manifest(Path(args.manifest), cfg, mode="supervised", graph=g.id,
                        dest=choice.destination, origins=list(choice.origins),
                        samples=len(ds), loss_first=losses[0], loss_final=losses[-1])
    print(f"trained on {len(ds)} samples for {cfg.iter_sup} iterations: "
          f"loss {losses[0]:.6g} -> {losses[-1]:.6g}; model -> {args.out}")
    return 0


def cmd_train_rl(args, cfg: ExperimentConfig) -> int:
    g = _read_graph(args.graph)
    fset = cfg.feature_set()
    choice = _subsample(g, cfg, args.dest)
    model = nnet.init_model(fset.omega, derive_seed(cfg.root_seed, "model-init"),
                            feature_kind=fset.kind.value, feature_scale=fset.scale,
                            target_scale=cfg.target_scale())
    rl_cfg = training.RlConfig(origins=choice.origins, dest=choice.destination,
                               epi_num=cfg.epi_num, iter_num=cfg.iter_rl,
                               gamma=cfg.gamma, learning_rate=cfg.rl_learning_rate,
                               explore_eps=cfg.rl_explore_eps,
                               optimizer=cfg.optimizer)
    model, logog = training.rl_train(g, rl_cfg, fset, model)
    nnet.save_model(model, args.out)
    if args.manifest:
        _write_manifest(Path(args.manifest), cfg, mode="rl", graph=g.id,
                        dest=choice.destination, origins=list(choice.origins),
                        episodes=[{"episode": log.episode,
                                   "samples": log.sample_count,
                                   "final_loss": log.final_loss,
                                   "delivered": [p[-1] == choice.destination
                                                 for p in log.paths]}
                                  for log in logog])
    print(f"RL: {cfg.epi_num} episodes x {cfg.iter_rl} iterations, "
          f"final episode loss {logog[-1].final_loss:.6g}; model -> {args.out}")
    return 0


def cmd_eval(args, cfg: ExperimentConfig) -> int:
    g = _read_graph(args.graph)
    oracle = SpOracle(g)
    if args.policy == "gf":
        report = evaluate.apnsp_accuracy(g, evaluate.gf_router(g), cfg.epsilon,
                                         "gf", oracle)
    else:
        if not args.model:
            raise UsageError("--model is required unless --policy gf")
        model = nnet.load_model(args.model)
        fset = FeatureSet(FeatureKind(model.feature_kind), scale=model.feature_scale)
        report = evaluate.apnsp_accuracy(g, evaluate.model_router(g, model, fset),
                                         cfg.epsilon, "model", oracle)
    print(f"{g.id}: policy={report.policy} "
          f"accuracy={report.accuracy:.4f} (epsilon={cfg.epsilon})")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"config_hash": cfg.digest(), "graph": g.id,
                       "policy": report.policy, "epsilon": cfg.epsilon,
                       "accuracy": report.accuracy}, fh, indent=1)
    return 0


def cmd_experiment(args, cfg: ExperimentConfig) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fset = cfg.feature_set()
    seed_metric = METRIC_DIST   # selection ranks candidates by the distance metric
    dist_fset = FeatureSet(FeatureKind.DIST, scale=fset.scale)

    print(f"[1/4] selecting seed graph from {cfg.candidates} candidates ...")
    graphs, reports = [], []
    for k in range(cfg.candidates):
        seed = derive_seed(cfg.root_seed, f"seed-candidate-{k}")
        g = sample_connected_graph(
            GraphParams(cfg.n_train, cfg.rho_train, cfg.radius, seed),
            cfg.max_attempts)
        graphs.append(g)
        reports.append(ranking.sim_graph(g, seed_metric, dist_fset))
    sims = [r.graph_sim for r in reports]
    best = int(np.argmax(sims))
    seed_graph = graphs[best]
    save_graph(seed_graph, out / "seed_graph.json")
    ranking.write_summary_csv(reports, out / "candidate_sims.csv",
                              f"config_hash={cfg.digest()}")
    print(f"      {seed_graph.id} graph_sim={sims[best]:.4f}")

    print("[2/4] subsampling shortest paths ...")
    choice = _subsample(seed_graph, cfg, args.dest, graph_sim=sims[best])
    sp = SpOracle(seed_graph).table(choice.destination)
    ds = sampling.build_dataset(seed_graph, choice, fset, sp)
    sampling.write_dataset_csv(ds, out / "dataset.csv",
                               f"config_hash={cfg.digest()} dest={choice.destination}")
    print(f"      dest={choice.destination} origins={list(choice.origins)} "
          f"samples={len(ds)}")

    print(f"[3/4] training ({args.mode}) ...")
    model = nnet.init_model(fset.omega, derive_seed(cfg.root_seed, "model-init"),
                            feature_kind=fset.kind.value, feature_scale=fset.scale,
                            target_scale=cfg.target_scale())
    if args.mode == "supervised":
        tc = nnet.TrainConfig(iterations=cfg.iter_sup,
                              learning_rate=cfg.learning_rate,
                              batch=cfg.batch, optimizer=cfg.optimizer)
        model, losses = training.train_supervised(seed_graph, ds, model, tc)
        train_info = {"mode": "supervised", "loss_first": losses[0],
                      "loss_final": losses[-1], "samples": len(ds)}
    else:
        rl_cfg = training.RlConfig(origins=choice.origins, dest=choice.destination,
                                   epi_num=cfg.epi_num, iter_num=cfg.iter_rl,
                                   gamma=cfg.gamma, learning_rate=cfg.rl_learning_rate,
                                   explore_eps=cfg.rl_explore_eps,
                                   optimizer=cfg.optimizer)
        model, logog = training.rl_train(seed_graph, rl_cfg, fset, model)
        train_info = {"mode": "rl",
                      "episodes": [{"episode": log.episode,
                                    "samples": log.sample_count,
                                    "final_loss": log.final_loss}
                                   for log in logog]}
    nnet.save_model(model, out / "model.json")
    acc_model, acc_gf = evaluate.evaluate_cell_graph(seed_graph, model, fset,
                                                     cfg.epsilon)
    print(f"      seed-graph accuracy: model={acc_model:.4f} gf={acc_gf:.4f}")
    _write_manifest(out / "run_manifest.json", cfg, seed_graph=seed_graph.id,
                    seed_graph_sim=sims[best], dest=choice.destination,
                    origins=list(choice.origins), training=train_info,
                    seed_accuracy={"model": acc_model, "gf": acc_gf})

    print(f"[4/4] zero-shot grid {list(cfg.n_test)} x {list(cfg.rho_test)} "
          f"x {cfg.reps} reps ...")
    result = evaluate.run_experiment(
        model, fset, cfg.n_test, cfg.rho_test, cfg.reps,
        base_seed=cfg.root_seed, radius=cfg.radius, epsilon=cfg.epsilon,
        max_attempts=cfg.max_attempts, experiment_id=cfg.digest(),
        workers=cfg.workers)
    result.write_csv(out / "results.csv", f"config_hash={cfg.digest()}")
    result.write_summary_csv(out / "results_summary.csv",
                             f"config_hash={cfg.digest()}")
    for size, density, policy, mean, delta in result.summary:
        if policy == "model":
            print(f"      n={size:<4} rho={density:<3g} model={mean:.4f} "
                  f"(gf{delta:+.4f})")
    return 0


# --------------------------------------------------------------------- driver


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="udroute", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="TOML config file (flag overrides apply on top)")
    parser.add_argument("--root-seed", type=int, dest="root_seed")
    parser.add_argument("--radius", type=float)
    parser.add_argument("--features", choices=["dist", "dist-stretch"])
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--phi", type=int)
    parser.add_argument("--no-normalize", action="store_true")
    parser.add_argument("--workers", type=int)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate one unit-disk graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--radius", type=float, dest="gen_radius", default=1000.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--connected", action="store_true",
                   help="redraw with incremented seeds until connected")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sim", help="ranking-similarity distribution for one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", dest="sim_features", default="dist",
                   choices=["dist", "dist-stretch"])
    p.add_argument("--metric", help="'ref' or comma-separated weights")
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("seed", help="select the best seed graph from candidates")
    p.add_argument("--metric", help="'ref' or comma-separated weights")
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out")
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("sample", help="build the path-subsampled dataset")
    p.add_argument("--graph", required=True)
    p.add_argument("--dest", type=int, help="override the drawn destination")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train-sup", help="supervised training on oracle labels")
    p.add_argument("--graph", required=True)
    p.add_argument("--dest", type=int)
    p.add_argument("--all-nodes", action="store_true",
                   help="use every node instead of path subsampling")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_train_sup)

    p = sub.add_parser("train-rl", help="episodic RL without oracle labels")
    p.add_argument("--graph", required=True)
    p.add_argument("--dest", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_train_rl)

    p = sub.add_parser("eval", help="all-pairs accuracy of a policy on one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--model")
    p.add_argument("--policy", default="model", choices=["model", "gf"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="full pipeline: seed, sample, train, grid")
    p.add_argument("--mode", default="supervised", choices=["supervised", "rl"])
    p.add_argument("--dest", type=int)
    p.add_argument("--out-dir", default="runs/latest")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = {
            "root_seed": args.root_seed,
            "radius": args.radius,
            "features": args.features,
            "epsilon": args.epsilon,
            "phi": args.phi,
            "workers": args.workers,
        }
        if args.no_normalize:
            overrides["normalize"] = False
        cfg = load_config(args.config, overrides)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConnectivityError, nnet.NonFiniteLossError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:   # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
