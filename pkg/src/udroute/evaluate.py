"""Routing policy execution, near-shortest-path scoring, and the test grid.

A routed pair (O, D) counts as a hit when the walk delivers and its
length stays within the stretch-scaled margin of the shortest path:

    d_p / d_sp <= zeta * (1 + epsilon),   zeta = d_sp / d_e.

Graph accuracy averages the hit indicator over all ordered pairs; the
O == D pairs are counted as hits by convention so the denominator is
|V|^2.  Greedy forwarding and learned policies run under identical walk
semantics (no revisits, lowest-id ties), so their hop sequences are
directly comparable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSet
from .graphs import Graph, GraphParams, sample_connected_graph
from .nnet import MlpModel
from .rollout import greedy_walk, model_scorer
from .seeds import derive_seed
from .shortest_paths import SpOracle, SpTable, euclid

MODEL_POLICY = "model"
GF_POLICY = "gf"


@dataclass(frozen=True)
class RoutingOutcome:
    origin: int
    dest: int
    hops: tuple
    delivered: bool
    length: float          # +inf when not delivered


@dataclass
class AccuracyReport:
    graph_id: str
    policy: str
    accuracy: float
    epsilon: float
    outcomes: list = field(default_factory=list)


def _outcome(g: Graph, hops, O: int, D: int) -> RoutingOutcome:
    delivered = hops[-1] == D
    if delivered:
        length = 0.0
        for a, b in zip(reversed(hops[:-1]), reversed(hops[1:])):
            length = g.edge_weight(a, b) + length
    else:
        length = math.inf
    return RoutingOutcome(origin=O, dest=D, hops=tuple(hops),
                          delivered=delivered, length=length)


def route_policy(g: Graph, model: MlpModel, fset: FeatureSet, O: int, D: int,
                 max_hops: int | None = None) -> RoutingOutcome:
    """Walk by taking the neighbor with the largest predicted Q-value."""
    hops = greedy_walk(g, model_scorer(g, model, fset, O, D), O, D, max_hops)
    return _outcome(g, hops, O, D)


def greedy_forwarding(g: Graph, O: int, D: int,
                      max_hops: int | None = None) -> RoutingOutcome:
    """Walk to the unvisited neighbor closest (in the plane) to the destination."""
    coords = g.coords

    def score(v, candidates):
        dx = coords[candidates, 0] - coords[D, 0]
        dy = coords[candidates, 1] - coords[D, 1]
        return -np.sqrt(dx * dx + dy * dy)

    return _outcome(g, greedy_walk(g, score, O, D, max_hops), O, D)


def eta(g: Graph, sp: SpTable, outcome: RoutingOutcome, epsilon: float) -> int:
    """1 iff the outcome delivered within the stretch-scaled margin."""
    if not outcome.delivered:
        return 0
    dsp = float(sp.dist[outcome.origin])
    de = euclid(g.coords, outcome.origin, outcome.dest)
    if de == 0.0:
        return 1
    zeta = dsp / de
    return 1 if outcome.length / dsp <= zeta * (1.0 + epsilon) else 0


def oracle_route(g: Graph, sp: SpTable, O: int) -> RoutingOutcome:
    """Outcome that follows the shortest-path table exactly (reference policy)."""
    hops = [O]
    while hops[-1] != sp.dest:
        hops.append(sp.pred[hops[-1]])
    return _outcome(g, hops, O, sp.dest)


def apnsp_accuracy(g: Graph, route, epsilon: float = 0.05, policy: str = "",
                   oracle: SpOracle | None = None,
                   keep_outcomes: bool = False) -> AccuracyReport:
    """Accuracy of ``route(sp, O, D) -> RoutingOutcome`` over all ordered pairs.

    ``route`` receives the shortest-path table of D so oracle-style
    policies can reuse it; most policies ignore it.
    """
    oracle = oracle or SpOracle(g)
    report = AccuracyReport(graph_id=g.id, policy=policy, accuracy=0.0,
                            epsilon=epsilon)
    hits = g.n                      # (O, O) pairs count as hits by convention
    for D in range(g.n):
        sp = oracle.table(D)
        for O in range(g.n):
            if O == D:
                continue
            outcome = route(sp, O, D)
            hits += eta(g, sp, outcome, epsilon)
            if keep_outcomes:
                report.outcomes.append(outcome)
    report.accuracy = hits / (g.n * g.n)
    return report


def model_router(g: Graph, model: MlpModel, fset: FeatureSet):
    return lambda sp, O, D: route_policy(g, model, fset, O, D)


def gf_router(g: Graph):
    return lambda sp, O, D: greedy_forwarding(g, O, D)


@dataclass
class ExperimentResult:
    experiment_id: str
    rows: list = field(default_factory=list)     # (size, density, rep, seed, policy, accuracy)
    summary: list = field(default_factory=list)  # (size, density, policy, mean, gf_delta)

    def cell_mean(self, size, density, policy) -> float:
        vals = [acc for s, d, _, _, p, acc in self.rows
                if s == size and d == density and p == policy]
        return float(np.mean(vals))

    def write_csv(self, path, header_comment: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["experiment_id", "size", "density", "rep",
                             "graph_seed", "policy", "accuracy"])
            for size, density, rep, seed, policy, acc in self.rows:
                writer.writerow([self.experiment_id, size, density, rep, seed,
                                 policy, f"{acc:.10g}"])

    def write_summary_csv(self, path, header_comment: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["experiment_id", "size", "density", "policy",
                             "mean_accuracy", "delta_vs_gf"])
            for size, density, policy, mean, delta in self.summary:
                writer.writerow([self.experiment_id, size, density, policy,
                                 f"{mean:.10g}", f"{delta:.10g}"])


def evaluate_cell_graph(g: Graph, model: MlpModel, fset: FeatureSet,
                        epsilon: float):
    """(model accuracy, greedy-forwarding accuracy) sharing one oracle."""
    oracle = SpOracle(g)
    acc_model = apnsp_accuracy(g, model_router(g, model, fset), epsilon,
                               MODEL_POLICY, oracle).accuracy
    acc_gf = apnsp_accuracy(g, gf_router(g), epsilon, GF_POLICY, oracle).accuracy
    return acc_model, acc_gf


def _grid_job(job):
    model, fset, size, density, rep, seed, radius, epsilon, max_attempts = job
    g = sample_connected_graph(GraphParams(size, density, radius, seed), max_attempts)
    acc_model, acc_gf = evaluate_cell_graph(g, model, fset, epsilon)
    return size, density, rep, g.params.seed, acc_model, acc_gf


def run_experiment(model: MlpModel, fset: FeatureSet, sizes=(27, 64, 125),
                   densities=(2.0, 3.0, 4.0, 5.0), reps: int = 20,
                   base_seed: int = 0, radius: float = 1000.0,
                   epsilon: float = 0.05, max_attempts: int = 200,
                   experiment_id: str = "grid", workers: int = 1) -> ExperimentResult:
    """Zero-shot evaluation grid: fresh connected graphs per (size, density) cell.

    Every cell draws ``reps`` graphs from seeds derived from base_seed,
    evaluates the learned policy and greedy forwarding on each, and
    reports per-graph rows plus per-cell means.  Output order does not
    depend on the worker count.
    """
    jobs = []
    for size in sizes:
        for density in densities:
            for rep in range(reps):
                seed = derive_seed(base_seed, f"test-n{size}-rho{density:g}-rep{rep}")
                jobs.append((model, fset, size, density, rep, seed, radius,
                             epsilon, max_attempts))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_grid_job, jobs))
    else:
        done = [_grid_job(job) for job in jobs]

    result = ExperimentResult(experiment_id=experiment_id)
    for size, density, rep, seed, acc_model, acc_gf in done:
        result.rows.append((size, density, rep, seed, MODEL_POLICY, acc_model))
        result.rows.append((size, density, rep, seed, GF_POLICY, acc_gf))
    for size in sizes:
        for density in densities:
            mean_model = result.cell_mean(size, density, MODEL_POLICY)
            mean_gf = result.cell_mean(size, density, GF_POLICY)
            result.summary.append((size, density, MODEL_POLICY, mean_model,
                                   mean_model - mean_gf))
            result.summary.append((size, density, GF_POLICY, mean_gf, 0.0))
    return result
