"""Graded-relevance (DCG) similarity between a local metric and optimal Q-values.

At a node v with L neighbors, the ideal ranking A orders the neighbors
best-first by Q*(v, u) and the estimated ranking B orders them
best-first by a linear metric over the input features.  Position r of A
(1-based) carries relevance (L - r + 1)^2, so the front of the ranking
dominates; an element of B inherits the relevance it has in A, or 0 if
it does not appear there.  The similarity is

    DCG_tau(B) / DCG_tau(A),   DCG_tau = sum_{r<=tau} rel[r] / log2(r + 1)

which lands in [0, 1] and reaches 1 exactly when B's first tau entries
sit in the same positions as A's.  Ties in either sort break toward the
lower node id.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSet, neighbor_features
from .graphs import Graph
from .shortest_paths import PathRecord, SpOracle, SpTable, neighbor_q


@dataclass(frozen=True)
class LinearMetric:
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def score(self, rows: np.ndarray) -> np.ndarray:
        """Metric value for each feature row; shape (m,)."""
        return np.asarray(rows) @ np.array(self.weights)

    def describe(self) -> str:
        return "m(" + ",".join(f"{w:g}" for w in self.weights) + ")"


# Reference metrics: rank by negated distance-to-destination, and the
# distance + stretch-factor combination (weights on v's own features are
# zero since they are constant across a neighbor set).
METRIC_DIST = LinearMetric((0.0, -1.0))
METRIC_DIST_STRETCH = LinearMetric((0.0, 0.0, -0.875, -0.277))


@dataclass(frozen=True)
class SimilarityConfig:
    tau: int | None = None      # DCG cutoff; None means full ranking length

    def __post_init__(self):
        if self.tau is not None and self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")


@dataclass
class SimilarityReport:
    graph_id: str
    metric: str
    per_context: list = field(default_factory=list)   # (v, O, D, sim)
    graph_sim: float = float("nan")


def position_relevances(length: int) -> list[float]:
    """Relevance by 1-based rank r: (length - r + 1)^2."""
    return [float((length - r + 1) ** 2) for r in range(1, length + 1)]


def dcg(relevances, tau=None) -> float:
    """Discounted cumulative gain of a relevance sequence at cutoff tau."""
    if len(relevances) == 0:
        raise ValueError("cannot compute DCG of an empty ranking")
    if tau is None:
        tau = len(relevances)
    if not 1 <= tau <= len(relevances):
        raise ValueError(f"tau={tau} out of range for length {len(relevances)}")
    return sum(rel / math.log2(r + 1) for r, rel in enumerate(relevances[:tau], start=1))


def rank_similarity(ideal, estimated, cfg: SimilarityConfig = SimilarityConfig()) -> float:
    """DCG ratio of an estimated ranking against the ideal one, in [0, 1].

    Elements of ``estimated`` that are absent from ``ideal`` get
    relevance 0.  A numeric cutoff larger than a ranking is clamped to
    that ranking's length.
    """
    if len(ideal) == 0 or len(estimated) == 0:
        raise ValueError("rankings must be non-empty")
    rel_a = position_relevances(len(ideal))
    rel_of = {elem: rel_a[i] for i, elem in enumerate(ideal)}
    rel_b = [rel_of.get(elem, 0.0) for elem in estimated]
    tau_a = len(ideal) if cfg.tau is None else min(cfg.tau, len(ideal))
    tau_b = len(estimated) if cfg.tau is None else min(cfg.tau, len(estimated))
    ratio = dcg(rel_b, tau_b) / dcg(rel_a, tau_a)
    return min(1.0, max(0.0, ratio))


def _best_first(ids: np.ndarray, values: np.ndarray) -> list[int]:
    """Ids sorted by descending value; equal values break toward lower id."""
    order = sorted(range(len(ids)), key=lambda k: (-values[k], ids[k]))
    return [int(ids[k]) for k in order]


def sim_context(g: Graph, sp: SpTable, metric: LinearMetric, fset: FeatureSet,
                O: int, D: int, v: int, cfg: SimilarityConfig = SimilarityConfig()) -> float:
    """Similarity between the metric ranking and the Q* ranking of v's neighbors."""
    ids = g.nbrs[v]
    if len(ids) == 0:
        raise ValueError(f"node {v} has no neighbors")
    qvals = neighbor_q(g, sp, v)
    mvals = metric.score(neighbor_features(g.coords, fset, O, D, v, ids))
    ideal = _best_first(ids, qvals)
    estimated = _best_first(ids, mvals)
    return rank_similarity(ideal, estimated, cfg)


def sim_graph(g: Graph, metric: LinearMetric, fset: FeatureSet,
              cfg: SimilarityConfig = SimilarityConfig(),
              oracle: SpOracle | None = None) -> SimilarityReport:
    """Average context similarity across a whole graph.

    Distance-only features rank the same way regardless of the packet's
    origin, so the contexts are all (v, D) pairs with v != D and the
    origin recorded as v itself.  With stretch factors the origin
    matters and the contexts are all (v, O, D) triples, O != D, v != D.
    """
    oracle = oracle or SpOracle(g)
    report = SimilarityReport(graph_id=g.id, metric=metric.describe())
    with_origin = fset.omega == 4
    for D in range(g.n):
        sp = oracle.table(D)
        for v in range(g.n):
            if v == D:
                continue
            if with_origin:
                for O in range(g.n):
                    if O == D:
                        continue
                    sim = sim_context(g, sp, metric, fset, O, D, v, cfg)
                    report.per_context.append((v, O, D, sim))
            else:
                sim = sim_context(g, sp, metric, fset, v, D, v, cfg)
                report.per_context.append((v, v, D, sim))
    report.graph_sim = float(np.mean([rec[3] for rec in report.per_context]))
    return report


def sim_path(g: Graph, sp: SpTable, metric: LinearMetric, fset: FeatureSet,
             path: PathRecord, cfg: SimilarityConfig = SimilarityConfig()) -> float:
    """Mean context similarity along a path's forwarding nodes.

    The destination makes no forwarding decision, so it is excluded.
    """
    sims = [sim_context(g, sp, metric, fset, path.origin, path.dest, v, cfg)
            for v in path.hops if v != path.dest]
    if not sims:
        raise ValueError("path has no forwarding nodes")
    return float(np.mean(sims))


def write_context_csv(report: SimilarityReport, path, header_comment: str = "") -> None:
    """Per-context similarity rows: (graph_id, v, O, D, sim)."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["graph_id", "v", "O", "D", "sim"])
        for v, O, D, sim in report.per_context:
            writer.writerow([report.graph_id, v, O, D, f"{sim:.10g}"])


def write_summary_csv(reports, path, header_comment: str = "") -> None:
    """One row per graph: (graph_id, graph_sim)."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["graph_id", "graph_sim"])
        for report in reports:
            writer.writerow([report.graph_id, f"{report.graph_sim:.10g}"])
