"""Knowledge-guided selection of the seed graph and path-based training data.

The seed graph is the candidate whose metric-vs-Q* ranking similarity is
highest.  Inside the seed graph, training contexts come from the
shortest paths of the few origins with the lowest path stretch toward a
randomly drawn destination: every forwarding node on those paths
contributes one labeled sample per neighbor, so the dataset size is on
the order of (chosen nodes) x (average degree) instead of all of |V|^2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSet, make_features
from .graphs import Graph
from .ranking import LinearMetric, SimilarityConfig, sim_graph
from .shortest_paths import (SpTable, optimal_q, path_stretch,
                             shortest_path, sssp)


@dataclass
class Dataset:
    X: list = field(default_factory=list)            # FeatureVector per sample
    Y: list = field(default_factory=list)            # target Q-values, raw length units
    provenance: list = field(default_factory=list)   # (graph_id, path_idx, v, u)

    def __len__(self) -> int:
        return len(self.Y)

    def arrays(self):
        """(m, omega) inputs and (m,) targets as float arrays."""
        return (np.array([fv.values for fv in self.X], dtype=np.float64),
                np.array(self.Y, dtype=np.float64))


@dataclass(frozen=True)
class SeedChoice:
    graph: Graph
    graph_sim: float
    destination: int
    origins: tuple
    paths: tuple                                     # PathRecord per origin


def select_seed_graph(candidates, metric: LinearMetric, fset: FeatureSet,
                      cfg: SimilarityConfig = SimilarityConfig()):
    """Pick the candidate with the highest graph-level similarity.

    Returns (graph, graph_sim).  Equal similarities resolve to the
    earliest candidate, so the choice is deterministic for a fixed list.
    """
    if not candidates:
        raise ValueError("need at least one candidate graph")
    best = None
    best_sim = -1.0
    for g in candidates:
        sim = sim_graph(g, metric, fset, cfg).graph_sim
        if sim > best_sim:
            best, best_sim = g, sim
    return best, best_sim


def select_subsample(g: Graph, metric: LinearMetric, fset: FeatureSet, phi: int,
                     dest_seed: int, dest: int | None = None,
                     graph_sim: float | None = None, min_edges: int = 1,
                     cfg: SimilarityConfig = SimilarityConfig()) -> SeedChoice:
    """Choose a destination and the phi lowest-stretch origins with their paths.

    The destination is drawn uniformly from the PCG64 stream seeded with
    dest_seed unless an explicit ``dest`` override is given.  Origins are
    the phi nodes with the smallest path stretch toward the destination
    (ties toward the lower id), and each contributes its shortest path.

    ``min_edges`` restricts the origin pool to nodes whose shortest path
    has at least that many edges.  The default of 1 admits every origin,
    matching the plain lowest-stretch rule, under which the origins are
    destination neighbors (their stretch is exactly 1) and every chosen
    path is a single hop.  Training pipelines pass 2: one-hop paths
    expose only contexts where the deciding node is the origin itself,
    and a network fit to those never sees the feature ranges that
    mid-route forwarding decisions produce.
    """
    if phi < 1 or phi >= g.n - 1:
        raise ValueError(f"phi must be in 1..{g.n - 2}, got {phi}")
    if min_edges < 1:
        raise ValueError("min_edges must be >= 1")
    if dest is None:
        rng = np.random.Generator(np.random.PCG64(dest_seed))
        dest = int(rng.integers(0, g.n))
    sp = sssp(g, dest)
    paths_by_origin = {v: shortest_path(g, sp, v) for v in range(g.n) if v != dest}
    pool = [v for v, path in paths_by_origin.items()
            if len(path.hops) - 1 >= min_edges]
    if len(pool) < phi:
        raise ValueError(f"only {len(pool)} origins have >= {min_edges}-edge paths "
                         f"to {dest}; phi={phi}")
    ranked = sorted(pool, key=lambda v: (path_stretch(g, sp, v), v))
    origins = tuple(ranked[:phi])
    paths = tuple(paths_by_origin[o] for o in origins)
    if graph_sim is None:
        graph_sim = sim_graph(g, metric, fset, cfg).graph_sim
    return SeedChoice(graph=g, graph_sim=graph_sim, destination=dest,
                      origins=origins, paths=paths)


def build_dataset(g: Graph, choice: SeedChoice, fset: FeatureSet, sp: SpTable) -> Dataset:
    """Labeled samples from every forwarding node of the chosen paths.

    For path i with origin O_i, every non-destination node v on the path
    yields one sample per neighbor u: input features for (O_i, D, v, u)
    and label Q*(v, u).  Repeated (O, D, v, u) contexts from overlapping
    paths are kept once.
    """
    if sp.dest != choice.destination:
        raise ValueError("shortest-path table is for a different destination")
    ds = Dataset()
    seen = set()
    D = choice.destination
    for path_idx, path in enumerate(choice.paths):
        O = path.origin
        for v in path.hops:
            if v == D:
                continue
            for u in g.nbrs[v]:
                key = (O, D, v, int(u))
                if key in seen:
                    continue
                seen.add(key)
                ds.X.append(make_features(g.coords, fset, O, D, v, int(u)))
                ds.Y.append(optimal_q(g, sp, v, int(u)))
                ds.provenance.append((g.id, path_idx, v, int(u)))
    return ds


def build_dataset_all_nodes(g: Graph, D: int, fset: FeatureSet, sp: SpTable) -> Dataset:
    """One sample per directed edge (v, u) with v != D, each node as its own origin.

    This is the unsubsampled baseline: the sample count equals the sum
    of all node degrees minus the destination's row.
    """
    if sp.dest != D:
        raise ValueError("shortest-path table is for a different destination")
    ds = Dataset()
    for v in range(g.n):
        if v == D:
            continue
        for u in g.nbrs[v]:
            ds.X.append(make_features(g.coords, fset, v, D, v, int(u)))
            ds.Y.append(optimal_q(g, sp, v, int(u)))
            ds.provenance.append((g.id, -1, v, int(u)))
    return ds


def write_dataset_csv(ds: Dataset, path, header_comment: str = "") -> None:
    """Rows: (graph_id, path_idx, O, D, v, u, x_0..x_{omega-1}, y)."""
    omega = len(ds.X[0].values) if ds.X else 0
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["graph_id", "path_idx", "O", "D", "v", "u"]
                        + [f"x_{i}" for i in range(omega)] + ["y"])
        for fv, y, (gid, path_idx, v, u) in zip(ds.X, ds.Y, ds.provenance):
            O, D, _, _ = fv.context
            writer.writerow([gid, path_idx, O, D, v, u]
                            + [f"{val:.17g}" for val in fv.values] + [f"{y:.17g}"])
