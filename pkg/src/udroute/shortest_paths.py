"""Per-destination shortest-path tables and optimal Q-values.

One Dijkstra run per destination gives exact distances d_sp(v, D) for
every node v.  The next-hop table is rebuilt in a second pass so that
tie-breaking is deterministic: among the neighbors u that satisfy
dist[v] == w(v, u) + dist[u] exactly (no epsilon) and were finalized
before v, the lowest id wins.  Restricting to earlier-finalized nodes
keeps the pointers acyclic even through zero-weight edges between
coincident points.

The optimal Q-value of forwarding from v to u is the negative length of
the cheapest route that starts with that hop: -(w(v, u) + dist[u]).
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .graphs import Graph


@dataclass(frozen=True)
class SpTable:
    dest: int
    dist: np.ndarray     # (n,) float64; +inf where the destination is unreachable
    pred: tuple          # per node: next hop toward dest, or None


@dataclass(frozen=True)
class PathRecord:
    origin: int
    dest: int
    hops: tuple          # node ids [v_0 .. v_L], v_0 = origin, v_L = dest
    length: float        # sum of hop weights

    def __len__(self) -> int:
        return len(self.hops)


def sssp(g: Graph, dest: int) -> SpTable:
    """Exact single-destination shortest paths over edge lengths."""
    n = g.n
    if not 0 <= dest < n:
        raise ValueError(f"destination {dest} out of range 0..{n - 1}")
    dist = np.full(n, math.inf)
    dist[dest] = 0.0
    rank = np.full(n, -1, dtype=np.int64)   # finalization order
    heap = [(0.0, dest)]
    popped = 0
    while heap:
        d, v = heapq.heappop(heap)
        if rank[v] >= 0:
            continue
        rank[v] = popped
        popped += 1
        for u, w in zip(g.nbrs[v], g.wts[v]):
            nd = d + w
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, int(u)))
    pred = [None] * n
    for v in range(n):
        if v == dest or rank[v] < 0:
            continue
        best = None
        for u, w in zip(g.nbrs[v], g.wts[v]):
            if rank[u] >= 0 and rank[u] < rank[v] and dist[u] + w == dist[v]:
                if best is None or u < best:
                    best = int(u)
        pred[v] = best
    dist.setflags(write=False)
    return SpTable(dest=dest, dist=dist, pred=tuple(pred))


def euclid(coords: np.ndarray, a: int, b: int) -> float:
    dx = float(coords[a, 0] - coords[b, 0])
    dy = float(coords[a, 1] - coords[b, 1])
    return math.sqrt(dx * dx + dy * dy)


def path_stretch(g: Graph, sp: SpTable, origin: int) -> float:
    """Stretch zeta(O, D) = d_sp(O, D) / d_e(O, D); always >= 1."""
    if origin == sp.dest:
        raise ValueError("path stretch is undefined for origin == dest")
    if not math.isfinite(sp.dist[origin]):
        raise ValueError(f"node {origin} cannot reach destination {sp.dest}")
    de = euclid(g.coords, origin, sp.dest)
    if de == 0.0:
        raise ValueError("path stretch is undefined for coincident endpoints")
    return float(sp.dist[origin]) / de


def optimal_q(g: Graph, sp: SpTable, v: int, u: int) -> float:
    """Q*(v, u) = -(w(v, u) + d_sp(u, D)); -inf if u cannot reach D."""
    w = g.edge_weight(v, u)
    du = sp.dist[u]
    if not math.isfinite(du):
        return -math.inf
    return -(w + float(du))


def neighbor_q(g: Graph, sp: SpTable, v: int) -> np.ndarray:
    """Q*(v, u) for every neighbor u of v, aligned with g.nbrs[v]."""
    return -(g.wts[v] + sp.dist[g.nbrs[v]])


def shortest_path(g: Graph, sp: SpTable, origin: int) -> PathRecord:
    """Follow next-hop pointers from origin to the destination.

    The length is accumulated from the destination end so it equals
    dist[origin] bit-for-bit.
    """
    if not math.isfinite(sp.dist[origin]):
        raise ValueError(f"node {origin} cannot reach destination {sp.dest}")
    hops = [origin]
    while hops[-1] != sp.dest:
        hops.append(sp.pred[hops[-1]])
    length = 0.0
    for a, b in zip(reversed(hops[:-1]), reversed(hops[1:])):
        length = g.edge_weight(a, b) + length
    return PathRecord(origin=origin, dest=sp.dest, hops=tuple(hops), length=length)


class SpOracle:
    """Per-graph cache of SpTable objects, one per destination."""

    def __init__(self, g: Graph):
        self.graph = g
        self._tables: dict[int, SpTable] = {}

    def table(self, dest: int) -> SpTable:
        if dest not in self._tables:
            self._tables[dest] = sssp(self.graph, dest)
        return self._tables[dest]


def graph_content_hash(g: Graph) -> str:
    """Hash of the coordinates and radius; keys cached tables to the graph."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(g.coords).tobytes())
    digest.update(repr(g.params.radius).encode())
    return digest.hexdigest()[:16]


def save_table(g: Graph, sp: SpTable, path) -> None:
    """Dump one destination's table as JSON, keyed by the graph content hash."""
    doc = {
        "graph_id": g.id,
        "graph_hash": graph_content_hash(g),
        "dest": sp.dest,
        "dist": [None if not math.isfinite(d) else float(d) for d in sp.dist],
        "pred": list(sp.pred),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_table(g: Graph, path) -> SpTable:
    """Load a cached table; rejects caches written for a different graph."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("graph_hash") != graph_content_hash(g):
        raise ValueError(f"{path}: cache was built for a different graph")
    dist = np.array([math.inf if d is None else d for d in doc["dist"]])
    dist.setflags(write=False)
    return SpTable(dest=doc["dest"], dist=dist, pred=tuple(doc["pred"]))
