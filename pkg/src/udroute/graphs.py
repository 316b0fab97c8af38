"""Unit-disk uniform random graph model.

Nodes are dropped i.i.d. uniformly on a square whose side length is
sqrt(n * R^2 / rho), so that the expected number of nodes per R^2 of
area equals the requested density rho.  Two nodes are linked iff their
Euclidean distance is at most the communication radius R, and the edge
weight is exactly that distance.

Generation is a pure function of the parameters: coordinates come from
numpy's PCG64 stream seeded with ``params.seed``, which is reproducible
bit-for-bit across platforms.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np


class ConnectivityError(RuntimeError):
    """No connected draw was found within the attempt budget."""


@dataclass(frozen=True)
class GraphParams:
    n: int          # node count
    rho: float      # density: nodes per R^2 of area
    radius: float   # communication radius R
    seed: int       # 64-bit RNG seed

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need an integer node count >= 2, got n={self.n}")
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValueError(f"density must be a positive real, got rho={self.rho}")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be a positive real, got radius={self.radius}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def side(self) -> float:
        """Side length of the deployment square, sqrt(n * R^2 / rho)."""
        return math.sqrt(self.n * self.radius ** 2 / self.rho)

    def label(self) -> str:
        return f"udg-n{self.n}-rho{self.rho:g}-r{self.radius:g}-s{self.seed}"


@dataclass(frozen=True)
class Graph:
    """Immutable unit-disk graph: coordinates plus symmetric weighted adjacency.

    ``nbrs[v]`` holds v's neighbor ids in ascending order and ``wts[v]``
    the matching edge lengths, so walks that break ties by lowest id can
    rely on the storage order.
    """

    params: GraphParams
    coords: np.ndarray          # (n, 2) float64, in [0, side]^2
    nbrs: tuple                 # per node: int64 array of neighbor ids, ascending
    wts: tuple                  # per node: float64 array of edge weights, aligned
    id: str

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def radius(self) -> float:
        return self.params.radius

    def degree(self, v: int) -> int:
        return len(self.nbrs[v])

    def edge_count(self) -> int:
        return sum(len(a) for a in self.nbrs) // 2

    def edge_weight(self, v: int, u: int) -> float:
        """Weight of edge (v, u); raises if u is not a neighbor of v."""
        ids = self.nbrs[v]
        k = int(np.searchsorted(ids, u))
        if k >= len(ids) or ids[k] != u:
            raise ValueError(f"({v}, {u}) is not an edge")
        return float(self.wts[v][k])


def _adjacency(coords: np.ndarray, radius: float):
    """Recompute the unit-disk edge set from coordinates.

    The pairwise distance matrix is exactly symmetric (squares kill the
    sign of the coordinate differences), so w(v, u) == w(u, v) bit-for-bit.
    Coincident points yield zero-weight edges, which are kept.
    """
    delta = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((delta ** 2).sum(axis=2))
    mask = dist <= radius
    np.fill_diagonal(mask, False)
    nbrs = []
    wts = []
    for v in range(coords.shape[0]):
        ids = np.flatnonzero(mask[v]).astype(np.int64)
        nbrs.append(ids)
        wts.append(dist[v, ids])
    return tuple(nbrs), tuple(wts)


def generate_graph(params: GraphParams) -> Graph:
    """Draw a unit-disk uniform random graph; pure function of params."""
    rng = np.random.Generator(np.random.PCG64(params.seed))
    coords = rng.random((params.n, 2)) * params.side
    nbrs, wts = _adjacency(coords, params.radius)
    coords.setflags(write=False)
    return Graph(params=params, coords=coords, nbrs=nbrs, wts=wts, id=params.label())


def is_connected(g: Graph) -> bool:
    """True iff a single traversal from node 0 reaches all n nodes."""
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    reached = 1
    while queue:
        v = queue.popleft()
        for u in g.nbrs[v]:
            if not seen[u]:
                seen[u] = True
                reached += 1
                queue.append(int(u))
    return reached == g.n


def sample_connected_graph(params: GraphParams, max_attempts: int = 100) -> Graph:
    """Redraw with seeds seed, seed+1, ... until the graph is connected.

    The returned graph's params carry the seed actually used.  Raises
    ConnectivityError after max_attempts failures, which usually means
    the density is too low for reliable connectivity at this size.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    for k in range(max_attempts):
        trial = GraphParams(params.n, params.rho, params.radius,
                            (params.seed + k) % 2 ** 64)
        g = generate_graph(trial)
        if is_connected(g):
            return g
    raise ConnectivityError(
        f"no connected graph in {max_attempts} draws from seed {params.seed} "
        f"(n={params.n}, rho={params.rho})")


def save_graph(g: Graph, path) -> None:
    """Write the graph as JSON; edges are recomputed on load from coordinates."""
    doc = {
        "id": g.id,
        "n": g.params.n,
        "rho": g.params.rho,
        "radius": g.params.radius,
        "seed": g.params.seed,
        "nodes": [{"id": v, "x": float(g.coords[v, 0]), "y": float(g.coords[v, 1])}
                  for v in range(g.n)],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_graph(path) -> Graph:
    """Load a graph JSON file, recomputing the edge set from coordinates."""
    with open(path) as fh:
        doc = json.load(fh)
    params = GraphParams(doc["n"], doc["rho"], doc["radius"], doc["seed"])
    nodes = sorted(doc["nodes"], key=lambda rec: rec["id"])
    if [rec["id"] for rec in nodes] != list(range(params.n)):
        raise ValueError(f"{path}: node ids must be exactly 0..{params.n - 1}")
    coords = np.array([[rec["x"], rec["y"]] for rec in nodes], dtype=np.float64)
    side = params.side
    if coords.min() < 0 or coords.max() > side * (1 + 1e-12):
        raise ValueError(f"{path}: coordinates fall outside [0, {side:.6g}]^2")
    nbrs, wts = _adjacency(coords, params.radius)
    if params.n >= 2 and params.rho >= 2 and sum(len(a) for a in nbrs) == 0:
        raise ValueError(f"{path}: recomputed edge set is empty at rho={params.rho}; "
                         "coordinates and radius are probably in different units")
    coords.setflags(write=False)
    return Graph(params=params, coords=coords, nbrs=nbrs, wts=wts,
                 id=doc.get("id", params.label()))
