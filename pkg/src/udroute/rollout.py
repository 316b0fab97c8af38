"""Single-copy greedy walk shared by policy evaluation and RL rollouts.

At each node the walk moves to the unvisited neighbor with the highest
score; exact score ties break toward the lower node id (neighbor lists
are stored ascending, so the first maximum wins).  Nodes are never
revisited, so every walk terminates within n hops, either at the
destination or stuck at a node whose neighbors were all seen.
"""

from __future__ import annotations

import numpy as np

from .features import FeatureSet, neighbor_features
from .graphs import Graph
from .nnet import MlpModel, forward_batch


def model_scorer(g: Graph, model: MlpModel, fset: FeatureSet, O: int, D: int):
    """Score candidates by the network's Q estimate for (O, D, v, u)."""
    coords = g.coords

    def score(v: int, candidates: np.ndarray) -> np.ndarray:
        return forward_batch(model, neighbor_features(coords, fset, O, D, v, candidates))

    return score


def greedy_walk(g: Graph, score, O: int, D: int, max_hops: int | None = None,
                rng=None, explore_eps: float = 0.0) -> list:
    """Walk from O toward D taking the argmax-scored unvisited neighbor.

    ``score(v, candidates)`` returns one value per candidate id.  With
    ``explore_eps`` > 0 and an rng, each step instead picks a uniform
    candidate with that probability (used by exploring RL variants).
    Returns the hop list, which ends at D only if the walk got there.
    """
    if O == D:
        raise ValueError("walk requires O != D")
    if max_hops is None:
        max_hops = g.n
    hops = [O]
    visited = {O}
    v = O
    while v != D and len(hops) <= max_hops:
        candidates = np.array([u for u in g.nbrs[v] if int(u) not in visited],
                              dtype=np.int64)
        if len(candidates) == 0:
            break
        if rng is not None and explore_eps > 0.0 and rng.random() < explore_eps:
            v = int(candidates[rng.integers(0, len(candidates))])
        else:
            v = int(candidates[int(np.argmax(score(v, candidates)))])
        visited.add(v)
        hops.append(v)
    return hops
