"""Input features for a routing decision at node v toward neighbor u.

Two feature sets are supported for a packet with origin O and
destination D:

* distance only (2 inputs): [vD, uD]
* distance + stretch factor (4 inputs): [vD, SF(O,D,v), uD, SF(O,D,u)]

where xD is the Euclidean distance from x to D and SF(O,D,x) is the
detour ratio (|Ox| + |xD|) / |OD|.  Action features equal the state
features of the chosen neighbor.  No identifiers enter the vector, so
the mapping is invariant under rigid motions of the whole layout.

Distances may be divided by a scale (normally the communication radius)
so inputs stay O(1) across deployments of any physical size; stretch
factors are dimensionless and used raw.  ``scale=1.0`` keeps raw units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class FeatureKind(str, Enum):
    DIST = "dist"
    DIST_STRETCH = "dist-stretch"

    @property
    def omega(self) -> int:
        return 2 if self is FeatureKind.DIST else 4


@dataclass(frozen=True)
class FeatureSet:
    kind: FeatureKind
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be a positive real, got {self.scale}")

    @property
    def omega(self) -> int:
        return self.kind.omega


@dataclass(frozen=True)
class FeatureVector:
    values: tuple            # length omega
    context: tuple           # (O, D, v, u)


def _dist(coords, a: int, b: int) -> float:
    # sqrt(dx^2 + dy^2) rather than hypot: bit-identical to the numpy
    # batch path and to the edge weights stored on the graph.
    dx = float(coords[a, 0] - coords[b, 0])
    dy = float(coords[a, 1] - coords[b, 1])
    return math.sqrt(dx * dx + dy * dy)


def stretch_factor(coords, O: int, D: int, v: int) -> float:
    """Detour ratio of going O -> v -> D over the direct distance O -> D."""
    if O == D:
        raise ValueError("stretch factor is undefined for O == D")
    dod = _dist(coords, O, D)
    if dod == 0.0:
        raise ValueError("stretch factor is undefined for coincident O, D")
    return (_dist(coords, O, v) + _dist(coords, v, D)) / dod


def make_features(coords, fset: FeatureSet, O: int, D: int, v: int, u: int) -> FeatureVector:
    if fset.kind is FeatureKind.DIST:
        values = (_dist(coords, v, D) / fset.scale,
                  _dist(coords, u, D) / fset.scale)
    else:
        values = (_dist(coords, v, D) / fset.scale,
                  stretch_factor(coords, O, D, v),
                  _dist(coords, u, D) / fset.scale,
                  stretch_factor(coords, O, D, u))
    return FeatureVector(values=values, context=(O, D, v, u))


def neighbor_features(coords, fset: FeatureSet, O: int, D: int, v: int, u_ids) -> np.ndarray:
    """Feature rows for all candidate next hops of v at once; shape (len(u_ids), omega)."""
    u_ids = np.asarray(u_ids)
    dx = coords[u_ids, 0] - coords[D, 0]
    dy = coords[u_ids, 1] - coords[D, 1]
    ud = np.sqrt(dx * dx + dy * dy)
    vd = _dist(coords, v, D)
    if fset.kind is FeatureKind.DIST:
        out = np.empty((len(u_ids), 2))
        out[:, 0] = vd / fset.scale
        out[:, 1] = ud / fset.scale
        return out
    if O == D:
        raise ValueError("stretch factor is undefined for O == D")
    dod = _dist(coords, O, D)
    if dod == 0.0:
        raise ValueError("stretch factor is undefined for coincident O, D")
    ox = coords[u_ids, 0] - coords[O, 0]
    oy = coords[u_ids, 1] - coords[O, 1]
    ou = np.sqrt(ox * ox + oy * oy)
    out = np.empty((len(u_ids), 4))
    out[:, 0] = vd / fset.scale
    out[:, 1] = (_dist(coords, O, v) + vd) / dod
    out[:, 2] = ud / fset.scale
    out[:, 3] = (ou + ud) / dod
    return out
