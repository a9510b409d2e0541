"""Point- and object-level correspondence.

Nearest-neighbor search runs on a KD-tree (scipy) with deterministic
lowest-index tie-breaking. Object-to-object cost is either the distance
between robust centroids (default) or the mean distance over mutual
nearest-neighbor pairs of the two point sets. Assignment is gated
Hungarian: entries above the gate are forbidden, and the result is the
minimum-cost assignment among those of maximum cardinality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .errors import AssociationError

CENTROID = "centroid"
MUTUAL_NN = "mutual_nn"


class SpatialIndex:
    """Balanced KD-tree over 3D points, storing original indices.

    Queries are exact; ties in distance resolve to the lowest stored index
    so results are stable across runs and platforms.
    """

    def __init__(self, points, ids=None):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(pts) and not np.all(np.isfinite(pts)):
            raise AssociationError("non-finite points in spatial index")
        self.points = pts
        self.ids = (
            np.arange(len(pts), dtype=np.int64)
            if ids is None
            else np.asarray(ids, dtype=np.int64)
        )
        if len(self.ids) != len(pts):
            raise AssociationError("ids must pair up with points")
        self._tree = cKDTree(pts) if len(pts) else None

    def __len__(self) -> int:
        return len(self.points)

    def _resolve(self, q: np.ndarray, dist: float) -> tuple[int, float]:
        # the ball query compares squared radii, which can round below an
        # exact boundary distance; inflate slightly and re-measure with the
        # same arithmetic the callers and oracles use
        cand = self._tree.query_ball_point(q, r=dist * (1.0 + 1e-9) + 1e-30)
        d = np.linalg.norm(self.points[cand] - q, axis=1)
        dmin = d.min()
        ties = [c for c, dd in zip(cand, d) if dd == dmin]
        pos = min(ties, key=lambda c: self.ids[c])
        return pos, float(dmin)

    def nearest(self, query) -> tuple[int, float] | None:
        """(stored id, distance) of the nearest point, or None if empty."""
        if self._tree is None:
            return None
        q = np.asarray(query, dtype=np.float64)
        dist, _ = self._tree.query(q, k=1)
        pos, dmin = self._resolve(q, float(dist))
        return int(self.ids[pos]), dmin

    def nearest_many(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized nearest for (M, 3) queries -> (stored ids, distances)."""
        qs = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        if self._tree is None:
            return np.full(len(qs), -1, dtype=np.int64), np.full(len(qs), np.inf)
        dists, _ = self._tree.query(qs, k=1)
        dists = np.asarray(dists, dtype=np.float64)
        ids = np.empty(len(qs), dtype=np.int64)
        out_d = np.empty(len(qs))
        for m in range(len(qs)):
            pos, dmin = self._resolve(qs[m], float(dists[m]))
            ids[m] = self.ids[pos]
            out_d[m] = dmin
        return ids, out_d


def build_index(points) -> SpatialIndex:
    return SpatialIndex(points)


@dataclass(frozen=True)
class MatchPair:
    index_a: int
    index_b: int
    distance: float


def mutual_nearest_neighbors(points_a, points_b, max_dist: float = np.inf) -> list[MatchPair]:
    """Pairs (i, j) where each point is the other's nearest neighbor.

    Pairs are disjoint by construction and filtered to distance <= max_dist.
    Duplicate coordinates collapse onto their lowest index (the others can
    never be mutual), which keeps the search fast on heavily repeated data.
    """
    a = np.asarray(points_a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(points_b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        return []
    ua, first_a = np.unique(a, axis=0, return_index=True)
    ub, first_b = np.unique(b, axis=0, return_index=True)
    idx_a = SpatialIndex(ua, ids=first_a)
    idx_b = SpatialIndex(ub, ids=first_b)
    nn_ab, d_ab = idx_b.nearest_many(ua)  # original b ids per unique a row
    nn_ba, _ = idx_a.nearest_many(ub)  # original a ids per unique b row
    pos_b = {int(orig): pos for pos, orig in enumerate(first_b)}
    pairs = []
    for pa in range(len(ua)):
        ob = int(nn_ab[pa])
        if int(nn_ba[pos_b[ob]]) == int(first_a[pa]) and d_ab[pa] <= max_dist:
            pairs.append(MatchPair(int(first_a[pa]), ob, float(d_ab[pa])))
    pairs.sort(key=lambda p: p.index_a)
    return pairs


@dataclass
class Assignment:
    pairs: list[MatchPair]
    unmatched_a: list[int]
    unmatched_b: list[int]
    total_cost: float

    @property
    def matched_count(self) -> int:
        return len(self.pairs)


def hungarian(cost: np.ndarray, gate: float = np.inf) -> Assignment:
    """Minimum-cost assignment over entries with cost <= gate.

    Entries above the gate are forbidden. Among all gate-respecting
    assignments of maximum cardinality, total cost is minimal. Rectangular
    matrices are handled; leftover rows/columns are reported unmatched.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.size == 0:
        n, m = (c.shape if c.ndim == 2 else (0, 0))
        return Assignment([], list(range(n)), list(range(m)), 0.0)
    if c.ndim != 2:
        raise AssociationError(f"cost must be a 2D matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise AssociationError("costs must be finite and non-negative")
    n, m = c.shape

    allowed = c <= gate
    # a penalty above the sum of all allowed costs makes the solver prefer
    # one more allowed pair over any cost saving: cardinality first
    penalty = float(c[allowed].sum()) + 1.0
    padded = np.where(allowed, c, penalty)
    rows, cols = linear_sum_assignment(padded)

    pairs = []
    for i, j in zip(rows, cols):
        if allowed[i, j]:
            pairs.append(MatchPair(int(i), int(j), float(c[i, j])))
    matched_a = {p.index_a for p in pairs}
    matched_b = {p.index_b for p in pairs}
    return Assignment(
        pairs=pairs,
        unmatched_a=[i for i in range(n) if i not in matched_a],
        unmatched_b=[j for j in range(m) if j not in matched_b],
        total_cost=float(sum(p.distance for p in pairs)),
    )


@dataclass
class CostConfig:
    mode: str = CENTROID
    nn_max_dist: float = np.inf  # gate inside the mutual-NN cost mode


def robust_centroid(points: np.ndarray) -> np.ndarray:
    """Per-coordinate median of an (N, 3) point set."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise AssociationError("cannot take the centroid of zero points")
    return np.median(pts, axis=0)


def object_cost(obj_a, obj_b, config: CostConfig | None = None) -> float:
    """Spatial distance between two observed objects.

    Objects must expose ``points`` (N, 3) and ``centroid`` (3,). Centroid
    mode is the Euclidean distance between robust centroids; mutual-NN
    mode averages the distances of mutual nearest-neighbor pairs between
    the two point sets and falls back to centroid distance when no pair
    survives the gate.
    """
    config = config or CostConfig()
    if len(obj_a.points) == 0 or len(obj_b.points) == 0:
        raise AssociationError("object with zero valid 3D points")
    centroid_dist = float(
        np.linalg.norm(np.asarray(obj_a.centroid) - np.asarray(obj_b.centroid))
    )
    if config.mode == CENTROID:
        return centroid_dist
    if config.mode != MUTUAL_NN:
        raise AssociationError(f"unknown cost mode {config.mode!r}")
    pairs = mutual_nearest_neighbors(obj_a.points, obj_b.points, config.nn_max_dist)
    if not pairs:
        return centroid_dist
    return float(np.mean([p.distance for p in pairs]))


def point_match(objs_prev, objs_cur, gate: float, config: CostConfig | None = None) -> Assignment:
    """Hungarian assignment between two object lists under a gate."""
    n, m = len(objs_prev), len(objs_cur)
    if n == 0 or m == 0:
        return Assignment([], list(range(n)), list(range(m)), 0.0)
    cost = np.empty((n, m))
    for i, oa in enumerate(objs_prev):
        for j, ob in enumerate(objs_cur):
            cost[i, j] = object_cost(oa, ob, config)
    return hungarian(cost, gate)
