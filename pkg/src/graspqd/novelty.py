"""Per-component novelty: mean distance to the K nearest defined neighbors.

The reference set is population + offspring + archive, deduplicated by
eval_id. Undefined components are ignored; an individual whose component is
defined but has no defined neighbors gets +inf novelty (maximally novel).

Distances: euclidean components use L2 on bound-normalized coordinates;
wrapped-angle components use |delta| wrapped to [0, pi], divided by pi.
Queries are exact: a vectorized scan below BRUTE_FORCE_MAX reference points,
a KD-tree above (wrapped angles are embedded on the unit circle, which is
order-preserving, and true wrapped distances are recomputed for the
returned neighbors).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .core import (
    METRIC_EUCLIDEAN,
    METRIC_WRAPPED_ANGLE,
    BehaviorComponentSpec,
    BehaviorVector,
    Bounds,
    wrap_angle,
)

BRUTE_FORCE_MAX = 2000


def component_distance(x, y, spec: BehaviorComponentSpec) -> float:
    """Distance between two points of one behavior component."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (spec.dim,) or y.shape != (spec.dim,):
        raise ValueError(f"expected dimension {spec.dim}, got {x.shape} and {y.shape}")
    if spec.metric == METRIC_WRAPPED_ANGLE:
        return float(np.abs(wrap_angle(x[0] - y[0]))) / np.pi
    dx = spec.bounds.normalize(x) - spec.bounds.normalize(y)
    return float(np.sqrt(np.dot(dx, dx)))


def concat_spec(specs) -> BehaviorComponentSpec:
    """Single euclidean component over the raw concatenation.

    Unit bounds make the internal normalization an identity map, so distances
    are taken on raw physical coordinates: blocks with large ranges (angles,
    carried-object positions) dominate, exactly as when heterogeneous raw
    descriptors are concatenated without rescaling.
    """
    total = sum(s.dim for s in specs)
    return BehaviorComponentSpec(
        index=0, dim=total, metric=METRIC_EUCLIDEAN, bounds=Bounds.uniform(0.0, 1.0, total)
    )


def concat_descriptor(behavior: BehaviorVector, specs) -> np.ndarray:
    """Raw concatenation of all components; undefined blocks are set to 0."""
    parts = []
    for spec, comp in zip(specs, behavior.components):
        if comp is None:
            parts.append(np.zeros(spec.dim))
        else:
            parts.append(np.asarray(comp, dtype=float))
    return np.concatenate(parts)


def normalized_concat(behavior: BehaviorVector, specs) -> np.ndarray:
    """Concat descriptor mapped into [0, 1]^dim per component bounds (with
    clamping); the form consumed by CVT cell lookup."""
    parts = []
    for spec, comp in zip(specs, behavior.components):
        raw = np.zeros(spec.dim) if comp is None else np.asarray(comp, dtype=float)
        parts.append(spec.bounds.normalize(spec.bounds.clip(raw)))
    return np.concatenate(parts)


class _ComponentIndex:
    """Defined points of one component across the reference set."""

    def __init__(self, spec: BehaviorComponentSpec, ids: np.ndarray, raw_points: np.ndarray):
        self.spec = spec
        self.ids = ids
        self.n = ids.size
        if spec.metric == METRIC_WRAPPED_ANGLE:
            self.store = raw_points.reshape(-1, 1)
        else:
            self.store = spec.bounds.normalize(raw_points) if self.n else raw_points.reshape(0, spec.dim)
        self.tree = None
        if self.n >= BRUTE_FORCE_MAX:
            if spec.metric == METRIC_WRAPPED_ANGLE:
                theta = self.store[:, 0]
                self.tree = cKDTree(np.column_stack([np.cos(theta), np.sin(theta)]))
            else:
                self.tree = cKDTree(self.store)

    def _normalize_queries(self, raw_queries: np.ndarray) -> np.ndarray:
        if self.spec.metric == METRIC_WRAPPED_ANGLE:
            return raw_queries.reshape(-1, 1)
        return self.spec.bounds.normalize(raw_queries)

    def mean_knn(self, query_ids: np.ndarray, raw_queries: np.ndarray, k: int) -> np.ndarray:
        """Mean distance from each query to its k nearest neighbors, excluding
        any reference entry with the same eval_id. Fewer than k neighbors:
        average what exists. No neighbors: +inf."""
        m = query_ids.size
        if m == 0:
            return np.empty(0)
        if self.n == 0:
            return np.full(m, np.inf)
        q = self._normalize_queries(np.asarray(raw_queries, dtype=float))
        if self.tree is None:
            return self._mean_knn_brute(query_ids, q, k)
        return self._mean_knn_tree(query_ids, q, k)

    def _mean_knn_brute(self, query_ids, q, k):
        if self.spec.metric == METRIC_WRAPPED_ANGLE:
            d = np.abs(wrap_angle(q[:, 0][:, None] - self.store[:, 0][None, :])) / np.pi
        else:
            d = cdist(q, self.store)
        self_mask = query_ids[:, None] == self.ids[None, :]
        d = np.where(self_mask, np.inf, d)
        avail = self.n - self_mask.sum(axis=1)
        out = np.full(query_ids.size, np.inf)
        kk = np.minimum(k, avail)
        for count in np.unique(kk):
            if count == 0:
                continue
            rows = np.nonzero(kk == count)[0]
            part = np.partition(d[rows], count - 1, axis=1)[:, :count]
            out[rows] = part.mean(axis=1)
        return out

    def _mean_knn_tree(self, query_ids, q, k):
        kq = min(k + 1, self.n)
        if self.spec.metric == METRIC_WRAPPED_ANGLE:
            embedded = np.column_stack([np.cos(q[:, 0]), np.sin(q[:, 0])])
            _, idx = self.tree.query(embedded, k=kq)
            idx = idx.reshape(len(q), kq)
            dist = np.abs(wrap_angle(q[:, 0][:, None] - self.store[idx, 0])) / np.pi
            order = np.argsort(dist, axis=1, kind="stable")
            dist = np.take_along_axis(dist, order, axis=1)
            idx = np.take_along_axis(idx, order, axis=1)
        else:
            dist, idx = self.tree.query(q, k=kq)
            dist = dist.reshape(len(q), kq)
            idx = idx.reshape(len(q), kq)
        self_hits = self.ids[idx] == query_ids[:, None]
        # Drop the self entry where present, else the farthest of the kq
        # returned (value-equivalent when self was crowded out by ties).
        keep = np.ones_like(dist, dtype=bool)
        has_self = self_hits.any(axis=1)
        first_self = np.where(has_self, self_hits.argmax(axis=1), kq - 1)
        keep[np.arange(len(q)), first_self] = False
        kept = dist[keep].reshape(len(q), kq - 1)
        avail = self.n - has_self.astype(int)
        out = np.full(len(q), np.inf)
        kk = np.minimum(k, np.minimum(avail, kq - 1))
        for count in np.unique(kk):
            if count == 0:
                continue
            rows = np.nonzero(kk == count)[0]
            out[rows] = kept[rows, :count].mean(axis=1)
        return out


class NoveltyQueryIndex:
    """Per-component exact KNN index over the defined points of a reference set."""

    def __init__(self, specs, ids_per_component, points_per_component):
        self.specs = tuple(specs)
        self.components = [
            _ComponentIndex(spec, ids, pts)
            for spec, ids, pts in zip(self.specs, ids_per_component, points_per_component)
        ]

    @classmethod
    def from_individuals(cls, reference, specs) -> "NoveltyQueryIndex":
        specs = tuple(specs)
        ids_per, pts_per = [], []
        for i, spec in enumerate(specs):
            ids, pts = [], []
            for ind in reference:
                comp = ind.behavior.components[i]
                if comp is not None:
                    ids.append(ind.eval_id)
                    pts.append(comp)
            ids_per.append(np.asarray(ids, dtype=np.int64))
            pts_per.append(
                np.asarray(pts, dtype=float).reshape(len(pts), spec.dim)
            )
        return cls(specs, ids_per, pts_per)

    def component_size(self, i: int) -> int:
        return self.components[i].n

    def component_ids(self, i: int) -> np.ndarray:
        return self.components[i].ids


def knn_novelty(individual, index: NoveltyQueryIndex, k: int) -> tuple:
    """Per-component novelty of one evaluated individual; None where the
    component is undefined."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    out = []
    for i, comp in enumerate(individual.behavior.components):
        if comp is None:
            out.append(None)
            continue
        vals = index.components[i].mean_knn(
            np.asarray([individual.eval_id], dtype=np.int64),
            comp.reshape(1, -1),
            k,
        )
        out.append(float(vals[0]))
    return tuple(out)


def compute_novelties(candidates, index: NoveltyQueryIndex, k: int) -> list:
    """Batched knn_novelty over candidates; returns one tuple per candidate."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n_b = len(index.specs)
    results = [[None] * n_b for _ in candidates]
    for i in range(n_b):
        rows, ids, pts = [], [], []
        for row, ind in enumerate(candidates):
            comp = ind.behavior.components[i]
            if comp is not None:
                rows.append(row)
                ids.append(ind.eval_id)
                pts.append(comp)
        if not rows:
            continue
        vals = index.components[i].mean_knn(
            np.asarray(ids, dtype=np.int64),
            np.asarray(pts, dtype=float).reshape(len(pts), index.specs[i].dim),
            k,
        )
        for row, v in zip(rows, vals):
            results[row][i] = float(v)
    return [tuple(r) for r in results]
