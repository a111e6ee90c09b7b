"""Euclidean primitives, range/shell queries, and threshold-graph components.

Everything in this module is a pure function over immutable inputs. Queries are
exact vectorized linear scans, so their semantics coincide with the brute-force
definitions they are tested against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PointCloud",
    "Segment",
    "ComponentLabeling",
    "distance",
    "point_segment_distance",
    "segment_segment_distance",
    "ball_query",
    "shell_query",
    "threshold_components",
    "component_centroid",
]


class PointCloud:
    """An immutable ordered set of points in R^n.

    Point order is stable: indices act as identities for all labeling steps.
    Duplicate points are allowed.
    """

    __slots__ = ("_coords",)

    def __init__(self, coords) -> None:
        arr = np.asarray(coords, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"point cloud must be a 2-d array, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise ValueError("point cloud dimension must be >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("point cloud contains non-finite coordinates")
        arr = arr.copy()
        arr.setflags(write=False)
        self._coords = arr

    @property
    def coords(self) -> np.ndarray:
        """(m, n) read-only coordinate array."""
        return self._coords

    @property
    def dim(self) -> int:
        return self._coords.shape[1]

    def __len__(self) -> int:
        return self._coords.shape[0]

    def __getitem__(self, index: int) -> np.ndarray:
        return self._coords[index]

    def __eq__(self, other) -> bool:
        return isinstance(other, PointCloud) and np.array_equal(self._coords, other._coords)

    def __repr__(self) -> str:
        return f"PointCloud(n_points={len(self)}, dim={self.dim})"


@dataclass(frozen=True)
class Segment:
    """A line segment with distinct endpoints."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape:
            raise ValueError("segment endpoints must have the same dimension")
        if np.array_equal(a, b):
            raise ValueError("degenerate segment: endpoints coincide")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)


@dataclass(frozen=True)
class ComponentLabeling:
    """Connected components of a threshold graph on a subset of cloud indices.

    Component ids are contiguous 0..num_components-1, ordered by smallest
    member index.
    """

    indices: np.ndarray  # sorted cloud indices of the subset
    labels: np.ndarray  # component id per entry of `indices`
    num_components: int

    def members(self, component_id: int) -> np.ndarray:
        return self.indices[self.labels == component_id]

    def sets(self) -> list[np.ndarray]:
        return [self.members(c) for c in range(self.num_components)]

    def as_dict(self) -> dict[int, int]:
        return {int(i): int(c) for i, c in zip(self.indices, self.labels)}


def _check_same_dim(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")


def distance(p, q) -> float:
    """Euclidean distance between two points."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_same_dim(p, q)
    return float(np.sqrt(np.sum((p - q) ** 2)))


def point_segment_distance(x, a, b) -> float:
    """Distance from x to the segment [a, b] via the clamped projection."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_dim(x, a)
    _check_same_dim(a, b)
    d = b - a
    dd = float(np.dot(d, d))
    if dd == 0.0:
        raise ValueError("degenerate segment: endpoints coincide")
    t = float(np.dot(x - a, d)) / dd
    t = min(1.0, max(0.0, t))
    return float(np.sqrt(np.sum((x - (a + t * d)) ** 2)))


def segment_segment_distance(p0, p1, q0, q1) -> float:
    """Minimum distance between segments [p0,p1] and [q0,q1] in R^n.

    Standard clamped quadratic minimization over the (s, t) parameter square.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    u = p1 - p0
    v = q1 - q0
    w0 = p0 - q0
    a = float(np.dot(u, u))
    b = float(np.dot(u, v))
    c = float(np.dot(v, v))
    d = float(np.dot(u, w0))
    e = float(np.dot(v, w0))
    if a == 0.0 or c == 0.0:
        raise ValueError("degenerate segment: endpoints coincide")

    denom = a * c - b * b
    if denom > 1e-14 * a * c:
        s = (b * e - c * d) / denom
    else:
        s = 0.0  # near-parallel: fix one endpoint, clamp below
    s = min(1.0, max(0.0, s))
    # optimal t for this s, then re-optimize s for the clamped t
    t = (b * s + e) / c
    t = min(1.0, max(0.0, t))
    s = (b * t - d) / a
    s = min(1.0, max(0.0, s))
    diff = (p0 + s * u) - (q0 + t * v)
    return float(np.sqrt(np.sum(diff**2)))


def _query_distances(cloud: PointCloud, center) -> np.ndarray:
    center = np.asarray(center, dtype=float)
    if center.shape != (cloud.dim,):
        raise ValueError(f"dimension mismatch: center {center.shape} vs cloud dim {cloud.dim}")
    return np.sqrt(np.sum((cloud.coords - center) ** 2, axis=1))


def ball_query(cloud: PointCloud, center, r: float) -> np.ndarray:
    """Indices i with ||p_i - center|| <= r (closed ball)."""
    if r < 0:
        raise ValueError("ball radius must be nonnegative")
    d = _query_distances(cloud, center)
    return np.flatnonzero(d <= r)


def shell_query(cloud: PointCloud, center, r_in: float, r_out: float) -> np.ndarray:
    """Indices i with r_in < ||p_i - center|| <= r_out (half-open shell)."""
    if r_in < 0 or r_in > r_out:
        raise ValueError(f"invalid shell radii: ({r_in}, {r_out}]")
    d = _query_distances(cloud, center)
    return np.flatnonzero((d > r_in) & (d <= r_out))


class _UnionFind:
    """Union-find with path compression, used for threshold-graph components."""

    def __init__(self, size: int) -> None:
        self.parent = list(range(size))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[rj] = ri


def threshold_components(cloud: PointCloud, subset, r: float) -> ComponentLabeling:
    """Connected components of the graph on `subset` with edges at ||p-q|| <= r.

    The edge test is inclusive; component ids are ordered by smallest member
    index, so the labeling is deterministic.
    """
    if r < 0:
        raise ValueError("threshold must be nonnegative")
    subset = np.asarray(subset, dtype=int)
    subset = np.unique(subset)
    if subset.size and (subset[0] < 0 or subset[-1] >= len(cloud)):
        raise ValueError("subset contains out-of-range indices")
    k = subset.size
    if k == 0:
        return ComponentLabeling(subset, np.empty(0, dtype=int), 0)

    pts = cloud.coords[subset]
    dmat = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2))
    ii, jj = np.nonzero(np.triu(dmat <= r, k=1))
    uf = _UnionFind(k)
    for i, j in zip(ii.tolist(), jj.tolist()):
        uf.union(i, j)

    roots = np.array([uf.find(i) for i in range(k)])
    # relabel components in order of smallest member index (subset is sorted)
    order: dict[int, int] = {}
    labels = np.empty(k, dtype=int)
    for i, root in enumerate(roots):
        if root not in order:
            order[root] = len(order)
        labels[i] = order[root]
    return ComponentLabeling(subset, labels, len(order))


def component_centroid(cloud: PointCloud, members) -> np.ndarray:
    """Coordinate-wise mean of the member points."""
    members = np.asarray(members, dtype=int)
    if members.size == 0:
        raise ValueError("cannot take the centroid of an empty member set")
    return cloud.coords[members].mean(axis=0)
