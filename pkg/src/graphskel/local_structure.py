"""Per-point classification into vertex-like or edge-like local structure.

A sample's local structure is the pair of threshold graphs on the ball
B_{R+eps}(p) and the spherical shell S_{R-eps}^{R+eps}(p), both at contact
scale 3*eps. A connected ball with exactly two shell clusters whose centroids
subtend a wide angle at p is the signature of an edge interior; everything
else is vertex-like.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .geometry import (
    PointCloud,
    ball_query,
    component_centroid,
    distance,
    point_segment_distance,
    segment_segment_distance,
    shell_query,
    threshold_components,
)

if TYPE_CHECKING:
    from .synthetic import EmbeddedGraphSpec

__all__ = [
    "ReconstructionConfig",
    "LocalLabel",
    "Partition",
    "VERTEX_LIKE",
    "EDGE_LIKE",
    "psi",
    "phi",
    "inner_product_threshold",
    "classify_point",
    "classify_all",
    "partition",
    "partition_from_labels",
    "AssumptionReport",
    "ConditionCheck",
    "check_assumptions",
]

VERTEX_LIKE = "vertex"
EDGE_LIKE = "edge"

_ASIN_CLAMP = 1e-12  # tolerate only rounding-level excursions outside [-1, 1]


@dataclass(frozen=True)
class ReconstructionConfig:
    """The scale pair (R, eps) and the thresholds derived from it.

    `guarantee_warning` is set when R < 12*eps: the classifier still runs, but
    the correctness guarantees no longer apply.
    """

    R: float
    eps: float
    guarantee_warning: bool = field(init=False)

    def __post_init__(self):
        if not (self.R > 0 and self.eps > 0):
            raise ValueError("R and eps must be positive")
        if not self.R > self.eps:
            raise ValueError("R must exceed eps (the shell would be empty)")
        # rounding-tolerant: R = ratio * eps computed in floats must not flip
        # an exact ratio-12 configuration out of the guarantee regime
        object.__setattr__(
            self, "guarantee_warning", self.R < 12 * self.eps * (1 - 1e-9)
        )

    @property
    def ratio(self) -> float:
        return self.R / self.eps

    @property
    def ball_radius(self) -> float:
        return self.R + self.eps

    @property
    def shell_inner(self) -> float:
        return self.R - self.eps

    @property
    def shell_outer(self) -> float:
        return self.R + self.eps

    @property
    def contact_scale(self) -> float:
        """Threshold-graph scale 3*eps used for both local graphs."""
        return 3 * self.eps

    @property
    def vertex_cluster_scale(self) -> float:
        """Clustering scale 3R/2 + 2*eps for the vertex-like set."""
        return 1.5 * self.R + 2 * self.eps

    @property
    def ip_threshold(self) -> float:
        return inner_product_threshold(self)


@dataclass(frozen=True)
class LocalLabel:
    """Classification of one sample plus the evidence that produced it."""

    tag: str  # VERTEX_LIKE or EDGE_LIKE
    ball_connected: bool
    shell_component_count: int
    inner_product: float | None = None

    @property
    def is_vertex_like(self) -> bool:
        return self.tag == VERTEX_LIKE


@dataclass(frozen=True)
class Partition:
    """Disjoint split of all cloud indices into vertex-like and edge-like."""

    p0: np.ndarray
    p1: np.ndarray

    @property
    def size(self) -> int:
        return self.p0.size + self.p1.size


def _checked_asin(arg: float, context: str) -> float:
    if abs(arg) > 1 + _ASIN_CLAMP:
        raise ValueError(f"{context}: arcsin argument {arg} outside [-1, 1]")
    return math.asin(min(1.0, max(-1.0, arg)))


def _checked_acos(arg: float, context: str) -> float:
    if abs(arg) > 1 + _ASIN_CLAMP:
        raise ValueError(f"{context}: arccos argument {arg} outside [-1, 1]")
    return math.acos(min(1.0, max(-1.0, arg)))


def psi(R: float, eps: float) -> float:
    """Upper angle bound for degree-2 vertices, in radians.

    Scale invariant: psi(k*R, k*eps) == psi(R, eps). Defined for R > 12*eps;
    below that a warning is emitted and the formula is still evaluated.
    """
    if not (R > 0 and eps > 0):
        raise ValueError("R and eps must be positive")
    if R <= 12 * eps:
        warnings.warn(
            f"psi evaluated outside the guarantee regime (R/eps = {R / eps:.3g} <= 12)",
            RuntimeWarning,
            stacklevel=2,
        )
    num = R * R - 4 * R * eps - 9 * eps * eps
    den = (R + eps) * math.sqrt(R * R + 6 * R * eps + 34 * eps * eps)
    return math.pi - math.atan((R + 3 * eps) / (6 * eps)) + _checked_asin(num / den, "psi")


def phi(R: float, eps: float) -> float:
    """Lower angle bound between edges at a shared vertex, in radians."""
    if not (R > 0 and eps > 0):
        raise ValueError("R and eps must be positive")
    if not R > eps:
        raise ValueError("phi requires R > eps")
    re = R - eps
    first = _checked_acos((re * re - 18 * eps * eps) / (re * re), "phi")
    second = 2 * _checked_asin(2 * eps / re, "phi")
    return first + second


def inner_product_threshold(config: ReconstructionConfig) -> float:
    """Shell-centroid inner-product cutoff -R^2 + 2*R*eps + 7*eps^2."""
    R, eps = config.R, config.eps
    return -R * R + 2 * R * eps + 7 * eps * eps


def classify_point(cloud: PointCloud, p_index: int, config: ReconstructionConfig) -> LocalLabel:
    """Classify one sample by its (R, eps)-local structure.

    The sample itself takes part in the ball graph but is removed from the
    shell (its self-distance 0 is <= R - eps). An empty shell counts as 0
    components, which classifies vertex-like and covers degree-0 vertices.
    """
    p = cloud[p_index]
    ball = ball_query(cloud, p, config.ball_radius)
    ball_cc = threshold_components(cloud, ball, config.contact_scale)
    ball_connected = ball_cc.num_components <= 1

    shell = shell_query(cloud, p, config.shell_inner, config.shell_outer)
    shell_cc = threshold_components(cloud, shell, config.contact_scale)
    n_shell = shell_cc.num_components

    if not ball_connected:
        return LocalLabel(EDGE_LIKE, False, n_shell)
    if n_shell != 2:
        return LocalLabel(VERTEX_LIKE, True, n_shell)

    q1 = component_centroid(cloud, shell_cc.members(0))
    q2 = component_centroid(cloud, shell_cc.members(1))
    ip = float(np.dot(q1 - p, q2 - p))
    tag = VERTEX_LIKE if ip > config.ip_threshold else EDGE_LIKE
    return LocalLabel(tag, True, 2, ip)


def _worker_count() -> int:
    raw = os.environ.get("GRAPHSKEL_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def classify_all(cloud: PointCloud, config: ReconstructionConfig) -> list[LocalLabel]:
    """Classify every sample; pure per point, so workers may share the cloud."""
    n = len(cloud)
    workers = min(_worker_count(), n) if n else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda i: classify_point(cloud, i, config), range(n)))
    return [classify_point(cloud, i, config) for i in range(n)]


def partition_from_labels(labels: list[LocalLabel]) -> Partition:
    tags = np.array([lab.is_vertex_like for lab in labels], dtype=bool)
    return Partition(p0=np.flatnonzero(tags), p1=np.flatnonzero(~tags))


def partition(cloud: PointCloud, config: ReconstructionConfig) -> Partition:
    """Split the cloud into P0 (vertex-like) and P1 (edge-like)."""
    return partition_from_labels(classify_all(cloud, config))


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    margin: float  # positive when satisfied; distance to the bound
    witness: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    conditions: tuple[ConditionCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failed(self) -> list[ConditionCheck]:
        return [c for c in self.conditions if not c.passed]


def _vertex_angles(graph: "EmbeddedGraphSpec") -> list[tuple[int, int, int, float]]:
    """All (vertex, neighbor_a, neighbor_b, angle) triples at shared vertices."""
    out = []
    for v in range(graph.n_vertices):
        nbrs = graph.neighbors(v)
        for i in range(len(nbrs)):
            for j in range(i + 1, len(nbrs)):
                u1 = graph.vertices[nbrs[i]] - graph.vertices[v]
                u2 = graph.vertices[nbrs[j]] - graph.vertices[v]
                c = float(np.dot(u1, u2) / (np.linalg.norm(u1) * np.linalg.norm(u2)))
                out.append((v, nbrs[i], nbrs[j], math.acos(min(1.0, max(-1.0, c)))))
    return out


def check_assumptions(graph: "EmbeddedGraphSpec", config: ReconstructionConfig) -> AssumptionReport:
    """Evaluate the five embedding conditions the guarantees rest on.

    The report is total: every condition is evaluated even after a failure,
    and each failing condition carries the violating witness.
    """
    R, eps = config.R, config.eps
    V = graph.vertices
    checks = []

    # 1. vertex separation > 9R/2 + 6 eps (strict)
    bound = 4.5 * R + 6 * eps
    worst, witness = math.inf, ""
    for i in range(graph.n_vertices):
        for j in range(i + 1, graph.n_vertices):
            d = distance(V[i], V[j])
            if d < worst:
                worst, witness = d, f"vertices {i},{j} at distance {d:.6g}"
    ok = worst > bound
    checks.append(ConditionCheck("vertex_separation", ok, worst - bound, "" if ok else witness))

    # 2. vertex to non-incident edge > 3R/2 + 4 eps
    bound = 1.5 * R + 4 * eps
    worst, witness = math.inf, ""
    for v in range(graph.n_vertices):
        for (a, b) in graph.edges:
            if v in (a, b):
                continue
            d = point_segment_distance(V[v], V[a], V[b])
            if d < worst:
                worst, witness = d, f"vertex {v} to edge ({a},{b}) at distance {d:.6g}"
    ok = worst > bound
    checks.append(ConditionCheck("vertex_edge_clearance", ok, worst - bound, "" if ok else witness))

    # 3. edges sharing no vertex > 5 eps apart
    bound = 5 * eps
    worst, witness = math.inf, ""
    for i in range(graph.n_edges):
        for j in range(i + 1, graph.n_edges):
            e1, e2 = graph.edges[i], graph.edges[j]
            if set(e1) & set(e2):
                continue
            d = segment_segment_distance(V[e1[0]], V[e1[1]], V[e2[0]], V[e2[1]])
            if d < worst:
                worst, witness = d, f"edges {e1} and {e2} at distance {d:.6g}"
    ok = worst > bound
    checks.append(ConditionCheck("edge_edge_clearance", ok, worst - bound, "" if ok else witness))

    angles = _vertex_angles(graph)

    # 4. every shared-vertex angle >= Phi(R, eps)
    try:
        lower = phi(R, eps)
    except ValueError as exc:
        checks.append(ConditionCheck("angle_lower_bound", False, -math.inf, f"Phi undefined: {exc}"))
    else:
        worst, witness = math.inf, ""
        for (v, a, b, ang) in angles:
            if ang < worst:
                worst, witness = ang, f"angle {ang:.6g} rad at vertex {v} between edges to {a},{b}"
        ok = worst >= lower
        checks.append(ConditionCheck("angle_lower_bound", ok, worst - lower, "" if ok else witness))

    # 5. degree-2 vertex angles <= Psi(R, eps)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            upper = psi(R, eps)
    except ValueError as exc:
        checks.append(ConditionCheck("deg2_angle_upper_bound", False, -math.inf, f"Psi undefined: {exc}"))
    else:
        worst, witness = -math.inf, ""
        for (v, a, b, ang) in angles:
            if graph.degree(v) == 2 and ang > worst:
                worst, witness = ang, f"angle {ang:.6g} rad at degree-2 vertex {v}"
        ok = worst <= upper  # vacuously true with no degree-2 vertices
        checks.append(ConditionCheck("deg2_angle_upper_bound", ok, upper - worst, "" if ok else witness))

    return AssumptionReport(tuple(checks))
