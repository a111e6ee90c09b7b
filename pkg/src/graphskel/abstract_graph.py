"""Recover the abstract graph: cluster the partition, refine it, read off the
boundary operator.

Vertex-like samples cluster at scale 3R/2 + 2*eps (one cluster per vertex);
edge-like samples cluster at contact scale 3*eps. Edge-like clusters adjacent
to a single vertex cluster live in a vertex's grey annulus and are reabsorbed
into the vertex side before the final clustering.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import StructureError
from .geometry import ComponentLabeling, PointCloud, component_centroid, threshold_components
from .local_structure import Partition, ReconstructionConfig, partition as _partition

if TYPE_CHECKING:
    from .synthetic import EmbeddedGraphSpec

__all__ = [
    "RefinedPartition",
    "AbstractGraph",
    "MatchReport",
    "cluster_p0",
    "cluster_p1",
    "refine",
    "build_graph",
    "boundary_matrix",
    "match_to_ground_truth",
    "recover_graph",
]


@dataclass(frozen=True)
class RefinedPartition:
    """Partition after reabsorbing non-spanning edge-like clusters."""

    p0_tilde: np.ndarray
    p1_tilde: np.ndarray
    moved: np.ndarray  # indices relocated from the edge-like side


@dataclass(frozen=True)
class AbstractGraph:
    """The recovered combinatorial structure plus its supporting clusters."""

    vertex_clusters: list[np.ndarray]
    edge_clusters: list[np.ndarray]
    boundary: list[tuple[int, int]]  # per edge cluster, sorted vertex-cluster ids
    vertex_centroids: np.ndarray  # (n_vertices, dim)
    cloud: PointCloud  # the sample the clusters index into

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_clusters)

    @property
    def n_edges(self) -> int:
        return len(self.edge_clusters)

    def degree(self, vertex_id: int) -> int:
        return sum(1 for pair in self.boundary if vertex_id in pair)

    def degree_sequence(self) -> tuple[int, ...]:
        return tuple(sorted((self.degree(v) for v in range(self.n_vertices)), reverse=True))


def cluster_p0(cloud: PointCloud, part: Partition, config: ReconstructionConfig) -> ComponentLabeling:
    """Components of the threshold graph on P0 at scale 3R/2 + 2*eps."""
    return threshold_components(cloud, part.p0, config.vertex_cluster_scale)


def cluster_p1(cloud: PointCloud, part: Partition, config: ReconstructionConfig) -> ComponentLabeling:
    """Components of the threshold graph on P1 at scale 3*eps."""
    return threshold_components(cloud, part.p1, config.contact_scale)


def _single_linkage(cloud: PointCloud, members_a: np.ndarray, members_b: np.ndarray) -> float:
    a = cloud.coords[members_a]
    b = cloud.coords[members_b]
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    return float(np.sqrt(d2.min()))


def refine(
    cloud: PointCloud,
    q0: ComponentLabeling,
    q1: ComponentLabeling,
    config: ReconstructionConfig,
) -> RefinedPartition:
    """Move every edge-like cluster adjacent to exactly one vertex cluster.

    Adjacency is strict single-linkage distance < 3*eps. A cluster adjacent to
    no vertex cluster cannot occur at a valid scale and raises StructureError.
    """
    p0_parts = q0.sets()
    moved: list[np.ndarray] = []
    kept: list[np.ndarray] = []
    for cid in range(q1.num_components):
        members = q1.members(cid)
        adjacent = sum(
            1 for vp in p0_parts if _single_linkage(cloud, vp, members) < config.contact_scale
        )
        if adjacent == 0:
            raise StructureError(
                f"orphan edge cluster (id {cid}, {members.size} points): no vertex cluster "
                f"within {config.contact_scale:.6g}; the scale pair (R, eps) is likely invalid"
            )
        if adjacent == 1:
            moved.append(members)
        else:
            kept.append(members)

    moved_idx = np.sort(np.concatenate(moved)) if moved else np.empty(0, dtype=int)
    p0_tilde = np.sort(np.concatenate([q0.indices, moved_idx]))
    p1_tilde = (
        np.sort(np.concatenate(kept)) if kept else np.empty(0, dtype=int)
    )
    return RefinedPartition(p0_tilde=p0_tilde, p1_tilde=p1_tilde, moved=moved_idx)


def build_graph(cloud: PointCloud, refined: RefinedPartition, config: ReconstructionConfig) -> AbstractGraph:
    """Cluster the refined partition from scratch and assign boundary pairs.

    Every edge cluster must sit within 3*eps (single linkage) of exactly two
    vertex clusters; anything else is a structural error naming the cluster.
    """
    v_cc = threshold_components(cloud, refined.p0_tilde, config.vertex_cluster_scale)
    e_cc = threshold_components(cloud, refined.p1_tilde, config.contact_scale)
    vertex_clusters = v_cc.sets()
    edge_clusters = e_cc.sets()

    boundary: list[tuple[int, int]] = []
    for eid, emembers in enumerate(edge_clusters):
        touching = [
            vid
            for vid, vmembers in enumerate(vertex_clusters)
            if _single_linkage(cloud, vmembers, emembers) <= config.contact_scale
        ]
        if len(touching) != 2:
            raise StructureError(
                f"edge cluster {eid} ({emembers.size} points) touches {len(touching)} vertex "
                f"clusters (expected 2); the scale pair (R, eps) is likely invalid"
            )
        boundary.append((touching[0], touching[1]))

    centroids = (
        np.vstack([component_centroid(cloud, m) for m in vertex_clusters])
        if vertex_clusters
        else np.empty((0, cloud.dim))
    )
    return AbstractGraph(vertex_clusters, edge_clusters, boundary, centroids, cloud)


def boundary_matrix(graph: AbstractGraph) -> np.ndarray:
    """0/1 incidence matrix B with B[i, j] = 1 iff vertex i bounds edge j."""
    b = np.zeros((graph.n_vertices, graph.n_edges), dtype=int)
    for j, (a, c) in enumerate(graph.boundary):
        b[a, j] = 1
        b[c, j] = 1
    return b


@dataclass(frozen=True)
class MatchReport:
    """Nearest-neighbor matching of a recovered graph against ground truth."""

    is_isomorphic: bool
    vertex_map: list[int]  # vertex cluster id -> true vertex index
    edge_map: list[int]  # edge cluster id -> true edge index
    vertex_errors: list[float]  # centroid distance to the matched true vertex
    reason: str = ""


def match_to_ground_truth(graph: AbstractGraph, truth: "EmbeddedGraphSpec") -> MatchReport:
    """Match clusters to the nearest true vertices/edges and test isomorphism.

    A non-injective matching is reported as a structure mismatch, not raised.
    """
    tv = truth.vertices
    vertex_map = []
    vertex_errors = []
    for c in graph.vertex_centroids:
        d = np.sqrt(np.sum((tv - c) ** 2, axis=1))
        vertex_map.append(int(np.argmin(d)))
        vertex_errors.append(float(d.min()))

    midpoints = np.array([0.5 * (tv[a] + tv[b]) for (a, b) in truth.edges])
    edge_map = []
    for emembers in graph.edge_clusters:
        if midpoints.size == 0:
            edge_map.append(-1)
            continue
        # distance from the cluster (as a point set) to each true edge midpoint
        pts = graph.cloud.coords[emembers]
        d = np.sqrt(np.sum((midpoints[:, None, :] - pts[None, :, :]) ** 2, axis=2)).min(axis=1)
        edge_map.append(int(np.argmin(d)))

    def report(ok: bool, reason: str = "") -> MatchReport:
        return MatchReport(ok, vertex_map, edge_map, vertex_errors, reason)

    if graph.n_vertices != truth.n_vertices:
        return report(False, f"vertex count {graph.n_vertices} != {truth.n_vertices}")
    if graph.n_edges != truth.n_edges:
        return report(False, f"edge count {graph.n_edges} != {truth.n_edges}")
    if len(set(vertex_map)) != len(vertex_map):
        return report(False, "vertex matching is not injective")
    if len(set(edge_map)) != len(edge_map):
        return report(False, "edge matching is not injective")
    for eid, (a, b) in enumerate(graph.boundary):
        mapped = {vertex_map[a], vertex_map[b]}
        true_edge = set(truth.edges[edge_map[eid]])
        if mapped != true_edge:
            return report(
                False,
                f"edge cluster {eid} has boundary {sorted(mapped)} but matches true edge "
                f"{sorted(true_edge)}",
            )
    return report(True)


def recover_graph(
    cloud: PointCloud, config: ReconstructionConfig
) -> tuple[AbstractGraph, RefinedPartition, Partition]:
    """Full structure pipeline: partition, cluster, refine, build."""
    part = _partition(cloud, config)
    q0 = cluster_p0(cloud, part, config)
    q1 = cluster_p1(cloud, part, config)
    refined = refine(cloud, q0, q1, config)
    graph = build_graph(cloud, refined, config)
    return graph, refined, part
