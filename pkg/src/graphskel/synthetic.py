"""Assumption-compliant embedded graphs and epsilon-samples of them.

The sampler walks every edge at arc-length spacing <= s, keeps both endpoints,
and perturbs each base point inside a ball of radius b. With s/2 + b <= eps
the Hausdorff bound d_H(|G|, P) <= eps holds by construction, and an
independent discretization-based verifier can certify it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import GenerationError
from .geometry import PointCloud, distance, point_segment_distance, segment_segment_distance
from .local_structure import ReconstructionConfig, check_assumptions

__all__ = [
    "EmbeddedGraphSpec",
    "SampleSpec",
    "HausdorffReport",
    "builtin_fixture",
    "sample_graph",
    "hausdorff_check",
    "random_compliant_graph",
]


@dataclass(frozen=True)
class EmbeddedGraphSpec:
    """A straight-line embedded graph: vertex coordinates plus edge pairs.

    Edges may only meet at shared endpoint vertices, and no degree-2 vertex
    may have a straight (pi) angle; both are checked at construction.
    """

    vertices: np.ndarray  # (n_v, dim)
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 1:
            raise ValueError("vertices must be a non-empty (n_v, dim) array")
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertex coordinates must be finite")
        edges = tuple((int(a), int(b)) for (a, b) in self.edges)
        n_v = verts.shape[0]
        seen = set()
        for (a, b) in edges:
            if not (0 <= a < n_v and 0 <= b < n_v):
                raise ValueError(f"edge ({a},{b}) references a missing vertex")
            if a == b:
                raise ValueError(f"edge ({a},{b}) is a self-loop")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate edge ({a},{b})")
            seen.add(key)
        for i in range(n_v):
            for j in range(i + 1, n_v):
                if np.array_equal(verts[i], verts[j]):
                    raise ValueError(f"vertices {i} and {j} coincide")
        # non-adjacent embedded edges must not touch
        for i in range(len(edges)):
            for j in range(i + 1, len(edges)):
                e1, e2 = edges[i], edges[j]
                if set(e1) & set(e2):
                    continue
                d = segment_segment_distance(verts[e1[0]], verts[e1[1]], verts[e2[0]], verts[e2[1]])
                if d <= 0.0:
                    raise ValueError(f"non-adjacent edges {e1} and {e2} intersect")
        # adjacent edges must not overlap, and degree-2 angles must differ from pi
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        for v in range(n_v):
            nbrs = self.neighbors(v)
            for i in range(len(nbrs)):
                for j in range(i + 1, len(nbrs)):
                    u1 = verts[nbrs[i]] - verts[v]
                    u2 = verts[nbrs[j]] - verts[v]
                    c = float(np.dot(u1, u2) / (np.linalg.norm(u1) * np.linalg.norm(u2)))
                    if c >= 1.0:
                        raise ValueError(f"edges at vertex {v} overlap (zero angle)")
                    if len(nbrs) == 2 and c <= -1.0:
                        raise ValueError(f"degree-2 vertex {v} has a straight (pi) angle")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> list[int]:
        out = []
        for (a, b) in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        return out

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def isolated_vertices(self) -> list[int]:
        used = {v for e in self.edges for v in e}
        return [v for v in range(self.n_vertices) if v not in used]

    def total_edge_length(self) -> float:
        return sum(distance(self.vertices[a], self.vertices[b]) for (a, b) in self.edges)


@dataclass(frozen=True)
class SampleSpec:
    """Sampling parameters; s/2 + b <= eps certifies the Hausdorff bound."""

    eps: float
    spacing: float | None = None  # defaults to eps
    noise: float | None = None  # defaults to eps/2
    seed: int = 0
    noise_kind: str = "uniform"  # "uniform" or "gaussian" (truncated at `noise`)

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.eps)
        if self.noise is None:
            object.__setattr__(self, "noise", self.eps / 2)
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if self.noise > self.eps:
            raise ValueError("noise bound must not exceed eps")
        if self.spacing / 2 + self.noise > self.eps * (1 + 1e-12):
            raise ValueError(
                f"spacing/2 + noise = {self.spacing / 2 + self.noise:.6g} exceeds eps={self.eps:.6g}; "
                "the Hausdorff guarantee would be lost"
            )
        if self.noise_kind not in ("uniform", "gaussian"):
            raise ValueError("noise_kind must be 'uniform' or 'gaussian'")


def builtin_fixture() -> EmbeddedGraphSpec:
    """The 5-vertex, 5-edge benchmark graph in R^3."""
    vertices = np.array(
        [
            (0.0, 0.0, 0.0),
            (4.6, 6.24, 0.0),
            (4.86, 0.51, 3.47),
            (-1.32, 6.29, 4.0),
            (-4.23, -3.48, -3.0),
        ]
    )
    edges = ((0, 4), (0, 2), (0, 3), (1, 3), (1, 2))
    return EmbeddedGraphSpec(vertices, edges)


def _ball_noise(rng: np.random.Generator, n: int, dim: int, radius: float, kind: str) -> np.ndarray:
    if radius == 0.0:
        return np.zeros((n, dim))
    if kind == "uniform":
        direction = rng.normal(size=(n, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = radius * rng.random(n) ** (1.0 / dim)
        return direction * r[:, None]
    # truncated gaussian: std radius/3, resample anything outside the ball
    out = rng.normal(scale=radius / 3.0, size=(n, dim))
    bad = np.linalg.norm(out, axis=1) > radius
    while np.any(bad):
        out[bad] = rng.normal(scale=radius / 3.0, size=(int(bad.sum()), dim))
        bad = np.linalg.norm(out, axis=1) > radius
    return out


def sample_graph(spec: EmbeddedGraphSpec, sample: SampleSpec) -> PointCloud:
    """Deterministic eps-sample of the embedded graph.

    Each edge gets points at arc-length spacing <= s including both endpoints;
    isolated vertices get one point. Every point is perturbed inside a ball of
    radius b using a per-edge substream of the seed.
    """
    chunks = []
    for eidx, (a, b) in enumerate(spec.edges):
        va, vb = spec.vertices[a], spec.vertices[b]
        length = distance(va, vb)
        n_seg = max(1, math.ceil(length / sample.spacing))
        ts = np.linspace(0.0, 1.0, n_seg + 1)
        base = va[None, :] + ts[:, None] * (vb - va)[None, :]
        rng = np.random.default_rng([sample.seed, 0, eidx])
        chunks.append(base + _ball_noise(rng, len(base), spec.dim, sample.noise, sample.noise_kind))
    for vidx in spec.isolated_vertices():
        rng = np.random.default_rng([sample.seed, 1, vidx])
        base = spec.vertices[vidx][None, :]
        chunks.append(base + _ball_noise(rng, 1, spec.dim, sample.noise, sample.noise_kind))
    return PointCloud(np.vstack(chunks))


@dataclass(frozen=True)
class HausdorffReport:
    passed: bool
    measured: float
    tolerance: float  # eps plus the discretization slack
    resolution: float


def _graph_discretization(spec: EmbeddedGraphSpec, resolution: float) -> np.ndarray:
    chunks = []
    for (a, b) in spec.edges:
        va, vb = spec.vertices[a], spec.vertices[b]
        n_seg = max(1, math.ceil(distance(va, vb) / resolution))
        ts = np.linspace(0.0, 1.0, n_seg + 1)
        chunks.append(va[None, :] + ts[:, None] * (vb - va)[None, :])
    for vidx in spec.isolated_vertices():
        chunks.append(spec.vertices[vidx][None, :])
    return np.vstack(chunks)


def _distance_to_graph(x: np.ndarray, spec: EmbeddedGraphSpec) -> float:
    best = math.inf
    for (a, b) in spec.edges:
        best = min(best, point_segment_distance(x, spec.vertices[a], spec.vertices[b]))
    for vidx in spec.isolated_vertices():
        best = min(best, distance(x, spec.vertices[vidx]))
    return best


def hausdorff_check(cloud: PointCloud, spec: EmbeddedGraphSpec, eps: float) -> HausdorffReport:
    """Certify d_H(|G|, P) <= eps up to an eps/100 discretization slack."""
    resolution = eps / 100.0
    grid = _graph_discretization(spec, resolution)
    tree = cKDTree(cloud.coords)
    graph_to_cloud = float(tree.query(grid, k=1)[0].max())
    cloud_to_graph = max(_distance_to_graph(x, spec) for x in cloud.coords)
    measured = max(graph_to_cloud, cloud_to_graph)
    tolerance = eps + resolution
    return HausdorffReport(measured <= tolerance, measured, tolerance, resolution)


@dataclass(frozen=True)
class GraphGenConfig:
    """Knobs for the rejection-sampling graph generator."""

    R: float
    eps: float
    n_edges: int | None = None  # None: random in [n_vertices-1, n_vertices+1]
    max_attempts: int = 300
    margin: float = 0.05  # relative slack kept beyond every bound

    @property
    def reconstruction(self) -> ReconstructionConfig:
        return ReconstructionConfig(self.R, self.eps)


def _edge_candidate_ok(
    verts: np.ndarray,
    edges: list[tuple[int, int]],
    new_edge: tuple[int, int],
    cfg: GraphGenConfig,
    phi_bound: float,
) -> bool:
    a, b = new_edge
    margin = 1.0 + cfg.margin
    # vertex clearance from the new edge
    for v in range(verts.shape[0]):
        if v in (a, b):
            continue
        if point_segment_distance(verts[v], verts[a], verts[b]) <= (1.5 * cfg.R + 4 * cfg.eps) * margin:
            return False
    for (c, d) in edges:
        shared = {a, b} & {c, d}
        if not shared:
            if (
                segment_segment_distance(verts[a], verts[b], verts[c], verts[d])
                <= 5 * cfg.eps * margin
            ):
                return False
        else:
            v = shared.pop()
            other_new = b if v == a else a
            other_old = d if v == c else c
            u1 = verts[other_new] - verts[v]
            u2 = verts[other_old] - verts[v]
            cosang = float(np.dot(u1, u2) / (np.linalg.norm(u1) * np.linalg.norm(u2)))
            if math.acos(min(1.0, max(-1.0, cosang))) < phi_bound * margin:
                return False
    return True


def random_compliant_graph(
    dim: int, n_vertices: int, config: GraphGenConfig, seed: int
) -> EmbeddedGraphSpec:
    """Rejection-sample an embedded graph until check_assumptions passes.

    Raises GenerationError once the retry budget is exhausted; a larger domain
    or fewer vertices usually fixes that.
    """
    if n_vertices < 2:
        raise ValueError("need at least two vertices")
    from .local_structure import phi  # local import: keep module load light

    rcfg = config.reconstruction
    sep = (4.5 * config.R + 6 * config.eps) * (1.0 + config.margin)
    side = sep * (1.0 + 1.4 * n_vertices ** (1.0 / dim))
    phi_bound = phi(config.R, config.eps)

    for attempt in range(config.max_attempts):
        rng = np.random.default_rng([seed, attempt])
        verts = _place_separated(rng, n_vertices, dim, side, sep)
        if verts is None:
            continue
        pairs = [(i, j) for i in range(n_vertices) for j in range(i + 1, n_vertices)]
        rng.shuffle(pairs)
        target = (
            config.n_edges
            if config.n_edges is not None
            else int(rng.integers(n_vertices - 1, n_vertices + 2))
        )
        edges: list[tuple[int, int]] = []
        for pair in pairs:
            if len(edges) >= target:
                break
            if _edge_candidate_ok(verts, edges, pair, config, phi_bound):
                edges.append(pair)
        if not edges:
            continue
        try:
            spec = EmbeddedGraphSpec(verts, tuple(edges))
        except ValueError:
            continue
        if check_assumptions(spec, rcfg).all_passed:
            return spec
    raise GenerationError(
        f"no compliant graph after {config.max_attempts} attempts "
        f"(dim={dim}, n_vertices={n_vertices}); try a larger domain or fewer vertices"
    )


def _place_separated(
    rng: np.random.Generator, n: int, dim: int, side: float, sep: float
) -> np.ndarray | None:
    placed: list[np.ndarray] = []
    for _ in range(n):
        for _ in range(400):
            cand = rng.random(dim) * side
            if all(distance(cand, p) > sep for p in placed):
                placed.append(cand)
                break
        else:
            return None
    return np.vstack(placed)
