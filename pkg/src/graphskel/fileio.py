"""File formats: delimited point clouds, JSON graph/fit/report artifacts.

Clouds are plain text, one point per line, comma-separated coordinates,
shortest round-trip decimals. All writes are atomic (temp file + rename) and
every JSON artifact embeds the config that produced it.
"""
from __future__ import annotations

import json
import os
import tempfile
from typing import Any

import numpy as np

from .abstract_graph import AbstractGraph, RefinedPartition, boundary_matrix
from .errors import CloudParseError
from .geometry import PointCloud
from .synthetic import EmbeddedGraphSpec

__all__ = [
    "read_cloud",
    "write_cloud",
    "write_text_atomic",
    "write_json_atomic",
    "read_json",
    "graph_to_dict",
    "graph_from_dict",
    "graph_spec_to_dict",
    "graph_spec_from_dict",
]

SCHEMA_VERSION = 1


def read_cloud(path: str, skip_header: bool = False) -> PointCloud:
    """Parse a delimited cloud file; raises CloudParseError with line numbers."""
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if skip_header:
                skip_header = False
                continue
            parts = line.split(",")
            try:
                row = [float(tok) for tok in parts]
            except ValueError:
                raise CloudParseError(f"cannot parse coordinates from {line!r}", lineno) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CloudParseError(
                    f"expected {width} coordinates, found {len(row)}", lineno
                )
            rows.append(row)
    if not rows:
        raise CloudParseError(f"no points found in {path}")
    try:
        return PointCloud(np.asarray(rows))
    except ValueError as exc:
        raise CloudParseError(str(exc)) from None


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".graphskel-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path: str, payload: str) -> None:
    _atomic_write(path, payload)


def write_cloud(path: str, cloud: PointCloud) -> None:
    lines = [",".join(repr(float(c)) for c in row) for row in cloud.coords]
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json_atomic(path: str, obj: dict[str, Any]) -> None:
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path: str) -> dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _int_list(arr) -> list[int]:
    return [int(i) for i in np.asarray(arr).tolist()]


def _float_list(arr) -> list[float]:
    return [float(x) for x in np.asarray(arr).tolist()]


def graph_to_dict(graph: AbstractGraph, refined: RefinedPartition, config: dict[str, Any]) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "graphskel.graph",
        "config": config,
        "dim": graph.cloud.dim,
        "n_points": len(graph.cloud),
        "vertices": [
            {
                "id": i,
                "centroid": _float_list(graph.vertex_centroids[i]),
                "members": _int_list(members),
            }
            for i, members in enumerate(graph.vertex_clusters)
        ],
        "edges": [
            {
                "id": j,
                "boundary": sorted(graph.boundary[j]),
                "members": _int_list(members),
            }
            for j, members in enumerate(graph.edge_clusters)
        ],
        "boundary_matrix": boundary_matrix(graph).tolist(),
        "labels": {
            "p0_tilde": _int_list(refined.p0_tilde),
            "p1_tilde": _int_list(refined.p1_tilde),
            "moved": _int_list(refined.moved),
        },
    }


def graph_from_dict(doc: dict[str, Any], cloud: PointCloud) -> tuple[AbstractGraph, RefinedPartition]:
    if doc.get("kind") != "graphskel.graph":
        raise ValueError(f"not a graphskel graph document (kind={doc.get('kind')!r})")
    if int(doc.get("n_points", -1)) != len(cloud):
        raise ValueError(
            f"graph document describes {doc.get('n_points')} points but the cloud has {len(cloud)}"
        )
    if int(doc.get("dim", -1)) != cloud.dim:
        raise ValueError("graph document dimension does not match the cloud")
    vertex_clusters = [np.asarray(v["members"], dtype=int) for v in doc["vertices"]]
    edge_clusters = [np.asarray(e["members"], dtype=int) for e in doc["edges"]]
    boundary = [(int(e["boundary"][0]), int(e["boundary"][1])) for e in doc["edges"]]
    centroids = (
        np.asarray([v["centroid"] for v in doc["vertices"]], dtype=float)
        if doc["vertices"]
        else np.empty((0, cloud.dim))
    )
    graph = AbstractGraph(vertex_clusters, edge_clusters, boundary, centroids, cloud)
    labels = doc["labels"]
    refined = RefinedPartition(
        p0_tilde=np.asarray(labels["p0_tilde"], dtype=int),
        p1_tilde=np.asarray(labels["p1_tilde"], dtype=int),
        moved=np.asarray(labels["moved"], dtype=int),
    )
    return graph, refined


def graph_spec_to_dict(spec: EmbeddedGraphSpec) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "graphskel.graph-spec",
        "dim": spec.dim,
        "vertices": [_float_list(v) for v in spec.vertices],
        "edges": [[int(a), int(b)] for (a, b) in spec.edges],
    }


def graph_spec_from_dict(doc: dict[str, Any]) -> EmbeddedGraphSpec:
    if doc.get("kind") != "graphskel.graph-spec":
        raise ValueError(f"not a graphskel graph-spec document (kind={doc.get('kind')!r})")
    return EmbeddedGraphSpec(
        np.asarray(doc["vertices"], dtype=float),
        tuple((int(a), int(b)) for (a, b) in doc["edges"]),
    )
