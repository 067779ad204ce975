"""Surface-field correspondence between two same-topology meshes and 3D flows.

A query point is matched to its globally nearest face on the target mesh and
re-expressed in that face's frame: in-plane position as (unclamped) plane
barycentrics, out-of-plane position as signed height along the face normal.
Evaluating the same coordinates on the source mesh's matched face yields the
corresponding source point.  The unclamped decomposition makes the map an
exact identity when the meshes coincide and exactly rigid-equivariant when
they differ by a rigid motion, for every query point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Bvh, TriMesh, build_bvh, closest_point_batch
from .validation import NumericError, ValidationError, as_float_array, check_finite

__all__ = ["FlowSample", "surface_field", "surface_flows", "flow_batch"]


@dataclass(frozen=True)
class FlowSample:
    """One correspondence: target point, matched source point, displacement."""

    p_tgt: np.ndarray
    p_src: np.ndarray
    flow: np.ndarray  # p_src - p_tgt, exactly


def _check_same_topology(mesh_tgt: TriMesh, mesh_src: TriMesh) -> None:
    if mesh_tgt.faces.shape != mesh_src.faces.shape or not np.array_equal(
        mesh_tgt.faces, mesh_src.faces
    ):
        raise ValidationError("surface_field: meshes must share identical face topology")


def _plane_coordinates(mesh: TriMesh, face_idx: np.ndarray, points: np.ndarray):
    """Unclamped plane barycentrics and signed height of points over faces.

    Decomposes p = a + v*(b-a) + w*(c-a) + h*n for each (point, face) pair.
    """
    a = mesh.vertices[mesh.faces[face_idx, 0]]
    b = mesh.vertices[mesh.faces[face_idx, 1]]
    c = mesh.vertices[mesh.faces[face_idx, 2]]
    e1 = b - a
    e2 = c - a
    d = points - a
    g11 = np.einsum("ij,ij->i", e1, e1)
    g12 = np.einsum("ij,ij->i", e1, e2)
    g22 = np.einsum("ij,ij->i", e2, e2)
    p1 = np.einsum("ij,ij->i", e1, d)
    p2 = np.einsum("ij,ij->i", e2, d)
    det = g11 * g22 - g12 * g12  # squared parallelogram area, > 0 off degeneracy
    v = (g22 * p1 - g12 * p2) / det
    w = (g11 * p2 - g12 * p1) / det
    h = np.einsum("ij,ij->i", mesh.face_normals[face_idx], d)
    return v, w, h


def surface_flows(
    points,
    mesh_tgt: TriMesh,
    mesh_src: TriMesh,
    bvh_tgt: Bvh | None = None,
    offset: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Array form of the correspondence: returns (p_src (n,3), flow (n,3)).

    ``offset=False`` drops the signed-height term, projecting queries onto the
    matched source face's plane instead of preserving their height over it.
    """
    points = as_float_array(points, "points", (-1, 3))
    check_finite(points, "points")
    _check_same_topology(mesh_tgt, mesh_src)
    if bvh_tgt is None:
        bvh_tgt = build_bvh(mesh_tgt)

    faces, _, _, _ = closest_point_batch(mesh_tgt, bvh_tgt, points)
    if np.any(mesh_src.degenerate_faces[faces]):
        bad = int(faces[np.nonzero(mesh_src.degenerate_faces[faces])[0][0]])
        raise NumericError(f"surface_field: matched face {bad} is degenerate on the source mesh")

    v, w, h = _plane_coordinates(mesh_tgt, faces, points)
    sa = mesh_src.vertices[mesh_src.faces[faces, 0]]
    sb = mesh_src.vertices[mesh_src.faces[faces, 1]]
    sc = mesh_src.vertices[mesh_src.faces[faces, 2]]
    p_src = sa + v[:, None] * (sb - sa) + w[:, None] * (sc - sa)
    if offset:
        p_src = p_src + h[:, None] * mesh_src.face_normals[faces]
    return p_src, p_src - points


def surface_field(
    p_tgt,
    mesh_tgt: TriMesh,
    mesh_src: TriMesh,
    bvh_tgt: Bvh | None = None,
    offset: bool = True,
) -> np.ndarray:
    """Corresponding source-space location of a single target-space point."""
    p = as_float_array(p_tgt, "p_tgt", (3,))
    p_src, _ = surface_flows(p[None, :], mesh_tgt, mesh_src, bvh_tgt, offset)
    return p_src[0]


def flow_batch(
    points,
    mesh_tgt: TriMesh,
    mesh_src: TriMesh,
    bvh_tgt: Bvh | None = None,
    offset: bool = True,
) -> list[FlowSample]:
    """Per-point flow samples, in input order."""
    points = as_float_array(points, "points", (-1, 3))
    p_src, flow = surface_flows(points, mesh_tgt, mesh_src, bvh_tgt, offset)
    return [
        FlowSample(p_tgt=points[i], p_src=p_src[i], flow=flow[i])
        for i in range(points.shape[0])
    ]
