"""Independent oracles used to check the library's fast paths.

The exhaustive closest-point search scans every face with no acceleration
structure; it shares only the per-(point, face) triangle kernel and the
squared-distance expression with the library so that equality can be asserted
bit-for-bit.  The ray caster and the projection oracle are fully independent
implementations.
"""

from __future__ import annotations

import numpy as np

from flowfield.geometry import TriMesh, closest_point_on_triangles


def brute_force_closest(mesh: TriMesh, points: np.ndarray, chunk: int = 8):
    """Exhaustive per-face closest-point search, lowest face index on ties.

    The point chunk is small on purpose: per-call pair blocks then stay
    cache-resident, which is the fastest configuration for this scan.
    """
    points = np.asarray(points, dtype=np.float64)
    a, b, c = mesh.corners
    valid = np.nonzero(~mesh.degenerate_faces)[0]
    a, b, c = a[valid], b[valid], c[valid]
    nf = len(valid)

    n = len(points)
    out_face = np.empty(n, dtype=np.int64)
    out_point = np.empty((n, 3))
    out_vw = np.empty((n, 2))
    out_d2 = np.empty(n)
    for lo in range(0, n, chunk):
        pts = points[lo : lo + chunk]
        k = len(pts)
        q = np.repeat(pts, nf, axis=0)
        ta = np.tile(a, (k, 1))
        tb = np.tile(b, (k, 1))
        tc = np.tile(c, (k, 1))
        cp, vw = closest_point_on_triangles(ta, tb, tc, q)
        diff = q - cp
        d2 = np.einsum("ij,ij->i", diff, diff).reshape(k, nf)
        # argmin returns the first minimum; faces are scanned in ascending
        # order, so this is the lowest-index tie-break.
        pick = np.argmin(d2, axis=1)
        rows = np.arange(k) * nf + pick
        out_face[lo : lo + k] = valid[pick]
        out_point[lo : lo + k] = cp[rows]
        out_vw[lo : lo + k] = vw[rows]
        out_d2[lo : lo + k] = d2[np.arange(k), pick]
    return out_face, out_point, out_vw, out_d2


def brute_force_surface_field(mesh_tgt: TriMesh, mesh_src: TriMesh, points, offset=True):
    """Surface-field reconstruction on brute-force matched faces."""
    points = np.asarray(points, dtype=np.float64)
    faces, _, _, _ = brute_force_closest(mesh_tgt, points)
    a = mesh_tgt.vertices[mesh_tgt.faces[faces, 0]]
    b = mesh_tgt.vertices[mesh_tgt.faces[faces, 1]]
    c = mesh_tgt.vertices[mesh_tgt.faces[faces, 2]]
    e1, e2 = b - a, c - a
    d = points - a
    g11 = np.einsum("ij,ij->i", e1, e1)
    g12 = np.einsum("ij,ij->i", e1, e2)
    g22 = np.einsum("ij,ij->i", e2, e2)
    det = g11 * g22 - g12 * g12
    p1 = np.einsum("ij,ij->i", e1, d)
    p2 = np.einsum("ij,ij->i", e2, d)
    v = (g22 * p1 - g12 * p2) / det
    w = (g11 * p2 - g12 * p1) / det
    h = np.einsum("ij,ij->i", mesh_tgt.face_normals[faces], d)
    sa = mesh_src.vertices[mesh_src.faces[faces, 0]]
    sb = mesh_src.vertices[mesh_src.faces[faces, 1]]
    sc = mesh_src.vertices[mesh_src.faces[faces, 2]]
    out = sa + v[:, None] * (sb - sa) + w[:, None] * (sc - sa)
    if offset:
        out = out + h[:, None] * mesh_src.face_normals[faces]
    return out


def raycast_depth(mesh: TriMesh, cam) -> np.ndarray:
    """Per-pixel ray/mesh intersection depth map (Moller-Trumbore, no culling).

    Rays go through pixel centers; the returned value is the camera-frame z
    of the nearest hit, or 0 where nothing is hit.
    """
    a, b, c = mesh.corners
    e1 = b - a
    e2 = c - a
    origin = cam.translation
    out = np.zeros((cam.height, cam.width))
    for row in range(cam.height):
        us = np.arange(cam.width) + 0.5
        d_cam = np.stack(
            [
                (us - cam.cx) / cam.fx,
                np.full(cam.width, (row + 0.5 - cam.cy) / cam.fy),
                np.ones(cam.width),
            ],
            axis=1,
        )
        d_world = d_cam @ cam.rotation.T  # camera z component is 1, so the
        # ray parameter of a hit equals its camera-frame depth.
        pvec = np.cross(d_world[:, None, :], e2[None, :, :])
        det = np.einsum("fj,pfj->pf", e1, pvec)
        ok = np.abs(det) > 1e-14
        det = np.where(ok, det, 1.0)
        tvec = origin - a
        u = np.einsum("fj,pfj->pf", tvec, pvec) / det
        qvec = np.cross(tvec, e1)
        vv = np.einsum("pj,fj->pf", d_world, qvec) / det
        t = np.einsum("fj,fj->f", e2, qvec)[None, :] / det
        hit = ok & (u >= 0.0) & (vv >= 0.0) & (u + vv <= 1.0) & (t > 1e-6)
        t = np.where(hit, t, np.inf)
        nearest = t.min(axis=1)
        out[row] = np.where(np.isfinite(nearest), nearest, 0.0)
    return out


def backproject_by_matrices(K, H34, pixel, depth):
    """Eq.-style backprojection through explicit 4x4 matrix arithmetic."""
    K = np.asarray(K, dtype=np.float64)
    hom = np.eye(4)
    hom[:3, :] = np.asarray(H34, dtype=np.float64)
    p_cam = depth * (np.linalg.inv(K) @ np.array([pixel[0], pixel[1], 1.0]))
    return (hom @ np.array([*p_cam, 1.0]))[:3]


def rotation_z(angle: float) -> np.ndarray:
    ca, sa = np.cos(angle), np.sin(angle)
    return np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(angle: float) -> np.ndarray:
    ca, sa = np.cos(angle), np.sin(angle)
    return np.array([[ca, 0.0, sa], [0.0, 1.0, 0.0], [-sa, 0.0, ca]])
