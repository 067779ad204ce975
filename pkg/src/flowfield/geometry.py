"""Triangle-mesh primitives, BVH acceleration, and exact closest-point queries.

All queries are exact: results through the BVH are bit-identical to an
exhaustive search over every face, because both paths share the same
per-(point, face) kernel and the same lexicographic (distance, face index)
selection rule.  Ties are always broken toward the lowest face index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .validation import (
    NumericError,
    ORTHO_TOL,
    ValidationError,
    as_float_array,
    as_index_array,
    check_finite,
)

__all__ = [
    "TriMesh",
    "Bvh",
    "SurfacePoint",
    "build_bvh",
    "closest_point",
    "closest_point_batch",
    "closest_point_on_triangles",
]

# Faces with squared parallelogram area below this are treated as degenerate:
# their normals are undefined and they are skipped by all queries.
DEGENERATE_AREA2 = 1e-24

# Candidate (point, face) pairs are evaluated in chunks of this size to bound
# temporary memory during batched queries.
_PAIR_CHUNK = 1 << 18


@dataclass(frozen=True)
class TriMesh:
    """Immutable triangle mesh with cached per-face unit normals (CCW winding)."""

    vertices: np.ndarray  # (L, 3) float64, meters
    faces: np.ndarray  # (F, 3) int32

    def __post_init__(self):
        object.__setattr__(self, "vertices", as_float_array(self.vertices, "vertices", (-1, 3)))
        object.__setattr__(self, "faces", as_index_array(self.faces, "faces", (-1, 3)))
        check_finite(self.vertices, "vertices")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValidationError("faces: vertex index out of range")

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    @cached_property
    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-face corner positions (a, b, c), each (F, 3)."""
        v, f = self.vertices, self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    @cached_property
    def _cross(self) -> np.ndarray:
        a, b, c = self.corners
        return np.cross(b - a, c - a)

    @cached_property
    def degenerate_faces(self) -> np.ndarray:
        """Boolean mask of zero-area faces (skipped by queries)."""
        return np.einsum("ij,ij->i", self._cross, self._cross) < DEGENERATE_AREA2

    @cached_property
    def face_normals(self) -> np.ndarray:
        """(F, 3) unit normals; zero vector on degenerate faces."""
        cross = self._cross
        norm = np.linalg.norm(cross, axis=1)
        safe = np.where(self.degenerate_faces, 1.0, norm)
        normals = cross / safe[:, None]
        normals[self.degenerate_faces] = 0.0
        return normals

    def translated(self, t) -> "TriMesh":
        t = as_float_array(t, "t", (3,))
        return TriMesh(self.vertices + t, self.faces)

    def transformed(self, r, t) -> "TriMesh":
        """Apply the rigid map v -> r @ v + t."""
        r = as_float_array(r, "r", (3, 3))
        t = as_float_array(t, "t", (3,))
        return TriMesh(self.vertices @ r.T + t, self.faces)


@dataclass(frozen=True)
class SurfacePoint:
    """Closest point on a mesh: face index, barycentrics, position, signed height."""

    face: int
    bary: np.ndarray  # (3,) nonnegative, sums to 1
    point: np.ndarray  # (3,)
    signed_dist: float  # n_face . (query - point); positive on the normal side


@dataclass(frozen=True)
class Bvh:
    """Axis-aligned bounding-box hierarchy over mesh faces.

    Nodes are stored flat; ``left[i] < 0`` marks a leaf whose faces are
    ``face_order[start[i]:start[i]+count[i]]``.  The build is deterministic:
    median split on the longest axis of the node's box, stable ordering.
    """

    nodes_min: np.ndarray  # (n, 3)
    nodes_max: np.ndarray  # (n, 3)
    left: np.ndarray  # (n,) int32, -1 for leaves
    right: np.ndarray  # (n,) int32, -1 for leaves
    start: np.ndarray  # (n,) int32
    count: np.ndarray  # (n,) int32, 0 for internal nodes
    face_order: np.ndarray  # (F,) int32 permutation
    leaf_size: int

    @property
    def num_nodes(self) -> int:
        return self.left.shape[0]


def build_bvh(mesh: TriMesh, leaf_size: int = 4) -> Bvh:
    """Build a deterministic median-split BVH over the mesh faces."""
    if mesh.num_faces == 0:
        raise ValidationError("build_bvh: mesh has no faces")
    if leaf_size < 1:
        raise ValidationError("build_bvh: leaf_size must be >= 1")

    a, b, c = mesh.corners
    face_min = np.minimum(np.minimum(a, b), c)
    face_max = np.maximum(np.maximum(a, b), c)
    centroids = (a + b + c) / 3.0

    order = np.arange(mesh.num_faces, dtype=np.int32)
    nodes_min, nodes_max, left, right, start, count = [], [], [], [], [], []

    def new_node() -> int:
        nodes_min.append(None)
        nodes_max.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(left) - 1

    stack = [(new_node(), 0, mesh.num_faces)]
    while stack:
        node, lo, hi = stack.pop()
        idx = order[lo:hi]
        bmin = face_min[idx].min(axis=0)
        bmax = face_max[idx].max(axis=0)
        nodes_min[node] = bmin
        nodes_max[node] = bmax
        n = hi - lo
        if n <= leaf_size:
            start[node] = lo
            count[node] = n
            continue
        axis = int(np.argmax(bmax - bmin))
        sub = np.argsort(centroids[idx, axis], kind="stable")
        order[lo:hi] = idx[sub]
        mid = lo + n // 2
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], mid, hi))
        stack.append((left[node], lo, mid))

    return Bvh(
        nodes_min=np.asarray(nodes_min, dtype=np.float64),
        nodes_max=np.asarray(nodes_max, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        start=np.asarray(start, dtype=np.int32),
        count=np.asarray(count, dtype=np.int32),
        face_order=order,
        leaf_size=leaf_size,
    )


def closest_point_on_triangles(a, b, c, p):
    """Closest point on triangle (a, b, c) to p, per row.

    All inputs are (n, 3); purely elementwise per row, so results for a given
    (point, triangle) pair do not depend on the rest of the batch.

    Returns (points (n, 3), vw (n, 2)) where the closest point is
    ``a + v*(b-a) + w*(c-a)`` and barycentrics are (1-v-w, v, w).
    Region classification follows the standard vertex/edge/face case split.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)

    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)

    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    n = a.shape[0]
    v = np.empty(n, dtype=np.float64)
    w = np.empty(n, dtype=np.float64)
    remain = np.ones(n, dtype=bool)

    def settle(mask, vv, ww):
        nonlocal remain
        mask = mask & remain
        if np.any(mask):
            v[mask] = vv if np.isscalar(vv) else vv[mask]
            w[mask] = ww if np.isscalar(ww) else ww[mask]
            remain &= ~mask

    settle((d1 <= 0.0) & (d2 <= 0.0), 0.0, 0.0)  # vertex a
    settle((d3 >= 0.0) & (d4 <= d3), 1.0, 0.0)  # vertex b
    with np.errstate(divide="ignore", invalid="ignore"):
        settle((vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0), d1 / (d1 - d3), 0.0)  # edge ab
        settle((d6 >= 0.0) & (d5 <= d6), 0.0, 1.0)  # vertex c
        settle((vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0), 0.0, d2 / (d2 - d6))  # edge ac
        bc_w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        settle((va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0), 1.0 - bc_w, bc_w)  # edge bc
        denom = va + vb + vc
        v[remain] = (vb / denom)[remain]  # face interior
        w[remain] = (vc / denom)[remain]

    points = a + v[:, None] * ab + w[:, None] * ac
    return points, np.stack([v, w], axis=1)


def _point_box_dist2(points, bmin, bmax):
    """Squared distance from each point to its axis-aligned box (rows paired)."""
    d = np.maximum(np.maximum(bmin - points, points - bmax), 0.0)
    return np.einsum("ij,ij->i", d, d)


def _point_box_bounds2(points, bmin, bmax):
    """Squared distances to the nearest and farthest box point, per row.

    The far distance is a valid upper bound on the distance to the nearest
    face inside the node (every node's box tightly bounds at least one whole
    face), which lets the traversal prune siblings before reaching leaves.
    """
    lo = bmin - points
    hi = points - bmax
    near = np.maximum(np.maximum(lo, hi), 0.0)
    far = np.maximum(np.abs(lo), np.abs(hi))
    return np.einsum("ij,ij->i", near, near), np.einsum("ij,ij->i", far, far)


class _Best:
    """Running per-point best candidate under lexicographic (dist2, face) order."""

    def __init__(self, n: int):
        self.n = n
        self.d2 = np.full(n, np.inf)
        self.face = np.full(n, np.iinfo(np.int32).max, dtype=np.int64)
        self.point = np.zeros((n, 3))
        self.vw = np.zeros((n, 2))

    def update(self, pts_idx, faces, d2, points, vw):
        """Merge candidate pairs; ``pts_idx`` may contain repeats.

        The winner per point is the lexicographic minimum of (dist2, face),
        found with two unbuffered minimum scatters; duplicate winning rows
        are bit-identical by construction, so any of them may be kept.
        """
        if pts_idx.size == 0:
            return
        dmin = np.full(self.n, np.inf)
        np.minimum.at(dmin, pts_idx, d2)
        cand = d2 == dmin[pts_idx]
        fmin = np.full(self.n, np.iinfo(np.int64).max)
        np.minimum.at(fmin, pts_idx[cand], faces[cand])
        win = cand.copy()
        win[cand] &= faces[cand] == fmin[pts_idx[cand]]
        rows = np.full(self.n, -1)
        rows[pts_idx[win]] = np.nonzero(win)[0]
        sel = rows[rows >= 0]
        tgt = pts_idx[sel]

        cd2 = d2[sel]
        cface = faces[sel]
        better = (cd2 < self.d2[tgt]) | ((cd2 == self.d2[tgt]) & (cface < self.face[tgt]))
        tgt = tgt[better]
        sel = sel[better]
        self.d2[tgt] = d2[sel]
        self.face[tgt] = faces[sel]
        self.point[tgt] = points[sel]
        self.vw[tgt] = vw[sel]


def _eval_leaf_pairs(mesh, best, pts_idx, face_idx, points):
    """Evaluate candidate (point, face) pairs and merge into the running best."""
    if bool(mesh.degenerate_faces.any()):
        keep = ~mesh.degenerate_faces[face_idx]
        pts_idx = pts_idx[keep]
        face_idx = face_idx[keep]
    a, b, c = mesh.corners
    for lo in range(0, pts_idx.size, _PAIR_CHUNK):
        sl = slice(lo, lo + _PAIR_CHUNK)
        pi = pts_idx[sl]
        fi = face_idx[sl]
        q = points[pi]
        cp, vw = closest_point_on_triangles(a[fi], b[fi], c[fi], q)
        diff = q - cp
        d2 = np.einsum("ij,ij->i", diff, diff)
        best.update(pi, fi.astype(np.int64), d2, cp, vw)


def _leaf_candidates(bvh, pts_idx, node_idx):
    """Expand (point, leaf-node) pairs into flat (point, face) pairs."""
    counts = bvh.count[node_idx]
    starts = bvh.start[node_idx]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    rep_pts = np.repeat(pts_idx, counts)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    faces = bvh.face_order[np.repeat(starts, counts) + offs]
    return rep_pts, faces.astype(np.int64)


def closest_point_batch(mesh: TriMesh, bvh: Bvh, points) -> tuple[np.ndarray, ...]:
    """Globally nearest surface points for a batch of queries.

    Returns ``(faces, bary, closest, signed_dist)`` with shapes
    (n,), (n, 3), (n, 3), (n,).  Exact, with lowest-face-index tie-breaks;
    bit-identical to exhaustive search and independent of batch composition.
    """
    points = as_float_array(points, "points", (-1, 3))
    check_finite(points, "points")
    n = points.shape[0]
    best = _Best(n)
    if n == 0:
        return (
            best.face,
            np.zeros((0, 3)),
            best.point,
            np.zeros(0),
        )
    if bool(np.all(mesh.degenerate_faces)):
        raise NumericError("closest_point: all faces are degenerate")

    # Seed pass: greedily descend to one nearby leaf per point so the pruned
    # traversal below starts with a tight bound.
    left = bvh.left.astype(np.int64)
    right = bvh.right.astype(np.int64)
    cur = np.zeros(n, dtype=np.int64)
    while True:
        at_leaf = left[cur] < 0
        if np.all(at_leaf):
            break
        lchild = np.where(at_leaf, cur, left[cur])
        rchild = np.where(at_leaf, cur, right[cur])
        dl = _point_box_dist2(points, bvh.nodes_min[lchild], bvh.nodes_max[lchild])
        dr = _point_box_dist2(points, bvh.nodes_min[rchild], bvh.nodes_max[rchild])
        cur = np.where(at_leaf, cur, np.where(dl <= dr, lchild, rchild))
    seed_leaf = cur
    pts_idx, face_idx = _leaf_candidates(bvh, np.arange(n, dtype=np.int64), seed_leaf)
    _eval_leaf_pairs(mesh, best, pts_idx, face_idx, points)

    # Pruned frontier traversal from the root.  A pair survives only while
    # its box lower bound can still beat (or tie) the point's cap, which is
    # the tighter of the best exact distance so far and the smallest box
    # upper bound seen; ties must survive so lower face indices elsewhere
    # are still visited.  Leaves are evaluated closest-box-first in two
    # waves so the refreshed bound prunes most of the second wave.
    cap = best.d2.copy()
    fr_pts = np.arange(n, dtype=np.int64)
    fr_node = np.zeros(n, dtype=np.int64)
    fr_d2 = np.zeros(n)
    while fr_pts.size:
        keep = fr_d2 <= cap[fr_pts]
        fr_pts, fr_node, fr_d2 = fr_pts[keep], fr_node[keep], fr_d2[keep]
        if fr_pts.size == 0:
            break
        is_leaf = left[fr_node] < 0
        if np.any(is_leaf):
            leaf_pts = fr_pts[is_leaf]
            leaf_node = fr_node[is_leaf]
            leaf_d2 = fr_d2[is_leaf]
            fresh = leaf_node != seed_leaf[leaf_pts]  # seed leaves are already merged
            leaf_pts, leaf_node, leaf_d2 = leaf_pts[fresh], leaf_node[fresh], leaf_d2[fresh]
            lead = np.full(n, np.inf)
            np.minimum.at(lead, leaf_pts, leaf_d2)
            first = leaf_d2 == lead[leaf_pts]
            for wave in (first, ~first):
                w_pts, w_node, w_d2 = leaf_pts[wave], leaf_node[wave], leaf_d2[wave]
                live = w_d2 <= cap[w_pts]
                pts_idx, face_idx = _leaf_candidates(bvh, w_pts[live], w_node[live])
                _eval_leaf_pairs(mesh, best, pts_idx, face_idx, points)
                np.minimum(cap, best.d2, out=cap)
        inner_pts = fr_pts[~is_leaf]
        inner_node = fr_node[~is_leaf]
        if inner_pts.size == 0:
            break
        pair_pts = np.concatenate([inner_pts, inner_pts])
        child = np.concatenate([left[inner_node], right[inner_node]])
        box_d2, far_d2 = _point_box_bounds2(
            points[pair_pts], bvh.nodes_min[child], bvh.nodes_max[child]
        )
        np.minimum.at(cap, pair_pts, far_d2)
        keep = box_d2 <= cap[pair_pts]
        fr_pts, fr_node, fr_d2 = pair_pts[keep], child[keep], box_d2[keep]

    v = best.vw[:, 0]
    w = best.vw[:, 1]
    bary = np.stack([1.0 - v - w, v, w], axis=1)
    normals = mesh.face_normals[best.face]
    signed = np.einsum("ij,ij->i", normals, points - best.point)
    return best.face, bary, best.point, signed


def closest_point(mesh: TriMesh, bvh: Bvh, p) -> SurfacePoint:
    """Nearest point on the mesh surface to ``p`` (lowest face index on ties)."""
    p = as_float_array(p, "p", (3,))
    faces, bary, pts, signed = closest_point_batch(mesh, bvh, p[None, :])
    return SurfacePoint(
        face=int(faces[0]), bary=bary[0], point=pts[0], signed_dist=float(signed[0])
    )
