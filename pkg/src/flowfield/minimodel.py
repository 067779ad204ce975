"""Deterministic synthetic head assets for tests, demos, and the CLI.

The real model's licensed asset files cannot ship with the package; this
factory builds a small stand-in (subdivided icosphere, neck + jaw joints,
four shape and four expression basis columns) that satisfies every
ModelAssets invariant and is byte-reproducible from its seed.
"""

from __future__ import annotations

import numpy as np

from .headmodel import ModelAssets
from .validation import ValidationError

__all__ = ["make_mini_model"]

# Ellipsoid radii (meters) applied to the unit icosphere: x right, y up,
# z toward the face.
_HEAD_RADII = (0.085, 0.105, 0.095)

_NECK_ANCHOR = np.array([0.0, -0.085, 0.0])
_JAW_ANCHOR = np.array([0.0, -0.035, 0.055])


def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int32,
    )
    return verts, faces


def _subdivide(verts: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split every face into four, deduplicating edge midpoints, then reproject."""
    verts = list(verts)
    midpoint: dict[tuple[int, int], int] = {}

    def mid(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        if key not in midpoint:
            v = (verts[i] + verts[j]) / 2.0
            v = v / np.linalg.norm(v)
            midpoint[key] = len(verts)
            verts.append(v)
        return midpoint[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
    return np.asarray(verts), np.asarray(out, dtype=np.int32)


def _soft_weights(verts: np.ndarray, anchor: np.ndarray, sigma: float) -> np.ndarray:
    d2 = np.sum((verts - anchor) ** 2, axis=1)
    w = np.exp(-d2 / (2.0 * sigma * sigma))
    return w / w.sum()


def _vertex_adjacency(num_verts: int, faces: np.ndarray) -> list[np.ndarray]:
    neighbors = [set() for _ in range(num_verts)]
    for a, b, c in faces:
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))
    return [np.fromiter(sorted(s), dtype=np.int64) for s in neighbors]


def make_mini_model(seed: int, n_subdiv: int, weight_smoothing: int = 1) -> ModelAssets:
    """Build synthetic head assets; identical inputs give byte-identical assets.

    ``weight_smoothing`` counts neighbor-averaging passes over the initially
    binary jaw/neck skin weights; 0 leaves them binary.
    """
    if n_subdiv < 0:
        raise ValidationError("make_mini_model: n_subdiv must be >= 0")
    if weight_smoothing < 0:
        raise ValidationError("make_mini_model: weight_smoothing must be >= 0")

    unit, faces = _icosahedron()
    for _ in range(n_subdiv):
        unit, faces = _subdivide(unit, faces)
    verts = unit * np.asarray(_HEAD_RADII)

    rng = np.random.default_rng(seed)

    # Smooth low-amplitude radial bumps as blendshape columns.  Shape bumps
    # sit anywhere on the head; expression bumps are confined to the face
    # (z > 0) so driving them visibly moves the front.
    def basis_columns(count: int, front_only: bool) -> np.ndarray:
        cols = np.zeros((len(verts), 3, count))
        for k in range(count):
            center = rng.normal(size=3)
            if front_only:
                center[2] = abs(center[2]) + 0.5
            center /= np.linalg.norm(center)
            spread = 0.3 + 0.4 * rng.random()
            amp = 0.008 + 0.006 * rng.random()
            g = np.exp(-np.sum((unit - center) ** 2, axis=1) / (2.0 * spread**2))
            cols[:, :, k] = amp * g[:, None] * unit
        return cols

    shape_basis = basis_columns(4, front_only=False)
    expr_basis = basis_columns(4, front_only=True)

    joint_regressor = np.stack(
        [
            _soft_weights(verts, _NECK_ANCHOR, 0.05),
            _soft_weights(verts, _JAW_ANCHOR, 0.03),
        ]
    )
    joint_parents = np.array([0, 0], dtype=np.int32)

    jaw_region = (verts[:, 1] < -0.015) & (verts[:, 2] > 0.01)
    weights = np.zeros((len(verts), 2))
    weights[:, 0] = ~jaw_region
    weights[:, 1] = jaw_region

    if weight_smoothing > 0:
        adjacency = _vertex_adjacency(len(verts), faces)
        for _ in range(weight_smoothing):
            smoothed = weights.copy()
            for i, nbrs in enumerate(adjacency):
                smoothed[i] = (weights[i] + weights[nbrs].sum(axis=0)) / (1 + len(nbrs))
            weights = smoothed
        weights /= weights.sum(axis=1, keepdims=True)

    return ModelAssets(
        template_vertices=verts,
        faces=faces,
        shape_basis=shape_basis,
        expr_basis=expr_basis,
        joint_regressor=joint_regressor,
        skin_weights=weights,
        joint_parents=joint_parents,
        pose_corrective_basis=None,
    )
