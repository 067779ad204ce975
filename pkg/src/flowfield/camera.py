"""Pinhole projection, backprojection, and z-buffer depth rasterization.

Conventions: the camera looks down +z in its own frame; ``H`` is the 3x4
camera-to-world transform [R | t]; pixel (u, v) has its center at continuous
coordinates (u + 0.5, v + 0.5) with the origin at the image's top-left
corner.  Projection and backprojection operate on continuous coordinates and
are exact inverses of each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import TriMesh
from .validation import (
    NumericError,
    ValidationError,
    as_float_array,
    check_finite,
    check_rotation,
)

__all__ = ["Camera", "DepthMap", "project", "backproject", "render_depth", "NEAR_EPS"]

# Minimum usable camera-frame depth; triangles and samples closer than this
# are rejected (a true near-plane clip is out of scope).
NEAR_EPS = 1e-6


@dataclass(frozen=True)
class Camera:
    """Skew-free pinhole camera with a rigid camera-to-world placement."""

    K: np.ndarray  # (3, 3) intrinsics
    H: np.ndarray  # (3, 4) camera-to-world [R | t]
    width: int
    height: int

    def __post_init__(self):
        k = as_float_array(self.K, "K", (3, 3))
        h = as_float_array(self.H, "H", (3, 4))
        check_finite(k, "K")
        check_finite(h, "H")
        object.__setattr__(self, "K", k)
        object.__setattr__(self, "H", h)
        if k[0, 0] <= 0.0 or k[1, 1] <= 0.0:
            raise ValidationError("K: focal lengths fx, fy must be positive")
        if k[0, 1] != 0.0 or k[1, 0] != 0.0 or not np.array_equal(k[2], [0.0, 0.0, 1.0]):
            raise ValidationError("K: expected zero skew and bottom row [0, 0, 1]")
        check_rotation(h[:, :3], "H rotation")
        if self.width < 1 or self.height < 1:
            raise ValidationError("image size must be at least 1x1")

    @property
    def fx(self) -> float:
        return float(self.K[0, 0])

    @property
    def fy(self) -> float:
        return float(self.K[1, 1])

    @property
    def cx(self) -> float:
        return float(self.K[0, 2])

    @property
    def cy(self) -> float:
        return float(self.K[1, 2])

    @property
    def rotation(self) -> np.ndarray:
        return self.H[:, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.H[:, 3]

    @cached_property
    def origin_depth(self) -> float:
        """Camera-frame depth of the world origin."""
        return float(-(self.rotation.T @ self.translation)[2])

    def world_to_camera(self, pts: np.ndarray) -> np.ndarray:
        return (pts - self.translation) @ self.rotation

    def camera_to_world(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.rotation.T + self.translation


def backproject_batch(cam: Camera, pixels: np.ndarray, depths: np.ndarray) -> np.ndarray:
    """World points at the given depths along the pixel rays; (n,2),(n,) -> (n,3)."""
    pixels = as_float_array(pixels, "pixels", (-1, 2))
    depths = as_float_array(depths, "depths", (-1,))
    check_finite(pixels, "pixels")
    check_finite(depths, "depths")
    if np.any(depths <= 0.0):
        raise NumericError("backproject: depth must be positive")
    x = (pixels[:, 0] - cam.cx) / cam.fx * depths
    y = (pixels[:, 1] - cam.cy) / cam.fy * depths
    p_cam = np.stack([x, y, depths], axis=1)
    return cam.camera_to_world(p_cam)


def backproject(cam: Camera, pixel, depth: float) -> np.ndarray:
    """World point at camera-frame depth ``depth`` along the ray of ``pixel``."""
    pixel = as_float_array(pixel, "pixel", (2,))
    return backproject_batch(cam, pixel[None, :], np.asarray([depth], dtype=np.float64))[0]


def project_batch(cam: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Continuous pixel coordinates and camera depths of world points."""
    points = as_float_array(points, "points", (-1, 3))
    check_finite(points, "points")
    p_cam = cam.world_to_camera(points)
    z = p_cam[:, 2]
    if np.any(z <= 0.0):
        raise NumericError("project: point at or behind the camera plane")
    u = cam.fx * p_cam[:, 0] / z + cam.cx
    v = cam.fy * p_cam[:, 1] / z + cam.cy
    return np.stack([u, v], axis=1), z


def project(cam: Camera, p) -> tuple[np.ndarray, float]:
    """Inverse of backproject: ((u, v), depth) of a world point."""
    p = as_float_array(p, "p", (3,))
    uv, z = project_batch(cam, p[None, :])
    return uv[0], float(z[0])


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel nearest camera-frame depth; 0 marks pixels off the surface."""

    values: np.ndarray  # (H, W) float64

    def __post_init__(self):
        v = as_float_array(self.values, "values", (-1, -1))
        object.__setattr__(self, "values", v)
        if np.any(v < 0.0):
            raise ValidationError("DepthMap: negative depth")
        nz = v[v > 0.0]
        if nz.size and nz.min() < NEAR_EPS:
            raise ValidationError("DepthMap: nonzero depth below the near-plane epsilon")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def at(self, u: int, v: int) -> float:
        """Depth at pixel (u, v); u is the column."""
        if not (0 <= u < self.width and 0 <= v < self.height):
            raise ValidationError(f"pixel ({u}, {v}) outside {self.width}x{self.height} image")
        return float(self.values[v, u])


def _edge_inclusive(dx: float, dy: float) -> bool:
    # Top-left fill rule for a positively oriented (clockwise on screen,
    # y-down) triangle: horizontal edges pointing +x are "top", edges
    # pointing up (dy < 0) are "left"; both are inclusive.
    return dy < 0.0 or (dy == 0.0 and dx > 0.0)


def render_depth(mesh: TriMesh, cam: Camera) -> DepthMap:
    """Rasterize the mesh into a z-buffer depth map.

    Pixel centers are sampled; coverage uses the top-left rule so pixels on a
    shared edge belong to exactly one of the adjacent triangles.  Depth is
    perspective-correct (1/z interpolated in screen space).  Both triangle
    orientations are rendered; triangles with any vertex closer than NEAR_EPS
    are skipped rather than clipped.
    """
    if mesh.num_faces == 0:
        raise ValidationError("render_depth: mesh has no faces")
    w_img, h_img = cam.width, cam.height
    buf = np.full((h_img, w_img), np.inf)

    verts_cam = cam.world_to_camera(mesh.vertices)
    z_all = verts_cam[:, 2]
    sx_all = np.empty(len(z_all))
    sy_all = np.empty(len(z_all))
    front = z_all > NEAR_EPS
    sx_all[front] = cam.fx * verts_cam[front, 0] / z_all[front] + cam.cx
    sy_all[front] = cam.fy * verts_cam[front, 1] / z_all[front] + cam.cy

    for face in mesh.faces:
        if not (front[face[0]] and front[face[1]] and front[face[2]]):
            continue
        x0, x1, x2 = sx_all[face]
        y0, y1, y2 = sy_all[face]
        z0, z1, z2 = z_all[face]
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            x1, x2, y1, y2, z1, z2 = x2, x1, y2, y1, z2, z1
            area2 = -area2

        lo_x = max(int(np.ceil(min(x0, x1, x2) - 0.5)), 0)
        hi_x = min(int(np.floor(max(x0, x1, x2) - 0.5)), w_img - 1)
        lo_y = max(int(np.ceil(min(y0, y1, y2) - 0.5)), 0)
        hi_y = min(int(np.floor(max(y0, y1, y2) - 0.5)), h_img - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue

        px = np.arange(lo_x, hi_x + 1) + 0.5
        py = (np.arange(lo_y, hi_y + 1) + 0.5)[:, None]
        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)

        inc0 = _edge_inclusive(x2 - x1, y2 - y1)
        inc1 = _edge_inclusive(x0 - x2, y0 - y2)
        inc2 = _edge_inclusive(x1 - x0, y1 - y0)
        cover = (
            ((w0 > 0.0) | ((w0 == 0.0) & inc0))
            & ((w1 > 0.0) | ((w1 == 0.0) & inc1))
            & ((w2 > 0.0) | ((w2 == 0.0) & inc2))
        )
        if not np.any(cover):
            continue

        zinv = (w0 / z0 + w1 / z1 + w2 / z2) / area2
        tile = buf[lo_y : hi_y + 1, lo_x : hi_x + 1]
        depth = np.where(cover, 1.0 / np.where(zinv > 0.0, zinv, np.inf), np.inf)
        np.minimum(tile, depth, out=tile)

    buf[~np.isfinite(buf)] = 0.0
    return DepthMap(buf)
