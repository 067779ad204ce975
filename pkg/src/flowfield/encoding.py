"""Depth-guided ray sampling and assembly of the per-pixel 3D flow tensor.

For every pixel, N candidate depths are chosen along its backprojected ray:
inside the rendered head region they cover a narrow band around the surface
depth, elsewhere a wide fallback range anchored at the world origin's camera
depth.  Each sampled point is mapped through the surface-field correspondence
and the displacement to its source-space match is stored, giving an
H x W x 3N conditioning tensor.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .camera import Camera, DepthMap, NEAR_EPS, render_depth
from .geometry import build_bvh
from .headmodel import (
    ModelAssets,
    MotionParams,
    ROOT_POLICIES,
    apply_edit,
    assemble_target,
    evaluate_mesh,
)
from .surfaceflow import surface_flows
from .validation import NumericError, ValidationError

__all__ = [
    "SamplingConfig",
    "FlowEncoding",
    "sample_depths",
    "build_encoding",
    "build_edited_encoding",
]

SAMPLING_MODES = ("depth_guided", "uniform")

# Pixel rows are processed in fixed-size blocks; the block size is independent
# of the worker count so the output bytes are too.
_ROW_BLOCK = 16


@dataclass(frozen=True)
class SamplingConfig:
    """Ray-sampling policy: sample count, head band, and fallback range."""

    n_samples: int = 20
    delta: float = 0.01  # half-width of the on-head depth band, meters
    d_near: float = -0.65  # fallback range relative to the world origin depth
    d_far: float = 0.65
    mode: str = "depth_guided"
    jitter_seed: int | None = None  # None: deterministic stratified midpoints

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("SamplingConfig: n_samples must be >= 1")
        if not self.delta > 0.0:
            raise ValidationError("SamplingConfig: delta must be positive")
        if not self.d_near < self.d_far:
            raise ValidationError("SamplingConfig: d_near must be below d_far")
        if self.mode not in SAMPLING_MODES:
            raise ValidationError(f"SamplingConfig: unknown mode {self.mode!r}")

    def to_metadata(self) -> dict[str, Any]:
        return {
            "n_samples": self.n_samples,
            "delta": self.delta,
            "d_near": self.d_near,
            "d_far": self.d_far,
            "mode": self.mode,
            "jitter_seed": self.jitter_seed,
        }


@dataclass(frozen=True)
class FlowEncoding:
    """H x W x 3N tensor of flows (sample-major channels) plus provenance."""

    data: np.ndarray  # float32
    metadata: dict[str, Any]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise ValidationError("FlowEncoding: data must be H x W x 3N")
        if data.shape[2] % 3 != 0:
            raise ValidationError("FlowEncoding: channel count must be a multiple of 3")
        if not np.all(np.isfinite(data)):
            raise NumericError("FlowEncoding: non-finite flow values")
        object.__setattr__(self, "data", data)

    @property
    def n_samples(self) -> int:
        return self.data.shape[2] // 3


def _strata(center, half, n: int, jitter: np.ndarray | None):
    """Sample depths of the n equal strata of [center - half, center + half].

    Without jitter these are the stratum midpoints, written as offsets from
    the center so a single stratum yields the center exactly.  ``center`` and
    ``half`` broadcast against a trailing sample axis.
    """
    if jitter is None:
        frac = (2.0 * np.arange(n) + 1.0) / n - 1.0
    else:
        frac = (2.0 * (np.arange(n) + jitter) ) / n - 1.0
    return center[..., None] + half[..., None] * frac


def sample_depths(
    dmap: DepthMap, pixel, cfg: SamplingConfig, origin_depth: float = 0.0
) -> np.ndarray:
    """Candidate depths for one pixel.

    In depth-guided mode a pixel on the rendered head samples the band
    around its surface depth; off-head pixels (and every pixel in uniform
    mode) sample the fallback range shifted by ``origin_depth``.  Results are
    clamped below to the near-plane epsilon.
    """
    u, v = int(pixel[0]), int(pixel[1])
    d = dmap.at(u, v)
    jitter = None
    if cfg.jitter_seed is not None:
        jitter = np.random.default_rng(
            (cfg.jitter_seed, v * dmap.width + u)
        ).random(cfg.n_samples)
    if cfg.mode == "depth_guided" and d > 0.0:
        depths = _strata(np.float64(d), np.float64(cfg.delta), cfg.n_samples, jitter)
    else:
        center = np.float64(origin_depth + (cfg.d_near + cfg.d_far) / 2.0)
        half = np.float64((cfg.d_far - cfg.d_near) / 2.0)
        depths = _strata(center, half, cfg.n_samples, jitter)
    return np.maximum(depths, NEAR_EPS)


def _block_depths(dmap_rows, rows, cfg: SamplingConfig, origin_depth: float, width: int):
    """Vectorized sample_depths over a block of rows; returns (r, W, N)."""
    n = cfg.n_samples
    onhead = (dmap_rows > 0.0) & (cfg.mode == "depth_guided")
    center = np.where(
        onhead, dmap_rows, origin_depth + (cfg.d_near + cfg.d_far) / 2.0
    )
    half = np.where(onhead, cfg.delta, (cfg.d_far - cfg.d_near) / 2.0)
    if cfg.jitter_seed is None:
        depths = _strata(center, half, n, None)
    else:
        depths = np.empty(center.shape + (n,))
        for r in range(center.shape[0]):
            for u in range(width):
                jitter = np.random.default_rng(
                    (cfg.jitter_seed, (rows.start + r) * width + u)
                ).random(n)
                depths[r, u] = _strata(center[r, u], half[r, u], n, jitter)
    clamped = bool(np.any(depths < NEAR_EPS))
    return np.maximum(depths, NEAR_EPS), clamped


def build_encoding(
    assets: ModelAssets,
    src: MotionParams,
    dri: MotionParams,
    cam: Camera,
    cfg: SamplingConfig,
    *,
    root_policy: str = "driving",
    sf_offset: bool = True,
    workers: int = 1,
) -> FlowEncoding:
    """Assemble the flow tensor for one source/driving parameter pair.

    Deterministic: identical inputs give byte-identical tensors regardless of
    ``workers`` (row blocks are fixed-size and computed independently).
    """
    if root_policy not in ROOT_POLICIES:
        raise ValidationError(f"build_encoding: unknown root_policy {root_policy!r}")
    if workers < 1:
        raise ValidationError("build_encoding: workers must be >= 1")
    src.validate_against(assets)
    dri.validate_against(assets)

    tgt_params = assemble_target(src, dri, root_policy=root_policy)
    mesh_tgt = evaluate_mesh(assets, tgt_params)
    mesh_src = evaluate_mesh(assets, src)
    dmap = render_depth(mesh_tgt, cam)
    bvh_tgt = build_bvh(mesh_tgt)

    h_img, w_img = cam.height, cam.width
    n = cfg.n_samples
    origin_depth = cam.origin_depth
    out = np.empty((h_img, w_img, 3 * n), dtype=np.float32)
    us = np.arange(w_img) + 0.5

    def run_block(lo: int) -> bool:
        rows = slice(lo, min(lo + _ROW_BLOCK, h_img))
        r = rows.stop - rows.start
        depths, clamped = _block_depths(dmap.values[rows], rows, cfg, origin_depth, w_img)
        vs = np.arange(rows.start, rows.stop) + 0.5
        x = (us[None, :, None] - cam.cx) / cam.fx * depths
        y = (vs[:, None, None] - cam.cy) / cam.fy * depths
        p_cam = np.stack([x, y, depths], axis=-1).reshape(-1, 3)
        p_tgt = cam.camera_to_world(p_cam)
        _, flow = surface_flows(p_tgt, mesh_tgt, mesh_src, bvh_tgt, offset=sf_offset)
        out[rows] = flow.reshape(r, w_img, 3 * n).astype(np.float32)
        return clamped

    blocks = range(0, h_img, _ROW_BLOCK)
    # Blocks are fixed-size and independent, so the result does not depend on
    # how many actually run concurrently; oversubscribing the hardware only
    # adds overhead, hence the clamp.
    effective = min(workers, os.cpu_count() or 1, len(blocks))
    if effective == 1:
        clamped = [run_block(lo) for lo in blocks]
    else:
        with ThreadPoolExecutor(max_workers=effective) as pool:
            clamped = list(pool.map(run_block, blocks))

    metadata = {
        "width": w_img,
        "height": h_img,
        "origin_depth": origin_depth,
        "root_policy": root_policy,
        "sf_offset": sf_offset,
        "clamped_to_near_plane": any(clamped),
        "assets_digest": assets.digest(),
        "src_params_digest": src.digest(),
        "dri_params_digest": dri.digest(),
        **cfg.to_metadata(),
    }
    return FlowEncoding(data=out, metadata=metadata)


def build_edited_encoding(
    assets: ModelAssets,
    src: MotionParams,
    dri: MotionParams,
    delta_theta,
    delta_psi,
    cam: Camera,
    cfg: SamplingConfig,
    **kwargs,
) -> FlowEncoding:
    """Encoding after applying user pose/expression edits to the driving params."""
    return build_encoding(assets, src, apply_edit(dri, delta_theta, delta_psi), cam, cfg, **kwargs)
