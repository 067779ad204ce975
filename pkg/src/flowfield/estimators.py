"""Scikit-learn style transformers wrapping the flow pipeline.

Both transformers are stateless (the head-model assets and camera are
constructor parameters, like a kernel object); ``fit`` validates and returns
``self`` so they compose with ``sklearn.pipeline.Pipeline`` and support
``get_params``/``set_params``/``clone``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .camera import Camera
from .encoding import SamplingConfig, build_encoding
from .headmodel import ModelAssets, MotionParams, evaluate_mesh
from .validation import ValidationError

__all__ = ["HeadMeshTransformer", "FlowEncodingTransformer"]


def _check_params_seq(items, name: str):
    try:
        items = list(items)
    except TypeError:
        raise ValidationError(f"{name}: expected an iterable of MotionParams") from None
    for i, item in enumerate(items):
        if not isinstance(item, MotionParams):
            raise ValidationError(f"{name}[{i}]: expected MotionParams, got {type(item).__name__}")
    return items


class HeadMeshTransformer(TransformerMixin, BaseEstimator):
    """Evaluate motion parameters to mesh vertex arrays.

    transform(X) maps an iterable of MotionParams to an (n, L, 3) array;
    topology is fixed and available as ``assets.faces``.
    """

    def __init__(self, assets: ModelAssets):
        self.assets = assets

    def fit(self, X=None, y=None):
        if not isinstance(self.assets, ModelAssets):
            raise ValidationError("assets: expected a ModelAssets instance")
        return self

    def transform(self, X) -> np.ndarray:
        self.fit()
        items = _check_params_seq(X, "X")
        return np.stack(
            [evaluate_mesh(self.assets, p).vertices for p in items]
        ) if items else np.zeros((0, self.assets.num_vertices, 3))


class FlowEncodingTransformer(TransformerMixin, BaseEstimator):
    """Turn (source, driving) parameter pairs into flow-encoding tensors.

    transform(X) maps an iterable of (src, dri) MotionParams pairs to an
    (n, H, W, 3 * n_samples) float32 array, one conditioning tensor per pair.
    """

    def __init__(
        self,
        assets: ModelAssets,
        camera: Camera,
        n_samples: int = 20,
        delta: float = 0.01,
        d_near: float = -0.65,
        d_far: float = 0.65,
        mode: str = "depth_guided",
        jitter_seed: int | None = None,
        sf_offset: bool = True,
        root_policy: str = "driving",
        workers: int = 1,
    ):
        self.assets = assets
        self.camera = camera
        self.n_samples = n_samples
        self.delta = delta
        self.d_near = d_near
        self.d_far = d_far
        self.mode = mode
        self.jitter_seed = jitter_seed
        self.sf_offset = sf_offset
        self.root_policy = root_policy
        self.workers = workers

    def _sampling_config(self) -> SamplingConfig:
        return SamplingConfig(
            n_samples=self.n_samples,
            delta=self.delta,
            d_near=self.d_near,
            d_far=self.d_far,
            mode=self.mode,
            jitter_seed=self.jitter_seed,
        )

    def fit(self, X=None, y=None):
        if not isinstance(self.assets, ModelAssets):
            raise ValidationError("assets: expected a ModelAssets instance")
        if not isinstance(self.camera, Camera):
            raise ValidationError("camera: expected a Camera instance")
        self._sampling_config()
        return self

    def transform(self, X) -> np.ndarray:
        self.fit()
        cfg = self._sampling_config()
        pairs = []
        for i, pair in enumerate(X):
            try:
                src, dri = pair
            except (TypeError, ValueError):
                raise ValidationError(f"X[{i}]: expected a (src, dri) pair") from None
            _check_params_seq([src, dri], f"X[{i}]")
            pairs.append((src, dri))
        out = np.zeros(
            (len(pairs), self.camera.height, self.camera.width, 3 * self.n_samples),
            dtype=np.float32,
        )
        for i, (src, dri) in enumerate(pairs):
            enc = build_encoding(
                self.assets,
                src,
                dri,
                self.camera,
                cfg,
                root_policy=self.root_policy,
                sf_offset=self.sf_offset,
                workers=self.workers,
            )
            out[i] = enc.data
        return out
