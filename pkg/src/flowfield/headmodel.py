"""Parametric blendshape head model: evaluation, parameter mixing, editing.

Vertices are produced as ``root o LBS(template + shape + expression + pose
correctives)`` with joints regressed from the blendshaped rest vertices.
Skinning uses a displacement formulation so an all-zero pose reproduces the
blendshaped rest vertices bit-exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .geometry import TriMesh
from .validation import (
    NumericError,
    ORTHO_TOL,
    ValidationError,
    as_float_array,
    as_index_array,
    check_finite,
    check_rotation,
)

__all__ = [
    "ModelAssets",
    "MotionParams",
    "rotation_from_axis_angle",
    "evaluate_mesh",
    "assemble_target",
    "apply_edit",
]

# Below this rotation angle the first-order Rodrigues form is used, which maps
# a zero vector to the exact identity.
ROT_EPS = 1e-8

ROOT_POLICIES = ("driving", "source", "none")


@dataclass(frozen=True)
class ModelAssets:
    """Template mesh, displacement bases, and skinning data of the head model."""

    template_vertices: np.ndarray  # (L, 3) meters
    faces: np.ndarray  # (F, 3) int32
    shape_basis: np.ndarray  # (L, 3, S)
    expr_basis: np.ndarray  # (L, 3, E)
    joint_regressor: np.ndarray  # (J, L)
    skin_weights: np.ndarray  # (L, J) convex rows
    joint_parents: np.ndarray  # (J,) parent indices, root points to itself
    pose_corrective_basis: np.ndarray | None = None  # (L, 3, 9*J)

    def __post_init__(self):
        t = as_float_array(self.template_vertices, "template_vertices", (-1, 3))
        object.__setattr__(self, "template_vertices", t)
        l = t.shape[0]
        object.__setattr__(self, "faces", as_index_array(self.faces, "faces", (-1, 3)))
        object.__setattr__(
            self, "shape_basis", as_float_array(self.shape_basis, "shape_basis", (l, 3, -1))
        )
        object.__setattr__(
            self, "expr_basis", as_float_array(self.expr_basis, "expr_basis", (l, 3, -1))
        )
        object.__setattr__(
            self,
            "joint_regressor",
            as_float_array(self.joint_regressor, "joint_regressor", (-1, l)),
        )
        j = self.joint_regressor.shape[0]
        object.__setattr__(
            self, "skin_weights", as_float_array(self.skin_weights, "skin_weights", (l, j))
        )
        object.__setattr__(
            self, "joint_parents", as_index_array(self.joint_parents, "joint_parents", (j,))
        )
        if self.pose_corrective_basis is not None:
            object.__setattr__(
                self,
                "pose_corrective_basis",
                as_float_array(
                    self.pose_corrective_basis, "pose_corrective_basis", (l, 3, 9 * j)
                ),
            )
        self.validate()

    def validate(self) -> None:
        for name in ("template_vertices", "shape_basis", "expr_basis",
                     "joint_regressor", "skin_weights"):
            check_finite(getattr(self, name), name)
        if self.faces.size == 0:
            raise ValidationError("faces: mesh has no faces")
        if self.faces.min() < 0 or self.faces.max() >= self.num_vertices:
            raise ValidationError("faces: vertex index out of range")
        distinct = (
            (self.faces[:, 0] != self.faces[:, 1])
            & (self.faces[:, 1] != self.faces[:, 2])
            & (self.faces[:, 0] != self.faces[:, 2])
        )
        if not np.all(distinct):
            bad = int(np.nonzero(~distinct)[0][0])
            raise ValidationError(f"faces[{bad}]: degenerate face (repeated vertex index)")
        if np.any(self.skin_weights < 0.0):
            raise ValidationError("skin_weights: negative weight")
        sums = self.skin_weights.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > ORTHO_TOL:
            raise ValidationError("skin_weights: rows must sum to 1 within 1e-9")
        parents = self.joint_parents
        for j in range(self.num_joints):
            if parents[j] == j:
                continue
            if not 0 <= parents[j] < j:
                raise ValidationError(
                    f"joint_parents[{j}]: parent must be a lower index or the joint itself"
                )

    @property
    def num_vertices(self) -> int:
        return self.template_vertices.shape[0]

    @property
    def num_joints(self) -> int:
        return self.joint_regressor.shape[0]

    @property
    def num_shape(self) -> int:
        return self.shape_basis.shape[2]

    @property
    def num_expr(self) -> int:
        return self.expr_basis.shape[2]

    @property
    def theta_size(self) -> int:
        return 3 * self.num_joints

    def digest(self) -> str:
        """Stable content hash over all asset arrays."""
        h = hashlib.sha256()
        for name in (
            "template_vertices",
            "faces",
            "shape_basis",
            "expr_basis",
            "joint_regressor",
            "skin_weights",
            "joint_parents",
        ):
            arr = getattr(self, name)
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        if self.pose_corrective_basis is not None:
            h.update(b"pose_corrective_basis")
            h.update(np.ascontiguousarray(self.pose_corrective_basis).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class MotionParams:
    """Shape, pose, and expression coefficients plus an optional root rigid move."""

    beta: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    root_rotation: np.ndarray | None = None  # (3, 3) proper rotation
    root_translation: np.ndarray | None = None  # (3,) meters

    def __post_init__(self):
        object.__setattr__(self, "beta", as_float_array(self.beta, "beta", (-1,)))
        object.__setattr__(self, "theta", as_float_array(self.theta, "theta", (-1,)))
        object.__setattr__(self, "psi", as_float_array(self.psi, "psi", (-1,)))
        for name in ("beta", "theta", "psi"):
            check_finite(getattr(self, name), name)
        if self.root_rotation is not None:
            object.__setattr__(
                self, "root_rotation", check_rotation(self.root_rotation, "root_rotation")
            )
        if self.root_translation is not None:
            t = as_float_array(self.root_translation, "root_translation", (3,))
            check_finite(t, "root_translation")
            object.__setattr__(self, "root_translation", t)

    @property
    def has_root(self) -> bool:
        return self.root_rotation is not None or self.root_translation is not None

    def validate_against(self, assets: ModelAssets) -> None:
        if self.beta.shape[0] != assets.num_shape:
            raise ValidationError(
                f"beta: expected length {assets.num_shape}, got {self.beta.shape[0]}"
            )
        if self.theta.shape[0] != assets.theta_size:
            raise ValidationError(
                f"theta: expected length {assets.theta_size}, got {self.theta.shape[0]}"
            )
        if self.psi.shape[0] != assets.num_expr:
            raise ValidationError(
                f"psi: expected length {assets.num_expr}, got {self.psi.shape[0]}"
            )

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in ("beta", "theta", "psi"):
            h.update(name.encode())
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        if self.root_rotation is not None:
            h.update(b"root_rotation")
            h.update(np.ascontiguousarray(self.root_rotation).tobytes())
        if self.root_translation is not None:
            h.update(b"root_translation")
            h.update(np.ascontiguousarray(self.root_translation).tobytes())
        return h.hexdigest()


def rotation_from_axis_angle(vec) -> np.ndarray:
    """Rodrigues map, vectorized over leading axes: (..., 3) -> (..., 3, 3).

    A zero vector maps to the exact identity (first-order form below ROT_EPS).
    """
    v = np.asarray(vec, dtype=np.float64)
    angle = np.linalg.norm(v, axis=-1, keepdims=True)
    small = angle < ROT_EPS
    safe = np.where(small, 1.0, angle)
    axis = v / safe

    zeros = np.zeros(v.shape[:-1])
    kx, ky, kz = axis[..., 0], axis[..., 1], axis[..., 2]
    k_full = np.stack(
        [zeros, -kz, ky, kz, zeros, -kx, -ky, kx, zeros], axis=-1
    ).reshape(v.shape[:-1] + (3, 3))
    sin = np.sin(angle)[..., None]
    cos = np.cos(angle)[..., None]
    eye = np.eye(3)
    r_full = eye + sin * k_full + (1.0 - cos) * (k_full @ k_full)

    vx, vy, vz = v[..., 0], v[..., 1], v[..., 2]
    k_raw = np.stack(
        [zeros, -vz, vy, vz, zeros, -vx, -vy, vx, zeros], axis=-1
    ).reshape(v.shape[:-1] + (3, 3))
    r_small = eye + k_raw

    return np.where(small[..., None], r_small, r_full)


def evaluate_mesh(assets: ModelAssets, params: MotionParams) -> TriMesh:
    """Evaluate the head model to a triangle mesh (topology = assets.faces)."""
    params.validate_against(assets)

    shaped = (
        assets.template_vertices
        + assets.shape_basis @ params.beta
        + assets.expr_basis @ params.psi
    )
    joints = assets.joint_regressor @ shaped  # (J, 3) rest joints

    num_joints = assets.num_joints
    rots = rotation_from_axis_angle(params.theta.reshape(num_joints, 3))

    posed = shaped
    if assets.pose_corrective_basis is not None:
        feature = (rots - np.eye(3)).reshape(9 * num_joints)
        posed = shaped + assets.pose_corrective_basis @ feature

    # Forward kinematics.  Per joint j we track the global rotation and the
    # translation offset o_j = posed_joint_j - rest_joint_j; with all
    # rotations at identity both are exactly zero, so zero pose is a no-op.
    parents = assets.joint_parents
    glob = np.empty((num_joints, 3, 3))
    offset = np.empty((num_joints, 3))
    for j in range(num_joints):
        p = int(parents[j])
        if p == j:
            glob[j] = rots[j]
            offset[j] = 0.0
        else:
            glob[j] = glob[p] @ rots[j]
            delta = joints[j] - joints[p]
            offset[j] = (glob[p] - np.eye(3)) @ delta + offset[p]

    rel = posed[:, None, :] - joints[None, :, :]  # (L, J, 3)
    moved = np.einsum("jab,ljb->lja", glob - np.eye(3), rel) + offset[None, :, :]
    vertices = posed + np.einsum("lj,lja->la", assets.skin_weights, moved)

    if params.root_rotation is not None:
        vertices = vertices @ params.root_rotation.T
    if params.root_translation is not None:
        vertices = vertices + params.root_translation

    check_finite(vertices, "evaluated vertices")
    return TriMesh(vertices, assets.faces)


def assemble_target(
    src: MotionParams, dri: MotionParams, root_policy: str = "driving"
) -> MotionParams:
    """Mix source shape with driving pose and expression.

    ``root_policy`` selects whose root rigid transform the result carries:
    "driving" (default), "source", or "none".
    """
    if src.beta.shape != dri.beta.shape:
        raise ValidationError("assemble_target: beta length mismatch between src and dri")
    if src.theta.shape != dri.theta.shape:
        raise ValidationError("assemble_target: theta length mismatch between src and dri")
    if src.psi.shape != dri.psi.shape:
        raise ValidationError("assemble_target: psi length mismatch between src and dri")
    if root_policy not in ROOT_POLICIES:
        raise ValidationError(f"assemble_target: unknown root_policy {root_policy!r}")
    if root_policy == "driving":
        rot, trans = dri.root_rotation, dri.root_translation
    elif root_policy == "source":
        rot, trans = src.root_rotation, src.root_translation
    else:
        rot, trans = None, None
    return MotionParams(
        beta=src.beta,
        theta=dri.theta,
        psi=dri.psi,
        root_rotation=rot,
        root_translation=trans,
    )


def apply_edit(dri: MotionParams, delta_theta, delta_psi) -> MotionParams:
    """Add user pose/expression offsets; shape and root are untouched."""
    delta_theta = as_float_array(delta_theta, "delta_theta", (-1,))
    delta_psi = as_float_array(delta_psi, "delta_psi", (-1,))
    check_finite(delta_theta, "delta_theta")
    check_finite(delta_psi, "delta_psi")
    if delta_theta.shape != dri.theta.shape:
        raise ValidationError(
            f"delta_theta: expected length {dri.theta.shape[0]}, got {delta_theta.shape[0]}"
        )
    if delta_psi.shape != dri.psi.shape:
        raise ValidationError(
            f"delta_psi: expected length {dri.psi.shape[0]}, got {delta_psi.shape[0]}"
        )
    return replace(dri, theta=dri.theta + delta_theta, psi=dri.psi + delta_psi)
