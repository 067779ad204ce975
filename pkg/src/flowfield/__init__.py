"""Learning-free 3D motion-flow conditioning tensors from a blendshape head model.

The pipeline evaluates a parametric head model for a source and a driving
motion, matches every sampled 3D point of the target-motion mesh back to its
source-motion location through a surface-field correspondence, and stacks the
per-pixel displacements at N depth-guided ray samples into an H x W x 3N
tensor suitable as a conditioning input for image-generation models.
"""

from .camera import Camera, DepthMap, NEAR_EPS, backproject, project, render_depth
from .encoding import (
    FlowEncoding,
    SamplingConfig,
    build_edited_encoding,
    build_encoding,
    sample_depths,
)
from .estimators import FlowEncodingTransformer, HeadMeshTransformer
from .geometry import (
    Bvh,
    SurfacePoint,
    TriMesh,
    build_bvh,
    closest_point,
    closest_point_batch,
    closest_point_on_triangles,
)
from .headmodel import (
    ModelAssets,
    MotionParams,
    apply_edit,
    assemble_target,
    evaluate_mesh,
    rotation_from_axis_angle,
)
from .minimodel import make_mini_model
from .surfaceflow import FlowSample, flow_batch, surface_field, surface_flows
from .tensorio import (
    TensorFormatError,
    load_assets,
    load_camera,
    load_encoding,
    load_params,
    read_tensor,
    save_assets,
    save_camera,
    save_encoding,
    save_params,
    write_tensor,
)
from .validation import NumericError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "Camera",
    "DepthMap",
    "NEAR_EPS",
    "backproject",
    "project",
    "render_depth",
    "FlowEncoding",
    "SamplingConfig",
    "build_edited_encoding",
    "build_encoding",
    "sample_depths",
    "FlowEncodingTransformer",
    "HeadMeshTransformer",
    "Bvh",
    "SurfacePoint",
    "TriMesh",
    "build_bvh",
    "closest_point",
    "closest_point_batch",
    "closest_point_on_triangles",
    "ModelAssets",
    "MotionParams",
    "apply_edit",
    "assemble_target",
    "evaluate_mesh",
    "rotation_from_axis_angle",
    "make_mini_model",
    "FlowSample",
    "flow_batch",
    "surface_field",
    "surface_flows",
    "TensorFormatError",
    "load_assets",
    "load_camera",
    "load_encoding",
    "load_params",
    "read_tensor",
    "save_assets",
    "save_camera",
    "save_encoding",
    "save_params",
    "write_tensor",
    "NumericError",
    "ValidationError",
    "__version__",
]
