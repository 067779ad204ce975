"""Bit-exact file formats: tensors, asset containers, and JSON inputs.

Tensor file layout (all integers little-endian; see docs/formats.md):

    magic "FTEN" | version u16 | rank u16 | dims u64 * rank | dtype u16
    | metadata length u32 | metadata JSON (UTF-8) | row-major payload

Asset container layout:

    magic "FASC" | version u16 | manifest length u32 | manifest JSON
    | concatenated tensor files at the offsets named in the manifest

Reading back anything written here reproduces the original bytes exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .camera import Camera
from .encoding import FlowEncoding, SamplingConfig
from .headmodel import ModelAssets, MotionParams, ROOT_POLICIES
from .validation import NumericError, ValidationError

__all__ = [
    "TensorFormatError",
    "write_tensor",
    "read_tensor",
    "save_assets",
    "load_assets",
    "save_params",
    "load_params",
    "save_camera",
    "load_camera",
    "load_encode_options",
    "save_encoding",
    "load_encoding",
]

TENSOR_MAGIC = b"FTEN"
TENSOR_VERSION = 1
ASSET_MAGIC = b"FASC"
ASSET_VERSION = 1

# dtype code 1 is fixed to little-endian float32; further codes are listed in
# docs/formats.md.
DTYPE_CODES = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("<i4"),
    4: np.dtype("<i8"),
}
_CODE_BY_KIND = {np.dtype(d).str: code for code, d in DTYPE_CODES.items()}

_MAX_DIM = 1 << 48  # sanity bound on any single dimension


class TensorFormatError(OSError):
    """A tensor or container file is malformed, truncated, or unsupported."""


def _dtype_code(arr: np.ndarray) -> int:
    key = arr.dtype.newbyteorder("<").str
    if key not in _CODE_BY_KIND:
        raise ValidationError(f"write_tensor: unsupported dtype {arr.dtype}")
    return _CODE_BY_KIND[key]


def _meta_bytes(metadata: dict[str, Any] | None) -> bytes:
    if metadata is None:
        metadata = {}
    return json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")


def tensor_bytes(array: np.ndarray, metadata: dict[str, Any] | None = None,
                 allow_nonfinite: bool = False) -> bytes:
    """Serialize one tensor to the wire format."""
    arr = np.ascontiguousarray(array)
    code = _dtype_code(arr)
    if not allow_nonfinite and np.issubdtype(arr.dtype, np.floating):
        if not np.all(np.isfinite(arr)):
            raise NumericError("write_tensor: non-finite values (pass allow_nonfinite to keep)")
    meta = _meta_bytes(metadata)
    head = bytearray()
    head += TENSOR_MAGIC
    head += struct.pack("<HH", TENSOR_VERSION, arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    head += struct.pack("<HI", code, len(meta))
    head += meta
    return bytes(head) + arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()


def write_tensor(path, array: np.ndarray, metadata: dict[str, Any] | None = None,
                 allow_nonfinite: bool = False) -> None:
    Path(path).write_bytes(tensor_bytes(array, metadata, allow_nonfinite))


class _Cursor:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise TensorFormatError(f"{self.path}: corrupt payload (truncated)")
        out = self.data[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def tensor_from_bytes(data: bytes, path: str = "<bytes>") -> tuple[np.ndarray, dict[str, Any]]:
    cur = _Cursor(data, path)
    if cur.take(4) != TENSOR_MAGIC:
        raise TensorFormatError(f"{path}: bad magic (not a tensor file)")
    version, rank = cur.unpack("<HH")
    if version != TENSOR_VERSION:
        raise TensorFormatError(f"{path}: unsupported tensor format version {version}")
    dims = cur.unpack(f"<{rank}Q")
    if any(d > _MAX_DIM for d in dims):
        raise TensorFormatError(f"{path}: dimension overflow in {dims}")
    code, meta_len = cur.unpack("<HI")
    if code not in DTYPE_CODES:
        raise TensorFormatError(f"{path}: unknown dtype code {code}")
    dtype = DTYPE_CODES[code]
    try:
        metadata = json.loads(cur.take(meta_len).decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFormatError(f"{path}: corrupt metadata block ({exc})") from None
    count = 1
    for d in dims:
        count *= d
        if count > (1 << 62):
            raise TensorFormatError(f"{path}: dimension overflow in {dims}")
    payload = cur.take(count * dtype.itemsize)
    if cur.off != len(data):
        raise TensorFormatError(f"{path}: corrupt payload (trailing bytes)")
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return arr.copy(), metadata


def read_tensor(path, with_metadata: bool = False):
    """Read a tensor file back; bit-identical to what was written."""
    arr, metadata = tensor_from_bytes(Path(path).read_bytes(), str(path))
    return (arr, metadata) if with_metadata else arr


# ---------------------------------------------------------------------------
# Asset container

_ASSET_ROLES = (
    "template",
    "faces",
    "shape_basis",
    "expr_basis",
    "joint_regressor",
    "skin_weights",
    "parents",
)
_OPTIONAL_ROLES = ("pose_corrective_basis",)


def save_assets(path, assets: ModelAssets) -> None:
    """Write model assets as a manifest plus concatenated tensor files."""
    arrays = {
        "template": assets.template_vertices,
        "faces": assets.faces,
        "shape_basis": assets.shape_basis,
        "expr_basis": assets.expr_basis,
        "joint_regressor": assets.joint_regressor,
        "skin_weights": assets.skin_weights,
        "parents": assets.joint_parents,
    }
    if assets.pose_corrective_basis is not None:
        arrays["pose_corrective_basis"] = assets.pose_corrective_basis

    blobs = {role: tensor_bytes(arr) for role, arr in arrays.items()}
    entries = []
    offset = 0
    for role, blob in blobs.items():
        entries.append(
            {
                "name": role,
                "role": role,
                "dims": list(np.asarray(arrays[role]).shape),
                "offset": offset,
                "length": len(blob),
            }
        )
        offset += len(blob)
    manifest = json.dumps({"arrays": entries}, sort_keys=True, separators=(",", ":")).encode()

    with open(path, "wb") as f:
        f.write(ASSET_MAGIC)
        f.write(struct.pack("<HI", ASSET_VERSION, len(manifest)))
        f.write(manifest)
        for blob in blobs.values():
            f.write(blob)


def load_assets(path) -> ModelAssets:
    """Read an asset container; every ModelAssets invariant is re-validated."""
    data = Path(path).read_bytes()
    cur = _Cursor(data, str(path))
    if cur.take(4) != ASSET_MAGIC:
        raise TensorFormatError(f"{path}: bad magic (not an asset container)")
    version, manifest_len = cur.unpack("<HI")
    if version != ASSET_VERSION:
        raise TensorFormatError(f"{path}: unsupported container version {version}")
    try:
        manifest = json.loads(cur.take(manifest_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFormatError(f"{path}: corrupt manifest ({exc})") from None
    base = cur.off

    arrays: dict[str, np.ndarray] = {}
    for entry in manifest.get("arrays", []):
        role = entry["role"]
        lo = base + entry["offset"]
        hi = lo + entry["length"]
        if hi > len(data):
            raise TensorFormatError(f"{path}: corrupt payload (array {role} out of bounds)")
        arr, _ = tensor_from_bytes(data[lo:hi], f"{path}[{role}]")
        if list(arr.shape) != list(entry["dims"]):
            raise TensorFormatError(
                f"{path}: manifest dims {entry['dims']} do not match stored {list(arr.shape)}"
                f" for {role}"
            )
        arrays[role] = arr

    missing = [r for r in _ASSET_ROLES if r not in arrays]
    if missing:
        raise TensorFormatError(f"{path}: missing required arrays {missing}")
    return ModelAssets(
        template_vertices=arrays["template"],
        faces=arrays["faces"],
        shape_basis=arrays["shape_basis"],
        expr_basis=arrays["expr_basis"],
        joint_regressor=arrays["joint_regressor"],
        skin_weights=arrays["skin_weights"],
        joint_parents=arrays["parents"],
        pose_corrective_basis=arrays.get("pose_corrective_basis"),
    )


# ---------------------------------------------------------------------------
# JSON inputs: motion parameters, cameras, encode options

def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ValidationError(f"{path}.{key}: missing required field")
    return doc[key]


def _load_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def save_params(path, params: MotionParams) -> None:
    doc: dict[str, Any] = {
        "beta": params.beta.tolist(),
        "theta": params.theta.tolist(),
        "psi": params.psi.tolist(),
    }
    if params.root_rotation is not None:
        doc["root_R"] = params.root_rotation.tolist()
    if params.root_translation is not None:
        doc["root_t"] = params.root_translation.tolist()
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", "utf-8")


def load_params(path) -> MotionParams:
    """Load motion parameters from JSON (keys beta/theta/psi, optional root_R/root_t)."""
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    name = str(path)
    try:
        return MotionParams(
            beta=_require(doc, "beta", name),
            theta=_require(doc, "theta", name),
            psi=_require(doc, "psi", name),
            root_rotation=doc.get("root_R"),
            root_translation=doc.get("root_t"),
        )
    except (ValidationError, NumericError) as exc:
        raise type(exc)(f"{name}: {exc}") from None


def save_camera(path, cam: Camera) -> None:
    doc = {
        "K": cam.K.tolist(),
        "H": cam.H.tolist(),
        "width": cam.width,
        "height": cam.height,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", "utf-8")


def load_camera(path) -> Camera:
    """Load a camera from JSON (keys K, H, width, height)."""
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    name = str(path)
    try:
        return Camera(
            K=_require(doc, "K", name),
            H=_require(doc, "H", name),
            width=int(_require(doc, "width", name)),
            height=int(_require(doc, "height", name)),
        )
    except (ValidationError, NumericError) as exc:
        raise type(exc)(f"{name}: {exc}") from None


def load_encode_options(path) -> tuple[SamplingConfig, dict[str, Any]]:
    """Load a run config: a SamplingConfig plus pipeline policy switches.

    Recognized keys: n_samples, delta, d_near, d_far, mode, jitter_seed,
    sf_offset, root_policy.  Unknown keys are rejected.
    """
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    known_cfg = {"n_samples", "delta", "d_near", "d_far", "mode", "jitter_seed"}
    known_policy = {"sf_offset", "root_policy"}
    unknown = set(doc) - known_cfg - known_policy
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
    try:
        cfg = SamplingConfig(**{k: doc[k] for k in known_cfg if k in doc})
    except (ValidationError, NumericError) as exc:
        raise type(exc)(f"{path}: {exc}") from None
    policies = {
        "sf_offset": bool(doc.get("sf_offset", True)),
        "root_policy": doc.get("root_policy", "driving"),
    }
    if policies["root_policy"] not in ROOT_POLICIES:
        raise ValidationError(f"{path}.root_policy: must be one of {ROOT_POLICIES}")
    return cfg, policies


def save_encoding(path, enc: FlowEncoding) -> None:
    """Write a flow encoding as a tensor file with its metadata embedded."""
    write_tensor(path, enc.data, metadata=enc.metadata)


def load_encoding(path) -> FlowEncoding:
    arr, metadata = read_tensor(path, with_metadata=True)
    if arr.dtype != np.float32 or arr.ndim != 3:
        raise TensorFormatError(f"{path}: expected a rank-3 float32 flow tensor")
    return FlowEncoding(data=arr, metadata=metadata)
