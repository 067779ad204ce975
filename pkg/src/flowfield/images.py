"""PGM/PPM inspection images (zero-dependency, byte-deterministic)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .validation import ValidationError, as_float_array

__all__ = ["write_pgm16", "write_flow_ppm"]


def write_pgm16(path, depth: np.ndarray, far: float) -> None:
    """Write depths as 16-bit grayscale PGM (P5, big-endian samples).

    Values are mapped linearly from [0, far] to [0, 65535] and clamped; the
    mapping is recorded in a header comment.
    """
    depth = as_float_array(depth, "depth", (-1, -1))
    if not far > 0.0:
        raise ValidationError("write_pgm16: far must be positive")
    gray = np.clip(depth / far, 0.0, 1.0) * 65535.0
    gray = np.round(gray).astype(">u2")
    h, w = depth.shape
    header = (
        f"P5\n# depth map: [0, {far!r}] m mapped linearly to [0, 65535]\n{w} {h}\n65535\n"
    )
    Path(path).write_bytes(header.encode("ascii") + gray.tobytes())


def _hsv_to_rgb(hue: np.ndarray, sat: np.ndarray, val: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB, all components in [0, 1]."""
    sector = (hue * 6.0) % 6.0
    i = np.floor(sector).astype(int)
    f = sector - i
    p = val * (1.0 - sat)
    q = val * (1.0 - sat * f)
    t = val * (1.0 - sat * (1.0 - f))
    table = np.stack(
        [
            np.stack([val, t, p], -1),
            np.stack([q, val, p], -1),
            np.stack([p, val, t], -1),
            np.stack([p, q, val], -1),
            np.stack([t, p, val], -1),
            np.stack([val, p, q], -1),
        ]
    )
    return np.take_along_axis(table, i[None, ..., None], axis=0)[0]


def write_flow_ppm(path, flow_mid: np.ndarray) -> None:
    """Visualize per-pixel flow vectors as a binary PPM.

    Hue encodes the in-image direction of the flow's (x, y) components and
    brightness its 3D magnitude, normalized by the per-image maximum (which
    is recorded in a header comment).  Zero flow renders black.
    """
    flow_mid = as_float_array(flow_mid, "flow_mid", (-1, -1, 3))
    mag = np.linalg.norm(flow_mid, axis=2)
    peak = float(mag.max())
    # Below a nanometer the field is numerically zero; normalizing would
    # amplify rounding noise into a full-brightness image.
    if peak > 1e-9:
        val = mag / peak
    else:
        val = np.zeros_like(mag)
    hue = (np.arctan2(flow_mid[:, :, 1], flow_mid[:, :, 0]) / (2.0 * np.pi)) % 1.0
    rgb = _hsv_to_rgb(hue, np.ones_like(val), val)
    data = np.round(rgb * 255.0).astype(np.uint8)
    h, w = mag.shape
    header = f"P6\n# max flow magnitude: {peak!r} m\n{w} {h}\n255\n"
    Path(path).write_bytes(header.encode("ascii") + data.tobytes())
