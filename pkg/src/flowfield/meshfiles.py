"""Minimal OBJ export/import (v/f records only)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import TriMesh
from .validation import ValidationError

__all__ = ["write_obj", "read_obj"]


def write_obj(path, mesh: TriMesh) -> None:
    """Write vertices and triangular faces; coordinates carry 9 decimals."""
    lines = [f"v {x:.9f} {y:.9f} {z:.9f}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n", "ascii")


def read_obj(path) -> TriMesh:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, line in enumerate(Path(path).read_text("ascii").splitlines(), 1):
        parts = line.split()
        if not parts or parts[0] == "#":
            continue
        if parts[0] == "v":
            if len(parts) != 4:
                raise ValidationError(f"{path}:{lineno}: malformed vertex record")
            verts.append([float(p) for p in parts[1:]])
        elif parts[0] == "f":
            if len(parts) != 4:
                raise ValidationError(f"{path}:{lineno}: only triangular faces are supported")
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
        else:
            raise ValidationError(f"{path}:{lineno}: unsupported record {parts[0]!r}")
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int32))
