"""Wavefront OBJ parsing and per-frame head-mesh sequence loading.

Supports the v/vt/vn/f subset. Faces with more than three corners are
fan-triangulated around corner 0. Sequences are directories of
``<stem>_<NNNN>.obj`` files sharing one triangle topology and one UV layout;
only vertex positions animate between frames.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

NO_INDEX = -1

_FRAME_INDEX_RE = re.compile(r"(\d+)(?!.*\d)")  # last digit run in the stem


class MeshError(Exception):
    pass


class MeshParseError(MeshError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyMeshError(MeshError):
    pass


class TopologyMismatchError(MeshError):
    pass


class MissingFramesError(MeshError):
    def __init__(self, message: str, missing: list[int]):
        super().__init__(message)
        self.missing = missing


@dataclass(frozen=True, eq=False)
class MeshFrame:
    """One frame of a head mesh.

    triangles has shape (t, 3, 3): per corner (vertex, uv, normal) indices,
    with NO_INDEX marking an absent uv/normal reference. UVs are wrapped to
    [0, 1); normals are unit length.
    """

    vertices: np.ndarray
    uvs: np.ndarray
    normals: np.ndarray | None
    triangles: np.ndarray

    def __post_init__(self):
        t = self.triangles
        if t.ndim != 3 or t.shape[1:] != (3, 3):
            raise ValueError(f"triangles must have shape (t, 3, 3), got {t.shape}")
        n_vn = 0 if self.normals is None else len(self.normals)
        for axis, size, name in ((0, len(self.vertices), "vertex"),
                                 (1, len(self.uvs), "uv"),
                                 (2, n_vn, "normal")):
            idx = t[:, :, axis]
            optional = axis > 0
            bad = (idx >= size) | (idx < (NO_INDEX if optional else 0))
            if bad.any():
                raise ValueError(f"{name} index out of range in triangles")

    @classmethod
    def from_raw(cls, vertices, uvs, normals, triangles) -> "MeshFrame":
        """Build a frame, wrap-normalizing uvs and renormalizing normals."""
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        uvs = np.asarray(uvs, dtype=np.float64).reshape(-1, 2)
        uvs = uvs - np.floor(uvs)
        uvs[uvs >= 1.0] = 0.0
        if normals is not None and len(normals):
            normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
            lengths = np.linalg.norm(normals, axis=1, keepdims=True)
            if (lengths == 0).any():
                raise ValueError("zero-length normal cannot be renormalized")
            normals = normals / lengths
        else:
            normals = None
        triangles = np.asarray(triangles, dtype=np.int32).reshape(-1, 3, 3)
        return cls(vertices=vertices, uvs=uvs, normals=normals, triangles=triangles)


@dataclass
class MeshSequence:
    """Ordered frames of one clip; topology and uv layout are shared."""

    frames: list[MeshFrame]
    patient_id: str
    clip_id: str
    frame_rate: float = 25.0

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a mesh sequence must contain at least one frame")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        verify_shared_topology(self.frames)

    @property
    def duration_s(self) -> float:
        return len(self.frames) / self.frame_rate


def verify_shared_topology(frames: list[MeshFrame], names: list[str] | None = None):
    """Hard-fail unless all frames share triangles, uvs, and array sizes."""
    first = frames[0]
    n_vn0 = 0 if first.normals is None else len(first.normals)
    for i, frame in enumerate(frames[1:], start=1):
        label = names[i] if names else f"frame {i}"
        if frame.triangles.shape != first.triangles.shape or \
                not np.array_equal(frame.triangles, first.triangles):
            raise TopologyMismatchError(f"{label}: triangle topology differs from first frame")
        if frame.uvs.shape != first.uvs.shape or not np.array_equal(frame.uvs, first.uvs):
            raise TopologyMismatchError(f"{label}: uv array differs from first frame")
        if len(frame.vertices) != len(first.vertices):
            raise TopologyMismatchError(f"{label}: vertex count differs from first frame")
        n_vn = 0 if frame.normals is None else len(frame.normals)
        if n_vn != n_vn0:
            raise TopologyMismatchError(f"{label}: normal count differs from first frame")


def _parse_floats(tokens, count, lineno):
    if len(tokens) < count:
        raise MeshParseError(f"expected {count} numeric fields, got {len(tokens)}", lineno)
    try:
        return [float(t) for t in tokens[:count]]
    except ValueError as exc:
        raise MeshParseError(f"malformed numeric literal: {exc}", lineno) from None


def _resolve_index(raw: str, size: int, what: str, lineno: int) -> int:
    try:
        idx = int(raw)
    except ValueError:
        raise MeshParseError(f"malformed {what} index {raw!r}", lineno) from None
    if idx == 0:
        raise MeshParseError(f"{what} indices are 1-based, got 0", lineno)
    resolved = idx - 1 if idx > 0 else size + idx
    if not 0 <= resolved < size:
        raise MeshParseError(f"{what} index {idx} out of range (have {size})", lineno)
    return resolved


def parse_mesh_file(data: bytes | str) -> MeshFrame:
    """Parse one OBJ file (v/vt/vn/f subset) into a MeshFrame.

    Unrecognized directives are skipped and logged once with a total count.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    vertices: list[list[float]] = []
    uvs: list[list[float]] = []
    normals: list[list[float]] = []
    corners: list[list[tuple[int, int, int]]] = []
    face_lines: list[int] = []
    ignored: dict[str, int] = {}

    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        key = tokens[0]
        if key == "v":
            vertices.append(_parse_floats(tokens[1:], 3, lineno))
        elif key == "vt":
            uvs.append(_parse_floats(tokens[1:], 2, lineno))
        elif key == "vn":
            normal = _parse_floats(tokens[1:], 3, lineno)
            if normal == [0.0, 0.0, 0.0]:
                raise MeshParseError("zero-length normal", lineno)
            normals.append(normal)
        elif key == "f":
            if len(tokens) < 4:
                raise MeshParseError("faces need at least 3 corners", lineno)
            face = []
            with_uv = with_normal = None
            for spec in tokens[1:]:
                parts = spec.split("/")
                v = _resolve_index(parts[0], len(vertices), "vertex", lineno)
                vt = vn = NO_INDEX
                if len(parts) > 1 and parts[1]:
                    vt = _resolve_index(parts[1], len(uvs), "uv", lineno)
                if len(parts) > 2 and parts[2]:
                    vn = _resolve_index(parts[2], len(normals), "normal", lineno)
                if with_uv is None:
                    with_uv, with_normal = vt != NO_INDEX, vn != NO_INDEX
                elif (vt != NO_INDEX) != with_uv or (vn != NO_INDEX) != with_normal:
                    raise MeshParseError("mixed corner forms within one face", lineno)
                face.append((v, vt, vn))
            corners.append(face)
            face_lines.append(lineno)
        else:
            ignored[key] = ignored.get(key, 0) + 1

    if ignored:
        total = sum(ignored.values())
        logger.warning("ignored %d unrecognized OBJ directives (%s)",
                       total, ", ".join(sorted(ignored)))
    if not corners:
        raise EmptyMeshError("mesh has no faces")

    triangles = []
    for face in corners:
        for i in range(1, len(face) - 1):  # fan around corner 0
            triangles.append((face[0], face[i], face[i + 1]))
    try:
        return MeshFrame.from_raw(vertices, uvs, normals or None, triangles)
    except ValueError as exc:
        raise MeshParseError(str(exc)) from exc


def serialize_mesh(frame: MeshFrame) -> bytes:
    """Emit OBJ text whose re-parse structurally equals the frame."""
    out = []

    def fmt(row):
        return " ".join(format(x, ".9g") for x in row)

    for v in frame.vertices:
        out.append(f"v {fmt(v)}")
    for uv in frame.uvs:
        out.append(f"vt {fmt(uv)}")
    if frame.normals is not None:
        for n in frame.normals:
            out.append(f"vn {fmt(n)}")
    for tri in frame.triangles:
        specs = []
        for v, vt, vn in tri:
            if vt == NO_INDEX and vn == NO_INDEX:
                specs.append(f"{v + 1}")
            elif vn == NO_INDEX:
                specs.append(f"{v + 1}/{vt + 1}")
            elif vt == NO_INDEX:
                specs.append(f"{v + 1}//{vn + 1}")
            else:
                specs.append(f"{v + 1}/{vt + 1}/{vn + 1}")
        out.append("f " + " ".join(specs))
    return ("\n".join(out) + "\n").encode("utf-8")


def frames_structurally_equal(a: MeshFrame, b: MeshFrame, rel_tol: float = 1e-6) -> bool:
    """Index-level equality with positions/uvs/normals compared to rel_tol."""
    if not np.array_equal(a.triangles, b.triangles):
        return False
    if (a.normals is None) != (b.normals is None):
        return False
    for x, y in ((a.vertices, b.vertices), (a.uvs, b.uvs)):
        if x.shape != y.shape or not np.allclose(x, y, rtol=rel_tol, atol=1e-12):
            return False
    if a.normals is not None and (
            a.normals.shape != b.normals.shape
            or not np.allclose(a.normals, b.normals, rtol=rel_tol, atol=1e-9)):
        return False
    return True


def scan_sequence_dir(directory: str | Path) -> list[tuple[int, Path]]:
    """Map a sequence directory to (frame index, path), sorted by index."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MeshError(f"{directory} is not a directory")
    indexed: dict[int, Path] = {}
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() != ".obj" or not path.is_file():
            continue
        match = _FRAME_INDEX_RE.search(path.stem)
        if match is None:
            raise MeshError(f"{path.name}: no frame index in file name")
        index = int(match.group(1))
        if index in indexed:
            raise MeshError(
                f"duplicate frame index {index}: {indexed[index].name} and {path.name}")
        indexed[index] = path
    if not indexed:
        raise MeshError(f"{directory}: no .obj frames found")
    indices = sorted(indexed)
    missing = sorted(set(range(indices[0], indices[-1] + 1)) - set(indices))
    if missing:
        raise MissingFramesError(
            f"{directory}: missing frame indices {missing}", missing)
    return [(i, indexed[i]) for i in indices]


def load_sequence(directory: str | Path, patient_id: str, clip_id: str,
                  frame_rate: float = 25.0) -> MeshSequence:
    """Load and validate every frame of a sequence directory."""
    entries = scan_sequence_dir(directory)
    frames = []
    names = []
    for index, path in entries:
        try:
            frames.append(parse_mesh_file(path.read_bytes()))
        except MeshError as exc:
            raise type(exc)(f"{path.name}: {exc}") from exc
        names.append(path.name)
    verify_shared_topology(frames, names)
    return MeshSequence(frames=frames, patient_id=patient_id,
                        clip_id=clip_id, frame_rate=frame_rate)
