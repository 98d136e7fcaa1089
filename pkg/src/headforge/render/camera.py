"""Pinhole camera model and standard head-framing camera rigs.

Conventions: world is right-handed with +y up; image origin is the top-left
corner and pixel centers sit at half-integer coordinates.  Depth is measured
along the camera's forward axis, so a point is renderable when its depth is
at least ``near``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Camera",
    "default_cameras",
    "load_cameras",
    "project_vertex",
    "project_vertices",
]


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ValueError(f"{what} has zero length")
    return v / norm


@dataclass(frozen=True)
class Camera:
    """A look-at pinhole camera producing ``width`` x ``height`` images."""

    view_name: str
    eye: tuple[float, float, float]
    target: tuple[float, float, float]
    up: tuple[float, float, float]
    vertical_fov_deg: float
    width: int
    height: int
    near: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "eye", tuple(float(c) for c in self.eye))
        object.__setattr__(self, "target", tuple(float(c) for c in self.target))
        object.__setattr__(self, "up", tuple(float(c) for c in self.up))
        if not self.view_name:
            raise ValueError("view_name must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not 0.0 < self.vertical_fov_deg < 180.0:
            raise ValueError("vertical_fov_deg must lie in (0, 180)")
        if self.near <= 0.0:
            raise ValueError("near must be positive")
        fwd = np.subtract(self.target, self.eye)
        if np.linalg.norm(fwd) < 1e-12:
            raise ValueError("eye and target coincide")
        if np.linalg.norm(np.cross(fwd, self.up)) < 1e-9:
            raise ValueError("up direction is parallel to the view direction")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (right, up, forward) camera axes in world space."""
        forward = _unit(np.subtract(self.target, self.eye), "view direction")
        right = _unit(np.cross(forward, self.up), "right axis")
        up = np.cross(right, forward)
        return right, up, forward

    @property
    def focal(self) -> float:
        return 1.0 / math.tan(math.radians(self.vertical_fov_deg) / 2.0)

    def as_dict(self) -> dict:
        return {
            "name": self.view_name,
            "eye": list(self.eye),
            "target": list(self.target),
            "up": list(self.up),
            "fov_deg": self.vertical_fov_deg,
            "width": self.width,
            "height": self.height,
            "near": self.near,
        }


def project_vertices(camera: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project world points (n, 3) to pixel coordinates (n, 2) and depths (n,).

    Depth is the forward-axis distance from the eye; points with depth
    below ``camera.near`` get geometrically extrapolated screen positions
    and are expected to be clipped by the caller before rasterization.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    right, up, forward = camera.basis()
    rel = points - np.asarray(camera.eye)
    xv = rel @ right
    yv = rel @ up
    depth = rel @ forward

    aspect = camera.width / camera.height
    with np.errstate(divide="ignore", invalid="ignore"):
        x_ndc = camera.focal * xv / (depth * aspect)
        y_ndc = camera.focal * yv / depth
    px = (x_ndc * 0.5 + 0.5) * camera.width
    py = (0.5 - y_ndc * 0.5) * camera.height
    return np.stack([px, py], axis=1), depth


def project_vertex(camera: Camera, point) -> tuple[np.ndarray, float]:
    """Project a single world point; returns ((px, py), depth)."""
    xy, depth = project_vertices(camera, np.asarray(point, dtype=np.float64))
    return xy[0], float(depth[0])


def camera_space(camera: Camera, points: np.ndarray) -> np.ndarray:
    """World points (n, 3) -> camera-space (right, up, depth) coordinates."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    right, up, forward = camera.basis()
    rel = points - np.asarray(camera.eye)
    return np.stack([rel @ right, rel @ up, rel @ forward], axis=1)


def project_camera_space(camera: Camera, cam_pts: np.ndarray) -> np.ndarray:
    """Camera-space points (n, 3) -> pixel coordinates (n, 2)."""
    cam_pts = np.asarray(cam_pts, dtype=np.float64).reshape(-1, 3)
    aspect = camera.width / camera.height
    depth = cam_pts[:, 2]
    x_ndc = camera.focal * cam_pts[:, 0] / (depth * aspect)
    y_ndc = camera.focal * cam_pts[:, 1] / depth
    px = (x_ndc * 0.5 + 0.5) * camera.width
    py = (0.5 - y_ndc * 0.5) * camera.height
    return np.stack([px, py], axis=1)


def default_cameras(
    bounds_min,
    bounds_max,
    width: int,
    height: int,
    fov_deg: float = 30.0,
    fill_fraction: float = 0.75,
) -> tuple[Camera, Camera]:
    """Front and right-profile cameras framing a head bounding box.

    The distance is chosen so the box's vertical extent spans
    ``fill_fraction`` of the image height at the box center plane.
    """
    lo = np.asarray(bounds_min, dtype=np.float64)
    hi = np.asarray(bounds_max, dtype=np.float64)
    if (hi <= lo).any():
        raise ValueError("degenerate bounding box")
    center = (lo + hi) / 2.0
    extent_y = float(hi[1] - lo[1])
    half_fov = math.radians(fov_deg) / 2.0
    distance = extent_y / (2.0 * fill_fraction * math.tan(half_fov))
    near = max(1e-4, 0.05 * distance)

    front = Camera(
        view_name="front",
        eye=tuple(center + np.array([0.0, 0.0, distance])),
        target=tuple(center),
        up=(0.0, 1.0, 0.0),
        vertical_fov_deg=fov_deg,
        width=width,
        height=height,
        near=near,
    )
    side = Camera(
        view_name="side",
        eye=tuple(center + np.array([distance, 0.0, 0.0])),
        target=tuple(center),
        up=(0.0, 1.0, 0.0),
        vertical_fov_deg=fov_deg,
        width=width,
        height=height,
        near=near,
    )
    return front, side


def load_cameras(path) -> list[Camera]:
    """Read a JSON list of camera definitions.

    Each entry needs name/eye/target/up/fov_deg/width/height; ``near`` is
    optional and defaults to the dataclass default.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list) or not raw:
        raise ValueError(f"{path}: expected a non-empty JSON list of cameras")
    cameras = []
    for i, entry in enumerate(raw):
        try:
            kwargs = {
                "view_name": entry["name"],
                "eye": tuple(entry["eye"]),
                "target": tuple(entry["target"]),
                "up": tuple(entry["up"]),
                "vertical_fov_deg": float(entry["fov_deg"]),
                "width": int(entry["width"]),
                "height": int(entry["height"]),
            }
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: camera #{i} is malformed: {exc}") from exc
        if "near" in entry:
            kwargs["near"] = float(entry["near"])
        cameras.append(Camera(**kwargs))
    names = [c.view_name for c in cameras]
    if len(set(names)) != len(names):
        raise ValueError(f"{path}: duplicate view names: {names}")
    return cameras
