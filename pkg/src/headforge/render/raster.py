"""Software rasterizer: z-buffered, perspective-correct, Lambertian-shaded.

Coverage uses inclusive edge functions evaluated at pixel centers
(ix + 0.5, iy + 0.5); a pixel exactly on an edge belongs to the triangle.
Interpolated attributes (uv, normals) are perspective correct: each
attribute is divided by camera-space depth at the vertices, interpolated
with screen-space barycentrics, then divided by the interpolated 1/depth.
Depth tests compare camera-space depth with strict less-than, so the first
triangle submitted wins ties and output is order-stable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from ..mesh import NO_INDEX, MeshFrame
from ..texture import TextureAtlas
from .camera import Camera, camera_space, project_camera_space

__all__ = [
    "FrameBuffer",
    "RenderError",
    "RenderSettings",
    "TriangleRaster",
    "rasterize_frame",
    "rasterize_triangle",
]


class RenderError(RuntimeError):
    pass


def _check_rgb(value, what: str) -> tuple[float, float, float]:
    rgb = tuple(float(c) for c in value)
    if len(rgb) != 3 or any(not 0.0 <= c <= 1.0 for c in rgb):
        raise ValueError(f"{what} must be three components in [0, 1]")
    return rgb


@dataclass(frozen=True)
class RenderSettings:
    """Shading and framebuffer parameters shared by all frames of a render."""

    light_direction: tuple[float, float, float] = (0.3, 0.4, 1.0)
    ambient: float = 0.25
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    only_mesh_albedo: tuple[float, float, float] = (0.6, 0.6, 0.6)
    backface_culling: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.ambient <= 1.0:
            raise ValueError("ambient must lie in [0, 1]")
        light = np.asarray(self.light_direction, dtype=np.float64)
        if light.shape != (3,) or np.linalg.norm(light) < 1e-12:
            raise ValueError("light_direction must be a non-zero 3-vector")
        object.__setattr__(self, "background",
                           _check_rgb(self.background, "background"))
        object.__setattr__(self, "only_mesh_albedo",
                           _check_rgb(self.only_mesh_albedo, "only_mesh_albedo"))

    def light_unit(self) -> np.ndarray:
        light = np.asarray(self.light_direction, dtype=np.float64)
        return light / np.linalg.norm(light)


@dataclass
class FrameBuffer:
    """RGB color in [0, 1] plus a camera-space depth buffer (+inf = empty)."""

    width: int
    height: int
    color: np.ndarray = field(repr=False)
    depth: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, width: int, height: int,
               background=(0.0, 0.0, 0.0)) -> "FrameBuffer":
        color = np.empty((height, width, 3), dtype=np.float64)
        color[:] = np.asarray(background, dtype=np.float64)
        depth = np.full((height, width), np.inf, dtype=np.float64)
        return cls(width=width, height=height, color=color, depth=depth)

    def to_array8(self) -> np.ndarray:
        return np.clip(np.rint(self.color * 255.0), 0, 255).astype(np.uint8)

    def to_image(self) -> Image.Image:
        return Image.fromarray(self.to_array8(), mode="RGB")


@dataclass
class TriangleRaster:
    """Full-image coverage and interpolants for one triangle (debug path)."""

    mask: np.ndarray    # (h, w) bool
    u: np.ndarray       # (h, w) float64, 0 outside mask
    v: np.ndarray       # (h, w) float64
    depth: np.ndarray   # (h, w) float64, +inf outside mask


def _edge_grid(px, py, ax, ay, bx, by):
    # Signed area form shared by coverage and barycentric weights; the same
    # expression evaluated per pixel keeps boundary pixels bit-identical
    # between the vectorized path and scalar re-derivations.
    return (px - ax) * (by - ay) - (py - ay) * (bx - ax)


def _window(xy: np.ndarray, width: int, height: int):
    x_lo = max(0, int(np.floor(xy[:, 0].min())) - 1)
    x_hi = min(width - 1, int(np.ceil(xy[:, 0].max())) + 1)
    y_lo = max(0, int(np.floor(xy[:, 1].min())) - 1)
    y_hi = min(height - 1, int(np.ceil(xy[:, 1].max())) + 1)
    if x_lo > x_hi or y_lo > y_hi:
        return None
    return x_lo, x_hi, y_lo, y_hi


def _weights(xy: np.ndarray, x_lo: int, x_hi: int, y_lo: int, y_hi: int):
    """Barycentric weights over a pixel window; None for degenerate area."""
    (x0, y0), (x1, y1), (x2, y2) = xy
    area2 = _edge_grid(x0, y0, x1, y1, x2, y2)
    if area2 == 0.0:
        return None
    px = np.arange(x_lo, x_hi + 1, dtype=np.float64) + 0.5
    py = (np.arange(y_lo, y_hi + 1, dtype=np.float64) + 0.5)[:, None]
    w0 = _edge_grid(px, py, x1, y1, x2, y2)
    w1 = _edge_grid(px, py, x2, y2, x0, y0)
    w2 = _edge_grid(px, py, x0, y0, x1, y1)
    sign = 1.0 if area2 > 0 else -1.0
    mask = (w0 * sign >= 0) & (w1 * sign >= 0) & (w2 * sign >= 0)
    return mask, w0 / area2, w1 / area2, w2 / area2


def _perspective(l0, l1, l2, depths, values):
    """Perspective-correct interpolation of per-vertex scalars."""
    inv_d = l0 / depths[0] + l1 / depths[1] + l2 / depths[2]
    num = (l0 * values[0] / depths[0] + l1 * values[1] / depths[1]
           + l2 * values[2] / depths[2])
    return num / inv_d, inv_d


def rasterize_triangle(xy: np.ndarray, depths: np.ndarray, uvs: np.ndarray,
                       width: int, height: int) -> TriangleRaster:
    """Rasterize one projected triangle over a full image.

    ``xy`` is (3, 2) pixel coordinates, ``depths`` (3,) positive camera-space
    depths, ``uvs`` (3, 2) texture coordinates.  No clipping or depth test;
    intended for inspection and verification.
    """
    xy = np.asarray(xy, dtype=np.float64)
    depths = np.asarray(depths, dtype=np.float64)
    uvs = np.asarray(uvs, dtype=np.float64)
    mask_full = np.zeros((height, width), dtype=bool)
    u_full = np.zeros((height, width), dtype=np.float64)
    v_full = np.zeros((height, width), dtype=np.float64)
    d_full = np.full((height, width), np.inf, dtype=np.float64)

    win = _window(xy, width, height)
    if win is None:
        return TriangleRaster(mask_full, u_full, v_full, d_full)
    x_lo, x_hi, y_lo, y_hi = win
    weights = _weights(xy, x_lo, x_hi, y_lo, y_hi)
    if weights is None:
        return TriangleRaster(mask_full, u_full, v_full, d_full)
    mask, l0, l1, l2 = weights

    with np.errstate(divide="ignore", invalid="ignore"):
        u, inv_d = _perspective(l0, l1, l2, depths, uvs[:, 0])
        v, _ = _perspective(l0, l1, l2, depths, uvs[:, 1])
        depth = 1.0 / inv_d

    ys, xs = slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1)
    mask_full[ys, xs] = mask
    u_full[ys, xs] = np.where(mask, u, 0.0)
    v_full[ys, xs] = np.where(mask, v, 0.0)
    d_full[ys, xs] = np.where(mask, depth, np.inf)
    return TriangleRaster(mask_full, u_full, v_full, d_full)


def _sample_grid(atlas: TextureAtlas, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized bilinear sampling matching texture.sample_bilinear."""
    u = u - np.floor(u)
    v = v - np.floor(v)
    w, h = atlas.width, atlas.height
    x = u * w - 0.5
    y = v * h - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    i0 = x0.astype(np.int64) % w
    i1 = (i0 + 1) % w
    j0 = y0.astype(np.int64) % h
    j1 = (j0 + 1) % h
    p = atlas.pixels.astype(np.float64)
    top = (1.0 - fx) * p[j0, i0] + fx * p[j0, i1]
    bottom = (1.0 - fx) * p[j1, i0] + fx * p[j1, i1]
    return ((1.0 - fy) * top + fy * bottom) / 255.0


def _clip_near(cam: np.ndarray, uvs: np.ndarray, normals: np.ndarray | None,
               near: float):
    """Clip a camera-space triangle against depth >= near.

    Attributes are interpolated linearly, which is exact before projection.
    Returns (positions, uvs, normals) arrays for the clipped convex polygon,
    or None when the triangle lies entirely in front of the eye plane.
    """
    depths = cam[:, 2]
    if (depths >= near).all():
        return cam, uvs, normals
    if (depths < near).all():
        return None

    out_pos, out_uv, out_n = [], [], []
    for i in range(3):
        j = (i + 1) % 3
        a_in = depths[i] >= near
        b_in = depths[j] >= near
        if a_in:
            out_pos.append(cam[i])
            out_uv.append(uvs[i])
            if normals is not None:
                out_n.append(normals[i])
        if a_in != b_in:
            t = (near - depths[i]) / (depths[j] - depths[i])
            out_pos.append(cam[i] + t * (cam[j] - cam[i]))
            out_uv.append(uvs[i] + t * (uvs[j] - uvs[i]))
            if normals is not None:
                out_n.append(normals[i] + t * (normals[j] - normals[i]))
    if len(out_pos) < 3:
        return None
    pos = np.asarray(out_pos)
    uv = np.asarray(out_uv)
    nrm = np.asarray(out_n) if normals is not None else None
    return pos, uv, nrm


def _shade(albedo: np.ndarray, normals: np.ndarray, light: np.ndarray,
           ambient: float) -> np.ndarray:
    diffuse = np.maximum(normals @ light, 0.0)
    intensity = ambient + diffuse * (1.0 - ambient)
    return np.clip(albedo * intensity[..., None], 0.0, 1.0)


def _draw_triangle(fb: FrameBuffer, camera: Camera, cam3: np.ndarray,
                   uv3: np.ndarray, n3: np.ndarray | None, face_n: np.ndarray,
                   atlas: TextureAtlas | None, settings: RenderSettings,
                   light: np.ndarray) -> None:
    xy = project_camera_space(camera, cam3)
    win = _window(xy, fb.width, fb.height)
    if win is None:
        return
    x_lo, x_hi, y_lo, y_hi = win
    weights = _weights(xy, x_lo, x_hi, y_lo, y_hi)
    if weights is None:
        return
    mask, l0, l1, l2 = weights
    if not mask.any():
        return

    depths = cam3[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_d = l0 / depths[0] + l1 / depths[1] + l2 / depths[2]
        depth = 1.0 / inv_d

    ys, xs = slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1)
    depth_win = fb.depth[ys, xs]
    sel = mask & (depth < depth_win)
    if not sel.any():
        return

    if atlas is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (l0 * uv3[0, 0] / depths[0] + l1 * uv3[1, 0] / depths[1]
                 + l2 * uv3[2, 0] / depths[2]) / inv_d
            v = (l0 * uv3[0, 1] / depths[0] + l1 * uv3[1, 1] / depths[1]
                 + l2 * uv3[2, 1] / depths[2]) / inv_d
        albedo = _sample_grid(atlas, u[sel], v[sel])
    else:
        albedo = np.asarray(settings.only_mesh_albedo, dtype=np.float64)

    if n3 is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            comps = [((l0 * n3[0, k] / depths[0] + l1 * n3[1, k] / depths[1]
                       + l2 * n3[2, k] / depths[2]) / inv_d)[sel]
                     for k in range(3)]
        normals = np.stack(comps, axis=-1)
        lengths = np.linalg.norm(normals, axis=-1, keepdims=True)
        normals = np.where(lengths > 1e-12, normals / np.maximum(lengths, 1e-12),
                           face_n)
    else:
        normals = face_n

    shaded = _shade(np.atleast_2d(albedo), np.atleast_2d(normals), light,
                    settings.ambient)
    color_win = fb.color[ys, xs]
    color_win[sel] = shaded
    depth_win[sel] = depth[sel]


def rasterize_frame(frame: MeshFrame, atlas: TextureAtlas | None,
                    camera: Camera, settings: RenderSettings) -> FrameBuffer:
    """Render one mesh frame into a fresh framebuffer.

    Triangles are near-plane clipped, projected, coverage-tested at pixel
    centers, z-tested on camera-space depth, and shaded with a single
    directional light plus ambient.  Texture lookups need a full set of uv
    indices on the triangle; otherwise the flat untextured albedo is used.
    A frame with no triangles yields the untouched background.
    """
    fb = FrameBuffer.create(camera.width, camera.height, settings.background)
    if frame.triangles.shape[0] == 0:
        return fb

    cam_all = camera_space(camera, frame.vertices)
    eye = np.asarray(camera.eye, dtype=np.float64)
    light = settings.light_unit()

    for tri in frame.triangles:
        v_idx = tri[:, 0]
        world = frame.vertices[v_idx]
        face_n = np.cross(world[1] - world[0], world[2] - world[0])
        norm = np.linalg.norm(face_n)
        if norm < 1e-20:
            continue
        face_n = face_n / norm
        facing = face_n @ (eye - world.mean(axis=0))
        if settings.backface_culling and facing <= 0.0:
            continue
        if facing < 0.0:
            face_n = -face_n

        has_uv = atlas is not None and (tri[:, 1] != NO_INDEX).all()
        uv3 = frame.uvs[tri[:, 1]] if has_uv else np.zeros((3, 2))
        has_vn = frame.normals is not None and (tri[:, 2] != NO_INDEX).all()
        n3 = frame.normals[tri[:, 2]] if has_vn else None

        clipped = _clip_near(cam_all[v_idx], uv3, n3, camera.near)
        if clipped is None:
            continue
        pos, uv, nrm = clipped
        for k in range(1, len(pos) - 1):
            idx = (0, k, k + 1)
            _draw_triangle(fb, camera, pos[list(idx)], uv[list(idx)],
                           nrm[list(idx)] if nrm is not None else None,
                           face_n, atlas if has_uv else None, settings, light)
    return fb
