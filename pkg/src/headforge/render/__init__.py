"""Multi-view software rendering of head-mesh sequences."""
from .camera import (
    Camera,
    camera_space,
    default_cameras,
    load_cameras,
    project_camera_space,
    project_vertex,
    project_vertices,
)
from .raster import (
    FrameBuffer,
    RenderError,
    RenderSettings,
    TriangleRaster,
    rasterize_frame,
    rasterize_triangle,
)
from .sequence import RenderedClip, render_clip_variant, render_sequence

__all__ = [
    "Camera",
    "FrameBuffer",
    "RenderError",
    "RenderSettings",
    "RenderedClip",
    "TriangleRaster",
    "camera_space",
    "default_cameras",
    "load_cameras",
    "project_camera_space",
    "project_vertex",
    "project_vertices",
    "rasterize_frame",
    "rasterize_triangle",
    "render_clip_variant",
    "render_sequence",
]
