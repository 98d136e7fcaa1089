import numpy as np
import pytest

from headforge.mesh import MeshFrame, serialize_mesh


def random_mesh_frame(rng: np.random.Generator, max_vertices: int = 40) -> MeshFrame:
    """Seeded random frame exercising every OBJ corner form (v, v/vt, v//vn, v/vt/vn)."""
    n_v = int(rng.integers(3, max_vertices))
    scale = 10.0 ** rng.uniform(-2, 3)
    vertices = rng.uniform(-scale, scale, (n_v, 3))

    n_vt = int(rng.integers(1, n_v + 1)) if rng.random() < 0.85 else 0
    uvs = rng.random((n_vt, 2))

    n_vn = int(rng.integers(1, n_v + 1)) if rng.random() < 0.5 else 0
    if n_vn:
        normals = rng.normal(size=(n_vn, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    else:
        normals = None

    n_t = int(rng.integers(1, 50))
    triangles = np.full((n_t, 3, 3), -1, dtype=np.int32)
    for t in range(n_t):
        triangles[t, :, 0] = rng.integers(0, n_v, 3)
        if n_vt and rng.random() < 0.8:
            triangles[t, :, 1] = rng.integers(0, n_vt, 3)
        if n_vn and rng.random() < 0.8:
            triangles[t, :, 2] = rng.integers(0, n_vn, 3)
    return MeshFrame.from_raw(vertices, uvs, normals, triangles)


def write_sequence_dir(dirpath, frames, stem="head", start=1):
    dirpath.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        (dirpath / f"{stem}_{start + i:04d}.obj").write_bytes(serialize_mesh(frame))
    return dirpath


@pytest.fixture
def rng():
    return np.random.default_rng(20240814)
