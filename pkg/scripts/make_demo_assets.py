#!/usr/bin/env python3
"""Generate a self-contained demo corpus: animated head-like mesh
sequences, a small texture pool, camera rig, clips table, and patient
strata — everything the pipeline needs to run end to end without any
external data."""
import argparse
import csv
import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

import _bootstrap  # noqa: F401  (makes headforge importable from a checkout)
from headforge.mesh import MeshFrame, serialize_mesh


def head_mesh(time_s: float, rings: int = 9, segments: int = 12,
              jaw_drop: float = 0.0) -> MeshFrame:
    """A deformed ellipsoid with a simple jaw-opening animation."""
    vertices = []
    uvs = []
    for r in range(rings + 1):
        theta = math.pi * (0.08 + 0.84 * r / rings)
        for s in range(segments):
            phi = 2.0 * math.pi * s / segments
            x = 0.8 * math.sin(theta) * math.cos(phi)
            y = 1.1 * math.cos(theta)
            z = 0.9 * math.sin(theta) * math.sin(phi)
            y += 0.04 * math.sin(2.0 * math.pi * time_s + 3.0 * y)
            if y < -0.3:  # jaw region
                y -= jaw_drop
            vertices.append((x, y, z))
            uvs.append((s / segments, r / rings))

    triangles = []
    for r in range(rings):
        for s in range(segments):
            a = r * segments + s
            b = r * segments + (s + 1) % segments
            c = (r + 1) * segments + (s + 1) % segments
            d = (r + 1) * segments + s
            triangles.append((a, b, c))
            triangles.append((a, c, d))

    tri = np.full((len(triangles), 3, 3), -1, dtype=np.int32)
    for i, (a, b, c) in enumerate(triangles):
        tri[i, :, 0] = (a, b, c)
        tri[i, :, 1] = (a, b, c)  # one uv per vertex
    return MeshFrame.from_raw(np.array(vertices), np.array(uvs), None, tri)


def skin_texture(rng: np.random.Generator, size: int = 64) -> Image.Image:
    """Smooth low-frequency color field standing in for a facial atlas."""
    coarse = rng.uniform(60, 220, (8, 8, 3))
    image = Image.fromarray(coarse.astype(np.uint8), mode="RGB")
    return image.resize((size, size), Image.BILINEAR)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="asset directory")
    parser.add_argument("--patients", type=int, default=4)
    parser.add_argument("--clips-per-patient", type=int, default=2)
    parser.add_argument("--frames", type=int, default=4)
    parser.add_argument("--textures", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    root = Path(args.out)
    rng = np.random.default_rng(args.seed)

    clip_rows = []
    for p in range(args.patients):
        patient = f"p{p:03d}"
        for c in range(args.clips_per_patient):
            clip = f"{patient}c{c:02d}"
            label = c % 2  # alternate baseline / stimulus clips
            seq_dir = root / "meshes" / clip
            seq_dir.mkdir(parents=True, exist_ok=True)
            for f in range(args.frames):
                jaw = 0.15 * label * math.sin(math.pi * f / args.frames)
                frame = head_mesh(time_s=f / 25.0 + 0.31 * p, jaw_drop=jaw)
                (seq_dir / f"head_{f + 1:04d}.obj").write_bytes(
                    serialize_mesh(frame))
            clip_rows.append({"clip_id": clip, "patient_id": patient,
                              "sequence_uri": str(seq_dir), "label": label})

    tex_dir = root / "textures"
    tex_dir.mkdir(parents=True, exist_ok=True)
    pool_lines = []
    for t in range(args.textures):
        tex_id = f"tex{t:02d}"
        path = tex_dir / f"{tex_id}.png"
        skin_texture(rng).save(path)
        pool_lines.append(f"{tex_id}\t{path}")
    (root / "pool.tsv").write_text("\n".join(pool_lines) + "\n")

    with (root / "clips.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["clip_id", "patient_id",
                                                "sequence_uri", "label"])
        writer.writeheader()
        writer.writerows(clip_rows)

    with (root / "strata.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["patient_id", "gender",
                                                "age", "expressiveness"])
        writer.writeheader()
        for p in range(args.patients):
            writer.writerow({
                "patient_id": f"p{p:03d}",
                "gender": "f" if p % 2 == 0 else "m",
                "age": int(rng.integers(20, 70)),
                "expressiveness": ["low", "medium", "high"][p % 3],
            })

    cameras = [
        {"name": "front", "eye": [0, 0, 5], "target": [0, 0, 0],
         "up": [0, 1, 0], "fov_deg": 35, "width": 96, "height": 96},
        {"name": "side", "eye": [5, 0, 0], "target": [0, 0, 0],
         "up": [0, 1, 0], "fov_deg": 35, "width": 96, "height": 96},
    ]
    (root / "cameras.json").write_text(json.dumps(cameras, indent=2) + "\n")

    print(json.dumps({
        "out": str(root),
        "clips": len(clip_rows),
        "textures": args.textures,
        "frames_per_clip": args.frames,
    }, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
