import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from headforge.mesh import (
    EmptyMeshError,
    MeshError,
    MeshFrame,
    MeshParseError,
    MeshSequence,
    MissingFramesError,
    TopologyMismatchError,
    frames_structurally_equal,
    load_sequence,
    parse_mesh_file,
    serialize_mesh,
)

from conftest import random_mesh_frame, write_sequence_dir

MINIMAL_OBJ = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n"


class TestParse:
    def test_minimal_triangle(self):
        frame = parse_mesh_file(MINIMAL_OBJ)
        assert frame.vertices.shape == (3, 3)
        assert frame.uvs.shape == (3, 2)
        assert frame.triangles.shape == (1, 3, 3)
        assert frame.normals is None
        np.testing.assert_array_equal(frame.triangles[0, :, 0], [0, 1, 2])
        np.testing.assert_array_equal(frame.triangles[0, :, 1], [0, 1, 2])

    def test_quad_fan_triangulation(self):
        data = (b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
                b"vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n"
                b"f 1/1 2/2 3/3 4/4\n")
        frame = parse_mesh_file(data)
        assert frame.triangles.shape == (2, 3, 3)
        np.testing.assert_array_equal(frame.triangles[0, :, 0], [0, 1, 2])
        np.testing.assert_array_equal(frame.triangles[1, :, 0], [0, 2, 3])

    def test_pentagon_fan_keeps_boundary_order(self):
        verts = b"".join(b"v %d 0 0\n" % i for i in range(5))
        frame = parse_mesh_file(verts + b"f 1 2 3 4 5\n")
        corners = [tuple(t[:, 0]) for t in frame.triangles]
        assert corners == [(0, 1, 2), (0, 2, 3), (0, 3, 4)]

    def test_relative_negative_indices(self):
        data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n"
        frame = parse_mesh_file(data)
        np.testing.assert_array_equal(frame.triangles[0, :, 0], [0, 1, 2])

    def test_vertex_normal_corner_form(self):
        data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 2\nf 1//1 2//1 3//1\n"
        frame = parse_mesh_file(data)
        # normals are renormalized at parse time
        np.testing.assert_allclose(frame.normals[0], [0, 0, 1], atol=1e-12)
        np.testing.assert_array_equal(frame.triangles[0, :, 2], [0, 0, 0])
        np.testing.assert_array_equal(frame.triangles[0, :, 1], [-1, -1, -1])

    def test_uvs_wrap_into_unit_square(self):
        data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 1.25 -0.5\nf 1/1 2/1 3/1\n"
        frame = parse_mesh_file(data)
        np.testing.assert_allclose(frame.uvs[0], [0.25, 0.5])

    def test_malformed_number_reports_line(self):
        data = b"v 0 0 0\nv 1 0 zz\nv 0 1 0\nf 1 2 3\n"
        with pytest.raises(MeshParseError, match="line 2"):
            parse_mesh_file(data)

    def test_face_index_out_of_range(self):
        data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n"
        with pytest.raises(MeshParseError, match="line 4"):
            parse_mesh_file(data)

    def test_zero_faces_is_empty_mesh(self):
        with pytest.raises(EmptyMeshError):
            parse_mesh_file(b"v 0 0 0\nv 1 0 0\nv 0 1 0\n")

    def test_face_with_two_corners_rejected(self):
        with pytest.raises(MeshParseError, match="line 3"):
            parse_mesh_file(b"v 0 0 0\nv 1 0 0\nf 1 2\n")

    def test_zero_length_normal_rejected(self):
        data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 0\nf 1//1 2//1 3//1\n"
        with pytest.raises(MeshParseError, match="line 4"):
            parse_mesh_file(data)

    def test_unknown_directives_counted_once(self, caplog):
        data = b"mtllib x.mtl\nusemtl skin\n" + MINIMAL_OBJ + b"s off\n"
        with caplog.at_level(logging.WARNING, logger="headforge.mesh"):
            frame = parse_mesh_file(data)
        assert frame.triangles.shape[0] == 1
        warnings = [r for r in caplog.records if "3" in r.getMessage()]
        assert len(warnings) == 1

    def test_comments_and_blanks_ignored(self):
        data = b"# header\n\n" + MINIMAL_OBJ + b"\n# trailing\n"
        assert parse_mesh_file(data).triangles.shape[0] == 1


class TestSerialize:
    def test_minimal_round_trip(self):
        frame = parse_mesh_file(MINIMAL_OBJ)
        again = parse_mesh_file(serialize_mesh(frame))
        assert frames_structurally_equal(frame, again)

    def test_no_uvs_emits_v_only_faces(self):
        frame = parse_mesh_file(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        text = serialize_mesh(frame).decode()
        assert "vt" not in text
        assert "f 1 2 3" in text
        assert frames_structurally_equal(frame, parse_mesh_file(serialize_mesh(frame)))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_random_round_trip(self, seed):
        frame = random_mesh_frame(np.random.default_rng(seed))
        again = parse_mesh_file(serialize_mesh(frame))
        assert frames_structurally_equal(frame, again)


class TestSequence:
    def _frames(self, rng, n, n_tris=4):
        base = random_mesh_frame(rng)
        frames = []
        for _ in range(n):
            jitter = rng.normal(scale=0.01, size=base.vertices.shape)
            frames.append(MeshFrame.from_raw(base.vertices + jitter, base.uvs,
                                             base.normals, base.triangles))
        return frames

    def test_loads_three_frames(self, tmp_path, rng):
        write_sequence_dir(tmp_path / "seq", self._frames(rng, 3))
        seq = load_sequence(tmp_path / "seq", "p01", "c01")
        assert len(seq.frames) == 3
        assert seq.patient_id == "p01" and seq.clip_id == "c01"

    def test_gap_reports_missing_indices(self, tmp_path, rng):
        frames = self._frames(rng, 2)
        d = tmp_path / "seq"
        d.mkdir()
        (d / "head_0001.obj").write_bytes(serialize_mesh(frames[0]))
        (d / "head_0003.obj").write_bytes(serialize_mesh(frames[1]))
        with pytest.raises(MissingFramesError) as err:
            load_sequence(d, "p", "c")
        assert err.value.missing == [2]

    def test_topology_mismatch_names_frame(self, tmp_path, rng):
        frames = self._frames(rng, 3)
        d = write_sequence_dir(tmp_path / "seq", frames)
        # drop one face line from frame 2
        lines = (d / "head_0002.obj").read_bytes().decode().splitlines()
        face_at = max(i for i, ln in enumerate(lines) if ln.startswith("f "))
        del lines[face_at]
        (d / "head_0002.obj").write_text("\n".join(lines) + "\n")
        with pytest.raises(TopologyMismatchError, match="head_0002.obj"):
            load_sequence(d, "p", "c")

    def test_sorting_is_numeric_not_lexicographic(self, tmp_path, rng):
        frames = self._frames(rng, 3)
        d = tmp_path / "seq"
        d.mkdir()
        markers = []
        for idx, frame in zip((9, 10, 11), frames):
            (d / f"head_{idx}.obj").write_bytes(serialize_mesh(frame))
            markers.append(frame.vertices[0, 0])
        seq = load_sequence(d, "p", "c")
        got = [f.vertices[0, 0] for f in seq.frames]
        np.testing.assert_allclose(got, markers, rtol=1e-6)

    def test_duration_138_frames_at_25fps(self, tmp_path):
        frame = parse_mesh_file(MINIMAL_OBJ)
        d = write_sequence_dir(tmp_path / "seq", [frame] * 138)
        seq = load_sequence(d, "p", "c")
        assert seq.duration_s == pytest.approx(5.52)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            MeshSequence(frames=[], patient_id="p", clip_id="c")

    def test_duplicate_frame_index_rejected(self, tmp_path, rng):
        frames = self._frames(rng, 2)
        d = tmp_path / "seq"
        d.mkdir()
        (d / "head_0001.obj").write_bytes(serialize_mesh(frames[0]))
        (d / "other_1.obj").write_bytes(serialize_mesh(frames[1]))
        with pytest.raises(MeshError, match="duplicate"):
            load_sequence(d, "p", "c")

    def test_custom_frame_rate(self, tmp_path, rng):
        d = write_sequence_dir(tmp_path / "seq", self._frames(rng, 5))
        seq = load_sequence(d, "p", "c", frame_rate=50.0)
        assert seq.duration_s == pytest.approx(0.1)
