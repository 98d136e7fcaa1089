import math

import numpy as np
import pytest
from PIL import Image
from hypothesis import given, settings
from hypothesis import strategies as st

from headforge.texture import (
    CapacityError,
    TextureAssignment,
    TextureAtlas,
    TextureError,
    assign_textures,
    load_texture,
    read_pool_manifest,
    sample_bilinear,
)


def bilinear_oracle(pixels, u, v):
    """Direct-formula reference: repeat wrap, texel centers at (i+0.5)/size."""
    h, w = pixels.shape[:2]
    u -= math.floor(u)
    v -= math.floor(v)
    x = u * w - 0.5
    y = v * h - 0.5
    x0, y0 = math.floor(x), math.floor(y)
    fx, fy = x - x0, y - y0
    i0, i1 = int(x0) % w, (int(x0) + 1) % w
    j0, j1 = int(y0) % h, (int(y0) + 1) % h
    p = pixels.astype(np.float64) / 255.0
    return ((1 - fx) * (1 - fy) * p[j0, i0] + fx * (1 - fy) * p[j0, i1]
            + (1 - fx) * fy * p[j1, i0] + fx * fy * p[j1, i1])


def write_png(path, pixels):
    Image.fromarray(pixels, mode="RGB").save(path)
    return path


class TestLoadTexture:
    def test_known_2x2_pixels(self, tmp_path):
        pixels = np.array([[[255, 0, 0], [0, 255, 0]],
                           [[0, 0, 255], [10, 20, 30]]], dtype=np.uint8)
        path = write_png(tmp_path / "t.png", pixels)
        atlas = load_texture(path, "t")
        assert (atlas.width, atlas.height) == (2, 2)
        np.testing.assert_array_equal(atlas.pixels, pixels)

    def test_large_fixture_dimensions(self, tmp_path):
        pixels = np.zeros((1024, 1024, 3), dtype=np.uint8)
        atlas = load_texture(write_png(tmp_path / "big.png", pixels), "big")
        assert atlas.width == 1024 and atlas.height == 1024

    def test_rgba_alpha_dropped(self, tmp_path):
        rgba = np.zeros((2, 2, 4), dtype=np.uint8)
        rgba[..., 0] = 200
        rgba[..., 3] = 17
        path = tmp_path / "a.png"
        Image.fromarray(rgba, mode="RGBA").save(path)
        atlas = load_texture(path, "a")
        assert atlas.pixels.shape == (2, 2, 3)
        assert (atlas.pixels[..., 0] == 200).all()

    def test_grayscale_expands_to_triplicated_rgb(self, tmp_path):
        gray = np.arange(16, dtype=np.uint8).reshape(4, 4) * 15
        path = tmp_path / "g.png"
        Image.fromarray(gray, mode="L").save(path)
        atlas = load_texture(path, "g")
        for c in range(3):
            np.testing.assert_array_equal(atlas.pixels[..., c], gray)

    def test_unreadable_file_raises(self, tmp_path):
        bad = tmp_path / "junk.png"
        bad.write_bytes(b"this is not a png")
        with pytest.raises(TextureError):
            load_texture(bad, "junk")
        with pytest.raises(TextureError):
            load_texture(tmp_path / "missing.png", "missing")

    def test_zero_byte_file_raises(self, tmp_path):
        empty = tmp_path / "empty.png"
        empty.write_bytes(b"")
        with pytest.raises(TextureError):
            load_texture(empty, "empty")

    def test_overlay_mask_composited_at_load(self, tmp_path):
        base = np.full((2, 2, 3), 100, dtype=np.uint8)
        path = write_png(tmp_path / "base.png", base)
        overlay = np.zeros((2, 2, 4), dtype=np.uint8)
        overlay[0, 0] = [255, 0, 0, 255]  # opaque red over one texel
        overlay_path = tmp_path / "eyes.png"
        Image.fromarray(overlay, mode="RGBA").save(overlay_path)
        atlas = load_texture(path, "b", overlay_path=overlay_path)
        np.testing.assert_array_equal(atlas.pixels[0, 0], [255, 0, 0])
        np.testing.assert_array_equal(atlas.pixels[1, 1], [100, 100, 100])

    def test_overlay_size_mismatch_raises(self, tmp_path):
        base = write_png(tmp_path / "b.png", np.zeros((2, 2, 3), dtype=np.uint8))
        overlay = tmp_path / "o.png"
        Image.fromarray(np.zeros((3, 3, 4), dtype=np.uint8), mode="RGBA").save(overlay)
        with pytest.raises(TextureError, match="size"):
            load_texture(base, "b", overlay_path=overlay)


class TestSampleBilinear:
    def _atlas(self, pixels):
        return TextureAtlas("t", pixels.shape[1], pixels.shape[0], pixels)

    def test_texel_center_returns_texel(self):
        pixels = (np.arange(4 * 4 * 3, dtype=np.uint8).reshape(4, 4, 3) * 4)
        atlas = self._atlas(pixels)
        for j in range(4):
            for i in range(4):
                uv = ((i + 0.5) / 4, (j + 0.5) / 4)
                np.testing.assert_allclose(
                    sample_bilinear(atlas, uv), pixels[j, i] / 255.0, atol=1e-12)

    def test_midpoint_of_adjacent_texels_is_mean(self):
        pixels = np.zeros((1, 2, 3), dtype=np.uint8)
        pixels[0, 0] = [100, 0, 0]
        pixels[0, 1] = [200, 0, 0]
        atlas = self._atlas(pixels)
        got = sample_bilinear(atlas, (0.5, 0.5))  # halfway between both centers
        np.testing.assert_allclose(got, [150 / 255.0, 0, 0], atol=1e-12)

    def test_matches_direct_formula_oracle(self):
        rng = np.random.default_rng(77)
        pixels = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        atlas = self._atlas(pixels)
        for _ in range(50):
            u, v = rng.uniform(-1.5, 2.5, 2)  # include out-of-range wrap cases
            np.testing.assert_allclose(
                sample_bilinear(atlas, (u, v)), bilinear_oracle(pixels, u, v),
                atol=1e-6)

    def test_wraps_across_atlas_edge(self):
        pixels = np.zeros((1, 2, 3), dtype=np.uint8)
        pixels[0, 0] = [0, 0, 0]
        pixels[0, 1] = [255, 255, 255]
        atlas = self._atlas(pixels)
        # u=0 sits halfway between texel 1 (wrapped) and texel 0
        np.testing.assert_allclose(sample_bilinear(atlas, (0.0, 0.5)),
                                   [0.5, 0.5, 0.5], atol=1e-12)

    def test_continuity_near_texel_boundary(self):
        rng = np.random.default_rng(3)
        pixels = rng.integers(0, 256, (4, 4, 3), dtype=np.uint8)
        atlas = self._atlas(pixels)
        a = sample_bilinear(atlas, (0.374999999, 0.2))
        b = sample_bilinear(atlas, (0.375000001, 0.2))
        np.testing.assert_allclose(a, b, atol=1e-6)


class TestAssignTextures:
    POOL = [f"tex{i:02d}" for i in range(10)]

    def test_zero_is_only_mesh(self):
        out = assign_textures(["a", "b"], self.POOL, 0, seed=1)
        assert all(t.texture_ids == () for t in out)

    def test_full_pool_assignment(self):
        out = assign_textures(["a", "b"], self.POOL, 10, seed=1)
        for t in out:
            assert sorted(t.texture_ids) == sorted(self.POOL)

    def test_densest_condition_multiplicity(self):
        # 10 textures per patient -> 10 render variants per patient per view
        out = assign_textures(["A", "B"], self.POOL, 10, seed=42)
        assert [len(t.texture_ids) for t in out] == [10, 10]

    def test_deterministic_and_pure(self):
        a = assign_textures(["p1", "p2", "p3"], self.POOL, 3, seed=99)
        b = assign_textures(["p1", "p2", "p3"], self.POOL, 3, seed=99)
        assert a == b

    def test_seed_changes_assignment(self):
        a = assign_textures(["p1"] * 1, self.POOL, 5, seed=1)
        b = assign_textures(["p1"] * 1, self.POOL, 5, seed=2)
        assert a != b

    def test_frozen_expected_output(self):
        # regression guard: the exact shuffle for one (patients, pool, n, seed)
        got = assign_textures(["alice"], ["t0", "t1", "t2", "t3"], 3, seed=7)[0]
        assert got.texture_ids == ("t0", "t3", "t1")

    def test_capacity_error(self):
        with pytest.raises(CapacityError):
            assign_textures(["a"], ["t0", "t1"], 3, seed=0)

    def test_duplicate_pool_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            assign_textures(["a"], ["t0", "t0"], 1, seed=0)

    def test_disallowed_count_rejected(self):
        with pytest.raises(ValueError):
            assign_textures(["a"], self.POOL, 4, seed=0)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([0, 1, 2, 3, 5, 10]))
    @settings(max_examples=40, deadline=None)
    def test_no_duplicates_per_patient(self, seed, n):
        out = assign_textures(["p1", "p2"], self.POOL, n, seed=seed)
        for t in out:
            assert len(set(t.texture_ids)) == len(t.texture_ids) == n


class TestPoolManifest:
    def test_parse_tab_separated(self, tmp_path):
        manifest = tmp_path / "pool.tsv"
        manifest.write_text(
            "# id\tpath\ttags...\n"
            "tex01\ttextures/a.png\tfemale\tage:30\n"
            "tex02\ttextures/b.png\n"
            "\n")
        entries = read_pool_manifest(manifest)
        assert [e.texture_id for e in entries] == ["tex01", "tex02"]
        assert entries[0].tags == ("female", "age:30")
        assert entries[1].path.name == "b.png"

    def test_relative_paths_resolve_against_manifest(self, tmp_path):
        (tmp_path / "pool.tsv").write_text("t\tsub/x.png\n")
        entries = read_pool_manifest(tmp_path / "pool.tsv")
        assert entries[0].path == tmp_path / "sub" / "x.png"

    def test_duplicate_ids_rejected(self, tmp_path):
        (tmp_path / "pool.tsv").write_text("t\ta.png\nt\tb.png\n")
        with pytest.raises(ValueError, match="duplicate"):
            read_pool_manifest(tmp_path / "pool.tsv")

    def test_missing_path_column_rejected(self, tmp_path):
        (tmp_path / "pool.tsv").write_text("only_id\n")
        with pytest.raises(ValueError):
            read_pool_manifest(tmp_path / "pool.tsv")
