import json
import os

import numpy as np
import pytest

from headfield.errors import ChecksumError, DataError, ManifestError
from headfield.synthdata import (
    ProceduralHead,
    SynthSpec,
    build_head,
    generate_dataset,
    holdout_pose,
    load_dataset,
    make_camera,
    render_analytic,
)


def tiny_spec(**kw):
    base = dict(subjects=1, expressions=1, lightings=1, views=2, resolution=16,
                seed=3, samples_per_ray=32, holdout_views=0)
    base.update(kw)
    return SynthSpec(**base)


def head_from(spec, seed=0):
    rng = np.random.default_rng(seed)
    return ProceduralHead(
        g_id=rng.standard_normal(spec.id_dim),
        g_exp=rng.standard_normal(spec.exp_dim),
        g_alb=rng.standard_normal(spec.alb_dim),
        g_ill=rng.standard_normal(spec.ill_dim),
    )


class TestProceduralHead:
    def test_density_zero_outside_unit_sphere(self):
        head = head_from(tiny_spec())
        rng = np.random.default_rng(1)
        outside = rng.uniform(1.05, 3.0, (100, 1)) * _unit(rng, 100)
        np.testing.assert_array_equal(head.density(outside), 0.0)

    def test_density_nonnegative_and_continuous_at_boundary(self):
        head = head_from(tiny_spec())
        rng = np.random.default_rng(2)
        pts = rng.uniform(-1.2, 1.2, (500, 3))
        assert np.all(head.density(pts) >= 0)
        shell = _unit(rng, 200) * 0.999
        assert np.max(head.density(shell)) < 0.1  # envelope pulls to zero

    def test_equal_factors_bit_identical(self):
        spec = tiny_spec()
        a, b = head_from(spec, seed=7), head_from(spec, seed=7)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1, 1, (50, 3))
        assert np.array_equal(a.density(pts), b.density(pts))
        assert np.array_equal(a.color(pts), b.color(pts))

    def test_color_in_unit_range(self):
        head = head_from(tiny_spec())
        rng = np.random.default_rng(4)
        pts = rng.uniform(-1, 1, (500, 3))
        c = head.color(pts)
        assert c.min() >= 0.0 and c.max() <= 1.0


class TestGenerate:
    def test_frame_counting_and_masks(self, tmp_path):
        spec = tiny_spec(views=4)
        manifest = generate_dataset(spec, str(tmp_path))
        ds = load_dataset(manifest)
        assert len(ds.frames) == 4
        for frame in ds.frames:
            assert frame.mask.sum() > 0

    def test_same_seed_byte_identical(self, tmp_path):
        spec = tiny_spec()
        d1, d2 = tmp_path / "a", tmp_path / "b"
        generate_dataset(spec, str(d1))
        generate_dataset(spec, str(d2))
        files1 = sorted(p.relative_to(d1) for p in d1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(d2) for p in d2.rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (d1 / rel).read_bytes() == (d2 / rel).read_bytes()

    def test_multi_view_density_consistency(self):
        # the analytic field is a function of world position only: sampling
        # the same world points through two different view frames agrees
        spec = tiny_spec()
        factors = _factors(spec)
        head = build_head(spec, factors, "s0", "e0", "l0")
        rng = np.random.default_rng(5)
        pts = rng.uniform(-0.9, 0.9, (200, 3))
        head_again = build_head(spec, factors, "s0", "e0", "l0")
        assert np.array_equal(head.density(pts), head_again.density(pts))

    def test_geometry_invariant_to_alb_ill(self):
        spec = tiny_spec()
        factors = _factors(spec)
        camera = make_camera(spec, 0.3, 0.1)
        base = build_head(spec, factors, "s0", "e0", "l0")
        _, alpha_base = render_analytic(base, camera, spec)

        changed = dict(factors)
        changed["alb"] = {"s0": (np.asarray(factors["alb"]["s0"]) + 1.0).tolist()}
        changed["ill"] = {"l0": (np.asarray(factors["ill"]["l0"]) - 2.0).tolist()}
        head2 = build_head(spec, changed, "s0", "e0", "l0")
        _, alpha2 = render_analytic(head2, camera, spec)
        assert np.array_equal(alpha_base > 0.5, alpha2 > 0.5)
        assert np.array_equal(alpha_base, alpha2)

    def test_illumination_preserves_chroma_ratios(self):
        spec = tiny_spec(resolution=24)
        factors = _factors(spec)
        camera = make_camera(spec, 0.0, 0.0)
        img1, alpha = render_analytic(build_head(spec, factors, "s0", "e0", "l0"),
                                      camera, spec)
        changed = dict(factors)
        changed["ill"] = {"l0": (np.asarray(factors["ill"]["l0"]) + 1.5).tolist()}
        img2, _ = render_analytic(build_head(spec, changed, "s0", "e0", "l0"),
                                  camera, spec)
        interior = alpha > 0.9
        ratio = img2[:, interior] / np.maximum(img1[:, interior], 1e-9)
        # one global scalar: the gain ratio, identical across pixels/channels
        assert ratio.std() / ratio.mean() < 1e-9

    def test_two_frames_same_subject_expression_same_field(self, tmp_path):
        spec = tiny_spec(lightings=2, views=1)
        manifest = generate_dataset(spec, str(tmp_path))
        ds = load_dataset(manifest)
        f0, f1 = ds.frames[0], ds.frames[1]
        assert (f0.subject, f0.expression) == (f1.subject, f1.expression)
        factors = ds.manifest["factors"]
        h0 = build_head(spec, factors, f0.subject, f0.expression, f0.lighting)
        h1 = build_head(spec, factors, f1.subject, f1.expression, f1.lighting)
        rng = np.random.default_rng(6)
        pts = rng.uniform(-1, 1, (100, 3))
        assert np.array_equal(h0.density(pts), h1.density(pts))

    def test_holdout_views_flagged(self, tmp_path):
        spec = tiny_spec(views=4, holdout_views=1)
        ds = load_dataset(generate_dataset(spec, str(tmp_path)))
        assert len(ds.train_frames) == 4
        assert len(ds.holdout_frames) == 1
        yaw_mid, _ = holdout_pose(spec)
        poses = sorted({f.view for f in ds.train_frames})
        assert poses == [0, 1, 2, 3]


class TestLoad:
    def test_round_trip_preserves_records(self, tmp_path):
        spec = tiny_spec(views=2)
        manifest = generate_dataset(spec, str(tmp_path))
        ds1 = load_dataset(manifest)
        ds2 = load_dataset(manifest)
        assert len(ds1.frames) == len(ds2.frames)
        for a, b in zip(ds1.frames, ds2.frames):
            assert np.array_equal(a.image, b.image)
            assert np.array_equal(a.mask, b.mask)
            assert a.subject == b.subject and a.view == b.view

    def test_empty_manifest_empty_iterator(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"version": 1, "spec": {}, "frames": []}))
        assert load_dataset(str(path)).frames == []

    def test_corrupt_checksum(self, tmp_path):
        manifest = generate_dataset(tiny_spec(), str(tmp_path))
        ds = load_dataset(manifest)
        target = os.path.join(str(tmp_path), ds.manifest["frames"][0]["image"])
        with open(target, "ab") as fp:
            fp.write(b"x")
        with pytest.raises(ChecksumError):
            load_dataset(manifest)

    def test_missing_file(self, tmp_path):
        manifest = generate_dataset(tiny_spec(), str(tmp_path))
        ds = load_dataset(manifest)
        os.unlink(os.path.join(str(tmp_path), ds.manifest["frames"][0]["mask"]))
        with pytest.raises(DataError):
            load_dataset(manifest)

    def test_malformed_manifest(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        with pytest.raises(ManifestError):
            load_dataset(str(path))
        path.write_text(json.dumps({"no_frames": True}))
        with pytest.raises(ManifestError):
            load_dataset(str(path))

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(str(tmp_path / "nope.json"))


def _unit(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _factors(spec):
    rng = np.random.default_rng(spec.seed)
    return {
        "id": {f"s{i}": (0.8 * rng.standard_normal(spec.id_dim)).tolist()
               for i in range(spec.subjects)},
        "exp": {f"e{i}": (0.8 * rng.standard_normal(spec.exp_dim)).tolist()
                for i in range(spec.expressions)},
        "alb": {f"s{i}": (0.8 * rng.standard_normal(spec.alb_dim)).tolist()
                for i in range(spec.subjects)},
        "ill": {f"l{i}": (0.8 * rng.standard_normal(spec.ill_dim)).tolist()
                for i in range(spec.lightings)},
    }
