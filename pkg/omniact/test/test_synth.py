"""Tests for the synth module."""
from ..geometry import spine_from_keypoints
from ..miml import block_spans, split_instances
from ..synth import (SynthSpec, desk_spec, gen_miml_dataset, split_dataset,
                     write_dataset, read_dataset, signatures, gen_fisheye,
                     gen_spines)
import numpy as np
import pytest


def small_spec(**kwargs):
    """Return settings for a quick dataset."""
    settings = dict(n_samples=24, n_classes=4, feat_dim=8, grid_h=4,
                    grid_w=20, block_width=5, frame_scale=2, n_frames=4)
    settings.update(kwargs)
    return SynthSpec(**settings)


class TestSignatures:
    """Tests for class signatures."""

    def test_orthonormal(self):
        """Test signatures are orthonormal when D >= C."""
        u = signatures(np.random.default_rng(0), 6, 64)
        assert u.shape == (6, 64)
        assert np.allclose(u @ u.T, np.eye(6))

    def test_unit(self):
        """Test signatures are unit vectors when D < C."""
        u = signatures(np.random.default_rng(1), 5, 3)
        assert np.allclose(np.linalg.norm(u, axis=1), 1.0)


class TestGenMimlDataset:
    """Tests for synthetic MIML datasets."""

    def test_shapes(self):
        """Test sample shapes and label types."""
        samples, truth = gen_miml_dataset(small_spec())
        assert len(samples) == 24
        for sample in samples:
            assert sample.features.shape == (8, 4, 20)
            assert sample.mask.shape == (4, 20)
            assert sample.labels.shape == (4,)
        assert len(truth.placements) == 24

    def test_pure_noise(self):
        """Test zero gain and zero noise give empty samples."""
        samples, truth = gen_miml_dataset(
            small_spec(noise_sigma=0.0, signal_gain=0.0))
        for i, sample in enumerate(samples):
            assert not sample.features.any()
            assert not sample.labels.any()
            assert truth.placements[i] == []

    def test_noiseless_blocks(self):
        """Test noiseless actor blocks equal their signature."""
        spec = small_spec(noise_sigma=0.0, bystander_rate=0.0, gain_jitter=0.0)
        samples, truth = gen_miml_dataset(spec)
        u = signatures(np.random.default_rng(spec.seed), 4, 8)
        spans = block_spans(20, 5)
        for sample, placements in zip(samples, truth.placements):
            assert placements
            for block, c in placements:
                start, stop = spans[block]
                column = sample.features[:, 0, start]
                assert np.allclose(sample.features[:, :, start:stop],
                                   column[:, None, None])
                assert np.allclose(column, u[c])

    def test_labels_are_union(self):
        """Test labels are the union of the planted classes."""
        samples, truth = gen_miml_dataset(small_spec(n_samples=40))
        for sample, placements in zip(samples, truth.placements):
            planted = sorted({c for _, c in placements})
            assert list(np.flatnonzero(sample.labels)) == planted

    def test_every_class_present(self):
        """Test sample i holds class i mod C."""
        samples, _ = gen_miml_dataset(small_spec())
        for i, sample in enumerate(samples):
            assert sample.labels[i % 4] == 1

    def test_one_actor_per_block(self):
        """Test actors and bystanders never share a block."""
        _, truth = gen_miml_dataset(small_spec(n_samples=60, clutter_rate=0.3))
        for i in range(60):
            blocks = [b for b, _ in truth.placements[i]]
            blocks += [b for b, _, _ in truth.bystanders[i]]
            blocks += [b for b, _ in truth.clutter[i]]
            assert len(blocks) == len(set(blocks))

    def test_no_repeats(self):
        """Test distinct classes per sample when repeats are off."""
        _, truth = gen_miml_dataset(
            small_spec(n_samples=60, allow_repeats=False))
        for placements in truth.placements:
            classes = [c for _, c in placements]
            assert len(classes) == len(set(classes))

    def test_clutter_outside_mask(self):
        """Test clutter blocks are not covered by the mask."""
        samples, truth = gen_miml_dataset(small_spec(clutter_rate=1.0))
        spans = block_spans(20, 5)
        found = 0
        for sample, clutter in zip(samples, truth.clutter):
            for block, _ in clutter:
                start, stop = spans[block]
                assert not sample.mask[:, start:stop].any()
                found += 1
        assert found > 0

    def test_actors_inside_mask(self):
        """Test every actor block is covered by the mask."""
        samples, truth = gen_miml_dataset(small_spec())
        spans = block_spans(20, 5)
        for sample, placements in zip(samples, truth.placements):
            for block, _ in placements:
                start, stop = spans[block]
                assert sample.mask[:, start:stop].all()

    def test_deterministic(self):
        """Test one seed gives identical datasets."""
        first, truth_a = gen_miml_dataset(small_spec(seed=3))
        second, truth_b = gen_miml_dataset(small_spec(seed=3))
        other, _ = gen_miml_dataset(small_spec(seed=4))
        for a, b in zip(first, second):
            assert np.array_equal(a.features, b.features)
            assert np.array_equal(a.mask, b.mask)
        assert truth_a == truth_b
        assert not np.array_equal(first[0].features, other[0].features)

    def test_nearest_signature(self):
        """Test a nearest-signature classifier recovers every actor."""
        spec = small_spec(noise_sigma=0.0, bystander_rate=0.0,
                          allow_repeats=False)
        samples, truth = gen_miml_dataset(spec)
        u = signatures(np.random.default_rng(spec.seed), 4, 8)
        for sample, placements in zip(samples, truth.placements):
            pooled = split_instances(sample.features, 5).features
            for block, c in placements:
                assert np.argmax(u @ pooled[block]) == c

    def test_desk_scale(self):
        """Test the desk dataset settings."""
        spec = desk_spec(2)
        assert (spec.n_samples, spec.n_classes, spec.feat_dim) == (640, 6, 64)
        assert (spec.grid_h, spec.grid_w, spec.noise_sigma) == (8, 40, 0.3)
        assert spec.bystander_rate == 0.0
        assert spec.seed == 2
        assert len(block_spans(spec.grid_w, spec.block_width)) == 5

    @pytest.mark.parametrize("kwargs", [
        {"noise_sigma": -0.1}, {"bystander_rate": 1.5},
        {"max_concurrent_actions": 0}, {"clutter_rate": -0.2}])
    def test_invalid(self, kwargs):
        """Test invalid settings."""
        with pytest.raises(ValueError):
            gen_miml_dataset(small_spec(**kwargs))


class TestDatasetFiles:
    """Tests for splitting, writing and reading datasets."""

    def test_split(self):
        """Test the last samples are held out."""
        samples, truth = gen_miml_dataset(small_spec())
        train_set, train_truth, test_set, test_truth = split_dataset(
            samples, truth, 4)
        assert len(train_set) == 20 and len(test_set) == 4
        assert test_set[0] is samples[20]
        assert test_truth.placements == truth.placements[20:]
        assert len(train_truth.boxes) == 20

    def test_split_too_large(self):
        """Test holding out more samples than exist."""
        samples, truth = gen_miml_dataset(small_spec())
        with pytest.raises(ValueError):
            split_dataset(samples, truth, 25)

    def test_write_read(self, tmp_path):
        """Test a dataset survives a write and read at float32 precision."""
        spec = small_spec(n_samples=6)
        samples, truth = gen_miml_dataset(spec)
        manifest = write_dataset(tmp_path, "train", samples, truth, spec)
        assert manifest == tmp_path / "train.json"
        loaded, loaded_truth = read_dataset(manifest)
        assert len(loaded) == 6
        for a, b in zip(samples, loaded):
            assert np.allclose(a.features, b.features, rtol=1e-6, atol=1e-7)
            assert np.array_equal(a.mask, b.mask)
            assert np.array_equal(a.labels, b.labels)
        assert loaded_truth.placements == truth.placements
        assert loaded_truth.bystanders == truth.bystanders


class TestFisheye:
    """Tests for synthetic fisheye frames."""

    def test_no_rays(self):
        """Test a frame without rays is black."""
        image, truth = gen_fisheye((64, 48), (32.0, 24.0), [])
        assert image.shape == (48, 64)
        assert not image.any()
        assert truth.rays == []

    def test_ray_direction(self):
        """Test rays at 0 and 90 degrees."""
        image, _ = gen_fisheye((64, 64), (32.0, 32.0), [0.0, 90.0])
        # 0 degrees runs right along row 31 or 32, 90 degrees runs up
        assert image[31:33, 40:].any(axis=0).all()
        assert image[:24, 31:33].any(axis=1).all()
        assert not image[40:, :].any()
        assert not image[:, :24].any()

    def test_collinear(self):
        """Test white pixels lie within half a thickness of the ray."""
        beta = np.deg2rad(30.0)
        image, _ = gen_fisheye((100, 100), (50.0, 50.0), [30.0])
        y, x = np.nonzero(image)
        dx, dy = x + 0.5 - 50.0, y + 0.5 - 50.0
        across = np.abs(dx * -np.sin(beta) - dy * np.cos(beta))
        assert len(x) > 40
        assert np.all(across <= 0.5 + 1e-9)
        assert np.all(dx * np.cos(beta) - dy * np.sin(beta) >= 0)


class TestSpines:
    """Tests for synthetic spine keypoints."""

    def test_radial(self):
        """Test exact spines pass through the center."""
        rng = np.random.default_rng(0)
        for shoulder, hip in gen_spines((120.0, 90.0), 20, rng):
            line = spine_from_keypoints(shoulder, hip)
            assert abs(line.a * 120.0 + line.b * 90.0 + line.c) < 1e-9
            r_shoulder = np.hypot(shoulder[0] - 120.0, shoulder[1] - 90.0)
            r_hip = np.hypot(hip[0] - 120.0, hip[1] - 90.0)
            assert 10.0 <= r_shoulder < r_hip <= 100.0

    def test_jitter(self):
        """Test jitter moves the keypoints."""
        exact = gen_spines((0.0, 0.0), 5, np.random.default_rng(1))
        noisy = gen_spines((0.0, 0.0), 5, np.random.default_rng(1),
                           jitter=0.5)
        assert exact != noisy

    def test_short_band(self):
        """Test a radius band too narrow for a spine."""
        with pytest.raises(ValueError):
            gen_spines((0.0, 0.0), 3, np.random.default_rng(2), inner=10.0,
                       outer=20.0)
