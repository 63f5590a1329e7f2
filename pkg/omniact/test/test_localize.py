"""Tests for the localize module."""
from .conftest import random_head, random_sample, small_hyperparams
from ..evalmetrics import localization_hit_rate
from ..geometry import DimensionMismatchError
from ..localize import (ChannelWeights, feature_gradients, channel_weights,
                        gradcam, upsample_heatmap, render_heatmap, overlay,
                        predicted_classes, localize_sample)
from ..miml import (Hyperparams, MimlHead, TrainSample, block_spans, predict,
                    train)
from ..synth import desk_spec, gen_miml_dataset, split_dataset
import numpy as np
import pytest


def numeric_feature_gradients(sample, head, hp, a, step=1e-5):
    """Central finite differences of p^a over the feature cells."""
    features = np.array(sample.features, dtype=np.float64)
    g = np.zeros_like(features)
    for index in np.ndindex(features.shape):
        saved = features[index]
        features[index] = saved + step
        up = predict(sample._replace(features=features), head, hp)
        features[index] = saved - step
        down = predict(sample._replace(features=features), head, hp)
        features[index] = saved
        g[index] = (up.bag_probs[a] - down.bag_probs[a]) / (2.0 * step)
    return g


class TestFeatureGradients:
    """Tests for gradients with respect to the feature map."""

    def test_zero_mask(self):
        """Test a zero mask gives zero gradient."""
        rng = np.random.default_rng(0)
        sample = random_sample(rng)
        sample = sample._replace(mask=np.zeros(sample.mask.shape, dtype=bool))
        grads = feature_gradients(sample, random_head(rng),
                                  small_hyperparams(), 1)
        assert not grads.any()

    def test_uniform_block(self):
        """Test one instance spreads the gradient evenly."""
        sample = TrainSample(np.array([[[0.5, 1.0, -2.0, 3.0],
                                        [1.0, 0.0, 0.0, 1.0]]]), [1])
        head = MimlHead([[1.0]], [0.0])
        grads = feature_gradients(sample, head, Hyperparams(k=4), 0)
        p = 1.0 / (1.0 + np.exp(-0.5625))
        assert np.allclose(grads, p * (1.0 - p) / 8.0)

    @pytest.mark.parametrize("aggregator", ["avg", "max", "lse",
                                            "attention"])
    @pytest.mark.parametrize("use_mask", [True, False])
    def test_finite_differences(self, aggregator, use_mask):
        """Test against central finite differences on the feature cells."""
        rng = np.random.default_rng([len(aggregator), int(use_mask)])
        hp = small_hyperparams(aggregator=aggregator, use_mask=use_mask)
        for _ in range(3):
            sample = random_sample(rng)
            head = random_head(rng, attention=aggregator == "attention")
            for a in range(head.n_classes):
                analytic = feature_gradients(sample, head, hp, a)
                numeric = numeric_feature_gradients(sample, head, hp, a)
                error = np.linalg.norm(analytic - numeric) / max(
                    np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
                assert error < 1e-5

    @pytest.mark.parametrize("name", ["avgpool", "maxpool"])
    def test_pooling_heads(self, name):
        """Test the pooling heads against finite differences."""
        rng = np.random.default_rng(1)
        hp = small_hyperparams(head=name)
        sample, head = random_sample(rng), random_head(rng)
        analytic = feature_gradients(sample, head, hp, 2)
        numeric = numeric_feature_gradients(sample, head, hp, 2)
        assert np.allclose(analytic, numeric, atol=1e-9)

    def test_masked_cells(self):
        """Test masked-out cells get no gradient."""
        rng = np.random.default_rng(2)
        sample = random_sample(rng)
        grads = feature_gradients(sample, random_head(rng),
                                  small_hyperparams(), 0)
        assert not grads[:, ~sample.mask].any()

    def test_class_range(self):
        """Test a class index past the head."""
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            feature_gradients(random_sample(rng), random_head(rng),
                              small_hyperparams(), 4)


class TestChannelWeights:
    """Tests for pooling gradients into channel weights."""

    def test_constant(self):
        """Test a constant gradient per channel."""
        grads = np.stack([np.full((3, 4), g) for g in [0.5, -2.0]])
        weights = channel_weights(grads)
        assert np.allclose(weights.weights, [0.5, -2.0])
        assert weights.pool_size == 12

    def test_zero(self):
        """Test zero gradients."""
        assert not channel_weights(np.zeros((3, 2, 2))).weights.any()

    def test_mean(self):
        """Test against a direct mean."""
        grads = np.random.default_rng(4).standard_normal((5, 3, 7))
        weights = channel_weights(grads)
        for k in range(5):
            assert weights.weights[k] == pytest.approx(
                sum(grads[k].ravel()) / 21.0)


class TestGradcam:
    """Tests for the weighted channel sum."""

    def test_single_channel(self):
        """Test a unit weight gives ReLU of the channel."""
        feature = np.array([[[1.0, -2.0], [0.0, 3.0]]])
        heatmap = gradcam(feature, ChannelWeights(np.array([1.0]), 4))
        assert np.array_equal(heatmap, [[1.0, 0.0], [0.0, 3.0]])

    def test_negative(self):
        """Test a negative sum everywhere gives an empty map."""
        feature = np.abs(np.random.default_rng(5).standard_normal((2, 3, 3)))
        heatmap = gradcam(feature, ChannelWeights(np.array([-1.0, -0.5]), 9))
        assert not heatmap.any()

    def test_mixed_signs(self):
        """Test two channels against direct evaluation."""
        feature = np.random.default_rng(6).standard_normal((2, 3, 4))
        heatmap = gradcam(feature, ChannelWeights(np.array([0.7, -1.3]), 12))
        for i in range(3):
            for j in range(4):
                total = 0.7 * feature[0, i, j] - 1.3 * feature[1, i, j]
                assert heatmap[i, j] == pytest.approx(max(total, 0.0))

    def test_scale(self):
        """Test scaling the weights scales the heatmap."""
        rng = np.random.default_rng(7)
        feature = rng.standard_normal((4, 3, 5))
        alpha = rng.standard_normal(4)
        heatmap = gradcam(feature, ChannelWeights(alpha, 15))
        assert np.allclose(gradcam(feature, ChannelWeights(2.5 * alpha, 15)),
                           2.5 * heatmap)

    def test_channel_mismatch(self):
        """Test weights for the wrong number of channels."""
        with pytest.raises(ValueError):
            gradcam(np.zeros((3, 2, 2)), ChannelWeights(np.zeros(2), 4))

    def test_zero_gradient_class(self):
        """Test a class the head ignores has an empty heatmap."""
        rng = np.random.default_rng(8)
        head = random_head(rng)
        head.weights[1] = 0.0
        heatmaps = localize_sample(random_sample(rng), head,
                                   small_hyperparams(), classes=[1])
        assert not heatmaps[1].any()


class TestUpsample:
    """Tests for upsampling heatmaps."""

    def test_constant(self):
        """Test a constant map stays constant."""
        up = upsample_heatmap(np.full((3, 5), 0.25), 17, 11)
        assert up.shape == (11, 17)
        assert np.allclose(up, 0.25)

    def test_single_cell(self):
        """Test a 1 x 1 map fills the target."""
        assert np.allclose(upsample_heatmap([[2.0]], 9, 4), 2.0)

    def test_center(self):
        """Test the center of a 2 x 2 to 3 x 3 resize is the corner mean."""
        h = np.array([[1.0, 2.0], [3.0, 6.0]])
        up = upsample_heatmap(h, 3, 3)
        assert up[1, 1] == pytest.approx(3.0)
        assert up[0, 0] == pytest.approx(1.0)
        assert up[2, 2] == pytest.approx(6.0)

    def test_non_negative(self):
        """Test non-negative maps stay non-negative."""
        h = np.maximum(np.random.default_rng(9).standard_normal((8, 40)), 0.0)
        up = upsample_heatmap(h, 320, 64)
        assert np.all(up >= 0.0)
        assert up.max() <= h.max() + 1e-12

    def test_smaller_target(self):
        """Test a target smaller than the map."""
        with pytest.raises(ValueError):
            upsample_heatmap(np.zeros((4, 4)), 3, 8)


class TestRendering:
    """Tests for rendering and overlays."""

    def test_render(self):
        """Test scaling by the maximum."""
        image = render_heatmap(np.array([[0.0, 1.0, 2.0]]))
        assert image.dtype == np.uint8
        assert list(image[0]) == [0, 128, 255]

    def test_render_zero(self):
        """Test an empty map renders black."""
        assert not render_heatmap(np.zeros((3, 3))).any()

    def test_overlay(self):
        """Test the heatmap drives the red channel at half opacity."""
        heat = np.full((2, 3), 255, dtype=np.uint8)
        pano = np.full((2, 3), 100, dtype=np.uint8)
        blended = overlay(heat, pano)
        assert blended.shape == (2, 3, 3)
        assert np.all(blended[..., 0] == 178)
        assert np.all(blended[..., 1:] == 50)

    def test_overlay_mismatch(self):
        """Test a heatmap of another size."""
        with pytest.raises(DimensionMismatchError):
            overlay(np.zeros((2, 3), dtype=np.uint8),
                    np.zeros((3, 3, 3), dtype=np.uint8))

    def test_predicted_classes(self):
        """Test the strict threshold."""
        assert predicted_classes([0.2, 0.6, 0.5, 0.9]) == [1, 3]


def test_planted_actors():
    """Test heatmaps peak in the planted actor's block."""
    spec = desk_spec(0, bystander_rate=0.0, allow_repeats=False)
    samples, truth = gen_miml_dataset(spec)
    train_set, _, test_set, test_truth = split_dataset(samples, truth, 128)
    hp = Hyperparams()
    head, _ = train(train_set, hp, 0, progress=False)
    heatmaps = {}
    for i, sample in enumerate(test_set[:20]):
        found = localize_sample(sample, head, hp)
        for a, heatmap in found.items():
            if sample.labels[a]:
                heatmaps[(i, a)] = heatmap
    placements = test_truth.placements[:20]
    spans = block_spans(spec.grid_w, hp.k)
    assert len(heatmaps) >= 20
    assert localization_hit_rate(heatmaps, placements, spans) >= 0.9
