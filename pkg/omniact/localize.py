"""Gradient-weighted class activation maps for the recognition head."""
from .geometry import DimensionMismatchError
from .miml import (forward, instance_features, instance_features_backward,
                   predict, score_gradients)
from .regionmask import apply_mask
from collections import namedtuple
from scipy import ndimage
from scipy.special import expit
import numpy as np

ChannelWeights = namedtuple("ChannelWeights", ["weights", "pool_size"])

#: Opacity of the heatmap in :func:`overlay`.
OVERLAY_ALPHA = 0.5


def feature_gradients(sample, head, hp, a):
    """
    Compute the gradient of p^a with respect to the feature map.

    The chain runs through the sigmoid, the aggregator, the scoring layer,
    the instance pooling and the mask, so masked-out cells get zero gradient.

    :arg sample: The sample.
    :type sample: :class:`omniact.miml.TrainSample`
    :arg head: The scoring layer.
    :type head: :class:`omniact.miml.MimlHead`
    :arg hp: The hyperparameters.
    :type hp: :class:`omniact.miml.Hyperparams`
    :arg int a: The class index.

    :returns: An array shaped like the feature map.
    :rtype: :class:`numpy.ndarray`
    """
    if not 0 <= a < head.n_classes:
        raise ValueError("class index out of range (expected 0 to {}, got {})"
                         .format(head.n_classes - 1, a))
    x = instance_features(sample, hp)[np.newaxis]
    cache = forward(x, head, hp)
    p = expit(cache.bag_scores[0, a])
    g_bag = np.zeros((1, head.n_classes))
    g_bag[0, a] = p * (1.0 - p)
    g_s, g_z = score_gradients(cache, g_bag)
    g_x = g_s[0] @ head.weights
    if g_z is not None:
        g_x = g_x + g_z[0][:, np.newaxis] * head.attn_weights
    return instance_features_backward(sample, hp, g_x)


def channel_weights(grads):
    """
    Global-average-pool gradients into one weight per channel.

    :arg grads: A (D, H, W) gradient array.

    :rtype: :class:`ChannelWeights`
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.ndim != 3:
        raise ValueError("grads shape is wrong, and must be (channels, "
                         "height, width) (got {})".format(grads.shape))
    return ChannelWeights(grads.mean(axis=(1, 2)),
                          grads.shape[1] * grads.shape[2])


def gradcam(feature, weights):
    """
    Return ReLU(sum_k alpha_k A^k) at feature resolution.

    :arg feature: The (D, H, W) feature map A.
    :arg weights: The channel weights alpha.
    :type weights: :class:`ChannelWeights`

    :rtype: :class:`numpy.ndarray`
    """
    feature = np.asarray(feature, dtype=np.float64)
    alpha = np.asarray(weights.weights, dtype=np.float64)
    if feature.ndim != 3 or feature.shape[0] != alpha.shape[0]:
        raise ValueError("channel counts differ (expected {}, got {})".format(
            alpha.shape[0], feature.shape[0] if feature.ndim else None))
    return np.maximum(np.tensordot(alpha, feature, axes=1), 0.0)


def upsample_heatmap(h, frame_w, frame_h):
    """
    Bilinearly upsample a heatmap to frame resolution.

    Uses the align-corners-false convention: target pixel centers are mapped
    proportionally onto source pixel centers and clamped at the border.

    :raises ValueError: when the target is smaller than the heatmap.

    :rtype: :class:`numpy.ndarray`
    """
    h = np.asarray(h, dtype=np.float64)
    height, width = h.shape
    if frame_w < width or frame_h < height:
        raise ValueError("target {}x{} is smaller than the {}x{} heatmap"
                         .format(frame_w, frame_h, width, height))
    rows = (np.arange(frame_h) + 0.5) * height / frame_h - 0.5
    cols = (np.arange(frame_w) + 0.5) * width / frame_w - 0.5
    rows = np.clip(rows, 0, height - 1)
    cols = np.clip(cols, 0, width - 1)
    grid = np.meshgrid(rows, cols, indexing="ij")
    values = ndimage.map_coordinates(h, grid, order=1, mode="nearest")
    return np.maximum(values, 0.0)


def render_heatmap(h):
    """Scale a heatmap by its own maximum to an 8-bit grayscale image."""
    h = np.asarray(h, dtype=np.float64)
    peak = h.max() if h.size else 0.0
    if not peak > 0:
        return np.zeros(h.shape, dtype=np.uint8)
    return np.clip(np.rint(255.0 * h / peak), 0, 255).astype(np.uint8)


def overlay(heatmap_image, panorama):
    """
    Blend a rendered heatmap over a panorama.

    The heatmap drives the red channel and is blended with opacity
    :data:`OVERLAY_ALPHA`.

    :arg heatmap_image: A (h, w) uint8 image from :func:`render_heatmap`.
    :arg panorama: A (h, w) or (h, w, 3) uint8 image.

    :returns: A (h, w, 3) uint8 image.
    :rtype: :class:`numpy.ndarray`
    """
    heat = np.asarray(heatmap_image, dtype=np.float64)
    pano = np.asarray(panorama, dtype=np.float64)
    if pano.ndim == 2:
        pano = np.repeat(pano[..., np.newaxis], 3, axis=2)
    if pano.shape[:2] != heat.shape:
        raise DimensionMismatchError(pano.shape[:2], heat.shape, "heatmap")
    colour = np.zeros(pano.shape)
    colour[..., 0] = heat
    blended = (1.0 - OVERLAY_ALPHA) * pano + OVERLAY_ALPHA * colour
    return np.clip(np.rint(blended), 0, 255).astype(np.uint8)


def predicted_classes(bag_probs):
    """Return the classes with p^a > 0.5 in ascending order."""
    return [int(a) for a in np.flatnonzero(np.asarray(bag_probs) > 0.5)]


def localize_sample(sample, head, hp, classes=None):
    """
    Compute feature-resolution heatmaps of a sample.

    :arg classes: The classes to localize, or None for the predicted ones.

    :returns: Heatmaps keyed by class.
    :rtype: dict(int, :class:`numpy.ndarray`)
    """
    if classes is None:
        classes = predicted_classes(predict(sample, head, hp).bag_probs)
    feature = np.asarray(sample.features, dtype=np.float64)
    if hp.use_mask and sample.mask is not None:
        feature = apply_mask(feature, sample.mask)
    heatmaps = {}
    for a in classes:
        weights = channel_weights(feature_gradients(sample, head, hp, a))
        heatmaps[int(a)] = gradcam(feature, weights)
    return heatmaps
