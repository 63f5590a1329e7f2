"""Clip-level person masks and their application to feature maps."""
from .utilities import read_json, write_json
from collections import namedtuple
import numpy as np
import warnings

BoundingBox = namedtuple(
    "BoundingBox", ["x0", "y0", "x1", "y1", "frame_index"], defaults=(0,))


def clip_mask(boxes, frame_w, frame_h):
    """
    Max-pool the person boxes of every frame in a clip into one mask.

    :arg boxes: Boxes from any frame of the clip, half-open in pixels. The
        list may be empty.
    :type boxes: list(:class:`BoundingBox`)
    :arg int frame_w: The frame width.
    :arg int frame_h: The frame height.

    :raises BoundingBoxError: when a box is empty or leaves the frame.

    :returns: A (frame_h, frame_w) boolean mask, True where any box covers.
    :rtype: :class:`numpy.ndarray`
    """
    mask = np.zeros((frame_h, frame_w), dtype=bool)
    for box in boxes:
        box = BoundingBox(*box)
        if not (0 <= box.x0 < box.x1 <= frame_w
                and 0 <= box.y0 < box.y1 <= frame_h):
            raise BoundingBoxError(box, frame_w, frame_h)
        mask[box.y0:box.y1, box.x0:box.x1] = True
    return mask


def mask_from_boxes(boxes, frame_w, frame_h, target_w, target_h):
    """Return the feature-resolution mask of a clip's boxes."""
    if len(boxes) == 0:
        warnings.warn("No person boxes in the clip, the mask is empty.")
    return downsample_mask(clip_mask(boxes, frame_w, frame_h),
                           target_w, target_h)


def _pool_axis(mask, target, axis):
    size = mask.shape[axis]
    if target <= size:
        # target cell t owns the source cells s with floor(s t / size) == t
        starts = (np.arange(target) * size + target - 1) // target
        pooled = np.maximum.reduceat(mask.astype(np.uint8), starts, axis=axis)
        return pooled.astype(bool)
    sources = np.arange(target) * size // target
    return np.take(mask, sources, axis=axis)


def downsample_mask(mask, target_w, target_h):
    """
    Resize a binary mask with the any-coverage rule.

    A target cell is set when its pre-image rectangle in the source holds at
    least one set cell. Source cell s belongs to target cell
    floor(s * target / source) along each axis.

    :arg mask: A (height, width) boolean mask.
    :type mask: :class:`numpy.ndarray`
    :arg int target_w: The target width, at least 1.
    :arg int target_h: The target height, at least 1.

    :returns: A (target_h, target_w) boolean mask.
    :rtype: :class:`numpy.ndarray`
    """
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1 (got {}x{})".format(
            target_w, target_h))
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask shape is wrong, and must be (height, width) "
                         "(got {})".format(mask.shape))
    return _pool_axis(_pool_axis(mask, target_h, 0), target_w, 1)


def apply_mask(f, m):
    """
    Zero the features outside the mask.

    :arg f: A (channels, height, width) feature map.
    :type f: :class:`numpy.ndarray`
    :arg m: A (height, width) binary mask.
    :type m: :class:`numpy.ndarray`

    :raises MaskShapeError: when the mask and feature map sizes differ.

    :rtype: :class:`numpy.ndarray`
    """
    f = np.asarray(f, dtype=np.float64)
    m = np.asarray(m)
    if f.ndim != 3:
        raise ValueError("feature map shape is wrong, and must be (channels, "
                         "height, width) (got {})".format(f.shape))
    if m.shape != f.shape[1:]:
        raise MaskShapeError(m.shape, f.shape[1:])
    return f * m.astype(np.float64)[np.newaxis]


def read_boxes(path):
    """
    Read a clip's boxes file.

    The file is a JSON array of ``{frame, boxes: [[x0, y0, x1, y1], ...]}``.

    :rtype: list(:class:`BoundingBox`)
    """
    boxes = []
    for record in read_json(path):
        frame = int(record["frame"])
        for x0, y0, x1, y1 in record["boxes"]:
            boxes.append(BoundingBox(int(x0), int(y0), int(x1), int(y1),
                                     frame))
    return boxes


def write_boxes(path, boxes):
    """Write boxes in the format read by :func:`read_boxes`."""
    per_frame = {}
    for box in boxes:
        per_frame.setdefault(int(box.frame_index), []).append(
            [int(box.x0), int(box.y0), int(box.x1), int(box.y1)])
    write_json(path, [{"frame": frame, "boxes": per_frame[frame]}
                      for frame in sorted(per_frame)])


class BoundingBoxError(Exception):
    """A bounding box that is empty or outside the frame."""

    def __init__(self, box, frame_w, frame_h):
        """
        Construct the exception.

        :arg box: The offending box.
        :type box: :class:`BoundingBox`
        :arg int frame_w: The frame width.
        :arg int frame_h: The frame height.

        :rtype: :class:`BoundingBoxError`
        """
        message = (
                f"The box ({box.x0}, {box.y0}, {box.x1}, {box.y1}) of frame"
                f" {box.frame_index} is empty or outside the"
                f" {frame_w}x{frame_h} frame."
                )

        super().__init__(message)


class MaskShapeError(Exception):
    """A mask whose size differs from the feature map it is applied to."""

    def __init__(self, mask_shape, feature_shape):
        """
        Construct the exception.

        :arg tuple mask_shape: The (height, width) of the mask.
        :arg tuple feature_shape: The (height, width) of the feature map.

        :rtype: :class:`MaskShapeError`
        """
        message = (
                f"The mask has shape {tuple(mask_shape)} but the feature map"
                f" is {tuple(feature_shape)}."
                )

        super().__init__(message)
