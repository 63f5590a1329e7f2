"""
Calibration-free unwrapping of top-view fisheye frames into panoramas.

World-vertical lines in a top-view fisheye frame all pass through one point,
the center. The center is estimated from people's spines (the line through
their mid-shoulder and mid-hip keypoints) and the frame is then unwrapped
around it: panorama columns are angles and panorama rows are radii.

Coordinates are continuous with the image y-axis pointing down; pixel
``(i, j)`` covers ``[i, i + 1) x [j, j + 1)`` and is sampled at its center.
"""
from .utilities import (FormatError, read_json, read_mapping, write_json,
                        write_mapping, thread_count)
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from scipy import linalg
from scipy import ndimage
import itertools
import json
import numpy as np
import pathlib
import warnings

CameraFov = namedtuple("CameraFov", ["hfov_deg", "vfov_deg"])
PanoramaSpec = namedtuple("PanoramaSpec", ["width_px", "height_px"])
SpineLine = namedtuple("SpineLine", ["a", "b", "c"])
FisheyeCenter = namedtuple("FisheyeCenter", ["x_c", "y_c"])
MappingParams = namedtuple(
    "MappingParams", ["center", "radius_px", "phi_deg"], defaults=(0.0,))

#: Result of :func:`map_pixel` for a panorama pixel with no fisheye source.
OUT_OF_FRAME = None

INTERPOLATIONS = ("nearest", "bilinear")


def panorama_dims(fov, height_px):
    """
    Size a panorama so that h / w = VFoV / (2 HFoV).

    :arg fov: The camera field of view.
    :type fov: :class:`CameraFov`
    :arg int height_px: The panorama height.

    :raises FieldOfViewError: when either field of view is outside (0, 360].

    :returns: The panorama dimensions, the width rounded half up.
    :rtype: :class:`PanoramaSpec`
    """
    for name, value in zip(CameraFov._fields, fov):
        if not (0.0 < value <= 360.0):
            raise FieldOfViewError(name, value)
    if height_px < 1:
        raise ValueError(f"height_px must be >= 1 (got {height_px})")
    width = int(np.floor(height_px * 2.0 * fov.hfov_deg / fov.vfov_deg + 0.5))
    return PanoramaSpec(max(width, 1), int(height_px))


def spine_from_keypoints(mid_shoulder, mid_hip):
    """
    Build the normalised line a x + b y + c = 0 through two keypoints.

    The sign is fixed so that the first non-zero of (a, b) is positive.

    :arg mid_shoulder: The (x, y) mid-shoulder keypoint.
    :arg mid_hip: The (x, y) mid-hip keypoint.

    :raises DegenerateSpineError: when the keypoints are closer than 1e-6 px.

    :rtype: :class:`SpineLine`
    """
    p = np.asarray(mid_shoulder, dtype=np.float64)
    q = np.asarray(mid_hip, dtype=np.float64)
    dx, dy = q - p
    length = np.hypot(dx, dy)
    if not length > 1e-6:
        raise DegenerateSpineError(mid_shoulder, mid_hip)
    a, b = dy / length, -dx / length
    if a < 0.0 or (a == 0.0 and b < 0.0):
        a, b = -a, -b
    c = -(a * p[0] + b * p[1])
    # adding 0.0 turns -0.0 into 0.0
    return SpineLine(float(a) + 0.0, float(b) + 0.0, float(c) + 0.0)


def center_objective(point, spines):
    """Return the total absolute distance from `point` to every spine."""
    lines = _as_lines(spines)
    x, y = point
    return float(np.sum(np.abs(lines[:, 0] * x + lines[:, 1] * y
                               + lines[:, 2])))


def estimate_center(spines, max_iterations=100, tolerance=1e-4, eps=1e-6):
    """
    Find the point with the smallest total distance to a set of spines.

    The objective is minimised by iteratively reweighted least squares,
    started from the least-squares solution, with weights
    1 / max(distance, `eps`). The objective is piecewise linear, so the IRLS
    point is finally compared with the intersections of the spines nearest to
    it and the best of them is returned.

    Iteration stops when the center moves less than `tolerance` or the
    objective stops decreasing. Reaching `max_iterations` warns only when the
    vertex check does not improve on the IRLS point.

    :arg spines: At least two non-parallel lines.
    :type spines: list(:class:`SpineLine`)
    :arg int max_iterations: IRLS iteration cap.
    :arg float tolerance: Stop when the center moves less than this (px).
    :arg float eps: Distance floor of the IRLS weights.

    :raises UnderdeterminedCenterError: when fewer than two lines are given or
        all lines are parallel.

    :rtype: :class:`FisheyeCenter`
    """
    lines = _as_lines(spines)
    if lines.shape[0] < 2:
        raise UnderdeterminedCenterError(lines.shape[0])
    normals, offsets = lines[:, :2], -lines[:, 2]
    if np.linalg.matrix_rank(normals, tol=1e-9) < 2:
        raise UnderdeterminedCenterError(lines.shape[0], parallel=True)

    point = linalg.lstsq(normals, offsets)[0]
    value = center_objective(point, lines)
    converged = False
    for _ in range(max_iterations):
        distance = np.abs(normals @ point - offsets)
        root_weights = 1.0 / np.sqrt(np.maximum(distance, eps))
        update = linalg.lstsq(normals * root_weights[:, np.newaxis],
                              offsets * root_weights)[0]
        moved = np.hypot(*(update - point))
        update_value = center_objective(update, lines)
        if update_value > value:
            # stalled at the eps floor
            converged = True
            break
        point, value = update, update_value
        if moved < tolerance:
            converged = True
            break

    vertex = _nearest_vertex(point, lines)
    if not converged and not center_objective(vertex, lines) < value:
        warnings.warn("Center estimation exceeded {} iterations.".format(
            max_iterations))
    return FisheyeCenter(float(vertex[0]), float(vertex[1]))


def averaged_center(per_frame):
    """
    Average per-frame centers coordinate-wise.

    :raises ValueError: when `per_frame` is empty.

    :rtype: :class:`FisheyeCenter`
    """
    if len(per_frame) == 0:
        raise ValueError("at least one center is required to average")
    coords = np.array(per_frame, dtype=np.float64)
    x_c, y_c = coords.mean(axis=0)
    return FisheyeCenter(float(x_c), float(y_c))


def fisheye_radius(center, frame_w, frame_h):
    """Return the distance from `center` to the furthest frame corner."""
    corners = np.array([[0.0, 0.0], [frame_w, 0.0],
                        [0.0, frame_h], [frame_w, frame_h]])
    return float(np.max(np.hypot(corners[:, 0] - center.x_c,
                                 corners[:, 1] - center.y_c)))


def polar_coordinates(x_p, y_p, spec, params):
    """
    Map panorama coordinates to the unwrap angle and fisheye radius.

    theta = 360 x_p / w degrees and r_f = r (h - y_p) / h. Accepts scalars or
    arrays.

    :returns: (theta in degrees, r_f in pixels)
    :rtype: tuple
    """
    theta = 360.0 * np.asarray(x_p, dtype=np.float64) / spec.width_px
    r_f = params.radius_px * (spec.height_px - np.asarray(
        y_p, dtype=np.float64)) / spec.height_px
    return theta, r_f


def _fisheye_coordinates(x_p, y_p, spec, params):
    theta, r_f = polar_coordinates(x_p, y_p, spec, params)
    angle = np.deg2rad(params.phi_deg - theta)
    x_f = params.center.x_c + r_f * np.cos(angle)
    y_f = params.center.y_c - r_f * np.sin(angle)
    return x_f, y_f


def _in_frame(x_f, y_f, fisheye_dims):
    frame_w, frame_h = fisheye_dims
    return (x_f >= 0) & (x_f < frame_w) & (y_f >= 0) & (y_f < frame_h)


def map_pixel(p, spec, params, fisheye_dims):
    """
    Map a continuous panorama coordinate to its fisheye source.

    :arg p: The (x_p, y_p) panorama coordinate, 0 <= x_p <= w, 0 <= y_p <= h.
    :arg spec: The panorama dimensions.
    :type spec: :class:`PanoramaSpec`
    :arg params: Center, radius and unwrap start angle.
    :type params: :class:`MappingParams`
    :arg fisheye_dims: The (width, height) of the fisheye frame.

    :returns: (x_f, y_f), or :data:`OUT_OF_FRAME` when the source lies outside
        the fisheye frame.
    :rtype: tuple(float, float) or NoneType
    """
    x_f, y_f = _fisheye_coordinates(p[0], p[1], spec, params)
    if not _in_frame(x_f, y_f, fisheye_dims):
        return OUT_OF_FRAME
    return float(x_f), float(y_f)


class MappingTable(object):
    """
    Per-panorama-pixel lookup of fisheye source coordinates.

    `coords` is a (height, width, 2) float32 array of (x_f, y_f); out-of-frame
    pixels hold NaN in both components.
    """

    def __init__(self, spec, fisheye_dims, coords):
        """
        Create a :class:`MappingTable`.

        :arg spec: The panorama dimensions.
        :type spec: :class:`PanoramaSpec`
        :arg fisheye_dims: The (width, height) of the fisheye frame.
        :arg coords: The (height, width, 2) coordinate array.
        :type coords: :class:`numpy.ndarray`
        """
        expected = (spec.height_px, spec.width_px, 2)
        if np.shape(coords) != expected:
            raise ValueError("coords shape is wrong (expected {}, got {})"
                             .format(expected, np.shape(coords)))
        self.spec = spec
        self.fisheye_dims = (int(fisheye_dims[0]), int(fisheye_dims[1]))
        self.coords = np.asarray(coords, dtype=np.float32)
        inside = _in_frame(self.coords[..., 0], self.coords[..., 1],
                           self.fisheye_dims)
        if np.any(~inside & ~np.isnan(self.coords[..., 0])):
            raise ValueError("coords contain in-frame entries outside the "
                             "fisheye frame {}".format(self.fisheye_dims))
        self.in_frame = inside

    def __len__(self):
        return self.spec.width_px * self.spec.height_px

    def entry(self, x_p, y_p):
        """Return the table entry of pixel (x_p, y_p) or OUT_OF_FRAME."""
        if not self.in_frame[y_p, x_p]:
            return OUT_OF_FRAME
        x_f, y_f = self.coords[y_p, x_p]
        return float(x_f), float(y_f)

    def save(self, path):
        """Write the table to a mapping cache file."""
        write_mapping(path, self.coords)

    @classmethod
    def load(cls, path, fisheye_dims):
        """
        Read a table from a mapping cache file.

        :arg fisheye_dims: The (width, height) of the frames it will remap.
        """
        coords = read_mapping(path)
        height, width, _ = coords.shape
        return cls(PanoramaSpec(width, height), fisheye_dims, coords)


def build_mapping(spec, params, fisheye_dims):
    """
    Tabulate :func:`map_pixel` at every panorama pixel center.

    Entry (x_p, y_p) holds ``map_pixel((x_p + 0.5, y_p + 0.5))`` rounded to
    float32. The in-frame test is applied after rounding so a table read back
    from its float32 cache is identical.

    :rtype: :class:`MappingTable`
    """
    if params.radius_px <= 0:
        raise ValueError(f"radius_px must be > 0 (got {params.radius_px})")
    x_p = np.arange(spec.width_px, dtype=np.float64) + 0.5
    y_p = np.arange(spec.height_px, dtype=np.float64) + 0.5
    x_p, y_p = np.meshgrid(x_p, y_p)
    x_f, y_f = _fisheye_coordinates(x_p, y_p, spec, params)
    coords = np.stack([x_f, y_f], axis=-1).astype(np.float32)
    outside = ~_in_frame(coords[..., 0], coords[..., 1], fisheye_dims)
    coords[outside] = np.nan
    return MappingTable(spec, fisheye_dims, coords)


def _mapping_key(spec, params, fisheye_dims):
    return {"panorama": [int(spec.width_px), int(spec.height_px)],
            "fisheye": [int(fisheye_dims[0]), int(fisheye_dims[1])],
            "center": [float(params.center[0]), float(params.center[1])],
            "radius_px": float(params.radius_px),
            "phi_deg": float(params.phi_deg)}


def cached_mapping(path, spec, params, fisheye_dims):
    """
    Load a cached table, building and caching it when needed.

    The parameters a table was built with are kept in ``<path>.json`` next to
    it. A cache built for another panorama, center, radius, start angle or
    frame size, or one that cannot be read, is rebuilt with a warning.

    :arg path: The mapping cache file.
    :arg spec: The panorama dimensions.
    :type spec: :class:`PanoramaSpec`
    :arg params: The mapping parameters.
    :type params: :class:`MappingParams`
    :arg fisheye_dims: The (width, height) of the fisheye frame.

    :rtype: :class:`MappingTable`
    """
    path = pathlib.Path(path)
    key_path = path.with_name(path.name + ".json")
    key = _mapping_key(spec, params, fisheye_dims)
    if path.exists():
        try:
            stored = read_json(key_path)
        except (OSError, json.JSONDecodeError):
            stored = None
        if stored is None:
            reason = "its parameters are missing"
        elif stored != key:
            reason = "it was built with other parameters"
        else:
            try:
                return MappingTable.load(path, fisheye_dims)
            except (ValueError, FormatError) as error:
                reason = str(error)
        warnings.warn(f"Rebuilding {path}, {reason}.")
    table = build_mapping(spec, params, fisheye_dims)
    table.save(path)
    write_json(key_path, key)
    return table


def remap(frame, table, interp="bilinear", threads=None):
    """
    Unwrap a fisheye frame into a panorama through a lookup table.

    :arg frame: A (height, width) or (height, width, channels) uint8 image.
    :type frame: :class:`numpy.ndarray`
    :arg table: A table built for this frame size.
    :type table: :class:`MappingTable`
    :arg str interp: "bilinear" (default) or "nearest".
    :arg int threads: Worker threads; None reads ``OMNI_THREADS``. Output
        does not depend on the thread count.

    :raises DimensionMismatchError: when the frame size differs from the
        size the table was built for.

    :returns: The panorama, black where the table is out of frame.
    :rtype: :class:`numpy.ndarray`
    """
    if interp not in INTERPOLATIONS:
        raise ValueError("interp is wrong (expected one of {}, got {!r})"
                         .format(INTERPOLATIONS, interp))
    frame = np.asarray(frame, dtype=np.uint8)
    frame_w, frame_h = table.fisheye_dims
    if frame.shape[:2] != (frame_h, frame_w):
        raise DimensionMismatchError(
            (frame_h, frame_w), frame.shape[:2], "fisheye frame")
    planes = frame[..., np.newaxis] if frame.ndim == 2 else frame
    height, width = table.spec.height_px, table.spec.width_px
    out = np.zeros((height, width, planes.shape[2]), dtype=np.uint8)

    def unwrap_rows(rows):
        coords = table.coords[rows]
        inside = table.in_frame[rows]
        x_f, y_f = coords[..., 0][inside], coords[..., 1][inside]
        band = out[rows]
        if interp == "nearest":
            xi = np.minimum(np.floor(x_f).astype(np.intp), frame_w - 1)
            yi = np.minimum(np.floor(y_f).astype(np.intp), frame_h - 1)
            band[inside] = planes[yi, xi]
        else:
            # pixel centers sit at index + 0.5
            sample_at = [y_f.astype(np.float64) - 0.5,
                         x_f.astype(np.float64) - 0.5]
            for channel in range(planes.shape[2]):
                values = ndimage.map_coordinates(
                    planes[..., channel].astype(np.float64), sample_at,
                    order=1, mode="nearest")
                band[inside, channel] = np.clip(
                    np.rint(values), 0, 255).astype(np.uint8)
        out[rows] = band

    bands = np.array_split(np.arange(height), min(thread_count(threads),
                                                  max(height, 1)))
    bands = [slice(b[0], b[-1] + 1) for b in bands if len(b)]
    if len(bands) == 1:
        unwrap_rows(bands[0])
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            list(pool.map(unwrap_rows, bands))
    return out[..., 0] if frame.ndim == 2 else out


def read_keypoints(path):
    """
    Read spines from a keypoints file.

    The file is a JSON array of ``{frame, mid_shoulder: [x, y], mid_hip:
    [x, y]}`` objects. Degenerate pairs are skipped with a warning.

    :returns: A dict mapping frame index to its list of spines, in file order.
    :rtype: dict(int, list(:class:`SpineLine`))
    """
    per_frame = {}
    for record in read_json(path):
        try:
            spine = spine_from_keypoints(record["mid_shoulder"],
                                         record["mid_hip"])
        except DegenerateSpineError as error:
            warnings.warn(f"Skipping keypoints in {path}: {error}")
            continue
        per_frame.setdefault(int(record["frame"]), []).append(spine)
    return per_frame


def _as_lines(spines):
    lines = np.array([tuple(s) for s in spines], dtype=np.float64)
    return lines.reshape(-1, 3)


def _nearest_vertex(point, lines, candidates=4):
    """Return the best of `point` and the intersections of nearby lines."""
    distance = np.abs(lines[:, :2] @ point + lines[:, 2])
    nearest = np.argsort(distance, kind="stable")[:candidates]
    best, best_value = point, center_objective(point, lines)
    for i, j in itertools.combinations(nearest, 2):
        normals = lines[[i, j], :2]
        if abs(np.linalg.det(normals)) < 1e-12:
            continue
        vertex = np.linalg.solve(normals, -lines[[i, j], 2])
        value = center_objective(vertex, lines)
        if value < best_value:
            best, best_value = vertex, value
    return best


class FieldOfViewError(Exception):
    """A field of view outside (0, 360] degrees."""

    def __init__(self, name, value):
        """
        Construct the exception.

        :arg str name: The field name, hfov_deg or vfov_deg.
        :arg float value: The value given.

        :rtype: :class:`FieldOfViewError`
        """
        message = (
                f"{name} must be in (0, 360] degrees, {value} was given."
                )

        super().__init__(message)


class DegenerateSpineError(Exception):
    """Two keypoints too close to define a spine."""

    def __init__(self, mid_shoulder, mid_hip):
        """
        Construct the exception.

        :arg mid_shoulder: The mid-shoulder keypoint.
        :arg mid_hip: The mid-hip keypoint.

        :rtype: :class:`DegenerateSpineError`
        """
        message = (
                "The mid-shoulder and mid-hip keypoints must be distinct,"
                f" {tuple(mid_shoulder)} and {tuple(mid_hip)} were given."
                )

        super().__init__(message)


class UnderdeterminedCenterError(Exception):
    """The spines do not determine a center."""

    def __init__(self, nlines, parallel=False):
        """
        Construct the exception.

        :arg int nlines: The number of spines given.
        :arg bool parallel: True when the spines are all parallel.

        :rtype: :class:`UnderdeterminedCenterError`
        """
        if parallel:
            message = f"All {nlines} spines are parallel."
        else:
            message = (
                    "At least two non-parallel spines are required,"
                    f" {nlines} were given."
                    )

        super().__init__(message)


class DimensionMismatchError(Exception):
    """An image or table does not have the expected dimensions."""

    def __init__(self, expected, got, what):
        """
        Construct the exception.

        :arg expected: The expected shape.
        :arg got: The actual shape.
        :arg str what: What was being checked.

        :rtype: :class:`DimensionMismatchError`
        """
        message = (
                f"The {what} has shape {tuple(got)}, expected"
                f" {tuple(expected)}."
                )

        super().__init__(message)
