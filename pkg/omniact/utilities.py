"""File formats and helpers that are unrelated to action recognition."""
from PIL import Image
import h5py
import json
import numpy as np
import os
import pathlib
import warnings

TENSOR_MAGIC = b"OTSR"
MAPPING_MAGIC = b"OMAP"
FORMAT_VERSION = 1

_U32 = np.dtype("<u4")
_F32 = np.dtype("<f4")


def write_array(write_path, dataset, array):
    """
    Write a :class:`numpy.ndarray` to a HDF5 file.

    An existing dataset with the same name is replaced, so a trajectory file
    can be rewritten by a second run with the same settings.

    :arg write_path: The path to which the HDF5 file is written.
    :type write_path: path-like or str
    :arg str dataset: The name of the dataset stored in the HDF5 file.
    :arg array: The array to be written to file.
    :type array: :class:`numpy.ndarray`

    :returns: None
    :rtype: NoneType
    """
    with h5py.File(write_path, 'a') as hf:
        if dataset in hf:
            del hf[dataset]
        hf.create_dataset(dataset, data=array)


def read_array(read_path, dataset):
    """
    Read a :class:`numpy.ndarray` from a HDF5 file.

    :arg read_path: The path of the HDF5 file.
    :type read_path: path-like or str
    :arg str dataset: The name of the dataset stored in the HDF5 file.

    :returns: The stored array, or None (with a warning) when either the file
        or the dataset does not exist.
    :rtype: :class:`numpy.ndarray` or NoneType
    """
    try:
        with h5py.File(read_path, 'r') as hf:
            if dataset not in hf:
                warnings.warn(
                    "The {} array does not appear to exist in the file "
                    "{}.".format(dataset, read_path))
                return None
            return hf[dataset][:]
    except (IOError, OSError):
        warnings.warn(
            "The {} file does not appear to exist yet.".format(read_path))
        return None


def list_arrays(read_path):
    """Return the sorted dataset names stored in a HDF5 file."""
    with h5py.File(read_path, 'r') as hf:
        return sorted(hf.keys())


def write_tensor(path, array):
    """
    Write an array as a little-endian float32 tensor file.

    The layout is the magic ``OTSR``, u32 version, u32 ndim, ndim u32 dims
    and then the C-ordered float32 payload.

    :arg path: Destination file.
    :type path: path-like or str
    :arg array: The array to store. Values are converted to float32.
    :type array: :class:`numpy.ndarray`

    :returns: None
    :rtype: NoneType
    """
    array = np.ascontiguousarray(array, dtype=_F32)
    header = np.array([FORMAT_VERSION, array.ndim, *array.shape], dtype=_U32)
    with open(path, 'wb') as f:
        f.write(TENSOR_MAGIC)
        f.write(header.tobytes())
        f.write(array.tobytes())


def read_tensor(path):
    """
    Read a tensor file written by :func:`write_tensor`.

    :arg path: Source file.
    :type path: path-like or str

    :raises FormatError: on a bad magic, version or payload size.

    :returns: The tensor as a float64 array.
    :rtype: :class:`numpy.ndarray`
    """
    data = pathlib.Path(path).read_bytes()
    _check_magic(path, data, TENSOR_MAGIC)
    if len(data) < 12:
        raise FormatError(path, "truncated header")
    version, ndim = np.frombuffer(data, dtype=_U32, count=2, offset=4)
    if version != FORMAT_VERSION:
        raise FormatError(path, f"unsupported version {version}")
    offset = 12 + 4 * int(ndim)
    if len(data) < offset:
        raise FormatError(path, "truncated dimensions")
    dims = tuple(int(d) for d in np.frombuffer(
        data, dtype=_U32, count=int(ndim), offset=12))
    count = int(np.prod(dims, dtype=np.int64))
    if len(data) - offset != 4 * count:
        raise FormatError(
            path, "payload holds {} bytes (expected {})".format(
                len(data) - offset, 4 * count))
    payload = np.frombuffer(data, dtype=_F32, count=count, offset=offset)
    return payload.reshape(dims).astype(np.float64)


def write_mapping(path, coords):
    """
    Write a panorama-to-fisheye lookup table.

    The layout is the magic ``OMAP``, u32 version, u32 width, u32 height and
    then width*height records of two float32 values (x_f, y_f), row-major over
    the panorama. Out-of-frame records are (NaN, NaN).

    :arg path: Destination file.
    :type path: path-like or str
    :arg coords: A (height, width, 2) array of fisheye coordinates.
    :type coords: :class:`numpy.ndarray`

    :returns: None
    :rtype: NoneType
    """
    coords = np.ascontiguousarray(coords, dtype=_F32)
    if coords.ndim != 3 or coords.shape[2] != 2:
        raise ValueError("coords shape is wrong, and must be (height, width,"
                         " 2) (got {})".format(coords.shape))
    height, width, _ = coords.shape
    header = np.array([FORMAT_VERSION, width, height], dtype=_U32)
    with open(path, 'wb') as f:
        f.write(MAPPING_MAGIC)
        f.write(header.tobytes())
        f.write(coords.tobytes())


def read_mapping(path):
    """
    Read a lookup table written by :func:`write_mapping`.

    :raises FormatError: on a bad magic, version or payload size.

    :returns: A (height, width, 2) float32 array.
    :rtype: :class:`numpy.ndarray`
    """
    data = pathlib.Path(path).read_bytes()
    _check_magic(path, data, MAPPING_MAGIC)
    if len(data) < 16:
        raise FormatError(path, "truncated header")
    version, width, height = (
        int(v) for v in np.frombuffer(data, dtype=_U32, count=3, offset=4))
    if version != FORMAT_VERSION:
        raise FormatError(path, f"unsupported version {version}")
    count = width * height * 2
    if len(data) - 16 != 4 * count:
        raise FormatError(
            path, "payload holds {} bytes (expected {})".format(
                len(data) - 16, 4 * count))
    payload = np.frombuffer(data, dtype=_F32, count=count, offset=16)
    return payload.reshape(height, width, 2).astype(np.float32)


def read_image(path):
    """
    Read an 8-bit PGM (P5) or PPM (P6) image.

    :returns: A (height, width) uint8 array for grayscale images, or a
        (height, width, 3) array for colour images.
    :rtype: :class:`numpy.ndarray`
    """
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.array(img, dtype=np.uint8)


def write_image(path, pixels):
    """
    Write a uint8 array as binary PGM (one channel) or PPM (three channels).

    The format follows the number of channels; the suffix of `path` should be
    ``.pgm`` or ``.ppm`` accordingly.
    """
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if pixels.ndim == 3 and pixels.shape[2] == 1:
        pixels = pixels[:, :, 0]
    if not (pixels.ndim == 2 or (pixels.ndim == 3 and pixels.shape[2] == 3)):
        raise ValueError("image shape is wrong (expected (h, w) or (h, w, 3),"
                         " got {})".format(pixels.shape))
    Image.fromarray(pixels).save(path, format="PPM")


def read_json(path):
    """Read a JSON document."""
    with open(path, 'r') as f:
        return json.load(f)


def write_json(path, document):
    """Write a JSON document with stable key order."""
    with open(path, 'w') as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")


def thread_count(threads=None):
    """
    Resolve the number of worker threads.

    :arg int threads: An explicit count, or None to read the ``OMNI_THREADS``
        environment variable. 0 means one thread per CPU.

    :returns: The number of threads, at least 1.
    :rtype: int
    """
    if threads is None:
        value = os.environ.get("OMNI_THREADS", "0")
        try:
            threads = int(value)
        except ValueError:
            raise ValueError("OMNI_THREADS must be an integer (got {!r})"
                             .format(value))
    if threads < 0:
        raise ValueError(f"threads must be >= 0 (got {threads})")
    if threads == 0:
        threads = os.cpu_count() or 1
    return threads


def _check_magic(path, data, magic):
    if data[:4] != magic:
        raise FormatError(
            path, "bad magic {!r} (expected {!r})".format(data[:4], magic))


class FormatError(Exception):
    """A binary file does not follow its declared layout."""

    def __init__(self, path, reason):
        """
        Construct the exception.

        :arg path: The offending file.
        :arg str reason: What is wrong with it.

        :rtype: :class:`FormatError`
        """
        message = f"{path} is not a valid file: {reason}."

        super().__init__(message)
