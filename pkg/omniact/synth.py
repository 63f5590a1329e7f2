"""
Synthetic data.

Two generators: fisheye frames with radial rays for the geometry code, and
MIML datasets with actors planted in known instance blocks for the learning
code. Everything is drawn from one seeded generator per call so a seed
regenerates the same data bit for bit.
"""
from .miml import TrainSample, block_spans, read_manifest, write_manifest
from .regionmask import BoundingBox, clip_mask, downsample_mask, write_boxes
from .utilities import read_json, write_json, write_tensor
from collections import namedtuple
import numpy as np
import pathlib

SynthSpec = namedtuple(
    "SynthSpec",
    ["n_samples", "n_classes", "n_instances_max", "feat_dim", "grid_h",
     "grid_w", "noise_sigma", "signal_gain", "max_concurrent_actions", "seed",
     "mean_concurrent_actions", "gain_jitter", "bystander_rate",
     "clutter_rate", "frame_scale", "n_frames", "detection_dropout",
     "block_width", "allow_repeats"],
    defaults=(512, 6, None, 64, 8, 40, 0.3, 1.0, None, 0, 4.0, 0.5, 0.5, 0.0,
              8, 16, 0.25, 8, True))
SynthSpec.__doc__ = """
Settings of a synthetic MIML dataset.

`n_instances_max` caps the people (actors and bystanders) per sample and
`max_concurrent_actions` the actors; None means the number of blocks and
min(7, n_classes) respectively. `block_width` is the instance width the
actors are planted at.
"""

PlantedTruth = namedtuple(
    "PlantedTruth", ["placements", "bystanders", "clutter", "boxes"])
PlantedTruth.__doc__ = """
Per-sample ground truth of a synthetic dataset.

`placements` lists (block, class) actors, `bystanders` (block, class, class)
people whose appearance mixes two classes while performing none,
`clutter` (block, class) background patterns outside any person and `boxes`
the person boxes of every frame.
"""

FisheyeTruth = namedtuple("FisheyeTruth", ["center", "rays"])

#: Samples held out for testing by :func:`desk_spec` datasets.
DESK_TEST_SAMPLES = 128


def desk_spec(seed=0, **overrides):
    """
    Return the desk-scale dataset settings.

    Six classes, 64 features, an 8 x 40 grid split into five blocks of
    width 8, noise 0.3 and 512 training plus :data:`DESK_TEST_SAMPLES` test
    samples. Every person in a desk clip is acting, so there are no
    bystanders.

    :rtype: :class:`SynthSpec`
    """
    spec = SynthSpec(
        n_samples=512 + DESK_TEST_SAMPLES, n_classes=6, feat_dim=64, grid_h=8,
        grid_w=40, noise_sigma=0.3, signal_gain=1.0, seed=seed,
        mean_concurrent_actions=2.0, bystander_rate=0.0)
    return spec._replace(**overrides)


def _check_spec(spec):
    if spec.max_concurrent_actions is not None and not (
            1 <= spec.max_concurrent_actions <= spec.n_classes):
        raise ValueError("max_concurrent_actions must be in [1, n_classes] "
                         "(got {})".format(spec.max_concurrent_actions))
    for name in ("noise_sigma", "signal_gain", "mean_concurrent_actions"):
        value = getattr(spec, name)
        if value < 0:
            raise ValueError(f"{name} must be >= 0 (got {value})")
    for name in ("bystander_rate", "clutter_rate", "detection_dropout",
                 "gain_jitter"):
        if not 0 <= getattr(spec, name) <= 1:
            raise ValueError(
                f"{name} must be in [0, 1] (got {getattr(spec, name)})")


def signatures(rng, n_classes, feat_dim):
    """
    Draw one unit signature per class.

    The signatures are orthonormal when feat_dim >= n_classes.

    :returns: A (n_classes, feat_dim) array.
    :rtype: :class:`numpy.ndarray`
    """
    draws = rng.standard_normal((feat_dim, n_classes))
    if feat_dim >= n_classes:
        q, _ = np.linalg.qr(draws)
        return q.T
    return (draws / np.linalg.norm(draws, axis=0)).T


def _person_boxes(rng, span, spec):
    x0, x1 = span[0] * spec.frame_scale, span[1] * spec.frame_scale
    y1 = spec.grid_h * spec.frame_scale
    seen = rng.random(spec.n_frames) >= spec.detection_dropout
    if not seen.any():
        seen[rng.integers(spec.n_frames)] = True
    return [BoundingBox(x0, 0, x1, y1, int(frame))
            for frame in np.flatnonzero(seen)]


def gen_miml_dataset(spec):
    """
    Generate a synthetic MIML dataset with planted actors.

    Each class owns a fixed unit signature. An actor of class c in block j
    adds gain * u_c to every cell of the block's columns, with the gain drawn
    from signal_gain * U(1 - gain_jitter, 1 + gain_jitter). Gaussian noise of
    `noise_sigma` covers the whole map. The bag label is the union of the
    actors' classes and sample i always holds class i mod C. The mask of a
    sample is built from the person boxes of its frames.

    :arg spec: The settings.
    :type spec: :class:`SynthSpec`

    :returns: The samples and their ground truth.
    :rtype: tuple(list(:class:`omniact.miml.TrainSample`),
        :class:`PlantedTruth`)
    """
    _check_spec(spec)
    rng = np.random.default_rng(spec.seed)
    n_classes, feat_dim = spec.n_classes, spec.feat_dim
    spans = block_spans(spec.grid_w, spec.block_width)
    n_blocks = len(spans)
    max_actions = spec.max_concurrent_actions
    if max_actions is None:
        max_actions = min(7, n_classes)
    max_people = n_blocks if spec.n_instances_max is None else min(
        spec.n_instances_max, n_blocks)
    actor_cap = min(max_actions, max_people)
    if not spec.allow_repeats:
        actor_cap = min(actor_cap, n_classes)
    u = signatures(rng, n_classes, feat_dim)
    frame_w = spec.grid_w * spec.frame_scale
    frame_h = spec.grid_h * spec.frame_scale

    samples = []
    truth = PlantedTruth([], [], [], [])
    for i in range(spec.n_samples):
        features = spec.noise_sigma * rng.standard_normal(
            (feat_dim, spec.grid_h, spec.grid_w))
        labels = np.zeros(n_classes, dtype=np.int64)
        order = rng.permutation(n_blocks)
        n_actors = 0
        if spec.signal_gain > 0 and actor_cap > 0:
            n_actors = int(np.clip(rng.poisson(spec.mean_concurrent_actions),
                                   1, actor_cap))
        classes = []
        if n_actors:
            first = i % n_classes
            if spec.allow_repeats:
                rest = rng.integers(n_classes, size=n_actors - 1)
            else:
                others = [c for c in range(n_classes) if c != first]
                rest = rng.choice(others, size=n_actors - 1, replace=False)
            classes = [first] + [int(c) for c in rest]

        placements, bystanders, clutter, boxes = [], [], [], []
        for block, c in zip(order[:n_actors], classes):
            start, stop = spans[block]
            gain = spec.signal_gain * rng.uniform(
                1 - spec.gain_jitter, 1 + spec.gain_jitter)
            features[:, :, start:stop] += gain * u[c][:, None, None]
            labels[c] = 1
            placements.append((int(block), c))
            boxes.extend(_person_boxes(rng, spans[block], spec))
        people = n_actors
        for block in order[n_actors:]:
            start, stop = spans[block]
            if (spec.signal_gain > 0 and people < max_people
                    and rng.random() < spec.bystander_rate):
                pair = rng.choice(n_classes, size=2, replace=False)
                gain = spec.signal_gain * rng.uniform(
                    1 - spec.gain_jitter, 1 + spec.gain_jitter)
                look = (u[pair[0]] + u[pair[1]]) / np.sqrt(2.0)
                features[:, :, start:stop] += gain * look[:, None, None]
                bystanders.append((int(block), int(pair[0]), int(pair[1])))
                boxes.extend(_person_boxes(rng, spans[block], spec))
                people += 1
            elif rng.random() < spec.clutter_rate:
                c = int(rng.integers(n_classes))
                features[:, :, start:stop] += (
                    spec.signal_gain * u[c][:, None, None])
                clutter.append((int(block), c))

        mask = downsample_mask(clip_mask(boxes, frame_w, frame_h),
                               spec.grid_w, spec.grid_h)
        samples.append(TrainSample(features, labels, mask))
        truth.placements.append(placements)
        truth.bystanders.append(bystanders)
        truth.clutter.append(clutter)
        truth.boxes.append(boxes)
    return samples, truth


def split_dataset(samples, truth, n_test):
    """
    Hold out the last `n_test` samples.

    :returns: (train samples, train truth, test samples, test truth)
    """
    if not 0 <= n_test <= len(samples):
        raise ValueError("n_test must be in [0, {}] (got {})".format(
            len(samples), n_test))
    cut = len(samples) - n_test
    head = PlantedTruth(*(field[:cut] for field in truth))
    tail = PlantedTruth(*(field[cut:] for field in truth))
    return samples[:cut], head, samples[cut:], tail


def write_dataset(out_dir, name, samples, truth, spec):
    """
    Write a dataset as tensor files, boxes files, a manifest and truth.

    Files are ``<name>_<i>.otsr`` and ``<name>_<i>_boxes.json`` for every
    sample, the manifest ``<name>.json`` and the ground truth
    ``<name>_truth.json``.

    :returns: The manifest path.
    :rtype: :class:`pathlib.Path`
    """
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame_size = [spec.grid_w * spec.frame_scale,
                  spec.grid_h * spec.frame_scale]
    entries = []
    for i, sample in enumerate(samples):
        features = f"{name}_{i:05d}.otsr"
        boxes = f"{name}_{i:05d}_boxes.json"
        write_tensor(out_dir / features, sample.features)
        write_boxes(out_dir / boxes, truth.boxes[i])
        entries.append({"features": features, "boxes": boxes,
                        "frame_size": frame_size,
                        "labels": [int(v) for v in sample.labels]})
    manifest = out_dir / f"{name}.json"
    write_manifest(manifest, entries)
    write_json(out_dir / f"{name}_truth.json", [
        {"placements": [list(p) for p in truth.placements[i]],
         "bystanders": [list(b) for b in truth.bystanders[i]],
         "clutter": [list(c) for c in truth.clutter[i]]}
        for i in range(len(samples))])
    return manifest


def read_dataset(manifest):
    """
    Read a dataset written by :func:`write_dataset`.

    Features are stored as float32 so they differ from the generated arrays
    by rounding; masks are rebuilt from the boxes files.

    :returns: The samples and their truth, boxes omitted.
    :rtype: tuple(list(:class:`omniact.miml.TrainSample`),
        :class:`PlantedTruth`)
    """
    manifest = pathlib.Path(manifest)
    samples = read_manifest(manifest)
    truth = read_truth(manifest.with_name(manifest.stem + "_truth.json"))
    return samples, truth


def read_truth(path):
    """Read a ground truth file written by :func:`write_dataset`."""
    records = read_json(path)
    return PlantedTruth(
        [[tuple(p) for p in r["placements"]] for r in records],
        [[tuple(b) for b in r["bystanders"]] for r in records],
        [[tuple(c) for c in r["clutter"]] for r in records],
        [[] for _ in records])


def gen_fisheye(frame_size, center, rays, thickness=1.0):
    """
    Render white radial rays on a black fisheye frame.

    A ray at angle beta (degrees) leaves the center along
    (cos beta, -sin beta) in image coordinates, which the unwrap maps to
    panorama column (phi - beta) / 360 * w. A pixel is white when its center
    lies on the ray's side of the center and within `thickness` / 2 of it.

    :arg frame_size: The (width, height) of the frame.
    :arg center: The (x, y) ray origin.
    :arg rays: Ray angles in degrees.
    :arg float thickness: The ray width in pixels.

    :returns: A (height, width) uint8 image and the ground truth.
    :rtype: tuple(:class:`numpy.ndarray`, :class:`FisheyeTruth`)
    """
    frame_w, frame_h = frame_size
    x, y = np.meshgrid(np.arange(frame_w) + 0.5, np.arange(frame_h) + 0.5)
    dx, dy = x - center[0], y - center[1]
    image = np.zeros((frame_h, frame_w), dtype=np.uint8)
    for beta in rays:
        ux, uy = np.cos(np.deg2rad(beta)), -np.sin(np.deg2rad(beta))
        along = dx * ux + dy * uy
        across = np.abs(dx * uy - dy * ux)
        image[(along >= 0) & (across <= thickness / 2.0)] = 255
    return image, FisheyeTruth(tuple(center), list(rays))


def gen_spines(center, n, rng, jitter=0.0, inner=10.0, outer=100.0):
    """
    Draw keypoint pairs of people standing around a fisheye center.

    Every spine is radial: its mid-shoulder and mid-hip keypoints lie on a
    ray from `center` at random angle, between radii `inner` and `outer`.
    Gaussian `jitter` (px) is added to every keypoint coordinate.

    :returns: n (mid_shoulder, mid_hip) pairs.
    :rtype: list(tuple)
    """
    if outer - inner < 20.0:
        raise ValueError("outer - inner must be >= 20 px (got {})".format(
            outer - inner))
    pairs = []
    for beta in rng.uniform(0.0, 2.0 * np.pi, size=n):
        direction = np.array([np.cos(beta), -np.sin(beta)])
        near = rng.uniform(inner, inner + 0.3 * (outer - inner))
        far = rng.uniform(near + 0.5 * (outer - near), outer)
        shoulder = np.asarray(center) + near * direction
        hip = np.asarray(center) + far * direction
        if jitter > 0:
            shoulder = shoulder + rng.normal(0.0, jitter, size=2)
            hip = hip + rng.normal(0.0, jitter, size=2)
        pairs.append((tuple(shoulder), tuple(hip)))
    return pairs
