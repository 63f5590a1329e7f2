"""
Command line tools for unwrapping fisheye frames and for training, evaluating
and localizing with the action recognition head.

Average precision is the mean, over the positive samples of a class, of the
precision at each positive's rank (no interpolation). mAP averages it over
the classes that have positive samples.

Exit codes: 0 success, 2 invalid configuration, 3 unreadable or malformed
input, 4 numerical failure.
"""
from .config import (ConfigError, load_config, merge, hyperparams,
                     save_config, synth_spec, Config)
from .evalmetrics import (EmptyTruthError, localization_hit_rate, mean_ap,
                          per_class_ap, read_predictions, write_ap_table,
                          write_predictions)
from .geometry import (CameraFov, DimensionMismatchError, FieldOfViewError,
                       MappingParams, UnderdeterminedCenterError,
                       averaged_center, build_mapping, cached_mapping,
                       estimate_center, fisheye_radius, panorama_dims,
                       read_keypoints, remap, FisheyeCenter)
from .localize import (localize_sample, overlay, render_heatmap,
                       upsample_heatmap)
from .miml import (EmptyBagError, EmptyDatasetError, HyperparameterError,
                   Hyperparams, bag_scores, block_spans, load_head,
                   read_manifest, save_head, train, write_metrics)
from .synth import gen_miml_dataset, read_truth, split_dataset, write_dataset
from .utilities import (FormatError, read_image, read_json, write_array,
                        write_image, write_json)
from argparse import ArgumentParser
from collections import namedtuple
from tqdm import tqdm
import csv
import json
import numpy as np
import pathlib
import sys
import warnings

Preset = namedtuple("Preset", ["name", "overrides"])

ABLATION_FIELDS = ["preset", "head", "aggregator", "use_mask", "reg_weight",
                   "k", "r", "seed", "test_map"]

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def run_tests(args, extra):
    """Run tests from the command line."""
    argv = ['--pyargs', 'omniact'] + extra
    from pytest import cmdline
    return cmdline.main(args=argv)


def run_coverage(args, extra):
    """Run tests from the command line with a coverage report."""
    argv = ['--pyargs', '--cov=omniact'] + extra
    from pytest import cmdline
    return cmdline.main(args=argv)


def _config(args, **overrides):
    """Return the config file, if any, with the command line flags applied."""
    config = Config() if args.config is None else load_config(args.config)
    return merge(config, {"seed": args.seed, "threads": args.threads,
                          **overrides})


def _say(text):
    sys.stdout.write(text + "\n")


def _parse_center(text):
    try:
        x_c, y_c = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"--center must be x,y (got {text!r})")
    return FisheyeCenter(x_c, y_c)


def cmd_unwrap(args, extra):
    """Estimate the fisheye center and unwrap frames into panoramas."""
    config = _config(args, hfov=args.hfov, vfov=args.vfov,
                     height=args.height, phi=args.phi, interp=args.interp)
    frames = [read_image(path) for path in args.input]
    frame_h, frame_w = frames[0].shape[:2]
    for path, frame in zip(args.input, frames):
        if frame.shape[:2] != (frame_h, frame_w):
            raise DimensionMismatchError(
                (frame_h, frame_w), frame.shape[:2], f"frame {path}")
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.center is not None:
        center = _parse_center(args.center)
    else:
        if args.keypoints is None:
            raise ConfigError("--keypoints is required without --center")
        centers = []
        for frame, spines in sorted(read_keypoints(args.keypoints).items()):
            try:
                centers.append(estimate_center(spines))
            except UnderdeterminedCenterError as error:
                warnings.warn(f"Skipping frame {frame}: {error}")
        if not centers:
            raise UnderdeterminedCenterError(0)
        write_array(out / "centers.h5", "centers", np.array(centers))
        center = averaged_center(centers)

    spec = panorama_dims(CameraFov(config.hfov, config.vfov), config.height)
    radius = fisheye_radius(center, frame_w, frame_h)
    params = MappingParams(center, radius, config.phi)
    if args.table is None:
        table = build_mapping(spec, params, (frame_w, frame_h))
    else:
        table = cached_mapping(args.table, spec, params, (frame_w, frame_h))

    for path, frame in zip(args.input, frames):
        panorama = remap(frame, table, config.interp, config.threads)
        suffix = ".pgm" if panorama.ndim == 2 else ".ppm"
        write_image(out / (pathlib.Path(path).stem + "_panorama" + suffix),
                    panorama)
    _say(f"center: {center.x_c:.3f},{center.y_c:.3f}")
    _say(f"radius: {radius:.3f}")
    _say(f"panorama: {spec.width_px}x{spec.height_px}")
    return 0


def cmd_synth(args, extra):
    """Generate a synthetic train/test dataset."""
    config = _config(args)
    spec = synth_spec(config)
    samples, truth = gen_miml_dataset(spec)
    train_set, train_truth, test_set, test_truth = split_dataset(
        samples, truth, config.n_test)
    out = pathlib.Path(args.out)
    write_dataset(out, "train", train_set, train_truth, spec)
    write_dataset(out, "test", test_set, test_truth, spec)
    save_config(out / "config.json", config)
    _say(f"wrote {len(train_set)} train and {len(test_set)} test samples "
         f"to {out}")
    return 0


def _hyperparam_flags(args):
    use_mask = None if args.no_mask is None else not args.no_mask
    return {"k": args.k, "lse_sharpness": args.lse_sharpness,
            "reg_weight": args.reg_weight, "lr": args.lr,
            "momentum": args.momentum, "batch_size": args.batch_size,
            "epochs": args.epochs, "lr_halve_every": args.lr_halve_every,
            "aggregator": args.aggregator, "head": args.head,
            "use_mask": use_mask}


def cmd_train(args, extra):
    """Train a head on a manifest."""
    config = _config(args, **_hyperparam_flags(args))
    hp = hyperparams(config)
    dataset = read_manifest(args.manifest)
    head, metrics = train(dataset, hp, config.seed,
                          write_path=args.trajectory,
                          progress=not args.quiet)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_head(out / "head.otsr", head)
    write_json(out / "hyperparams.json", hp._asdict())
    write_metrics(out / "metrics.csv", metrics)
    _say("epoch  lr        loss_bce  loss_reg  train_map")
    for row in metrics:
        _say(f"{row.epoch:5d}  {row.lr:.6f}  {row.loss_bce:.6f}  "
             f"{row.loss_reg:.6f}  {row.train_map:.4f}")
    return 0


def _load_model(model_dir):
    model_dir = pathlib.Path(model_dir)
    hp = Hyperparams(**read_json(model_dir / "hyperparams.json"))
    return load_head(model_dir / "head.otsr"), hp


def _clip_names(manifest):
    return [pathlib.Path(entry["features"]).stem
            for entry in read_json(manifest)]


def cmd_eval(args, extra):
    """Compute per-class AP and mAP."""
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.predictions is not None:
        predictions = read_predictions(args.predictions)
        classes, scores, labels = (predictions.classes, predictions.scores,
                                   predictions.labels)
    else:
        if args.manifest is None or args.model is None:
            raise ConfigError("eval needs --predictions, or --manifest with "
                              "--model")
        head, hp = _load_model(args.model)
        dataset = read_manifest(args.manifest)
        scores = bag_scores(dataset, head, hp)
        labels = np.array([sample.labels for sample in dataset])
        classes = [str(a) for a in range(head.n_classes)]
        write_predictions(out / "predictions.csv", _clip_names(args.manifest),
                          classes, scores, labels)
    aps = per_class_ap(scores, labels)
    if all(ap is None for ap in aps):
        raise FormatError(args.predictions or args.manifest,
                          "no class has a positive label")
    map_value = mean_ap(aps)
    write_ap_table(out / "ap.csv", classes, aps, map_value)
    for name, ap in zip(classes, aps):
        _say(f"{name}: " + ("undefined" if ap is None else f"{ap:.4f}"))
    _say(f"mAP: {map_value:.4f}")
    return 0


def cmd_localize(args, extra):
    """Write Grad-CAM heatmaps for the samples of a manifest."""
    head, hp = _load_model(args.model)
    dataset = read_manifest(args.manifest)
    entries = read_json(args.manifest)
    names = _clip_names(args.manifest)
    indices = range(len(dataset)) if args.samples is None else args.samples
    for i in indices:
        if not 0 <= i < len(dataset):
            raise ConfigError(f"--samples {i} is not in [0, {len(dataset)})")
    for a in args.classes or []:
        if not 0 <= a < head.n_classes:
            raise ConfigError(f"--classes {a} is not in [0, {head.n_classes})")
    panorama = None if args.panorama is None else read_image(args.panorama)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    heatmaps = {}
    for i in indices:
        maps = localize_sample(dataset[i], head, hp, args.classes)
        for a, h in maps.items():
            heatmaps[(i, a)] = h
            if "frame_size" in entries[i]:
                h = upsample_heatmap(h, *entries[i]["frame_size"])
            image = render_heatmap(h)
            write_image(out / f"{names[i]}_{a}.pgm", image)
            if panorama is not None:
                write_image(out / f"{names[i]}_{a}_overlay.ppm",
                            overlay(image, panorama))
    _say(f"wrote {len(heatmaps)} heatmaps to {out}")
    if args.truth is not None:
        truth = read_truth(args.truth)
        width = dataset[0].features.shape[2]
        selected = set(indices)
        placements = [truth.placements[i] if i in selected else []
                      for i in range(len(dataset))]
        rate = localization_hit_rate(heatmaps, placements,
                                     block_spans(width, hp.k))
        _say(f"hit rate: {rate:.4f}")
    return 0


def ablation_presets(config):
    """
    Return the ablation grid.

    Heads and aggregators with the mask on and off and the sparsity weight
    at 0 and its configured value, then sweeps of the instance width and the
    LSE sharpness with everything else at the configured values.

    :rtype: list(:class:`Preset`)
    """
    variants = [("avgpool", "avgpool", "lse"), ("maxpool", "maxpool", "lse"),
                ("miml-avg", "miml", "avg"), ("miml-max", "miml", "max"),
                ("miml-lse", "miml", "lse"),
                ("miml-attention", "miml", "attention")]
    presets = []
    for name, head, aggregator in variants:
        for use_mask in (True, False):
            for reg_weight in (0.0, config.reg_weight):
                presets.append(Preset(
                    "{}-mask{}-alpha{:g}".format(
                        name, "on" if use_mask else "off", reg_weight),
                    {"head": head, "aggregator": aggregator,
                     "use_mask": use_mask, "reg_weight": reg_weight}))
    for k in (2, 4, 8, 16):
        presets.append(Preset(f"k{k}", {"k": k}))
    for r in (0.2, 0.4, 0.8, 1.6, 3.2):
        presets.append(Preset(f"r{r:g}", {"lse_sharpness": r}))
    return presets


def run_ablation(config, seeds, presets, progress=True):
    """
    Train and test every preset on every seed's synthetic dataset.

    The dataset of a seed is generated once at the configured instance width
    and shared by all presets.

    :returns: One row per preset and seed, keyed by
        :data:`ABLATION_FIELDS`.
    :rtype: list(dict)
    """
    base = hyperparams(config)
    rows = []
    runs = tqdm(total=len(seeds) * len(presets), desc="Ablation",
                unit="run", disable=not progress)
    for seed in seeds:
        samples, truth = gen_miml_dataset(synth_spec(config, seed=seed))
        train_set, _, test_set, _ = split_dataset(samples, truth,
                                                  config.n_test)
        for preset in presets:
            hp = base.replace(**preset.overrides)
            head, _ = train(train_set, hp, seed, progress=False)
            scores = bag_scores(test_set, head, hp)
            labels = np.array([sample.labels for sample in test_set])
            test_map = mean_ap(per_class_ap(scores, labels, warn=False))
            rows.append({"preset": preset.name, "head": hp.head,
                         "aggregator": hp.aggregator,
                         "use_mask": hp.use_mask,
                         "reg_weight": hp.reg_weight, "k": hp.k,
                         "r": hp.lse_sharpness, "seed": seed,
                         "test_map": repr(float(test_map))})
            runs.update()
    runs.close()
    return rows


def cmd_ablate(args, extra):
    """Run the ablation grid and write a summary CSV."""
    config = _config(args, epochs=args.epochs)
    presets = ablation_presets(config)
    if args.presets is not None:
        known = {preset.name for preset in presets}
        unknown = sorted(set(args.presets) - known)
        if unknown:
            raise ConfigError("unknown presets {}".format(", ".join(unknown)))
        presets = [p for p in presets if p.name in args.presets]
    seeds = [config.seed] if args.seeds is None else args.seeds
    rows = run_ablation(config, seeds, presets, progress=not args.quiet)
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=ABLATION_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        _say(f"{row['preset']:>28s}  seed {row['seed']}  "
             f"mAP {float(row['test_map']):.4f}")
    return 0


def _common(parser):
    parser.add_argument("--config", default=None,
                        help="JSON configuration file, flags override it")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads, 0 for one per CPU (default: "
                        "OMNI_THREADS)")
    parser.add_argument("--quiet", action="store_true",
                        help="hide progress bars")


def _hyperparam_options(parser):
    parser.add_argument("--k", type=int, default=None, help="instance width")
    parser.add_argument("--lse-sharpness", type=float, default=None)
    parser.add_argument("--reg-weight", type=float, default=None)
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--momentum", type=float, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--lr-halve-every", type=int, default=None)
    parser.add_argument("--aggregator", default=None,
                        choices=["avg", "max", "lse", "attention"])
    parser.add_argument("--head", default=None,
                        choices=["miml", "avgpool", "maxpool"])
    parser.add_argument("--no-mask", action="store_const", const=True,
                        default=None, help="ignore the person masks")


def build_parser():
    """Return the argument parser."""
    parser = ArgumentParser(description=__doc__, add_help=False)
    parser.add_argument(
        "-h", "--help", action="store_true", default=False, dest="help",
        help="show this help message and exit"
    )
    subparsers = parser.add_subparsers(help='sub-command help')

    unwrap = subparsers.add_parser(
        'unwrap', help='Unwrap fisheye frames into panoramas')
    _common(unwrap)
    unwrap.add_argument("--input", nargs="+", required=True,
                        help="fisheye PGM/PPM frames")
    unwrap.add_argument("--keypoints", default=None,
                        help="JSON keypoints of the frames")
    unwrap.add_argument("--center", default=None,
                        help="x,y fisheye center, skips estimation")
    unwrap.add_argument("--height", type=int, default=None)
    unwrap.add_argument("--hfov", type=float, default=None)
    unwrap.add_argument("--vfov", type=float, default=None)
    unwrap.add_argument("--phi", type=float, default=None,
                        help="unwrap start angle in degrees")
    unwrap.add_argument("--interp", default=None,
                        choices=["nearest", "bilinear"])
    unwrap.add_argument("--table", default=None,
                        help="mapping table cache file")
    unwrap.add_argument("--out", required=True)
    unwrap.set_defaults(func=cmd_unwrap)

    synth = subparsers.add_parser(
        'synth', help='Generate a synthetic dataset')
    _common(synth)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    train_cmd = subparsers.add_parser('train', help='Train a head')
    _common(train_cmd)
    _hyperparam_options(train_cmd)
    train_cmd.add_argument("--manifest", required=True)
    train_cmd.add_argument("--trajectory", default=None,
                           help="HDF5 file for per-epoch parameters")
    train_cmd.add_argument("--out", required=True)
    train_cmd.set_defaults(func=cmd_train)

    evaluate = subparsers.add_parser(
        'eval', help='Per-class AP (precision at each positive) and mAP')
    _common(evaluate)
    evaluate.add_argument("--manifest", default=None)
    evaluate.add_argument("--model", default=None,
                          help="directory written by train")
    evaluate.add_argument("--predictions", default=None,
                          help="CSV of sample_id,class,score,label")
    evaluate.add_argument("--out", required=True)
    evaluate.set_defaults(func=cmd_eval)

    localize = subparsers.add_parser(
        'localize', help='Write Grad-CAM heatmaps')
    _common(localize)
    localize.add_argument("--manifest", required=True)
    localize.add_argument("--model", required=True,
                          help="directory written by train")
    localize.add_argument("--samples", type=int, nargs="+", default=None)
    localize.add_argument("--classes", type=int, nargs="+", default=None,
                          help="classes to localize (default: predicted)")
    localize.add_argument("--panorama", default=None,
                          help="panorama to overlay the heatmaps on")
    localize.add_argument("--truth", default=None,
                          help="planted truth JSON, reports the hit rate")
    localize.add_argument("--out", required=True)
    localize.set_defaults(func=cmd_localize)

    ablate = subparsers.add_parser('ablate', help='Run the ablation grid')
    _common(ablate)
    ablate.add_argument("--seeds", type=int, nargs="+", default=None)
    ablate.add_argument("--presets", nargs="+", default=None)
    ablate.add_argument("--epochs", type=int, default=None)
    ablate.add_argument("--out", required=True, help="summary CSV")
    ablate.set_defaults(func=cmd_ablate)

    tests = subparsers.add_parser(
        'test', help='Run entire omniact test-suite',
        add_help=False
    )
    tests.set_defaults(func=run_tests)

    coverage = subparsers.add_parser(
        'coverage', help='Run entire omniact test-suite with coverage report',
        add_help=False
    )
    coverage.set_defaults(func=run_coverage)
    return parser


def main(argv=None):
    """Script for running omniact tasks."""
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    if len(argv) == 0 or argv[0] in ['-h', '--help']:
        parser.print_help()
        return 0

    args, extra = parser.parse_known_args(argv)
    if extra and args.func not in (run_tests, run_coverage):
        parser.error("unrecognized arguments: {}".format(" ".join(extra)))
    try:
        return args.func(args, extra)
    except (ConfigError, HyperparameterError, FieldOfViewError) as error:
        code, message = EXIT_CONFIG, error
    except (UnderdeterminedCenterError, EmptyBagError,
            FloatingPointError) as error:
        code, message = EXIT_NUMERIC, error
    except (OSError, FormatError, DimensionMismatchError, EmptyDatasetError,
            EmptyTruthError, json.JSONDecodeError, KeyError) as error:
        code, message = EXIT_IO, error
    except ValueError as error:
        # settings rejected by the library functions
        code, message = EXIT_CONFIG, error
    sys.stderr.write(f"omniact: error: {message}\n")
    return code


if __name__ == '__main__':
    sys.exit(main())
