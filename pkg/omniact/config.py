"""Run configuration shared by the command line tools."""
from .miml import Hyperparams
from .synth import desk_spec
from .utilities import read_json, write_json
from collections import namedtuple
import json

DEFAULTS = {
    # recognition head
    **Hyperparams()._asdict(),
    # unwrapping
    "hfov": 360.0,
    "vfov": 235.0,
    "height": 800,
    "phi": 0.0,
    "interp": "bilinear",
    # synthetic data
    "n_classes": 6,
    "feat_dim": 64,
    "grid_h": 8,
    "grid_w": 40,
    "noise_sigma": 0.3,
    "signal_gain": 1.0,
    "n_train": 512,
    "n_test": 128,
    "mean_concurrent_actions": 2.0,
    "gain_jitter": 0.5,
    "bystander_rate": 0.0,
    "clutter_rate": 0.0,
    "allow_repeats": True,
    # run
    "seed": 0,
    "threads": None,
    }

Config = namedtuple("Config", list(DEFAULTS), defaults=list(DEFAULTS.values()))


def load_config(path):
    """
    Read a JSON configuration, missing keys taking their defaults.

    :raises ConfigError: when the file is not a JSON object or has unknown
        keys.

    :rtype: :class:`Config`
    """
    try:
        document = read_json(path)
    except json.JSONDecodeError as error:
        raise ConfigError(f"not valid JSON ({error})", path)
    if not isinstance(document, dict):
        raise ConfigError("the top level must be an object", path)
    return merge(Config(), document, path=path)


def merge(config, overrides, path=None):
    """
    Apply overrides to a configuration; None values are ignored.

    :raises ConfigError: on unknown keys.

    :rtype: :class:`Config`
    """
    unknown = sorted(set(overrides) - set(Config._fields))
    if unknown:
        raise ConfigError("unknown keys {}".format(", ".join(unknown)), path)
    given = {key: value for key, value in overrides.items()
             if value is not None}
    return config._replace(**given)


def save_config(path, config):
    """Write a configuration as JSON."""
    write_json(path, config._asdict())


def hyperparams(config):
    """Return the validated :class:`omniact.miml.Hyperparams` of a config."""
    return Hyperparams(**{field: getattr(config, field)
                          for field in Hyperparams._fields})


def synth_spec(config, seed=None):
    """
    Return the dataset settings of a config.

    Train and test samples come from one generator run.

    :rtype: :class:`omniact.synth.SynthSpec`
    """
    return desk_spec(
        config.seed if seed is None else seed,
        n_samples=config.n_train + config.n_test,
        n_classes=config.n_classes, feat_dim=config.feat_dim,
        grid_h=config.grid_h, grid_w=config.grid_w,
        noise_sigma=config.noise_sigma, signal_gain=config.signal_gain,
        mean_concurrent_actions=config.mean_concurrent_actions,
        gain_jitter=config.gain_jitter, bystander_rate=config.bystander_rate,
        clutter_rate=config.clutter_rate, allow_repeats=config.allow_repeats,
        block_width=config.k)


class ConfigError(Exception):
    """An unreadable or invalid configuration."""

    def __init__(self, reason, path=None):
        """
        Construct the exception.

        :arg str reason: What is wrong.
        :arg path: The configuration file, if any.

        :rtype: :class:`ConfigError`
        """
        where = "" if path is None else f" in {path}"
        message = f"Invalid configuration{where}: {reason}."

        super().__init__(message)
