"""
omniact.

Calibration-free unwrapping of top-view fisheye video into panoramas, and a
weakly supervised multi-instance multi-label action recognition head with
gradient-weighted localization.
"""
from .geometry import (CameraFov, FisheyeCenter, MappingParams, MappingTable,
                       PanoramaSpec, SpineLine, build_mapping, estimate_center,
                       panorama_dims, remap)
from .miml import Hyperparams, MimlHead, TrainSample, predict, train

__all__ = [
    "CameraFov",
    "FisheyeCenter",
    "MappingParams",
    "MappingTable",
    "PanoramaSpec",
    "SpineLine",
    "build_mapping",
    "estimate_center",
    "panorama_dims",
    "remap",
    "Hyperparams",
    "MimlHead",
    "TrainSample",
    "predict",
    "train",
    ]
