"""Shared definitions for test modules."""
from ..miml import Hyperparams, MimlHead, TrainSample
from ..synth import desk_spec, gen_miml_dataset, split_dataset
import numpy as np
import pytest


@pytest.fixture(scope="session")
def desk_datasets():
    """Desk-scale train and test splits for seeds 0 to 4."""
    splits = {}
    for seed in range(5):
        samples, truth = gen_miml_dataset(desk_spec(seed))
        splits[seed] = split_dataset(samples, truth, 128)
    return splits


def random_sample(rng, feat_dim=5, height=3, width=10, n_classes=4,
                  with_mask=True):
    """Return a random sample with at least one positive and one negative."""
    features = rng.standard_normal((feat_dim, height, width))
    labels = np.zeros(n_classes, dtype=np.int64)
    labels[rng.permutation(n_classes)[:max(1, n_classes // 2)]] = 1
    mask = None
    if with_mask:
        mask = rng.random((height, width)) < 0.7
    return TrainSample(features, labels, mask)


def random_head(rng, n_classes=4, feat_dim=5, attention=False):
    """Return a head with random non-zero parameters."""
    head = MimlHead.initialise(n_classes, feat_dim, rng, attention=attention)
    head.bias[:] = rng.normal(0.0, 0.5, size=n_classes)
    if attention:
        head.attn_bias[:] = rng.normal()
    return head


def small_hyperparams(**kwargs):
    """Return hyperparameters for a small instance width."""
    return Hyperparams(k=3, **kwargs)
