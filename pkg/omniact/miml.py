"""
Multi-instance multi-label action recognition head.

A clip's feature map is split into width-``k`` column blocks, one instance per
block. A shared fully-connected layer scores every instance and the instance
scores are aggregated into bag scores, one per action class. Training uses
only bag-level labels.

Shapes used throughout: a feature map is (D, H, W) with D feature channels,
instance features are (N, D), instance scores are (N, C) for C classes and
batched arrays carry a leading batch axis B.
"""
from .evalmetrics import mean_ap, per_class_ap
from .optimizers import SGDMomentum
from .regionmask import apply_mask, mask_from_boxes, read_boxes
from .utilities import (FormatError, read_json, read_tensor, write_array,
                        write_json, write_tensor)
from collections import namedtuple
from scipy.special import expit, logsumexp, softmax
from tqdm import trange
import csv
import numpy as np
import pathlib
import warnings

AGGREGATORS = ("avg", "max", "lse", "attention")
HEADS = ("miml", "avgpool", "maxpool")

InstanceBatch = namedtuple(
    "InstanceBatch", ["n_instances", "feat_dim", "features"])
TrainSample = namedtuple(
    "TrainSample", ["features", "labels", "mask"], defaults=(None,))
Scores = namedtuple(
    "Scores",
    ["instance_scores", "bag_scores", "bag_probs", "instance_probs"])
EpochMetrics = namedtuple(
    "EpochMetrics", ["epoch", "lr", "loss_bce", "loss_reg", "train_map"])
_Forward = namedtuple(
    "_Forward",
    ["instance_scores", "bag_scores", "instance_weights", "attention"])

_HyperparamsBase = namedtuple(
    "Hyperparams",
    ["k", "lse_sharpness", "reg_weight", "lr", "momentum", "batch_size",
     "epochs", "lr_halve_every", "aggregator", "head", "use_mask"],
    defaults=(8, 0.8, 0.001, 0.01, 0.9, 32, 50, 10, "lse", "miml", True))


class Hyperparams(_HyperparamsBase):
    """
    Training and model hyperparameters.

    Values are validated on construction. `aggregator` is one of
    :data:`AGGREGATORS` and `head` one of :data:`HEADS`; the pooling baseline
    heads score a single globally pooled feature and ignore `k`,
    `aggregator` and `reg_weight`.
    """

    __slots__ = ()

    def __new__(cls, *args, **kwargs):
        """Create validated :class:`Hyperparams`."""
        self = super().__new__(cls, *args, **kwargs)
        checks = [
            ("k", isinstance(self.k, (int, np.integer)) and self.k >= 1,
             "an integer >= 1"),
            ("lse_sharpness", self.lse_sharpness > 0, "> 0"),
            ("reg_weight", self.reg_weight >= 0, ">= 0"),
            ("lr", self.lr >= 0, ">= 0"),
            ("momentum", 0 <= self.momentum < 1, "in [0, 1)"),
            ("batch_size", self.batch_size >= 1, ">= 1"),
            ("epochs", self.epochs >= 0, ">= 0"),
            ("lr_halve_every", self.lr_halve_every >= 1, ">= 1"),
            ("aggregator", self.aggregator in AGGREGATORS,
             "one of {}".format(", ".join(AGGREGATORS))),
            ("head", self.head in HEADS,
             "one of {}".format(", ".join(HEADS))),
            ("use_mask", isinstance(self.use_mask, (bool, np.bool_)),
             "a boolean"),
            ]
        for name, valid, expected in checks:
            if not valid:
                raise HyperparameterError(name, getattr(self, name), expected)
        return self

    def replace(self, **kwargs):
        """Return a validated copy with some fields replaced."""
        return type(self)(**{**self._asdict(), **kwargs})


def effective_aggregator(hp):
    """Return the aggregator applied to the instance scores."""
    return hp.aggregator if hp.head == "miml" else "avg"


def uses_regulariser(hp):
    """Return True when the sparsity term contributes to the loss."""
    return hp.head == "miml" and hp.reg_weight > 0


class MimlHead(object):
    """
    The shared fully-connected scoring layer.

    `weights` is (C, D) and `bias` is (C,). The attention variant adds a
    D -> 1 affine map, `attn_weights` (D,) and `attn_bias` (1,), producing one
    logit per instance.
    """

    def __init__(self, weights, bias, attn_weights=None, attn_bias=None):
        """
        Create a :class:`MimlHead` object.

        :arg weights: The (C, D) weight matrix.
        :type weights: :class:`numpy.ndarray`
        :arg bias: The (C,) bias vector.
        :type bias: :class:`numpy.ndarray`
        :arg attn_weights: The (D,) attention weights, or None.
        :type attn_weights: :class:`numpy.ndarray` or NoneType
        :arg attn_bias: The (1,) attention bias, or None.
        :type attn_bias: :class:`numpy.ndarray` or NoneType

        :returns: A :class:`MimlHead` object
        """
        self.weights = np.array(weights, dtype=np.float64, ndmin=2)
        self.bias = np.array(bias, dtype=np.float64, ndmin=1)
        if self.weights.ndim != 2:
            raise ValueError("weights shape is wrong, and must be "
                             "(classes, features) (got {})".format(
                                 self.weights.shape))
        if self.bias.shape != (self.n_classes,):
            raise ValueError(
                "bias shape is wrong (expected {}, got {})".format(
                    (self.n_classes,), self.bias.shape))
        if (attn_weights is None) != (attn_bias is None):
            raise ValueError("attn_weights and attn_bias must be given "
                             "together")
        self.attn_weights = None
        self.attn_bias = None
        if attn_weights is not None:
            self.attn_weights = np.array(attn_weights, dtype=np.float64)
            self.attn_bias = np.array(attn_bias, dtype=np.float64, ndmin=1)
            if self.attn_weights.shape != (self.feat_dim,):
                raise ValueError(
                    "attn_weights shape is wrong (expected {}, got {})".format(
                        (self.feat_dim,), self.attn_weights.shape))
            if self.attn_bias.shape != (1,):
                raise ValueError(
                    "attn_bias shape is wrong (expected (1,), got {})".format(
                        self.attn_bias.shape))

    @property
    def n_classes(self):
        """The number of classes, C."""
        return self.weights.shape[0]

    @property
    def feat_dim(self):
        """The instance feature dimension, D."""
        return self.weights.shape[1]

    @property
    def has_attention(self):
        """True when the head carries attention parameters."""
        return self.attn_weights is not None

    @classmethod
    def initialise(cls, n_classes, feat_dim, rng, attention=False):
        """
        Draw a head with weights from U(-1/sqrt(D), 1/sqrt(D)) and zero bias.

        :arg int n_classes: C.
        :arg int feat_dim: D.
        :arg rng: The seeded generator.
        :type rng: :class:`numpy.random.Generator`
        :arg bool attention: Also draw attention parameters.

        :rtype: :class:`MimlHead`
        """
        bound = 1.0 / np.sqrt(feat_dim)
        weights = rng.uniform(-bound, bound, size=(n_classes, feat_dim))
        bias = np.zeros(n_classes)
        attn_weights, attn_bias = None, None
        if attention:
            attn_weights = rng.uniform(-bound, bound, size=feat_dim)
            attn_bias = np.zeros(1)
        return cls(weights, bias, attn_weights, attn_bias)

    def parameters(self):
        """Return the live parameter arrays by name."""
        params = {"weights": self.weights, "bias": self.bias}
        if self.has_attention:
            params["attn_weights"] = self.attn_weights
            params["attn_bias"] = self.attn_bias
        return params

    def copy(self):
        """Return a deep copy."""
        return MimlHead(self.weights.copy(), self.bias.copy(),
                        None if self.attn_weights is None
                        else self.attn_weights.copy(),
                        None if self.attn_bias is None
                        else self.attn_bias.copy())


def split_instances(f, k):
    """
    Split a feature map into width-`k` column blocks and average pool them.

    The map is zero-padded on the right to a multiple of `k` columns and each
    block is averaged over its H x k cells, padding included.

    :arg f: A (D, H, W) feature map.
    :type f: :class:`numpy.ndarray`
    :arg int k: The instance width.

    :returns: N = ceil(W / k) instances of dimension D.
    :rtype: :class:`InstanceBatch`
    """
    if k < 1:
        raise ValueError(f"k must be >= 1 (got {k})")
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError("feature map shape is wrong, and must be (channels, "
                         "height, width) (got {})".format(f.shape))
    feat_dim, height, width = f.shape
    n_instances = -(-width // k)
    padded = np.zeros((feat_dim, height, n_instances * k))
    padded[:, :, :width] = f
    features = padded.reshape(feat_dim, height, n_instances, k).mean(
        axis=(1, 3)).T
    return InstanceBatch(n_instances, feat_dim, features)


def block_spans(width, k):
    """Return the [start, stop) feature columns of each instance block."""
    n_instances = -(-width // k)
    return [(j * k, min((j + 1) * k, width)) for j in range(n_instances)]


def _sample_mask(sample, hp):
    if hp.use_mask and sample.mask is not None:
        return np.asarray(sample.mask, dtype=np.float64)
    return None


def instance_features(sample, hp):
    """
    Return the (N, D) instance features of a sample.

    The mask is applied first when `hp.use_mask` is set. The pooling baseline
    heads return a single globally pooled instance.

    :rtype: :class:`numpy.ndarray`
    """
    f = np.asarray(sample.features, dtype=np.float64)
    mask = _sample_mask(sample, hp)
    if mask is not None:
        f = apply_mask(f, mask)
    if hp.head == "avgpool":
        return f.mean(axis=(1, 2))[np.newaxis]
    if hp.head == "maxpool":
        return f.reshape(f.shape[0], -1).max(axis=1)[np.newaxis]
    return split_instances(f, hp.k).features


def instance_features_backward(sample, hp, g_x):
    """
    Chain a gradient on instance features back to the feature map.

    :arg g_x: The (N, D) gradient with respect to the instance features.
    :type g_x: :class:`numpy.ndarray`

    :returns: The (D, H, W) gradient with respect to the unmasked feature
        map; zero at masked-out cells.
    :rtype: :class:`numpy.ndarray`
    """
    f = np.asarray(sample.features, dtype=np.float64)
    feat_dim, height, width = f.shape
    mask = _sample_mask(sample, hp)
    if hp.head == "miml":
        block = np.arange(width) // hp.k
        g_f = np.broadcast_to(g_x[block].T[:, np.newaxis, :] / (height * hp.k),
                              f.shape).copy()
    elif hp.head == "avgpool":
        g_f = np.broadcast_to(g_x[0][:, np.newaxis, np.newaxis]
                              / (height * width), f.shape).copy()
    else:
        masked = f if mask is None else apply_mask(f, mask)
        first = masked.reshape(feat_dim, -1).argmax(axis=1)
        g_f = np.zeros((feat_dim, height * width))
        g_f[np.arange(feat_dim), first] = g_x[0]
        g_f = g_f.reshape(f.shape)
    if mask is not None:
        g_f *= mask[np.newaxis]
    return g_f


def instance_scores(b, head):
    """
    Score every instance with the shared layer.

    :arg b: The instances, or an (N, D) feature array.
    :type b: :class:`InstanceBatch` or :class:`numpy.ndarray`
    :arg head: The scoring layer.
    :type head: :class:`MimlHead`

    :returns: The (N, C) scores, features . weights^T + bias.
    :rtype: :class:`numpy.ndarray`
    """
    features = b.features if isinstance(b, InstanceBatch) else b
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != head.feat_dim:
        raise ValueError("feature dimension is wrong (expected {}, got {})"
                         .format(head.feat_dim, features.shape[-1]))
    return features @ head.weights.T + head.bias


def _aggregate(s, mode, lse_sharpness, attention=None):
    """
    Aggregate batched (B, N, C) instance scores.

    :returns: The (B, C) bag scores and the (B, N, C) derivative of each bag
        score with respect to each instance score.
    """
    n_instances = s.shape[1]
    if n_instances == 0:
        raise EmptyBagError()
    if mode == "avg":
        return s.mean(axis=1), np.full(s.shape, 1.0 / n_instances)
    if mode == "max":
        # ties go to the lowest instance index
        first = s.argmax(axis=1)[:, np.newaxis, :]
        weights = np.zeros(s.shape)
        np.put_along_axis(weights, first, 1.0, axis=1)
        return np.take_along_axis(s, first, axis=1)[:, 0, :], weights
    if mode == "lse":
        r = lse_sharpness
        if not r > 0:
            raise HyperparameterError("lse_sharpness", r, "> 0")
        bag = (logsumexp(r * s, axis=1) - np.log(n_instances)) / r
        return bag, softmax(r * s, axis=1)
    if mode == "attention":
        if attention is None:
            raise ValueError("attention aggregation requires instance logits")
        weights = np.broadcast_to(attention[:, :, np.newaxis], s.shape)
        return np.einsum("bn,bnc->bc", attention, s), weights
    raise ValueError("mode is wrong (expected one of {}, got {!r})".format(
        AGGREGATORS, mode))


def aggregate(s, mode, lse_sharpness=0.8, attn_logits=None):
    """
    Aggregate instance scores into bag scores.

    :arg s: The (N, C) instance scores.
    :type s: :class:`numpy.ndarray`
    :arg str mode: "avg", "max", "lse" (1/r log(1/N sum exp(r s))) or
        "attention" (softmax(attn_logits) weighted sum).
    :arg float lse_sharpness: r, the sharpness of "lse".
    :arg attn_logits: The (N,) instance logits for "attention".

    :raises EmptyBagError: when N is 0.

    :returns: The (C,) bag scores.
    :rtype: :class:`numpy.ndarray`
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim == 1:
        s = s[:, np.newaxis]
    attention = None
    if attn_logits is not None:
        attention = softmax(np.asarray(attn_logits, dtype=np.float64))[
            np.newaxis]
    return _aggregate(s[np.newaxis], mode, lse_sharpness, attention)[0][0]


def forward(x, head, hp):
    """
    Run the head on batched instance features.

    :arg x: The (B, N, D) instance features.
    :type x: :class:`numpy.ndarray`

    :returns: The instance scores, bag scores, the derivative of bag scores
        with respect to instance scores and the attention weights (or None).
    """
    x = np.asarray(x, dtype=np.float64)
    s = instance_scores(x, head)
    mode = effective_aggregator(hp)
    attention = None
    if mode == "attention":
        if not head.has_attention:
            raise ValueError("attention aggregation requires a head with "
                             "attention parameters")
        attention = softmax(x @ head.attn_weights + head.attn_bias[0], axis=1)
    bag, weights = _aggregate(s, mode, hp.lse_sharpness, attention)
    return _Forward(s, bag, weights, attention)


def score_gradients(cache, g_bag):
    """
    Chain a gradient on bag scores back to instance scores.

    :arg cache: The result of :func:`forward`.
    :arg g_bag: The (B, C) gradient with respect to the bag scores.

    :returns: The (B, N, C) gradient with respect to the instance scores and
        the (B, N) gradient with respect to the attention logits (or None).
    """
    g_s = g_bag[:, np.newaxis, :] * cache.instance_weights
    g_z = None
    if cache.attention is not None:
        spread = cache.instance_scores - cache.bag_scores[:, np.newaxis, :]
        g_z = cache.attention * np.einsum("bc,bnc->bn", g_bag, spread)
    return g_s, g_z


def bce_loss(p, y, scores=None):
    """
    Binary cross-entropy summed over classes.

    :arg p: The (C,) probabilities. Clamped to [1e-12, 1 - 1e-12] when
        `scores` is not given.
    :arg y: The (C,) binary labels.
    :arg scores: The (C,) scores behind `p`. When given the loss is evaluated
        in log space from the scores.

    :rtype: float
    """
    y = np.asarray(y, dtype=np.float64)
    if scores is not None:
        return float(_bce(np.asarray(scores, dtype=np.float64), y))
    p = np.clip(np.asarray(p, dtype=np.float64), 1e-12, 1.0 - 1e-12)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _bce(s, y):
    # -y log sigmoid(s) - (1 - y) log(1 - sigmoid(s))
    return np.sum(np.logaddexp(0.0, s) - y * s, axis=-1)


def _sparsity(p_inst):
    largest = p_inst.max(axis=-1)
    return np.sum((p_inst.sum(axis=-1) - largest) / largest, axis=-1)


def _sparsity_gradient(s_inst):
    """Return d(sparsity)/d(instance scores) for (B, N, C) scores."""
    p = expit(s_inst)
    largest = p.max(axis=-1, keepdims=True)
    total = p.sum(axis=-1, keepdims=True)
    g_p = np.broadcast_to(1.0 / largest, p.shape).copy()
    first = p.argmax(axis=-1)[..., np.newaxis]
    np.put_along_axis(
        g_p, first,
        np.take_along_axis(g_p, first, axis=-1) - total / largest ** 2,
        axis=-1)
    return g_p * p * (1.0 - p)


def sparsity_reg(p_inst):
    """
    The instance sparsity regulariser.

    Sums (sum_a p_i^a - max_a p_i^a) / max_a p_i^a over instances i, which is
    zero when each instance is confident in a single class only.

    :arg p_inst: The (N, C) instance probabilities.
    :type p_inst: :class:`numpy.ndarray`

    :rtype: float
    """
    p_inst = np.asarray(p_inst, dtype=np.float64)
    if p_inst.ndim == 1:
        p_inst = p_inst[:, np.newaxis]
    return float(_sparsity(p_inst))


def _batch_losses(cache, y, hp):
    bce = _bce(cache.bag_scores, y)
    if hp.head == "miml":
        reg = _sparsity(expit(cache.instance_scores))
    else:
        reg = np.zeros_like(bce)
    return bce, reg


def _batch_gradients(x, y, head, hp, cache):
    batch = x.shape[0]
    g_s, g_z = score_gradients(cache, expit(cache.bag_scores) - y)
    if uses_regulariser(hp):
        g_s = g_s + hp.reg_weight * _sparsity_gradient(cache.instance_scores)
    grads = {
        "weights": np.einsum("bnc,bnd->cd", g_s, x) / batch,
        "bias": g_s.sum(axis=(0, 1)) / batch,
        }
    if head.has_attention:
        if g_z is None:
            g_z = np.zeros(x.shape[:2])
        grads["attn_weights"] = np.einsum("bn,bnd->d", g_z, x) / batch
        grads["attn_bias"] = np.array([g_z.sum() / batch])
    return grads


def _prepare(sample, head, hp):
    x = instance_features(sample, hp)[np.newaxis]
    y = np.asarray(sample.labels, dtype=np.float64)[np.newaxis]
    if y.shape[1] != head.n_classes:
        raise ValueError("labels length is wrong (expected {}, got {})".format(
            head.n_classes, y.shape[1]))
    return x, y, forward(x, head, hp)


def loss_terms(sample, head, hp):
    """Return the (bce, sparsity) loss terms of a sample."""
    x, y, cache = _prepare(sample, head, hp)
    bce, reg = _batch_losses(cache, y, hp)
    return float(bce[0]), float(reg[0])


def total_loss(sample, head, hp):
    """
    Return L_bce + reg_weight * L_reg for one sample.

    The sparsity term applies to the MIML head only.

    :arg sample: The sample.
    :type sample: :class:`TrainSample`
    :arg head: The scoring layer.
    :type head: :class:`MimlHead`
    :arg hp: The hyperparameters.
    :type hp: :class:`Hyperparams`

    :rtype: float
    """
    bce, reg = loss_terms(sample, head, hp)
    if hp.head != "miml":
        return bce
    return bce + hp.reg_weight * reg


def loss_gradients(sample, head, hp):
    """
    Return the exact gradients of :func:`total_loss`.

    :returns: Gradient arrays keyed like :meth:`MimlHead.parameters`.
    :rtype: dict
    """
    x, y, cache = _prepare(sample, head, hp)
    return _batch_gradients(x, y, head, hp, cache)


def predict(sample, head, hp):
    """
    Score a sample.

    :rtype: :class:`Scores`
    """
    x = instance_features(sample, hp)[np.newaxis]
    cache = forward(x, head, hp)
    return Scores(cache.instance_scores[0], cache.bag_scores[0],
                  expit(cache.bag_scores[0]), expit(cache.instance_scores[0]))


def predicted_labels(scores):
    """Return the indices of the classes with p^a > 0.5."""
    return np.flatnonzero(scores.bag_probs > 0.5)


def _stack(dataset, hp):
    x = [instance_features(sample, hp) for sample in dataset]
    shapes = {xi.shape for xi in x}
    if len(shapes) != 1:
        raise ValueError("samples must share one feature map shape (got "
                         "instance shapes {})".format(sorted(shapes)))
    y = np.array([sample.labels for sample in dataset], dtype=np.float64)
    return np.stack(x), y


def bag_scores(dataset, head, hp):
    """Return the (n, C) bag scores of a dataset."""
    x, _ = _stack(dataset, hp)
    return forward(x, head, hp).bag_scores


def train(dataset, hp, seed, head=None, write_path=None, progress=True):
    """
    Train a head with mini-batch SGD with momentum.

    Mini-batches of `hp.batch_size` are drawn from a seeded shuffle every
    epoch and the last short batch is kept. The loss of a batch is the mean
    of its per-sample losses. The learning rate is halved every
    `hp.lr_halve_every` epochs.

    :arg dataset: The training samples; all share one feature map shape.
    :type dataset: list(:class:`TrainSample`)
    :arg hp: The hyperparameters.
    :type hp: :class:`Hyperparams`
    :arg int seed: Seeds initialisation and shuffling.
    :arg head: A head to start from, copied, or None to draw one.
    :type head: :class:`MimlHead` or NoneType
    :arg write_path: An HDF5 file to which the parameters are written after
        every epoch, or None.
    :type write_path: path-like or str or NoneType
    :arg bool progress: Show a progress bar.

    :raises EmptyDatasetError: when `dataset` is empty.
    :raises FloatingPointError: when the loss becomes non-finite.

    :returns: The trained head and the metrics of every epoch.
    :rtype: tuple(:class:`MimlHead`, list(:class:`EpochMetrics`))
    """
    if len(dataset) == 0:
        raise EmptyDatasetError()
    rng = np.random.default_rng(seed)
    x, y = _stack(dataset, hp)
    n_samples, _, feat_dim = x.shape
    if head is None:
        head = MimlHead.initialise(
            y.shape[1], feat_dim, rng,
            attention=effective_aggregator(hp) == "attention")
    else:
        head = head.copy()
    optimizer = SGDMomentum(hp.lr, hp.momentum, hp.lr_halve_every)

    metrics = []
    for epoch in trange(hp.epochs, desc="Training", unit="epoch",
                        disable=not progress):
        optimizer.set_epoch(epoch)
        order = rng.permutation(n_samples)
        bce_total, reg_total = 0.0, 0.0
        for start in range(0, n_samples, hp.batch_size):
            batch = order[start:start + hp.batch_size]
            cache = forward(x[batch], head, hp)
            bce, reg = _batch_losses(cache, y[batch], hp)
            if not (np.all(np.isfinite(bce)) and np.all(np.isfinite(reg))):
                raise FloatingPointError(
                    "Non-finite loss in epoch {}.".format(epoch + 1))
            bce_total += bce.sum()
            reg_total += reg.sum()
            grads = _batch_gradients(x[batch], y[batch], head, hp, cache)
            optimizer(head.parameters(), grads)

        scores = forward(x, head, hp).bag_scores
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            aps = per_class_ap(scores, y, warn=False)
        defined = [ap for ap in aps if ap is not None]
        train_map = mean_ap(defined) if defined else float("nan")
        metrics.append(EpochMetrics(
            epoch + 1, optimizer.learning_rate(), bce_total / n_samples,
            reg_total / n_samples, train_map))

        if write_path is not None:
            for name, value in head.parameters().items():
                write_array(write_path, "{}_{}".format(
                    name.replace("attn_", "attention_"), epoch + 1), value)
    return head, metrics


def write_metrics(path, metrics):
    """Write per-epoch metrics as CSV."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(EpochMetrics._fields)
        for row in metrics:
            writer.writerow([row.epoch, repr(float(row.lr)),
                             repr(float(row.loss_bce)),
                             repr(float(row.loss_reg)),
                             repr(float(row.train_map))])


def _attention_path(path):
    path = pathlib.Path(path)
    return path.with_name(path.stem + "_attention" + path.suffix)


def save_head(path, head):
    """
    Save a head as tensor files.

    The head is stored as a C x (D + 1) tensor, bias in the last column. The
    attention parameters go to a sibling ``<stem>_attention`` tensor of
    length D + 1.
    """
    write_tensor(path, np.hstack([head.weights, head.bias[:, np.newaxis]]))
    if head.has_attention:
        write_tensor(_attention_path(path),
                     np.concatenate([head.attn_weights, head.attn_bias]))


def load_head(path):
    """Load a head saved by :func:`save_head`."""
    stacked = read_tensor(path)
    if stacked.ndim != 2 or stacked.shape[1] < 2:
        raise FormatError(path, "a head tensor must be C x (D + 1)")
    attn_weights, attn_bias = None, None
    attention = _attention_path(path)
    if attention.exists():
        vector = read_tensor(attention)
        if vector.shape != (stacked.shape[1],):
            raise FormatError(attention, "expected {} values".format(
                stacked.shape[1]))
        attn_weights, attn_bias = vector[:-1], vector[-1:]
    return MimlHead(stacked[:, :-1], stacked[:, -1], attn_weights, attn_bias)


def read_manifest(path):
    """
    Read a dataset manifest.

    The manifest is a JSON list of ``{features, boxes, labels}`` entries with
    paths relative to the manifest. ``boxes`` may be null; when it is given the
    entry also needs ``frame_size`` ([width, height]) to build the mask at
    feature resolution.

    :returns: The samples, masks built from their boxes.
    :rtype: list(:class:`TrainSample`)
    """
    path = pathlib.Path(path)
    root = path.parent
    entries = read_json(path)
    if not isinstance(entries, list):
        raise FormatError(path, "a manifest must be a JSON list")
    samples = []
    for i, entry in enumerate(entries):
        features = read_tensor(root / entry["features"])
        if features.ndim != 3:
            raise FormatError(root / entry["features"],
                              "features must be a (D, H, W) tensor")
        mask = None
        if entry.get("boxes") is not None:
            if "frame_size" not in entry:
                raise FormatError(
                    path, f"entry {i} has boxes but no frame_size")
            frame_w, frame_h = entry["frame_size"]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                mask = mask_from_boxes(
                    read_boxes(root / entry["boxes"]), frame_w, frame_h,
                    features.shape[2], features.shape[1])
        samples.append(TrainSample(
            features, np.asarray(entry["labels"], dtype=np.int64), mask))
    return samples


def write_manifest(path, entries):
    """Write a manifest read by :func:`read_manifest`."""
    write_json(path, list(entries))


class HyperparameterError(Exception):
    """An invalid hyperparameter value."""

    def __init__(self, name, value, expected):
        """
        Construct the exception.

        :arg str name: The hyperparameter.
        :arg value: The value given.
        :arg str expected: A description of the valid values.

        :rtype: :class:`HyperparameterError`
        """
        message = f"{name} must be {expected}, {value!r} was given."

        super().__init__(message)


class EmptyBagError(Exception):
    """A bag with no instances."""

    def __init__(self):
        """Construct the exception."""
        message = "A bag must hold at least one instance."

        super().__init__(message)


class EmptyDatasetError(Exception):
    """Training was asked to run on no samples."""

    def __init__(self):
        """Construct the exception."""
        message = "The training dataset is empty."

        super().__init__(message)
