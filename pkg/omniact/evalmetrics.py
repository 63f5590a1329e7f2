"""
Evaluation metrics.

Average precision is the information-retrieval definition: the mean, over
positive samples, of the precision at the rank of each positive. Scores are
ranked in descending order with ties kept in input order, so the result does
not depend on anything but the scores, labels and their order.

A heatmap peaks in the column with the largest total over its rows, which is
not always the column of its largest cell. Ties go to the first column.
"""
from .utilities import FormatError
from collections import namedtuple
import csv
import math
import numpy as np
import warnings

RankedPredictions = namedtuple(
    "RankedPredictions", ["sample_ids", "classes", "scores", "labels"])


def average_precision(scores, labels):
    """
    Compute the average precision of one class.

    :arg scores: One score per sample.
    :type scores: list(float) or :class:`numpy.ndarray`
    :arg labels: One 0/1 label per sample.
    :type labels: list(int) or :class:`numpy.ndarray`

    :raises UndefinedClassError: when there are no positive labels.

    :returns: AP in [0, 1].
    :rtype: float
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(
            "scores and labels must be 1-d and of equal length (got {} and {})"
            .format(scores.shape, labels.shape))
    positives = int(np.count_nonzero(labels))
    if positives == 0:
        raise UndefinedClassError()
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order] != 0
    hits = np.cumsum(ranked)
    ranks = np.arange(1, len(ranked) + 1)
    return math.fsum(hits[ranked] / ranks[ranked]) / positives


def per_class_ap(scores, labels, warn=True):
    """
    Compute the average precision of every class.

    :arg scores: The (n, C) bag scores.
    :type scores: :class:`numpy.ndarray`
    :arg labels: The (n, C) binary labels.
    :type labels: :class:`numpy.ndarray`
    :arg bool warn: Warn about classes with no positive labels.

    :returns: One AP per class, None for classes with no positives.
    :rtype: list(float or NoneType)
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ValueError("scores and labels must both be (samples, classes) "
                         "(got {} and {})".format(scores.shape, labels.shape))
    aps = []
    for a in range(scores.shape[1]):
        try:
            aps.append(average_precision(scores[:, a], labels[:, a]))
        except UndefinedClassError:
            if warn:
                warnings.warn(
                    "Class {} has no positive samples and is excluded from "
                    "the mAP.".format(a))
            aps.append(None)
    return aps


def mean_ap(per_class):
    """
    Return the mean of the defined per-class APs.

    :arg per_class: APs, None entries are skipped.

    :raises ValueError: when no class is defined.

    :rtype: float
    """
    defined = [ap for ap in per_class if ap is not None]
    if not defined:
        raise ValueError("mAP needs at least one class with positives")
    return math.fsum(defined) / len(defined)


def heatmap_column(heatmap):
    """
    Return the first column holding the largest column total.

    Summing over rows counts a tall activation over a person above a single
    bright cell.
    """
    return int(np.argmax(np.asarray(heatmap).sum(axis=0)))


def localization_hit_rate(heatmaps, truth, block_spans):
    """
    Fraction of planted actions whose heatmap peaks in the actor's block.

    :arg dict heatmaps: Heatmaps keyed by (sample index, class). Planted
        actions with no heatmap are not counted.
    :arg truth: The planted truth, or a list of per-sample lists of
        (instance, class) placements.
    :arg block_spans: The [start, stop) heatmap columns of each instance.

    :raises EmptyTruthError: when no planted action has a heatmap.

    :rtype: float
    """
    placements = getattr(truth, "placements", truth)
    counted, hits = 0, 0
    for sample, planted in enumerate(placements):
        for instance, a in planted:
            heatmap = heatmaps.get((sample, int(a)))
            if heatmap is None:
                continue
            start, stop = block_spans[instance]
            counted += 1
            hits += start <= heatmap_column(heatmap) < stop
    if counted == 0:
        raise EmptyTruthError()
    return hits / counted


def write_predictions(path, sample_ids, classes, scores, labels):
    """Write bag scores as ``sample_id,class,score,label`` rows."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["sample_id", "class", "score", "label"])
        for i, sample_id in enumerate(sample_ids):
            for a, name in enumerate(classes):
                writer.writerow([sample_id, name, repr(float(scores[i, a])),
                                 int(labels[i, a])])


def read_predictions(path):
    """
    Read a predictions CSV with columns sample_id, class, score, label.

    Samples and classes keep the order of their first appearance and every
    (sample, class) pair must appear exactly once.

    :raises FormatError: on missing columns, duplicates or gaps.

    :rtype: :class:`RankedPredictions`
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = {"sample_id", "class", "score", "label"} - set(
            reader.fieldnames or [])
        if missing:
            raise FormatError(path, "missing columns {}".format(
                ", ".join(sorted(missing))))
        rows = list(reader)
    sample_ids = list(dict.fromkeys(row["sample_id"] for row in rows))
    classes = list(dict.fromkeys(row["class"] for row in rows))
    sample_index = {s: i for i, s in enumerate(sample_ids)}
    class_index = {c: a for a, c in enumerate(classes)}
    scores = np.full((len(sample_ids), len(classes)), np.nan)
    labels = np.zeros(scores.shape, dtype=np.int64)
    seen = np.zeros(scores.shape, dtype=bool)
    for row in rows:
        i, a = sample_index[row["sample_id"]], class_index[row["class"]]
        if seen[i, a]:
            raise FormatError(path, "duplicate row for sample {} class {}"
                              .format(row["sample_id"], row["class"]))
        seen[i, a] = True
        try:
            scores[i, a] = float(row["score"])
            labels[i, a] = int(row["label"])
        except ValueError:
            raise FormatError(path, "unparseable row {}".format(row))
    if not seen.all():
        raise FormatError(path, "some (sample, class) pairs are missing")
    return RankedPredictions(sample_ids, classes, scores, labels)


def write_ap_table(path, class_names, aps, map_value):
    """
    Write a per-class AP table.

    Rows are ``class,ap`` with an empty AP for undefined classes, followed by
    a final ``mAP`` row.
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "ap"])
        for name, ap in zip(class_names, aps):
            writer.writerow([name, "" if ap is None else repr(float(ap))])
        writer.writerow(["mAP", repr(float(map_value))])


class UndefinedClassError(Exception):
    """A class without positive samples, for which AP is undefined."""

    def __init__(self):
        """Construct the exception."""
        message = "Average precision needs at least one positive label."

        super().__init__(message)


class EmptyTruthError(Exception):
    """No planted action could be scored."""

    def __init__(self):
        """Construct the exception."""
        message = (
                "No planted action has a heatmap, the hit rate is"
                " undefined."
                )

        super().__init__(message)
