"""Tests for the evalmetrics module."""
from ..evalmetrics import (average_precision, per_class_ap, mean_ap,
                           heatmap_column, localization_hit_rate,
                           write_predictions, read_predictions, write_ap_table,
                           UndefinedClassError, EmptyTruthError)
from ..utilities import FormatError
from fractions import Fraction
from sklearn.metrics import average_precision_score
import csv
import itertools
import math
import numpy as np
import pytest


def brute_force_ap(scores, labels, exact=False):
    """Mean precision@k over the ranks k of the positives."""
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    precisions = []
    for k in range(1, len(ranked) + 1):
        if labels[ranked[k - 1]]:
            hits = sum(labels[i] for i in ranked[:k])
            precisions.append(Fraction(hits, k) if exact else hits / k)
    if exact:
        return sum(precisions) / sum(labels)
    return math.fsum(precisions) / sum(labels)


class TestAveragePrecision:
    """Tests for the average precision of one class."""

    def test_perfect(self):
        """Test positives ranked first."""
        assert average_precision([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0

    def test_worst(self):
        """Test the positive ranked last."""
        assert average_precision([0.9, 0.8, 0.1], [0, 0, 1]) == pytest.approx(
            1.0 / 3.0)

    def test_interleaved(self):
        """Test positives at ranks one and three."""
        assert average_precision([0.9, 0.5, 0.4], [1, 0, 1]) == pytest.approx(
            (1.0 + 2.0 / 3.0) / 2.0)

    def test_ties_keep_input_order(self):
        """Test tied scores are ranked in input order."""
        assert average_precision([0.5, 0.5], [0, 1]) == 0.5
        assert average_precision([0.5, 0.5], [1, 0]) == 1.0

    def test_no_positives(self):
        """Test a class without positives."""
        with pytest.raises(UndefinedClassError):
            average_precision([0.1, 0.2], [0, 0])

    def test_length_mismatch(self):
        """Test scores and labels of different lengths."""
        with pytest.raises(ValueError):
            average_precision([0.1, 0.2], [1])

    def test_exhaustive(self):
        """Test every label vector and score ranking up to length 8."""
        for n in range(1, 9):
            rng = np.random.default_rng(n)
            score_sets = [list(rng.permutation(n) / n)]
            # ties in every position of the ranking
            score_sets.append(list(rng.integers(0, 3, size=n) / 3.0))
            for labels in itertools.product([0, 1], repeat=n):
                if not any(labels):
                    continue
                for scores in score_sets:
                    ap = average_precision(scores, labels)
                    assert ap == brute_force_ap(scores, labels)
                    assert ap == pytest.approx(
                        float(brute_force_ap(scores, labels, exact=True)),
                        rel=1e-15)

    def test_sklearn(self):
        """Test against scikit-learn on scores without ties."""
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 60))
            labels = rng.integers(0, 2, size=n)
            labels[rng.integers(n)] = 1
            scores = rng.standard_normal(n)
            assert average_precision(scores, labels) == pytest.approx(
                average_precision_score(labels, scores))

    def test_monotone_invariance(self):
        """Test a strictly increasing transform keeps the AP."""
        rng = np.random.default_rng(1)
        scores = rng.standard_normal(30)
        labels = rng.integers(0, 2, size=30)
        labels[0] = 1
        ap = average_precision(scores, labels)
        assert average_precision(np.exp(scores), labels) == ap
        assert average_precision(3.0 * scores - 7.0, labels) == ap


class TestMeanAP:
    """Tests for per-class and mean average precision."""

    def test_per_class(self):
        """Test per-class values and the mean."""
        scores = np.array([[0.9, 0.1], [0.2, 0.8], [0.4, 0.7]])
        labels = np.array([[1, 0], [0, 1], [0, 1]])
        aps = per_class_ap(scores, labels)
        assert aps == [1.0, 1.0]
        assert mean_ap(aps) == 1.0

    def test_undefined_class(self):
        """Test a class without positives is excluded with a warning."""
        scores = np.array([[0.9, 0.1], [0.2, 0.8]])
        labels = np.array([[1, 0], [0, 0]])
        with pytest.warns(UserWarning) as warning:
            aps = per_class_ap(scores, labels)
        assert "Class 1 has no positive samples" in str(warning[0].message)
        assert aps == [1.0, None]
        assert mean_ap(aps) == 1.0

    def test_no_defined_class(self):
        """Test the mAP of no classes."""
        with pytest.raises(ValueError):
            mean_ap([None, None])

    def test_shape_mismatch(self):
        """Test score and label matrices of different shapes."""
        with pytest.raises(ValueError):
            per_class_ap(np.zeros((3, 2)), np.zeros((2, 3)))


class TestLocalizationHitRate:
    """Tests for the localization hit rate."""

    spans = [(0, 8), (8, 16), (16, 24)]

    @staticmethod
    def peak(column, width=24):
        """Return a heatmap peaking at `column`."""
        heatmap = np.zeros((4, width))
        heatmap[:, column] = 1.0
        return heatmap

    def test_all_hits(self):
        """Test every peak inside its actor's block."""
        heatmaps = {(0, 2): self.peak(3), (1, 0): self.peak(20)}
        placements = [[(0, 2)], [(2, 0)]]
        assert localization_hit_rate(heatmaps, placements, self.spans) == 1.0

    def test_half(self):
        """Test one hit and one miss."""
        heatmaps = {(0, 2): self.peak(3), (1, 0): self.peak(9)}
        placements = [[(0, 2)], [(2, 0)]]
        assert localization_hit_rate(heatmaps, placements, self.spans) == 0.5

    def test_unscored_actions(self):
        """Test actions without a heatmap are not counted."""
        heatmaps = {(0, 2): self.peak(3)}
        placements = [[(0, 2), (1, 1)], [(2, 0)]]
        assert localization_hit_rate(heatmaps, placements, self.spans) == 1.0

    def test_block_edges(self):
        """Test spans are half-open."""
        placements = [[(1, 0)]]
        assert localization_hit_rate(
            {(0, 0): self.peak(8)}, placements, self.spans) == 1.0
        assert localization_hit_rate(
            {(0, 0): self.peak(16)}, placements, self.spans) == 0.0

    def test_first_column(self):
        """Test ties between columns resolve to the first."""
        assert heatmap_column(np.ones((3, 5))) == 0

    def test_column_total(self):
        """Test the peak column is the largest column total, not the largest
        cell."""
        heatmap = np.zeros((4, 6))
        heatmap[0, 1] = 3.0
        heatmap[:, 4] = 1.0
        assert heatmap_column(heatmap) == 4

    def test_empty(self):
        """Test no scored action."""
        with pytest.raises(EmptyTruthError):
            localization_hit_rate({}, [[(0, 1)]], self.spans)


class TestFiles:
    """Tests for prediction and AP tables."""

    def test_predictions(self, tmp_path):
        """Test predictions survive a write and read."""
        scores = np.array([[0.25, -1.5], [3.0, 1e-17]])
        labels = np.array([[1, 0], [0, 1]])
        write_predictions(tmp_path / "p.csv", ["a", "b"], ["run", "sit"],
                          scores, labels)
        ranked = read_predictions(tmp_path / "p.csv")
        assert ranked.sample_ids == ["a", "b"]
        assert ranked.classes == ["run", "sit"]
        assert np.array_equal(ranked.scores, scores)
        assert np.array_equal(ranked.labels, labels)

    def test_missing_column(self, tmp_path):
        """Test a file without labels."""
        (tmp_path / "p.csv").write_text("sample_id,class,score\na,run,0.5\n")
        with pytest.raises(FormatError) as exception:
            read_predictions(tmp_path / "p.csv")
        assert "missing columns label" in str(exception.value)

    def test_gap(self, tmp_path):
        """Test a missing (sample, class) pair."""
        (tmp_path / "p.csv").write_text(
            "sample_id,class,score,label\na,run,0.5,1\nb,sit,0.1,0\n")
        with pytest.raises(FormatError):
            read_predictions(tmp_path / "p.csv")

    def test_duplicate(self, tmp_path):
        """Test a repeated (sample, class) pair."""
        (tmp_path / "p.csv").write_text(
            "sample_id,class,score,label\na,run,0.5,1\na,run,0.1,0\n")
        with pytest.raises(FormatError) as exception:
            read_predictions(tmp_path / "p.csv")
        assert "duplicate" in str(exception.value)

    def test_ap_table(self, tmp_path):
        """Test the AP table rows."""
        write_ap_table(tmp_path / "ap.csv", ["run", "sit"], [0.5, None], 0.5)
        with open(tmp_path / "ap.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows == [["class", "ap"], ["run", "0.5"], ["sit", ""],
                        ["mAP", "0.5"]]
