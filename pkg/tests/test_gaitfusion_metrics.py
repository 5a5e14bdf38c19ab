'''Test gaitfusion.metrics'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import math

import numpy as np
import pytest

from gaitfusion import InputError
import gaitfusion.metrics as metrics

def test_score_margins():

    scores = np.array([[3.0, 1.0, 2.0], [0.0, 0.0, 5.0]])
    margins = metrics.score_margins(scores)
    assert np.array_equal(margins, [[1.0, -2.0, -1.0], [-5.0, -5.0, 5.0]])

def test_roc_perfect_ranking():

    curve = metrics.roc_curve([0.9, 0.8, 0.1, -0.5], [True, True, False, False])
    assert curve.auc == pytest.approx(1.0)
    assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
    assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0
    assert curve.rows()[0][0] == math.inf

def test_roc_reversed_ranking():

    curve = metrics.roc_curve([-1.0, -2.0, 3.0], [True, True, False])
    assert curve.auc == pytest.approx(0.0)

def test_roc_ties():

    # Tied margins move both rates at once, giving the diagonal
    curve = metrics.roc_curve([1.0, 1.0, 1.0, 1.0], [True, False, True, False])
    assert len(curve.thresholds) == 2
    assert curve.auc == pytest.approx(0.5)

def test_roc_random_scores():

    rng = np.random.default_rng(4)
    curve = metrics.roc_curve(rng.standard_normal(1000), rng.random(1000) < 0.5)
    assert curve.auc == pytest.approx(0.5, abs=0.05)

def test_roc_single_class_present():

    curve = metrics.roc_curve([1.0, 2.0], [True, True])
    assert math.isnan(curve.auc)

def test_compute_metrics():

    true = [0, 0, 1, 1, 2, 2]
    predicted = [0, 1, 1, 1, 2, 0]
    scores = np.array([[2.0, 1.0, 0.0],
                       [1.0, 2.0, 0.0],
                       [0.0, 2.0, 1.0],
                       [0.0, 3.0, 1.0],
                       [0.0, 1.0, 4.0],
                       [3.0, 1.0, 2.0]])
    report = metrics.compute_metrics(true, predicted, scores, ['a', 'b', 'c'])

    assert report.accuracy == pytest.approx(4.0 / 6.0)
    assert report.per_class_accuracy == pytest.approx([0.5, 1.0, 0.5])
    assert report.confusion.sum() == 6
    assert np.array_equal(report.confusion, [[1, 1, 0], [0, 2, 0], [1, 0, 1]])
    assert np.array_equal(report.confusion.sum(axis=1), [2, 2, 2])
    assert len(report.roc) == 3
    assert all(0.0 <= auc <= 1.0 for auc in report.auc)
    # One negative for class b ties with its weaker positive
    assert report.auc[1] == pytest.approx(0.9375)

    names = [name for name, _ in report.metric_rows()]
    assert names == ['accuracy', 'accuracy_a', 'accuracy_b', 'accuracy_c',
                     'auc_a', 'auc_b', 'auc_c']

def test_compute_metrics_absent_class():

    report = metrics.compute_metrics([0, 0, 1], [0, 1, 1],
                                     [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    assert report.class_names == ['0', '1', '2']
    assert math.isnan(report.per_class_accuracy[2])
    assert math.isnan(report.auc[2])
    assert not math.isnan(report.auc[0])

def test_compute_metrics_errors():

    with pytest.raises(InputError):
        metrics.compute_metrics([0, 1], [0], [[1.0, 0.0], [0.0, 1.0]])

    with pytest.raises(InputError):
        metrics.compute_metrics([0, 2], [0, 1], [[1.0, 0.0], [0.0, 1.0]])

    with pytest.raises(InputError):
        metrics.compute_metrics([0], [0], [[1.0]])

    with pytest.raises(InputError):
        metrics.compute_metrics([0, 1], [0, 1], [[1.0, 0.0], [0.0, 1.0]], ['only'])

def test_nearest_class_mean():

    train = np.array([[0.0, 0.0], [0.0, 2.0], [10.0, 10.0], [12.0, 10.0]])
    labels = np.array([0, 0, 1, 1])
    predicted, scores = metrics.nearest_class_mean(train, labels,
                                                   [[1.0, 1.0], [9.0, 9.0], [5.0, 5.0]])
    assert list(predicted) == [0, 1, 0]
    assert scores.shape == (3, 2)
    assert scores[0, 0] == pytest.approx(-1.0)

    # Sequences are flattened
    predicted, _ = metrics.nearest_class_mean(train.reshape(4, 1, 2), labels,
                                              np.array([[[11.0, 11.0]]]))
    assert list(predicted) == [1]
