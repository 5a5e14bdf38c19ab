'''This module computes classification metrics from predicted labels and per-class
scores: accuracy, per-class accuracy, the confusion matrix and one-vs-rest ROC curves
with their areas.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import numpy as np
from scipy.integrate import trapezoid

from . import InputError

class RocCurve:
    '''One-vs-rest ROC points for a class: the thresholds applied to the score margin and
    the false and true positive rates they give, starting from (0, 0).'''

    __slots__ = ('thresholds', 'fpr', 'tpr', 'auc')

    def __init__(self, thresholds, fpr, tpr, auc):
        self.thresholds = thresholds
        self.fpr = fpr
        self.tpr = tpr
        self.auc = auc

    def rows(self):
        '''Return (threshold, fpr, tpr) tuples.'''

        return list(zip(self.thresholds, self.fpr, self.tpr))

def score_margins(scores):
    '''Return score_c minus the largest of the other scores, for every row and class.'''

    scores = np.asarray(scores, dtype=np.float64)
    classes = scores.shape[1]
    margins = np.empty_like(scores)
    for column in range(classes):
        others = np.delete(scores, column, axis=1)
        margins[:, column] = scores[:, column] - others.max(axis=1)
    return margins

def roc_curve(margins, positives):
    '''Return the RocCurve obtained by thresholding margins at each distinct observed
    value. The AUC is computed by the trapezoidal rule and is NaN when the test set has
    no positive or no negative examples.'''

    margins = np.asarray(margins, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    positive_count = int(np.count_nonzero(positives))
    negative_count = positives.size - positive_count

    thresholds = np.unique(margins)[::-1]
    tp = np.array([np.count_nonzero(positives & (margins >= t)) for t in thresholds])
    fp = np.array([np.count_nonzero(~positives & (margins >= t)) for t in thresholds])
    thresholds = np.concatenate(([np.inf], thresholds))
    tp = np.concatenate(([0], tp))
    fp = np.concatenate(([0], fp))

    with np.errstate(invalid='ignore', divide='ignore'):
        tpr = tp / positive_count if positive_count else np.full(tp.shape, np.nan)
        fpr = fp / negative_count if negative_count else np.full(fp.shape, np.nan)
    auc = float(trapezoid(tpr, fpr)) if positive_count and negative_count else float('nan')
    return RocCurve(thresholds, fpr, tpr, auc)

class MetricsReport:
    '''The metrics of one experiment. per_class_accuracy is NaN for a class absent from the
    test set. timings maps stage names to seconds and ablation maps the names of the
    component-only classifiers to their accuracy on the same test set.'''

    __slots__ = ('class_names', 'accuracy', 'per_class_accuracy', 'confusion', 'roc',
                 'timings', 'ablation')

    def __init__(self, class_names, accuracy, per_class_accuracy, confusion, roc,
                 timings=None, ablation=None):
        self.class_names = list(class_names)
        self.accuracy = accuracy
        self.per_class_accuracy = per_class_accuracy
        self.confusion = confusion
        self.roc = roc
        self.timings = dict(timings) if timings else {}
        self.ablation = dict(ablation) if ablation else {}

    @property
    def auc(self):
        '''The AUC of each class, in class order.'''

        return [curve.auc for curve in self.roc]

    def metric_rows(self):
        '''Return (metric name, value) pairs for every deterministic metric, in a fixed
        order. Stage timings are not included.'''

        rows = [('accuracy', self.accuracy)]
        for name, value in zip(self.class_names, self.per_class_accuracy):
            rows.append(('accuracy_' + name, value))
        for name, curve in zip(self.class_names, self.roc):
            rows.append(('auc_' + name, curve.auc))
        for name, value in self.ablation.items():
            rows.append(('ablation_' + name, value))
        return rows

def compute_metrics(true_labels, predicted_labels, scores, class_names=None):
    '''Compute the MetricsReport for a test set given its true labels, the predicted
    labels and the n x C score matrix. The confusion matrix is indexed [true][predicted]
    and the ROC curve of class c thresholds the margin of score_c over the best other
    score.'''

    true_labels = np.asarray(true_labels, dtype=int)
    predicted_labels = np.asarray(predicted_labels, dtype=int)
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    count = true_labels.shape[0]
    if predicted_labels.shape != (count,) or scores.shape[0] != count:
        raise InputError('Labels, predictions and scores must have the same length')
    if count == 0:
        raise InputError('Metrics need at least one test sample')
    classes = scores.shape[1]
    if classes < 2:
        raise InputError('Metrics need at least two classes')
    if np.any((true_labels < 0) | (true_labels >= classes)) \
            or np.any((predicted_labels < 0) | (predicted_labels >= classes)):
        raise InputError('Labels must lie in [0, {0})'.format(classes))
    if class_names is None:
        class_names = [str(c) for c in range(classes)]
    elif len(class_names) != classes:
        raise InputError('There must be one class name per score column')

    confusion = np.zeros((classes, classes), dtype=int)
    np.add.at(confusion, (true_labels, predicted_labels), 1)
    totals = confusion.sum(axis=1)
    with np.errstate(invalid='ignore', divide='ignore'):
        per_class = np.where(totals > 0, np.diag(confusion) / np.maximum(totals, 1), np.nan)

    margins = score_margins(scores)
    roc = [roc_curve(margins[:, c], true_labels == c) for c in range(classes)]
    accuracy = float(np.count_nonzero(true_labels == predicted_labels)) / count
    return MetricsReport(class_names, accuracy, [float(v) for v in per_class], confusion, roc)

def nearest_class_mean(train_features, train_labels, test_features):
    '''Classify each test feature vector as the class whose training mean is nearest in
    Euclidean distance. Features may have any shape after the first axis. Returns the
    predicted labels and the n x C matrix of negated squared distances.'''

    train = np.asarray(train_features, dtype=np.float64)
    test = np.asarray(test_features, dtype=np.float64)
    train = train.reshape(train.shape[0], -1)
    test = test.reshape(test.shape[0], -1)
    train_labels = np.asarray(train_labels)
    classes = int(train_labels.max()) + 1
    means = np.array([train[train_labels == c].mean(axis=0) if np.any(train_labels == c)
                      else np.full(train.shape[1], np.inf) for c in range(classes)])
    diff = test[:, np.newaxis, :] - means[np.newaxis]
    scores = -np.sum(diff * diff, axis=2)
    return np.argmax(scores, axis=1), scores
