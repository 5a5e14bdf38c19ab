'''This module wires the gaitfusion modules into an experiment: samples are loaded and
split, normalized with training statistics, encoded by the SFE and CorrMNN fitted on the
training partition, and classified by per-class HMM switches fitted on the training
partition's fused features. The metrics, features and fitted models are written to an
output directory.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import csv
import logging
import os

import numpy as np

from . import DataFormatError, DataSource, InputError
from . import artifacts, corrmnn, discriminator, ingest, metrics, serialize_binary, \
    serialize_json, sfe
from .stagelog import StageLog

logger = logging.getLogger(__name__)

STAGES = ('load', 'split', 'normalize', 'sfe', 'corrmnn', 'discriminator', 'score',
          'report')

class ExperimentResult:
    '''What an experiment produced: the metrics report (None for an export run), the
    paths of the files written and the loss curve of CorrMNN training.'''

    __slots__ = ('report', 'paths', 'loss_curve')

    def __init__(self, report, paths, loss_curve):
        self.report = report
        self.paths = paths
        self.loss_curve = loss_curve

def class_names(config, samples):
    '''Return the class names of an experiment: the configured names, or the class
    indices as text.'''

    if config.dataset.class_names:
        return list(config.dataset.class_names)
    count = config._class_count() or (max(sample.label for sample in samples) + 1)
    return [str(label) for label in range(count)]

def _record_loader(config):
    dataset = config.dataset

    def load_channel(path, columns, header, rate):
        return ingest.load_csv_channel(path, columns, header=header,
                                       delimiter=dataset.field_delimiter(),
                                       sample_rate_hz=rate)

    def loader(entry):
        subject_id, label, path1, path2 = entry
        try:
            if dataset.source == DataSource.GAITNDD:
                record = ingest.load_gaitndd_record(path1, label, subject_id,
                                                    dataset.outlier_factor,
                                                    dataset.channel1_rate_hz)
            else:
                record = ingest.BimodalRecord(
                    subject_id, label,
                    load_channel(path1, dataset.channel1_columns, dataset.channel1_header,
                                 dataset.channel1_rate_hz))
            return record.with_channel2(load_channel(path2, dataset.channel2_columns,
                                                     dataset.channel2_header,
                                                     dataset.channel2_rate_hz))
        except OSError as err:
            raise DataFormatError('Unable to read record {0}: {1}'
                                  .format(subject_id, err)) from err

    return loader

def load_samples(config, threads=1):
    '''Load or generate the samples of an experiment. Returns the samples and the manifest
    entries describing them.'''

    window = config.window
    if config.dataset.source == DataSource.SYNTHETIC:
        synth = config.synth
        samples = ingest.synth_bimodal(synth.classes, synth.samples_per_class,
                                       (window.channel1_timestep, window.channel2_timestep),
                                       (synth.channel1_dim, synth.channel2_dim),
                                       synth.separation, config.experiment.seed,
                                       synth.coupling, synth.persistence)
        entries = [ingest.ManifestEntry('synthetic', label,
                                        synth.samples_per_class
                                        * (window.channel1_timestep
                                           + window.channel2_timestep),
                                        0, 0, synth.samples_per_class)
                   for label in range(synth.classes)]
        return samples, entries

    record_list = ingest.read_record_list(config.dataset.record_list,
                                          config.dataset.class_names)
    records = ingest.load_records(record_list, _record_loader(config), threads)
    samples = []
    entries = []
    for record in records:
        record_samples, entry = ingest.record_samples(record, window.channel1_timestep,
                                                      window.channel1_stride,
                                                      window.channel2_timestep,
                                                      window.channel2_stride)
        if entry.note:
            logger.info('%s: %s', entry.source, entry.note)
        samples.extend(record_samples)
        entries.append(entry)
    if not samples:
        raise DataFormatError('No record produced a complete pair of windows')
    return samples, entries

def feature_header(d_out, nodes, width):
    '''Return the header of features.csv.'''

    header = ['label']
    header.extend('sp_{0}'.format(i) for i in range(d_out))
    header.extend('tp_{0}_{1}'.format(node, i) for node in range(nodes) for i in range(width))
    return header

def feature_rows(labels, f_sp, f_tp):
    '''Return the rows of features.csv: label, F_sp, then F_tp flattened node by node.'''

    f_sp = np.asarray(f_sp)
    f_tp = np.asarray(f_tp)
    return [[int(label)] + list(sp) + list(tp.ravel())
            for label, sp, tp in zip(labels, f_sp, f_tp)]

def export_features(samples, f_sp, f_tp, path):
    '''Atomically write features.csv for the samples, their spatial features (n x d_out)
    and their temporal features (n x T x w).'''

    f_sp = np.asarray(f_sp)
    f_tp = np.asarray(f_tp)
    if f_sp.shape[0] != len(samples) or f_tp.shape[0] != len(samples):
        raise InputError('There must be one F_sp and one F_tp per sample')
    header = feature_header(f_sp.shape[1], f_tp.shape[1], f_tp.shape[2])
    rows = feature_rows([sample.label for sample in samples], f_sp, f_tp)
    artifacts.atomic_write(path, artifacts.csv_text(header, rows))

def read_scores(path):
    '''Read scores.csv. Returns the true labels, the predicted labels, the n x C score
    matrix and the class names taken from the score column headers.'''

    try:
        with open(path, 'r', newline='') as scores_file:
            rows = list(csv.reader(scores_file))
    except OSError as err:
        raise DataFormatError('Unable to read {0}: {1}'.format(path, err)) from err
    if not rows or rows[0][:2] != ['label', 'predicted'] or len(rows[0]) < 4:
        raise DataFormatError('{0} is not a scores file'.format(path))
    names = [column[len('score_'):] for column in rows[0][2:]]
    try:
        labels = np.array([int(row[0]) for row in rows[1:]])
        predicted = np.array([int(row[1]) for row in rows[1:]])
        scores = np.array([[float(v) for v in row[2:]] for row in rows[1:]])
    except (ValueError, IndexError) as err:
        raise DataFormatError('{0}: malformed row: {1}'.format(path, err)) from err
    if scores.ndim != 2 or scores.shape[1] != len(names):
        raise DataFormatError('{0}: ragged score rows'.format(path))
    return labels, predicted, scores, names

def write_metrics(outputs, report):
    '''Write metrics.csv, confusion.csv and one roc_<class>.csv per class.'''

    outputs.write_csv('metrics.csv', ('metric', 'value'), report.metric_rows())
    outputs.write_csv('confusion.csv', ['true'] + report.class_names,
                      [[name] + list(row)
                       for name, row in zip(report.class_names, report.confusion)])
    for name, curve in zip(report.class_names, report.roc):
        outputs.write_csv('roc_{0}.csv'.format(name), ('threshold', 'fpr', 'tpr'),
                          curve.rows())

def _save(outputs, name, model):
    outputs.write(name + '.bin', serialize_binary.REGISTRY.encode(model))
    outputs.write(name + '.txt', serialize_binary.text_dump(model))

def run_experiment(config, out_dir, threads=1, log=None, export_only=False):
    '''Run an experiment described by an ExperimentConfig and write its outputs to
    out_dir. Stages run in the order of STAGES and are reported to the StageLog; an error
    in any stage is raised as StageError after every file written so far has been
    removed. With export_only the run stops after CorrMNN training and writes only the
    features and the SFE and CorrMNN models.'''

    log = log if log is not None else StageLog()
    outputs = artifacts.OutputSet(out_dir)
    seed = config.experiment.seed
    try:
        with log.stage('load'):
            samples, manifest = load_samples(config, threads)
            names = class_names(config, samples)
            if max(sample.label for sample in samples) >= len(names):
                raise DataFormatError('Labels exceed the {0} configured classes'
                                      .format(len(names)))
            log.note('Loaded {0} samples in {1} classes'.format(len(samples), len(names)))

        with log.stage('split'):
            train, test = ingest.split(samples, config.experiment.train_fraction, seed)
            log.note('{0} training and {1} test samples'.format(len(train), len(test)))

        with log.stage('normalize'):
            train, test, _ = ingest.normalize_fit_apply(train, test)

        with log.stage('sfe'):
            section = config.sfe
            sfe_models = sfe.fit_sfe(train, section.k_direct, section.k_time, section.k_freq,
                                     section.strong_ratio, section.d_out, seed,
                                     section.gmm_iterations)
            sp_train = sfe.encode_samples(train, sfe_models)
            sp_test = sfe.encode_samples(test, sfe_models)
            if config.experiment.ablation and not export_only:
                fisher_train = sfe.fisher_matrix(train, sfe_models)
                fisher_test = sfe.fisher_matrix(test, sfe_models)

        with log.stage('corrmnn'):
            train_config = corrmnn.TrainConfig.from_section(config.corrmnn, seed)
            network = corrmnn.train_corrmnn(train, train_config, len(names),
                                            config.window.nodes)
            tp_train = corrmnn.temporal_features(network, train)
            tp_test = corrmnn.temporal_features(network, test)
            baseline = network
            if config.experiment.ablation and not export_only \
                    and train_config.corr_weight > 0.0:
                log.note('Training the baseline network without the correlation term')
                baseline = corrmnn.train_corrmnn(train, train_config.without_correlation(),
                                                 len(names), config.window.nodes)

        if export_only:
            with log.stage('report'):
                _write_features(outputs, train + test, np.concatenate((sp_train, sp_test)),
                                np.concatenate((tp_train, tp_test)))
                _write_models(outputs, sfe_models, network, ())
                outputs.write_csv('loss_curve.csv', ('epoch', 'l_total'),
                                  enumerate(network.loss_curve))
            return ExperimentResult(None, list(outputs.written), network.loss_curve)

        with log.stage('discriminator'):
            fused_train = discriminator.fuse_features(sp_train, tp_train)
            fused_test = discriminator.fuse_features(sp_test, tp_test)
            train_labels = np.array([sample.label for sample in train])
            by_class = [list(fused_train[train_labels == label])
                        for label in range(len(names))]
            switches = discriminator.fit_switches(by_class, config.hmm.states,
                                                  config.hmm.iterations, seed,
                                                  config.hmm.var_floor, threads)

        with log.stage('score'):
            test_labels = np.array([sample.label for sample in test])
            scores = discriminator.score_sequences(switches, list(fused_test))
            predicted = np.argmax(scores, axis=1)
            report = metrics.compute_metrics(test_labels, predicted, scores, names)
            if config.experiment.ablation:
                report.ablation = ablation(train_labels, test_labels, sp_train, sp_test,
                                           tp_train, tp_test, network, test, fisher_train,
                                           fisher_test, baseline)

        with log.stage('report'):
            write_metrics(outputs, report)
            outputs.write_csv('scores.csv',
                              ['label', 'predicted'] + ['score_' + n for n in names],
                              [[int(t), int(p)] + list(row)
                               for t, p, row in zip(test_labels, predicted, scores)])
            _write_features(outputs, train + test, np.concatenate((sp_train, sp_test)),
                            np.concatenate((tp_train, tp_test)))
            outputs.write_csv('loss_curve.csv', ('epoch', 'l_total'),
                              enumerate(network.loss_curve))
            _write_models(outputs, sfe_models, network, switches)
            outputs.write('config.json', serialize_json.dumps(config))
            if config.dataset.manifest:
                outputs.write('manifest.txt', ingest.manifest_text(manifest))

        report.timings = dict(log.timings)
        outputs.write_csv('timings.csv', ('stage', 'seconds'), report.timings.items())
        outputs.write('report.json', serialize_json.dumps(report))
        log.note('Test accuracy {0:.4f}'.format(report.accuracy))
        return ExperimentResult(report, list(outputs.written), network.loss_curve)

    except BaseException:
        outputs.remove_all()
        raise

def _write_features(outputs, samples, f_sp, f_tp):
    header = feature_header(f_sp.shape[1], f_tp.shape[1], f_tp.shape[2])
    outputs.write_csv('features.csv', header,
                      feature_rows([sample.label for sample in samples], f_sp, f_tp))

def _write_models(outputs, sfe_models, network, switches):
    _save(outputs, 'sfe_gmm_direct', sfe_models.gmm_direct)
    _save(outputs, 'sfe_gmm_time', sfe_models.gmm_time)
    _save(outputs, 'sfe_gmm_freq', sfe_models.gmm_freq)
    _save(outputs, 'sfe_lda', sfe_models.lda)
    _save(outputs, 'corrmnn', network)
    for label, switch in enumerate(switches):
        _save(outputs, 'hmm_{0}'.format(label), switch)

def ablation(train_labels, test_labels, sp_train, sp_test, tp_train, tp_test, network,
             test, fisher_train, fisher_test, baseline):
    '''Return the test accuracy of the component-only classifiers: nearest class mean on
    the Fisher vectors before LDA, on F_sp and on flattened F_tp, then the class heads of
    the network trained without the correlation term (baseline) and of the CorrMNN.'''

    def accuracy(predicted):
        return float(np.mean(np.asarray(predicted) == test_labels))

    def nearest_mean(train_features, test_features):
        predicted, _ = metrics.nearest_class_mean(train_features, train_labels,
                                                  test_features)
        return accuracy(predicted)

    return {'fisher_nearest_mean': nearest_mean(fisher_train, fisher_test),
            'sfe_nearest_mean': nearest_mean(sp_train, sp_test),
            'corrmnn_nearest_mean': nearest_mean(tp_train, tp_test),
            'dcmnn_class_heads': accuracy(corrmnn.predict_classes(baseline, test)[0]),
            'corrmnn_class_heads': accuracy(corrmnn.predict_classes(network, test)[0])}

def metrics_from_scores(scores_path, out_dir=None):
    '''Recompute the metrics of a scores.csv file and write metrics.csv, confusion.csv and
    the ROC files next to it (or into out_dir). Returns the MetricsReport.'''

    labels, predicted, scores, names = read_scores(scores_path)
    report = metrics.compute_metrics(labels, predicted, scores, names)
    outputs = artifacts.OutputSet(out_dir or os.path.dirname(os.path.abspath(scores_path)))
    write_metrics(outputs, report)
    return report
