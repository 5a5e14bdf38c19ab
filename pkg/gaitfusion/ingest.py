'''This module loads bimodal gait records, cuts them into windows, pairs the windows into
samples, normalizes and splits the samples, and generates synthetic bimodal datasets
with known class structure.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import concurrent.futures
import csv
import logging
import math
import os

import numpy as np

from . import DataFormatError, InputError, StratificationError

logger = logging.getLogger(__name__)

GAITNDD_COLUMNS = 13
GAITNDD_FEATURE_NAMES = ('left_stride_s', 'right_stride_s', 'left_swing_s', 'right_swing_s',
                         'left_swing_pct', 'right_swing_pct', 'left_stance_s',
                         'right_stance_s', 'left_stance_pct', 'right_stance_pct',
                         'double_support_s', 'double_support_pct')

class ChannelRecord:
    '''The frames of one channel of a record, as a frames x features array, together with
    the counts of input lines that were skipped as malformed or dropped as outliers.'''

    __slots__ = ('frames', 'source', 'sample_rate_hz', 'skipped', 'cleaned', 'column_names')

    def __init__(self, frames, source=None, sample_rate_hz=1.0, skipped=0, cleaned=0,
                 column_names=None):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise InputError('Channel frames must be a non-empty two-dimensional array')
        if not np.all(np.isfinite(frames)):
            raise InputError('Channel frames must be finite')
        self.frames = frames
        self.source = source
        self.sample_rate_hz = sample_rate_hz
        self.skipped = skipped
        self.cleaned = cleaned
        self.column_names = column_names

    def __len__(self):
        return self.frames.shape[0]

    @property
    def width(self):
        '''The number of features in each frame.'''

        return self.frames.shape[1]

class BimodalRecord:
    '''One subject's recording in both modalities. channel2 may be None until it is
    attached with with_channel2.'''

    __slots__ = ('subject_id', 'label', 'channel1', 'channel2')

    def __init__(self, subject_id, label, channel1, channel2=None):
        if label < 0:
            raise InputError('Class labels must be non-negative, not {0}'.format(label))
        self.subject_id = subject_id
        self.label = label
        self.channel1 = channel1
        self.channel2 = channel2

    def with_channel2(self, channel2):
        '''Return a copy of the record with the given second channel.'''

        return BimodalRecord(self.subject_id, self.label, self.channel1, channel2)

class BimodalSample:
    '''One training or test unit: a window from each channel (timestep x features) and
    the class label.'''

    __slots__ = ('x1', 'x2', 'label', 'subject_id')

    def __init__(self, x1, x2, label, subject_id=None):
        self.x1 = np.asarray(x1, dtype=np.float64)
        self.x2 = np.asarray(x2, dtype=np.float64)
        self.label = int(label)
        self.subject_id = subject_id

    def __repr__(self):
        return 'BimodalSample(x1={0}, x2={1}, label={2})'.format(self.x1.shape, self.x2.shape,
                                                               self.label)

class ManifestEntry:
    '''A line of the dataset manifest describing what was kept from one record.'''

    __slots__ = ('source', 'label', 'frames_kept', 'frames_skipped', 'frames_cleaned',
                 'windows', 'note')

    HEADER = ('source', 'label', 'frames_kept', 'frames_skipped', 'frames_cleaned',
              'windows', 'note')

    def __init__(self, source, label, frames_kept, frames_skipped, frames_cleaned=0,
                 windows=0, note=''):
        self.source = source
        self.label = label
        self.frames_kept = frames_kept
        self.frames_skipped = frames_skipped
        self.frames_cleaned = frames_cleaned
        self.windows = windows
        self.note = note

    def values(self):
        '''Return the entry's values in HEADER order.'''

        return [getattr(self, name) for name in self.HEADER]

def manifest_text(entries):
    '''Return the manifest as tab-separated text with a header line.'''

    lines = ['\t'.join(ManifestEntry.HEADER)]
    for entry in entries:
        lines.append('\t'.join(str(value) for value in entry.values()))
    return '\n'.join(lines) + '\n'

def drop_outlier_frames(frames, factor):
    '''Remove frames in which any value exceeds factor times the median absolute value of
    its column. Columns with a zero median absolute value are not tested. Returns the
    remaining frames and the number removed.'''

    medians = np.median(np.abs(frames), axis=0)
    tested = medians > 0.0
    if not np.any(tested):
        return frames, 0
    outliers = np.any(np.abs(frames[:, tested]) > factor * medians[tested], axis=1)
    return frames[~outliers], int(np.count_nonzero(outliers))

def load_gaitndd_record(path, label, subject_id=None, outlier_factor=10.0,
                        sample_rate_hz=1.0):
    '''Load a gaitndd stride-timing text file: whitespace-separated lines of 13 numbers,
    the first being the elapsed time in seconds. Malformed lines are skipped and counted,
    the elapsed time must not decrease, and outlier frames are dropped as in
    drop_outlier_frames. The returned BimodalRecord holds the 12 remaining columns as
    channel 1; channel 2 must be attached separately.'''

    rows = []
    times = []
    skipped = 0
    content_lines = 0

    with open(path, 'r') as record_file:
        for line_number, line in enumerate(record_file, start=1):
            parts = line.split()
            if not parts:
                continue
            content_lines += 1
            if len(parts) != GAITNDD_COLUMNS:
                skipped += 1
                continue
            try:
                values = [float(part) for part in parts]
            except ValueError:
                skipped += 1
                continue
            if not all(math.isfinite(value) for value in values):
                skipped += 1
                continue
            if times and values[0] < times[-1][1]:
                raise DataFormatError('{0}: elapsed time decreases at line {1} ({2} < {3})'
                                      .format(path, line_number, values[0], times[-1][1]))
            times.append((line_number, values[0]))
            rows.append(values[1:])

    if content_lines == 0:
        raise DataFormatError('{0}: file is empty'.format(path))
    if not rows:
        raise DataFormatError('{0}: no line has {1} numeric columns'
                              .format(path, GAITNDD_COLUMNS))
    if skipped:
        logger.info('%s: skipped %d malformed lines', path, skipped)

    frames, cleaned = drop_outlier_frames(np.array(rows), outlier_factor)
    if frames.shape[0] == 0:
        raise DataFormatError('{0}: every frame was rejected as an outlier'.format(path))

    channel1 = ChannelRecord(frames, source=path, sample_rate_hz=sample_rate_hz,
                             skipped=skipped, cleaned=cleaned,
                             column_names=GAITNDD_FEATURE_NAMES)
    if subject_id is None:
        subject_id = os.path.splitext(os.path.basename(path))[0]
    return BimodalRecord(subject_id, label, channel1)

def load_csv_channel(path, columns, header=False, delimiter=',', sample_rate_hz=1.0):
    '''Load the selected columns of a delimiter-separated numeric table. columns may hold
    column indices or, when header is set, column names. A delimiter of None splits
    fields on runs of whitespace. Every row must have the same number of fields.'''

    with open(path, 'r', newline='') as csv_file:
        if delimiter is None:
            rows = [line.split() for line in csv_file if line.split()]
        else:
            rows = [row for row in csv.reader(csv_file, delimiter=delimiter) if row]

    column_names = None
    if header:
        if not rows:
            raise DataFormatError('{0}: file is empty'.format(path))
        column_names = [name.strip() for name in rows[0]]
        rows = rows[1:]

    if not rows:
        raise DataFormatError('{0}: file has no data rows'.format(path))

    width = len(rows[0])
    for row_number, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise DataFormatError('{0}: row {1} has {2} fields, expected {3}'
                                  .format(path, row_number, len(row), width))

    indices = []
    for column in columns:
        if isinstance(column, str):
            if column_names is None or column not in column_names:
                raise DataFormatError('{0}: unknown column \'{1}\''.format(path, column))
            indices.append(column_names.index(column))
        elif 0 <= column < width:
            indices.append(column)
        else:
            raise DataFormatError('{0}: unknown column {1} (the table has {2} columns)'
                                  .format(path, column, width))

    try:
        frames = np.array([[float(row[i]) for i in indices] for row in rows])
    except ValueError as err:
        raise DataFormatError('{0}: non-numeric value: {1}'.format(path, err)) from err
    if not np.all(np.isfinite(frames)):
        raise DataFormatError('{0}: non-finite value in the selected columns'.format(path))

    selected_names = tuple(column_names[i] for i in indices) if column_names else None
    return ChannelRecord(frames, source=path, sample_rate_hz=sample_rate_hz,
                         column_names=selected_names)

def window(frames, timestep, stride):
    '''Cut frames (frames x features) into contiguous windows of timestep frames, starting
    every stride frames. Returns a list of (timestep x features) arrays, which is empty if
    there are fewer than timestep frames.'''

    if timestep < 1 or stride < 1:
        raise InputError('timestep and stride must be at least 1')
    frames = np.asarray(frames)
    if frames.shape[0] < timestep:
        return []
    count = (frames.shape[0] - timestep) // stride + 1
    return [frames[i * stride:i * stride + timestep].copy() for i in range(count)]

def record_samples(record, channel1_timestep, channel1_stride, channel2_timestep,
                   channel2_stride):
    '''Window both channels of a record and pair the i-th window of each channel into a
    BimodalSample, dropping unpaired windows. Returns the samples and a ManifestEntry.'''

    if record.channel2 is None:
        raise InputError('Record {0} has no second channel'.format(record.subject_id))

    windows1 = window(record.channel1.frames, channel1_timestep, channel1_stride)
    windows2 = window(record.channel2.frames, channel2_timestep, channel2_stride)
    samples = [BimodalSample(x1, x2, record.label, record.subject_id)
               for x1, x2 in zip(windows1, windows2)]

    notes = []
    for channel, windows, timestep in ((record.channel1, windows1, channel1_timestep),
                                       (record.channel2, windows2, channel2_timestep)):
        if not windows:
            notes.append('{0} frames in {1} is fewer than timestep {2}'
                         .format(len(channel), channel.source, timestep))
    if len(windows1) != len(windows2) and windows1 and windows2:
        notes.append('dropped {0} unpaired windows'.format(abs(len(windows1) - len(windows2))))

    entry = ManifestEntry(record.channel1.source or record.subject_id,
                          record.label,
                          len(record.channel1) + len(record.channel2),
                          record.channel1.skipped + record.channel2.skipped,
                          record.channel1.cleaned + record.channel2.cleaned,
                          len(samples),
                          '; '.join(notes))
    return samples, entry

def read_record_list(path, class_names=None):
    '''Read a record list file: one record per line with subject id, class label and the
    paths of the two channel files, separated by whitespace. Labels may be class indices
    or, if class_names is given, names from it. Relative paths are taken relative to the
    list file. Lines starting with '#' are ignored.'''

    base_dir = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, 'r') as list_file:
        for line_number, line in enumerate(list_file, start=1):
            parts = line.split()
            if not parts or parts[0].startswith('#'):
                continue
            if len(parts) != 4:
                raise DataFormatError('{0}: line {1} should have 4 fields, not {2}'
                                      .format(path, line_number, len(parts)))
            subject_id, label_text, path1, path2 = parts
            if class_names and label_text in class_names:
                label = class_names.index(label_text)
            else:
                try:
                    label = int(label_text)
                except ValueError:
                    raise DataFormatError('{0}: line {1} has unknown class \'{2}\''
                                          .format(path, line_number, label_text)) from None
            entries.append((subject_id, label,
                            os.path.join(base_dir, path1), os.path.join(base_dir, path2)))
    if not entries:
        raise DataFormatError('{0}: no records listed'.format(path))
    return entries

def load_records(entries, loader, threads=1):
    '''Apply loader to every entry of a record list, using up to threads worker threads.
    Results are returned in entry order.'''

    if threads <= 1:
        return [loader(entry) for entry in entries]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(loader, entries))

class NormStats:
    '''Per-feature means and standard deviations for each channel, computed over every
    frame of the training windows.'''

    __slots__ = ('mean1', 'std1', 'mean2', 'std2')

    def __init__(self, mean1, std1, mean2, std2):
        self.mean1 = mean1
        self.std1 = std1
        self.mean2 = mean2
        self.std2 = std2

    @classmethod
    def fit(cls, samples):
        '''Compute the statistics from a list of BimodalSample.'''

        if not samples:
            raise InputError('Normalization statistics need at least one sample')
        frames1 = np.concatenate([sample.x1 for sample in samples], axis=0)
        frames2 = np.concatenate([sample.x2 for sample in samples], axis=0)
        return cls(frames1.mean(axis=0), frames1.std(axis=0),
                   frames2.mean(axis=0), frames2.std(axis=0))

    @staticmethod
    def _scale(values, mean, std):
        safe_std = np.where(std > 0.0, std, 1.0)
        return np.where(std > 0.0, (values - mean) / safe_std, 0.0)

    def apply(self, samples):
        '''Return new samples with both channels z-scored by these statistics. Features
        with zero training variance map to zero.'''

        return [BimodalSample(self._scale(sample.x1, self.mean1, self.std1),
                              self._scale(sample.x2, self.mean2, self.std2),
                              sample.label, sample.subject_id)
                for sample in samples]

def normalize_fit_apply(train, test):
    '''Fit normalization statistics on the training samples only and apply them to both
    partitions. Returns the normalized training and test samples and the statistics.'''

    stats = NormStats.fit(train)
    return stats.apply(train), stats.apply(test), stats

def split(samples, train_fraction, seed):
    '''Split samples into training and test partitions, stratified by class and
    deterministic for a given seed. Each class contributes round(train_fraction * n)
    samples to the training partition, but at least one sample to each partition.'''

    if not 0.0 < train_fraction < 1.0:
        raise InputError('train_fraction must lie strictly between 0 and 1')

    rng = np.random.default_rng(seed)
    labels = np.array([sample.label for sample in samples])
    train_indices = []
    test_indices = []

    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        if members.size < 2:
            raise StratificationError('Class {0} has {1} sample(s); at least 2 are needed to '
                                      'split it'.format(label, members.size))
        members = rng.permutation(members)
        n_train = int(math.floor(train_fraction * members.size + 0.5))
        n_train = min(max(n_train, 1), members.size - 1)
        train_indices.extend(members[:n_train])
        test_indices.extend(members[n_train:])

    return ([samples[i] for i in sorted(train_indices)],
            [samples[i] for i in sorted(test_indices)])

def _class_directions(classes, dim, rng):
    '''Return a classes x dim array of unit vectors. They are orthonormal when dim >=
    classes, evenly spaced around a random plane when 2 <= dim < classes, and evenly
    spaced points on the line (not unit length) when dim is 1.'''

    if dim >= classes:
        basis, _ = np.linalg.qr(rng.standard_normal((dim, classes)))
        return basis.T
    if dim >= 2:
        plane, _ = np.linalg.qr(rng.standard_normal((dim, 2)))
        angles = 2.0 * np.pi * np.arange(classes) / classes
        return np.outer(np.cos(angles), plane[:, 0]) + np.outer(np.sin(angles), plane[:, 1])
    return (np.arange(classes, dtype=np.float64) - 0.5 * (classes - 1)).reshape(classes, 1)

def _ar1(rng, length, dim, persistence):
    '''Generate a stationary first-order autoregressive process with unit variance.'''

    result = np.empty((length, dim))
    result[0] = rng.standard_normal(dim)
    innovation = math.sqrt(1.0 - persistence * persistence)
    for t in range(1, length):
        result[t] = persistence * result[t - 1] + innovation * rng.standard_normal(dim)
    return result

def synth_bimodal(classes, samples_per_class, timesteps=(10, 10), dims=(6, 8),
                  separation=5.0, seed=0, coupling=0.5, persistence=0.7):
    '''Generate a synthetic bimodal dataset. Each channel is a stationary autoregressive
    process with unit variance per feature, offset by a class-specific mean of length
    separation (orthogonal between classes where the dimension allows). A latent process
    shared by the two channels contributes a fraction coupling of each feature's
    variance, so the channels are correlated. separation = 0 makes all classes
    statistically identical. The result is a list of BimodalSample ordered by class.'''

    if separation < 0.0:
        raise InputError('separation must be non-negative')
    timestep1, timestep2 = timesteps
    dim1, dim2 = dims

    rng = np.random.default_rng(seed)
    means1 = separation * _class_directions(classes, dim1, rng)
    means2 = separation * _class_directions(classes, dim2, rng)

    length = max(timestep1, timestep2)
    rows1 = np.linspace(0, length - 1, timestep1).round().astype(int)
    rows2 = np.linspace(0, length - 1, timestep2).round().astype(int)
    latent_dim = min(dim1, dim2)
    shared = math.sqrt(coupling)
    own = math.sqrt(1.0 - coupling)

    samples = []
    for label in range(classes):
        for index in range(samples_per_class):
            latent = _ar1(rng, length, latent_dim, persistence)
            own1 = _ar1(rng, timestep1, dim1, persistence)
            own2 = _ar1(rng, timestep2, dim2, persistence)
            x1 = means1[label] + shared * latent[rows1][:, np.arange(dim1) % latent_dim] \
                 + own * own1
            x2 = means2[label] + shared * latent[rows2][:, np.arange(dim2) % latent_dim] \
                 + own * own2
            samples.append(BimodalSample(x1, x2, label,
                                         'synth-{0}-{1}'.format(label, index)))
    return samples
