'''This module implements the spatial feature extractor (SFE). Windows of each channel are
turned into sets of descriptors, each set is encoded as a Fisher vector against a
diagonal Gaussian mixture model, the three Fisher vectors of a sample are
group-normalized and concatenated, and linear discriminant analysis reduces the result
to the spatial feature F_sp.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import logging
import math
import warnings

import numpy as np
from scipy import stats
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

from . import DescriptorKind, DimensionError, InputError
from . import numkit

logger = logging.getLogger(__name__)

GMM_REL_TOL = 1e-7
GMM_COLLAPSE_WEIGHT = 1e-8
GMM_FLOOR_FACTOR = 1e-6
GMM_MIN_FLOOR = 1e-12
LDA_RIDGE_FACTOR = 1e-6
LDA_MIN_RIDGE = 1e-12

TIME_FEATURE_NAMES = ('mean', 'rms', 'skewness', 'kurtosis', 'waveform', 'crest',
                      'impulse', 'margin')

def _safe_ratio(numerator, denominator):
    denominator = np.asarray(denominator, dtype=np.float64)
    safe = np.where(denominator != 0.0, denominator, 1.0)
    return np.where(denominator != 0.0, numerator / safe, 0.0)

def time_domain_features(window):
    '''Return the eight time-domain statistics of a signal: mean, root mean square,
    skewness, excess kurtosis, waveform factor (rms / mean |x|), crest factor
    (peak / rms), impulse factor (peak / mean |x|) and margin factor
    (peak / (mean sqrt|x|)^2). Any factor with a zero denominator is 0, as are the
    skewness and kurtosis of a constant signal.

    A one-dimensional window gives 8 values. A two-dimensional (n x m) window is treated
    as m signals of length n and gives an (m x 8) array.'''

    x = np.asarray(window, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[:, np.newaxis]
    if x.ndim != 2 or x.shape[0] < 2:
        raise InputError('Time-domain features need a signal of at least 2 samples')

    mean = x.mean(axis=0)
    abs_x = np.abs(x)
    rms = np.sqrt(np.mean(x * x, axis=0))
    mean_abs = abs_x.mean(axis=0)
    peak = abs_x.max(axis=0)
    mean_sqrt = np.mean(np.sqrt(abs_x), axis=0)

    centered_var = np.mean((x - mean) ** 2, axis=0)
    constant = centered_var <= (np.finfo(np.float64).resolution * mean) ** 2
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RuntimeWarning)
        skewness = np.where(constant, 0.0, stats.skew(x, axis=0))
        kurt = np.where(constant, 0.0, stats.kurtosis(x, axis=0, fisher=True))

    result = np.column_stack((mean, rms, skewness, kurt,
                              _safe_ratio(rms, mean_abs),
                              _safe_ratio(peak, rms),
                              _safe_ratio(peak, mean_abs),
                              _safe_ratio(peak, mean_sqrt * mean_sqrt)))
    return result[0] if single else result

def freq_domain_features(window):
    '''Return the magnitude of the discrete Fourier transform of a length-D signal,
    accumulating the real and imaginary parts separately from the cosine and sine terms
    of exp(-i 2 pi a b / D). Entry b is the magnitude at bin b (bin 0 is the DC term).

    A two-dimensional (D x m) window is treated as m signals of length D and gives an
    (m x D) array.'''

    x = np.asarray(window, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] < 1:
        raise InputError('Frequency-domain features need a signal of at least 1 sample')

    length = x.shape[0]
    phase = 2.0 * np.pi * np.outer(np.arange(length), np.arange(length)) / length
    real = np.cos(phase) @ x
    imag = -np.sin(phase) @ x
    magnitude = np.sqrt(real * real + imag * imag)
    return magnitude if x.ndim == 1 else magnitude.T

class DescriptorSet:
    '''T descriptors of dimension D derived from one window, and the kind of derivation
    used.'''

    __slots__ = ('vectors', 'source_kind')

    def __init__(self, vectors, source_kind):
        self.vectors = numkit.as_matrix(vectors, 'descriptors')
        self.source_kind = source_kind

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        '''The dimension D of each descriptor.'''

        return self.vectors.shape[1]

def describe(sample, kind):
    '''Return the DescriptorSet of the given kind for a BimodalSample. DIRECT uses the
    frames of channel 1 unchanged. TIME_STATS and FREQ_SPECTRUM treat each feature column
    of the channel 2 window as a signal, giving one descriptor per column.'''

    if kind == DescriptorKind.DIRECT:
        return DescriptorSet(sample.x1, kind)
    if kind == DescriptorKind.TIME_STATS:
        return DescriptorSet(time_domain_features(sample.x2), kind)
    if kind == DescriptorKind.FREQ_SPECTRUM:
        return DescriptorSet(freq_domain_features(sample.x2), kind)
    raise ValueError('Unknown descriptor kind {0}'.format(kind))

def _vectors(descriptors):
    if isinstance(descriptors, DescriptorSet):
        return descriptors.vectors
    return numkit.as_matrix(descriptors, 'descriptors')

class GmmModel:
    '''A Gaussian mixture model with diagonal covariances. weights has K entries, means
    and variances are K x D. trace holds the log-likelihood of the training descriptors
    at each EM iteration and reseeded counts the collapsed components that had to be
    re-seeded.'''

    __slots__ = ('weights', 'means', 'variances', 'var_floor', 'trace', 'reseeded')

    def __init__(self, weights, means, variances, var_floor=None, trace=None, reseeded=0):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = numkit.as_matrix(means, 'means')
        self.variances = numkit.as_matrix(variances, 'variances')
        if self.weights.shape != (self.means.shape[0],) \
                or self.variances.shape != self.means.shape:
            raise InputError('GMM weights, means and variances have inconsistent shapes')
        if np.any(self.variances <= 0.0):
            raise InputError('GMM variances must be positive')
        self.var_floor = var_floor
        self.trace = list(trace) if trace is not None else []
        self.reseeded = reseeded

    @property
    def k(self):
        '''The number of components.'''

        return self.weights.shape[0]

    @property
    def dim(self):
        '''The dimension of the descriptors modelled.'''

        return self.means.shape[1]

    def log_joint(self, x):
        '''Return log(w_k N(x_t; mu_k, sigma_k^2)) as a T x K array.'''

        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise DimensionError('Descriptors have dimension {0} but the GMM has {1}'
                                 .format(x.shape[1], self.dim))
        diff = x[:, np.newaxis, :] - self.means[np.newaxis, :, :]
        mahalanobis = np.sum(diff * diff / self.variances[np.newaxis, :, :], axis=2)
        log_norm = -0.5 * (self.dim * math.log(2.0 * math.pi)
                           + np.sum(np.log(self.variances), axis=1))
        return np.log(self.weights) + log_norm - 0.5 * mahalanobis

    def log_likelihood(self, x):
        '''Return the total log-likelihood of the descriptors x.'''

        return float(np.sum(logsumexp(self.log_joint(x), axis=1)))

def gmm_fit(descriptors, k, seed=0, max_iters=100, var_floor=None):
    '''Fit a K-component diagonal GMM to the descriptors by expectation maximisation.

    Means are initialised by k-means++ seeding and variances by the global variance of
    the descriptors; the variance floor defaults to 1e-6 times the global variance.
    Iteration stops after max_iters iterations or when the relative improvement of the
    log-likelihood falls below 1e-7. A component whose weight falls below 1e-8 is
    re-seeded at the highest-variance descriptor: the one with the largest squared
    deviation from the global mean, in units of the global variance.'''

    x = _vectors(descriptors)
    count, dim = x.shape
    if k < 1:
        raise InputError('A GMM needs at least one component')
    if count < k:
        raise InputError('{0} descriptors are too few for a {1}-component GMM'
                         .format(count, k))

    global_var = x.var(axis=0)
    if var_floor is None:
        floor = np.maximum(GMM_FLOOR_FACTOR * global_var, GMM_MIN_FLOOR)
    else:
        floor = np.full(dim, float(var_floor))
    start_var = np.maximum(global_var, floor)
    spread = np.sum((x - x.mean(axis=0)) ** 2 / start_var, axis=1)
    # Successive re-seeds walk down this order
    reseed_order = np.argsort(-spread, kind='stable')

    if k == 1:
        means = x.mean(axis=0, keepdims=True)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', UserWarning)
            means, _ = kmeans2(x, k, minit='++', seed=np.random.default_rng(seed))
    model = GmmModel(np.full(k, 1.0 / k), means, np.tile(start_var, (k, 1)), floor)

    previous = None
    for iteration in range(max_iters):
        log_joint = model.log_joint(x)
        per_datum = logsumexp(log_joint, axis=1)
        current = float(np.sum(per_datum))
        model.trace.append(current)
        if previous is not None and current - previous < GMM_REL_TOL * abs(previous):
            break
        previous = current

        resp = np.exp(log_joint - per_datum[:, np.newaxis])
        occupancy = resp.sum(axis=0)
        weights = occupancy / count
        means = model.means.copy()
        variances = model.variances.copy()
        live = weights >= GMM_COLLAPSE_WEIGHT

        means[live] = (resp[:, live].T @ x) / occupancy[live, np.newaxis]
        diff = x[:, np.newaxis, :] - means[np.newaxis, live, :]
        variances[live] = np.einsum('tk,tkd->kd', resp[:, live], diff * diff) \
            / occupancy[live, np.newaxis]
        variances = np.maximum(variances, floor)

        for component in np.flatnonzero(~live):
            datum = int(reseed_order[model.reseeded % count])
            logger.info('GMM component %d collapsed at iteration %d; re-seeding at '
                        'descriptor %d', component, iteration, datum)
            means[component] = x[datum]
            variances[component] = start_var
            weights[component] = 1.0 / count
            model.reseeded += 1
            previous = None

        model.weights = weights / weights.sum()
        model.means = means
        model.variances = variances

    return model

def gmm_posteriors(model, x):
    '''Return the posterior probabilities of each component for a descriptor x (K values)
    or for each row of a T x D array (a T x K array), computed in log space.'''

    x = np.asarray(x, dtype=np.float64)
    log_joint = model.log_joint(x)
    posteriors = np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))
    return posteriors[0] if x.ndim == 1 else posteriors

class FisherVector:
    '''The three blocks of a Fisher vector: K-1 weight gradients (component 0 is the
    reference), K x D mean gradients and K x D variance gradients, flattened
    component-major.'''

    __slots__ = ('weight', 'mean', 'variance', 'strong_ratio')

    def __init__(self, weight, mean, variance, strong_ratio=1.0):
        self.weight = np.asarray(weight, dtype=np.float64)
        self.mean = np.asarray(mean, dtype=np.float64)
        self.variance = np.asarray(variance, dtype=np.float64)
        self.strong_ratio = strong_ratio

    def blocks(self):
        '''Return the (weight, mean, variance) blocks.'''

        return (self.weight, self.mean, self.variance)

    def vector(self):
        '''Return the blocks concatenated into one array of length K(2D+1)-1.'''

        return np.concatenate(self.blocks())

    def __len__(self):
        return self.weight.size + self.mean.size + self.variance.size

def fisher_encode(model, descriptors, strong_ratio=1.0):
    '''Encode a set of descriptors as the gradient of their average log-likelihood under
    the GMM with respect to the mixture parameters, normalised by the diagonal
    approximation of the Fisher information and scaled by strong_ratio.'''

    x = _vectors(descriptors)
    if x.shape[1] != model.dim:
        raise DimensionError('Descriptors have dimension {0} but the GMM has {1}'
                             .format(x.shape[1], model.dim))
    if not 0.0 <= strong_ratio <= 1.0:
        raise InputError('strong_ratio must lie in [0, 1], not {0}'.format(strong_ratio))

    count = x.shape[0]
    gamma = gmm_posteriors(model, x)
    weights = model.weights
    sqrt_w = np.sqrt(weights)
    sigma = np.sqrt(model.variances)
    standardized = (x[:, np.newaxis, :] - model.means[np.newaxis]) / sigma[np.newaxis]

    weight_block = (np.sum(gamma[:, 1:], axis=0) / sqrt_w[1:]
                    - np.sum(gamma[:, 0]) * sqrt_w[1:] / weights[0]) / count
    mean_block = np.einsum('tk,tkd->kd', gamma, standardized) \
        / (count * sqrt_w[:, np.newaxis])
    variance_block = np.einsum('tk,tkd->kd', gamma, standardized * standardized - 1.0) \
        / (count * np.sqrt(2.0 * weights)[:, np.newaxis])

    return FisherVector(strong_ratio * weight_block, strong_ratio * mean_block.ravel(),
                        strong_ratio * variance_block.ravel(), strong_ratio)

def _group_scale(block):
    total = np.sum(np.abs(block))
    if total == 0.0:
        return np.zeros_like(block)
    return block * np.abs(block) / total

def group_normalize(fv):
    '''Replace each element g of each block by g|g| divided by the L1 norm of its block,
    then scale the whole vector to unit L2 norm. All-zero blocks and vectors stay
    zero.'''

    scaled = [_group_scale(block) for block in fv.blocks()]
    norm = math.sqrt(sum(float(np.dot(block, block)) for block in scaled))
    if norm > 0.0:
        scaled = [block / norm for block in scaled]
    return FisherVector(scaled[0], scaled[1], scaled[2], fv.strong_ratio)

class LdaModel:
    '''A fitted linear discriminant projection. projection is D_in x d_out, mean is the
    training mean subtracted before projecting and class_means holds the projected mean
    of each class in classes.'''

    __slots__ = ('projection', 'mean', 'classes', 'class_means', 'ridge')

    def __init__(self, projection, mean, classes, class_means, ridge=0.0):
        self.projection = numkit.as_matrix(projection, 'projection')
        self.mean = np.asarray(mean, dtype=np.float64)
        self.classes = np.asarray(classes)
        self.class_means = numkit.as_matrix(class_means, 'class_means')
        self.ridge = ridge

    @property
    def d_in(self):
        '''The input feature length.'''

        return self.projection.shape[0]

    @property
    def d_out(self):
        '''The projected feature length.'''

        return self.projection.shape[1]

def lda_fit(features, labels, d_out=None):
    '''Fit a linear discriminant projection maximising between-class scatter relative to
    the within-class scatter. The projection columns are the leading generalised
    eigenvectors, scaled so that the ridge-regularised within-class scatter becomes the
    identity. d_out defaults to C-1.'''

    x = numkit.as_matrix(features, 'features')
    labels = np.asarray(labels)
    if labels.shape != (x.shape[0],):
        raise InputError('There must be one label per feature vector')

    classes, counts = np.unique(labels, return_counts=True)
    if d_out is None:
        d_out = classes.size - 1
    if d_out < 1 or d_out > classes.size - 1:
        raise DimensionError('LDA output dimension {0} must lie between 1 and the class '
                             'count minus one ({1})'.format(d_out, classes.size - 1))
    if np.any(counts < 2):
        raise InputError('LDA needs at least 2 samples of every class')

    dim = x.shape[1]
    mean = x.mean(axis=0)
    within = np.zeros((dim, dim))
    between = np.zeros((dim, dim))
    for label in classes:
        members = x[labels == label]
        class_mean = members.mean(axis=0)
        centered = members - class_mean
        within += centered.T @ centered
        offset = class_mean - mean
        between += members.shape[0] * np.outer(offset, offset)

    ridge = max(LDA_RIDGE_FACTOR * np.trace(within) / dim, LDA_MIN_RIDGE)
    whitening = numkit.inv_sqrt_psd(within, ridge)
    _, vectors = numkit.sym_eig(whitening @ between @ whitening)
    projection = whitening @ vectors[:, :d_out]

    class_means = np.array([(x[labels == label] - mean).mean(axis=0) @ projection
                            for label in classes])
    return LdaModel(projection, mean, classes, class_means, ridge)

def lda_project(model, feature):
    '''Project a feature vector (or the rows of an n x D_in array) with a fitted LDA
    model.'''

    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape[-1] != model.d_in:
        raise DimensionError('Feature length {0} does not match the LDA input length {1}'
                             .format(feature.shape[-1], model.d_in))
    return (feature - model.mean) @ model.projection

class SfeModels:
    '''The fitted models used by sfe_pipeline: one GMM per descriptor kind and the LDA
    applied to the concatenated Fisher vectors.'''

    __slots__ = ('gmm_direct', 'gmm_time', 'gmm_freq', 'lda', 'strong_ratio')

    def __init__(self, gmm_direct, gmm_time, gmm_freq, lda=None, strong_ratio=1.0):
        self.gmm_direct = gmm_direct
        self.gmm_time = gmm_time
        self.gmm_freq = gmm_freq
        self.lda = lda
        self.strong_ratio = strong_ratio

    def gmms(self):
        '''Return (kind, GMM) pairs in the order the Fisher vectors are concatenated.'''

        return ((DescriptorKind.DIRECT, self.gmm_direct),
                (DescriptorKind.TIME_STATS, self.gmm_time),
                (DescriptorKind.FREQ_SPECTRUM, self.gmm_freq))

    def fisher_length(self):
        '''The length of the concatenated Fisher vectors.'''

        return sum(gmm.k * (2 * gmm.dim + 1) - 1 for _, gmm in self.gmms())

def fisher_features(sample, models):
    '''Return the concatenated group-normalised Fisher vectors of one sample, before the
    LDA projection.'''

    parts = [group_normalize(fisher_encode(gmm, describe(sample, kind),
                                           models.strong_ratio)).vector()
             for kind, gmm in models.gmms()]
    return np.concatenate(parts)

def fisher_matrix(samples, models):
    '''Return the pre-LDA Fisher features of each sample as an n x L array.'''

    return np.array([fisher_features(sample, models) for sample in samples])

def sfe_pipeline(sample, models):
    '''Return the spatial feature F_sp of one BimodalSample.'''

    if models.lda is None:
        raise InputError('The SFE models have no fitted LDA projection')
    return lda_project(models.lda, fisher_features(sample, models))

def encode_samples(samples, models):
    '''Return F_sp for each sample as an n x d_out array.'''

    return np.array([sfe_pipeline(sample, models) for sample in samples])

def fit_sfe(samples, k_direct=15, k_time=20, k_freq=20, strong_ratio=1.0, d_out=None,
            seed=0, max_iters=100):
    '''Fit the three GMMs on the pooled descriptors of the training samples, then fit the
    LDA projection on their Fisher vectors. Returns SfeModels.'''

    if not samples:
        raise InputError('SFE fitting needs at least one training sample')

    seeds = np.random.SeedSequence(seed).spawn(3)
    gmms = []
    for (kind, k), child in zip(((DescriptorKind.DIRECT, k_direct),
                                 (DescriptorKind.TIME_STATS, k_time),
                                 (DescriptorKind.FREQ_SPECTRUM, k_freq)), seeds):
        pooled = np.concatenate([describe(sample, kind).vectors for sample in samples])
        gmm = gmm_fit(pooled, k, seed=int(child.generate_state(1)[0]), max_iters=max_iters)
        logger.info('Fitted %s GMM: K=%d D=%d, %d iterations, %d re-seeded',
                    kind.name.lower(), gmm.k, gmm.dim, len(gmm.trace), gmm.reseeded)
        gmms.append(gmm)

    models = SfeModels(*gmms, strong_ratio=strong_ratio)
    fisher = fisher_matrix(samples, models)
    models.lda = lda_fit(fisher, [sample.label for sample in samples], d_out)
    return models
