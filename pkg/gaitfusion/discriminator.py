'''This module implements the multi-switch discriminator: a bank of hidden Markov models
with diagonal Gaussian emissions, one per class, each fitted by Baum-Welch to the fused
feature sequences of its class. A sequence is assigned to the class whose model gives
it the highest forward log-likelihood.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import concurrent.futures
import logging
import math
import warnings

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

from . import DimensionError, InputError, NumericError
from . import numkit

logger = logging.getLogger(__name__)

HMM_REL_TOL = 1e-7
HMM_STARVATION = 1e-8
SELF_TRANSITION_BONUS = 1e-3

class GaussianHmm:
    '''A hidden Markov model with N states. initial and transitions are the start
    distribution and the row-stochastic N x N transition matrix; means and variances are
    N x W diagonal Gaussian emission parameters. trace holds the total training
    log-likelihood at each Baum-Welch iteration.'''

    __slots__ = ('initial', 'transitions', 'means', 'variances', 'var_floor', 'trace',
                 'reseeded')

    def __init__(self, initial, transitions, means, variances, var_floor=0.0, trace=None,
                 reseeded=0):
        self.initial = np.asarray(initial, dtype=np.float64)
        self.transitions = numkit.as_matrix(transitions, 'transitions')
        self.means = numkit.as_matrix(means, 'means')
        self.variances = numkit.as_matrix(variances, 'variances')
        states = self.initial.shape[0]
        if self.transitions.shape != (states, states) or self.means.shape[0] != states \
                or self.variances.shape != self.means.shape:
            raise InputError('HMM parameters have inconsistent shapes')
        if np.any(self.variances <= 0.0):
            raise InputError('HMM emission variances must be positive')
        self.var_floor = var_floor
        self.trace = list(trace) if trace is not None else []
        self.reseeded = reseeded

    @property
    def states(self):
        '''The number of hidden states N.'''

        return self.initial.shape[0]

    @property
    def width(self):
        '''The observation width W.'''

        return self.means.shape[1]

    def log_emissions(self, observations):
        '''Return log N(o_t; mu_n, sigma_n^2) for every frame and state. observations may
        be T x W (giving T x N) or S x T x W (giving S x T x N).'''

        observations = np.asarray(observations, dtype=np.float64)
        if observations.shape[-1] != self.width:
            raise DimensionError('Observations have width {0} but the HMM expects {1}'
                                 .format(observations.shape[-1], self.width))
        diff = observations[..., np.newaxis, :] - self.means
        log_norm = -0.5 * (self.width * math.log(2.0 * math.pi)
                           + np.sum(np.log(self.variances), axis=1))
        return log_norm - 0.5 * np.sum(diff * diff / self.variances, axis=-1)

def _forward_backward(model, batch, backward=True):
    '''Run the forward (and optionally backward) recursions in the log domain over a
    batch of equal-length sequences (S x T x W). Each step is normalised by a logsumexp
    over states, so a start distribution or transition matrix with exact zeros never
    produces an empty step. Returns the per-sequence log-likelihoods, and when backward
    is set the state posteriors (S x T x N) and the expected transition counts summed
    over the batch (N x N).'''

    log_b = model.log_emissions(batch)
    length = log_b.shape[1]
    with np.errstate(divide='ignore'):
        log_initial = np.log(model.initial)
        log_transitions = np.log(model.transitions)

        # Unreachable states stay at -inf
        log_alpha = np.empty_like(log_b)
        log_alpha[:, 0] = log_initial + log_b[:, 0]
        for t in range(1, length):
            log_alpha[:, t] = logsumexp(log_alpha[:, t - 1, :, np.newaxis] + log_transitions,
                                        axis=1) + log_b[:, t]
        loglik = logsumexp(log_alpha[:, -1], axis=1)

    if not np.all(np.isfinite(loglik)):
        raise NumericError('HMM forward recursion gave a non-finite log-likelihood')
    if not backward:
        return loglik, None, None

    log_beta = np.empty_like(log_b)
    log_beta[:, -1] = 0.0
    for t in range(length - 2, -1, -1):
        log_beta[:, t] = logsumexp(log_transitions
                                   + (log_b[:, t + 1] + log_beta[:, t + 1])[:, np.newaxis, :],
                                   axis=2)

    log_total = loglik[:, np.newaxis, np.newaxis]
    posteriors = np.exp(log_alpha + log_beta - log_total)
    posteriors /= posteriors.sum(axis=2, keepdims=True)
    log_xi = log_alpha[:, :-1, :, np.newaxis] + log_transitions \
        + (log_b[:, 1:] + log_beta[:, 1:])[:, :, np.newaxis, :] - log_total[..., np.newaxis]
    expected = np.exp(log_xi).sum(axis=(0, 1))
    return loglik, posteriors, expected

def _length_groups(sequences):
    '''Group sequences of equal length into stacked arrays, remembering their
    positions.'''

    groups = {}
    for index, sequence in enumerate(sequences):
        groups.setdefault(sequence.shape[0], []).append(index)
    return [(indices, np.stack([sequences[i] for i in indices]))
            for _, indices in sorted(groups.items())]

def _as_sequences(sequences):
    result = []
    for sequence in sequences:
        sequence = numkit.as_matrix(sequence, 'sequence')
        result.append(sequence)
    return result

def forward_loglik(model, sequence):
    '''Return log P(sequence | model) by the log-domain forward algorithm.'''

    sequence = numkit.as_matrix(sequence, 'sequence')
    if sequence.shape[0] < 1:
        raise InputError('An observation sequence needs at least one frame')
    loglik, _, _ = _forward_backward(model, sequence[np.newaxis], backward=False)
    return float(loglik[0])

def baum_welch_fit(sequences, states, iterations=200, seed=0, var_floor=1e-3):
    '''Fit a GaussianHmm with the given number of states to the sequences of one class by
    Baum-Welch. The start distribution is uniform, the transitions uniform with a small
    self-transition bonus and the emission means are seeded by k-means++ on the pooled
    frames. Iteration stops after the given number of iterations or when the relative
    improvement of the total log-likelihood falls below 1e-7. A state whose expected
    occupancy falls below 1e-8 is re-seeded at a random frame.'''

    sequences = _as_sequences(sequences)
    if not sequences:
        raise InputError('Baum-Welch needs at least one sequence')
    if any(sequence.shape[0] < 2 for sequence in sequences):
        raise InputError('Every Baum-Welch training sequence needs at least 2 frames')
    width = sequences[0].shape[1]
    if any(sequence.shape[1] != width for sequence in sequences):
        raise DimensionError('Training sequences have different widths')
    if states < 1:
        raise InputError('An HMM needs at least one state')

    rng = np.random.default_rng(seed)
    pooled = np.concatenate(sequences)
    pooled_var = np.maximum(pooled.var(axis=0), var_floor)

    if states == 1:
        means = pooled.mean(axis=0, keepdims=True)
    else:
        if pooled.shape[0] < states:
            raise InputError('{0} frames are too few for {1} states'
                             .format(pooled.shape[0], states))
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', UserWarning)
            means, _ = kmeans2(pooled, states, minit='++', seed=rng)

    transitions = np.ones((states, states)) + SELF_TRANSITION_BONUS * np.eye(states)
    transitions /= transitions.sum(axis=1, keepdims=True)
    model = GaussianHmm(np.full(states, 1.0 / states), transitions, means,
                        np.tile(pooled_var, (states, 1)), var_floor)
    groups = _length_groups(sequences)

    previous = None
    for iteration in range(iterations):
        total = 0.0
        initial_counts = np.zeros(states)
        transition_counts = np.zeros((states, states))
        occupancy = np.zeros(states)
        weighted_sum = np.zeros((states, width))
        weighted_square = np.zeros((states, width))
        posteriors_by_group = []

        for _, batch in groups:
            loglik, posteriors, expected = _forward_backward(model, batch)
            total += float(np.sum(loglik))
            initial_counts += posteriors[:, 0].sum(axis=0)
            transition_counts += expected
            occupancy += posteriors.sum(axis=(0, 1))
            weighted_sum += np.einsum('stn,stw->nw', posteriors, batch)
            posteriors_by_group.append(posteriors)

        model.trace.append(total)
        if previous is not None and total - previous < HMM_REL_TOL * abs(previous):
            break
        previous = total

        starved = occupancy < HMM_STARVATION
        safe_occupancy = np.where(starved, 1.0, occupancy)
        means = weighted_sum / safe_occupancy[:, np.newaxis]
        for (_, batch), posteriors in zip(groups, posteriors_by_group):
            diff = batch[:, :, np.newaxis, :] - means
            weighted_square += np.einsum('stn,stnw->nw', posteriors, diff * diff)
        variances = np.maximum(weighted_square / safe_occupancy[:, np.newaxis], var_floor)

        for state in np.flatnonzero(starved):
            frame = int(rng.integers(pooled.shape[0]))
            logger.warning('HMM state %d starved at iteration %d; re-seeding from frame %d',
                           state, iteration, frame)
            means[state] = pooled[frame]
            variances[state] = pooled_var
            model.reseeded += 1
            previous = None

        transition_counts += np.where(transition_counts.sum(axis=1, keepdims=True) > 0.0,
                                      0.0, 1.0)
        model.initial = initial_counts / initial_counts.sum()
        model.transitions = transition_counts / transition_counts.sum(axis=1, keepdims=True)
        model.means = means
        model.variances = variances

    return model

def fuse_features(f_sp, f_tp):
    '''Append the spatial feature F_sp to every frame of the temporal feature F_tp,
    giving a T x (w + d_out) observation sequence. Also accepts a batch: n x d_out F_sp
    with n x T x w F_tp.'''

    f_sp = np.asarray(f_sp, dtype=np.float64)
    f_tp = np.asarray(f_tp, dtype=np.float64)
    if f_tp.ndim - f_sp.ndim != 1 or f_tp.shape[:-2] != f_sp.shape[:-1]:
        raise DimensionError('F_sp of shape {0} cannot be fused with F_tp of shape {1}'
                             .format(f_sp.shape, f_tp.shape))
    repeated = np.broadcast_to(f_sp[..., np.newaxis, :],
                               f_tp.shape[:-1] + (f_sp.shape[-1],))
    return np.concatenate((f_tp, repeated), axis=-1)

def score_sequences(models, sequences):
    '''Return the n x C matrix of forward log-likelihoods of each sequence under each
    model.'''

    sequences = _as_sequences(sequences)
    scores = np.empty((len(sequences), len(models)))
    for indices, batch in _length_groups(sequences):
        for column, model in enumerate(models):
            loglik, _, _ = _forward_backward(model, batch, backward=False)
            scores[indices, column] = loglik
    return scores

def classify(models, sequence):
    '''Return the index of the model giving the sequence the highest log-likelihood
    (ties go to the lowest index) and the array of all the log-likelihoods.'''

    if not models:
        raise InputError('Classification needs at least one model')
    scores = np.array([forward_loglik(model, sequence) for model in models])
    return int(np.argmax(scores)), scores

def fit_switches(sequences_by_class, states, iterations=200, seed=0, var_floor=1e-3,
                 threads=1):
    '''Fit one HMM per class. sequences_by_class[c] holds the training sequences of class
    c. Each class is fitted with its own seed derived from seed, so the result does not
    depend on the number of threads.'''

    seeds = [int(child.generate_state(1)[0])
             for child in np.random.SeedSequence(seed).spawn(len(sequences_by_class))]

    def fit(label):
        model = baum_welch_fit(sequences_by_class[label], states, iterations, seeds[label],
                               var_floor)
        logger.info('Fitted HMM switch for class %d: %d iterations, log-likelihood %.6f',
                    label, len(model.trace), model.trace[-1])
        return model

    labels = range(len(sequences_by_class))
    if threads <= 1:
        return [fit(label) for label in labels]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fit, labels))
