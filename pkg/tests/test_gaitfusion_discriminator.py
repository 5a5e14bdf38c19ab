'''Test gaitfusion.discriminator'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import itertools

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import norm

from gaitfusion import DimensionError, InputError
import gaitfusion.discriminator as discriminator

def random_hmm(rng, states, width):
    initial = rng.dirichlet(np.ones(states))
    transitions = rng.dirichlet(np.ones(states), size=states)
    means = 2.0 * rng.standard_normal((states, width))
    variances = rng.uniform(0.3, 2.0, (states, width))
    return discriminator.GaussianHmm(initial, transitions, means, variances)

def brute_force_loglik(model, sequence):
    log_b = model.log_emissions(sequence)
    paths = []
    for path in itertools.product(range(model.states), repeat=sequence.shape[0]):
        value = np.log(model.initial[path[0]]) + log_b[0, path[0]]
        for t in range(1, len(path)):
            value += np.log(model.transitions[path[t - 1], path[t]]) + log_b[t, path[t]]
        paths.append(value)
    return logsumexp(paths)

def regime_sequences(rng, count, length, stay=0.9):
    '''Sequences that switch between observation means of -3 and +3.'''

    result = []
    for _ in range(count):
        state = rng.integers(2)
        frames = []
        for _ in range(length):
            frames.append(rng.normal(6.0 * state - 3.0, 1.0, size=2))
            if rng.random() > stay:
                state = 1 - state
        result.append(np.array(frames))
    return result

@pytest.mark.parametrize('states', (2, 3))
@pytest.mark.parametrize('length', (3, 4))
def test_forward_matches_path_enumeration(states, length):

    rng = np.random.default_rng(100 * states + length)
    for _ in range(50):
        model = random_hmm(rng, states, 2)
        sequence = rng.standard_normal((length, 2))
        assert discriminator.forward_loglik(model, sequence) == \
            pytest.approx(brute_force_loglik(model, sequence), abs=1e-9)

def test_forward_single_state(rng):

    model = discriminator.GaussianHmm([1.0], [[1.0]], [[0.5, -1.0]], [[2.0, 0.5]])
    sequence = rng.standard_normal((6, 2))
    expected = np.sum(norm.logpdf(sequence, (0.5, -1.0), np.sqrt((2.0, 0.5))))
    assert discriminator.forward_loglik(model, sequence) == pytest.approx(expected, abs=1e-9)

def test_forward_indistinguishable_states(rng):

    sequence = rng.standard_normal((5, 3))
    single = discriminator.GaussianHmm([1.0], [[1.0]], [[0.1, 0.2, 0.3]], [[1.0, 2.0, 3.0]])
    triple = discriminator.GaussianHmm(np.full(3, 1.0 / 3.0), np.full((3, 3), 1.0 / 3.0),
                                       np.tile([0.1, 0.2, 0.3], (3, 1)),
                                       np.tile([1.0, 2.0, 3.0], (3, 1)))
    assert discriminator.forward_loglik(triple, sequence) == \
        pytest.approx(discriminator.forward_loglik(single, sequence), abs=1e-9)

def test_forward_far_observations():

    # Emissions far in the tails underflow in the linear domain
    model = discriminator.GaussianHmm([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]],
                                      [[0.0], [1.0]], [[1e-3], [1e-3]])
    sequence = np.array([[100.0], [101.0], [99.0]])
    value = discriminator.forward_loglik(model, sequence)
    assert np.isfinite(value)
    assert value == pytest.approx(brute_force_loglik(model, sequence), rel=1e-12)

def test_forward_zero_start_mass():

    # The only state that can start sits far from the first frame
    model = discriminator.GaussianHmm([1.0, 0.0], [[0.5, 0.5], [0.5, 0.5]], [[0.0], [1.0]],
                                      [[1e-3], [1e-3]])
    sequence = np.array([[1.3], [1.0], [1.0]])
    value = discriminator.forward_loglik(model, sequence)
    assert np.isfinite(value)
    with np.errstate(divide='ignore'):
        expected = brute_force_loglik(model, sequence)
    assert value == pytest.approx(expected, rel=1e-9)

    loglik, posteriors, expected_transitions = \
        discriminator._forward_backward(model, sequence[np.newaxis])
    assert loglik[0] == value
    assert np.allclose(posteriors.sum(axis=2), 1.0)
    assert posteriors[0, 0, 1] == 0.0
    assert np.all(np.isfinite(expected_transitions))
    assert expected_transitions.sum() == pytest.approx(2.0)

    other = discriminator.GaussianHmm([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[0.0], [1.0]],
                                      [[1.0], [1.0]])
    scores = discriminator.score_sequences([model, other], [sequence])
    assert np.all(np.isfinite(scores))
    assert int(np.argmax(scores[0])) == 1
    assert discriminator.classify([model, other], sequence)[0] == 1

def test_model_validation():

    with pytest.raises(InputError):
        discriminator.GaussianHmm([1.0], [[1.0]], [[0.0]], [[0.0]])

    with pytest.raises(InputError):
        discriminator.GaussianHmm([0.5, 0.5], [[1.0]], [[0.0]], [[1.0]])

    model = discriminator.GaussianHmm([1.0], [[1.0]], [[0.0, 0.0]], [[1.0, 1.0]])
    with pytest.raises(DimensionError):
        discriminator.forward_loglik(model, np.zeros((3, 3)))

    with pytest.raises(InputError):
        discriminator.forward_loglik(model, np.zeros((0, 2)))

def test_baum_welch_single_state(rng):

    sequences = [rng.normal(1.0, 2.0, size=(8, 2)) for _ in range(5)]
    pooled = np.concatenate(sequences)
    model = discriminator.baum_welch_fit(sequences, 1, iterations=10, var_floor=1e-3)

    assert np.allclose(model.means[0], pooled.mean(axis=0))
    assert np.allclose(model.variances[0], pooled.var(axis=0))
    expected = np.sum(norm.logpdf(sequences[0], pooled.mean(axis=0),
                                  np.sqrt(pooled.var(axis=0))))
    assert discriminator.forward_loglik(model, sequences[0]) == pytest.approx(expected)

def test_baum_welch_recovers_regimes(rng):

    sequences = regime_sequences(rng, 40, 20)
    model = discriminator.baum_welch_fit(sequences, 2, iterations=100, seed=1)

    centres = np.sort(model.means.mean(axis=1))
    assert centres[0] == pytest.approx(-3.0, abs=0.3)
    assert centres[1] == pytest.approx(3.0, abs=0.3)

    # Both regimes are persistent
    assert np.all(np.diag(model.transitions) > 0.7)

    # A start distribution with no mass on one regime still scores sequences that begin
    # in it
    model.initial = np.zeros(2)
    model.initial[np.argmin(model.means.mean(axis=1))] = 1.0
    starts_high = np.concatenate((rng.normal(3.0, 1.0, size=(5, 2)),
                                  rng.normal(-3.0, 1.0, size=(5, 2))))
    assert np.isfinite(discriminator.forward_loglik(model, starts_high))
    refit = discriminator.baum_welch_fit([starts_high], 2, iterations=5, seed=2)
    assert np.all(np.isfinite(refit.trace))

@pytest.mark.parametrize('seed', range(5))
def test_baum_welch_monotone(seed):

    rng = np.random.default_rng(seed)
    sequences = regime_sequences(rng, 10, 12) + regime_sequences(rng, 5, 7)
    model = discriminator.baum_welch_fit(sequences, 3, iterations=40, seed=seed)

    if model.reseeded == 0:
        trace = np.array(model.trace)
        assert np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1]))

    assert abs(model.initial.sum() - 1.0) <= 1e-12
    assert np.all(np.abs(model.transitions.sum(axis=1) - 1.0) <= 1e-12)
    assert np.all(model.variances >= model.var_floor)

def test_baum_welch_errors(rng):

    with pytest.raises(InputError):
        discriminator.baum_welch_fit([], 2)

    with pytest.raises(InputError):
        discriminator.baum_welch_fit([np.zeros((1, 2))], 2)

    with pytest.raises(DimensionError):
        discriminator.baum_welch_fit([np.zeros((4, 2)), np.zeros((4, 3))], 2)

    with pytest.raises(InputError):
        discriminator.baum_welch_fit([rng.standard_normal((3, 2))], 4)

    with pytest.raises(InputError):
        discriminator.baum_welch_fit([np.full((4, 2), np.inf)], 2)

def test_fuse_features():

    f_sp = np.array([1.0, 2.0, 3.0])
    f_tp = np.arange(200.0).reshape(10, 20)
    fused = discriminator.fuse_features(f_sp, f_tp)
    assert fused.shape == (10, 23)
    assert np.array_equal(fused[:, :20], f_tp)
    assert np.array_equal(fused[4, 20:], f_sp)

    fused = discriminator.fuse_features(np.zeros(3), f_tp)
    assert np.array_equal(fused, np.concatenate((f_tp, np.zeros((10, 3))), axis=1))

    batch = discriminator.fuse_features(np.ones((4, 3)), np.zeros((4, 10, 20)))
    assert batch.shape == (4, 10, 23)

    with pytest.raises(DimensionError):
        discriminator.fuse_features(np.ones((4, 3)), np.zeros((5, 10, 20)))

    with pytest.raises(DimensionError):
        discriminator.fuse_features(np.ones(3), np.zeros(20))

def test_score_and_classify(rng):

    low = [rng.normal(-2.0, 1.0, size=(10, 2)) for _ in range(20)]
    high = [rng.normal(2.0, 1.0, size=(10, 2)) for _ in range(20)]
    models = discriminator.fit_switches([low, high], 2, iterations=30, seed=3)

    test = [rng.normal(-2.0, 1.0, size=(10, 2)), rng.normal(2.0, 1.0, size=(7, 2)),
            rng.normal(-2.0, 1.0, size=(7, 2))]
    scores = discriminator.score_sequences(models, test)
    assert scores.shape == (3, 2)
    assert list(np.argmax(scores, axis=1)) == [0, 1, 0]

    for row, sequence in zip(scores, test):
        label, direct = discriminator.classify(models, sequence)
        assert np.allclose(direct, row)
        assert label == int(np.argmax(row))

def test_classify_ties_and_single_class(rng):

    model = random_hmm(rng, 2, 2)
    sequence = rng.standard_normal((5, 2))
    assert discriminator.classify([model], sequence)[0] == 0
    assert discriminator.classify([model, model, model], sequence)[0] == 0

    with pytest.raises(InputError):
        discriminator.classify([], sequence)

def test_fit_switches_threads(rng):

    by_class = [regime_sequences(rng, 6, 10) for _ in range(3)]
    serial = discriminator.fit_switches(by_class, 2, iterations=15, seed=9, threads=1)
    threaded = discriminator.fit_switches(by_class, 2, iterations=15, seed=9, threads=3)
    for first, second in zip(serial, threaded):
        assert np.array_equal(first.means, second.means)
        assert np.array_equal(first.transitions, second.transitions)
        assert first.trace == second.trace
