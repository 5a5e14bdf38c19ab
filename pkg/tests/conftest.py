'''Some common fixtures for pytest tests of gaitfusion modules'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import numpy as np
import pytest

from gaitfusion import config, ingest

def central_difference(func, array, step=1e-5):
    '''Return the gradient of the scalar func() with respect to every entry of array,
    estimated by central differences. array is perturbed in place and restored.'''

    result = np.zeros_like(array)
    flat = array.reshape(-1)
    flat_result = result.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        upper = func()
        flat[i] = saved - step
        lower = func()
        flat[i] = saved
        flat_result[i] = (upper - lower) / (2.0 * step)
    return result

def assert_gradient_close(analytic, numeric, rel=1e-4, abs_floor=1e-4):
    '''Check |analytic - numeric| <= rel * max(|analytic|, |numeric|, abs_floor)
    elementwise.'''

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), abs_floor)
    worst = np.max(np.abs(analytic - numeric) / scale)
    assert worst <= rel, 'relative gradient error {0}'.format(worst)

@pytest.fixture()
def rng():
    return np.random.default_rng(20190412)

@pytest.fixture(scope='session')
def small_samples():
    # Three well separated classes, 12 samples each
    return ingest.synth_bimodal(3, 12, timesteps=(10, 10), dims=(4, 5), separation=5.0,
                                seed=7)

@pytest.fixture(scope='session')
def small_split(small_samples):
    train, test = ingest.split(small_samples, 0.75, seed=3)
    train, test, _ = ingest.normalize_fit_apply(train, test)
    return train, test

@pytest.fixture()
def small_config():
    '''A configuration small enough for the whole pipeline to run in a test.'''

    return config.load_config(text='''
synth.classes = 4
synth.samples_per_class = 50
synth.channel1_dim = 6
synth.channel2_dim = 8
synth.separation = 5.0
window.nodes = 10
sfe.k_direct = 3
sfe.k_time = 3
sfe.k_freq = 3
sfe.gmm_iterations = 30
corrmnn.hidden = 32
corrmnn.mlp_widths = 32, 16, 8
corrmnn.k_corr = 4
corrmnn.batch_size = 64
corrmnn.epochs = 20
hmm.states = 3
hmm.iterations = 30
experiment.seed = 42
''')
