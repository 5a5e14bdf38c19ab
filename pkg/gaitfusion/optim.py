'''This module provides the Adam optimiser used to train CorrMNN.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import numpy as np

from . import InputError

class Adam:
    '''Adam keeps exponentially decaying estimates of the first and second moments of each
    parameter's gradient and scales each step by their bias-corrected ratio. Parameters
    and gradients are dictionaries of arrays with the same keys; the parameter arrays are
    updated in place.'''

    def __init__(self, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if learning_rate <= 0.0:
            raise InputError('The learning rate must be positive')
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise InputError('beta1 and beta2 must lie in [0, 1)')
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.first = {}
        self.second = {}
        self.steps = 0

    def step(self, params, grads):
        '''Apply one update to every array in params using the matching array in
        grads.'''

        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        step_size = self.learning_rate / correction1

        for key, value in params.items():
            grad = grads[key]
            if grad.shape != value.shape:
                raise InputError('Gradient for {0} has shape {1}, expected {2}'
                                 .format(key, grad.shape, value.shape))
            if key not in self.first:
                self.first[key] = np.zeros_like(value)
                self.second[key] = np.zeros_like(value)

            self.first[key] *= self.beta1
            self.first[key] += (1.0 - self.beta1) * grad
            self.second[key] *= self.beta2
            self.second[key] += (1.0 - self.beta2) * (grad * grad)

            denominator = np.sqrt(self.second[key] / correction2) + self.epsilon
            value -= step_size * self.first[key] / denominator
