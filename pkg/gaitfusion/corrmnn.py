'''This module implements CorrMNN, the correlative dual-channel recurrent network. Each
channel's window is unrolled through its own recurrent cell over T nodes, the node
outputs of both channels pass through a pair of four-layer perceptrons with a class head
and a correlation head, and the network is trained with Adam on the sum of the two
classification losses and the negated canonical correlation of the correlation heads.
The correlation heads of a trained network are the temporal features F_tp.

Gradients are computed by hand: every forward function returns a cache that the
matching backward function consumes.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import logging
import math

import numpy as np
from scipy.special import expit, logsumexp, softmax

from . import CacheMismatchError, CellKind, ConvergenceError, DimensionError, InputError
from . import numkit
from .optim import Adam

logger = logging.getLogger(__name__)

CELL_GATES = {CellKind.MULTIGATED: ('z', 'r', 'h', 'ctemp'),
              CellKind.GRU: ('z', 'r', 'h')}

def glorot_uniform(rng, fan_out, fan_in):
    '''Return a fan_out x fan_in matrix drawn uniformly from +/- sqrt(6/(fan_in +
    fan_out)).'''

    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))

class CellParams:
    '''The weights of one recurrent cell. Each gate g has a matrix W_g of shape
    hidden x (hidden + input), applied to the concatenation [o_prev, x], and a bias b_g.
    The multi-gated cell has gates z, r, h and ctemp; the GRU has z, r and h. version is
    incremented whenever the weights are changed so stale caches can be detected.'''

    __slots__ = ('kind', 'hidden', 'input_size', 'arrays', 'version')

    def __init__(self, kind, hidden, input_size, arrays=None, rng=None):
        if hidden < 1 or input_size < 1:
            raise InputError('Cell hidden and input sizes must be at least 1')
        self.kind = kind
        self.hidden = hidden
        self.input_size = input_size
        self.version = 0
        if arrays is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            arrays = {}
            for gate in CELL_GATES[kind]:
                arrays['W_' + gate] = glorot_uniform(rng, hidden, hidden + input_size)
                arrays['b_' + gate] = np.zeros(hidden)
        self.arrays = arrays
        self._check_shapes()

    def _check_shapes(self):
        for gate in CELL_GATES[self.kind]:
            if self.arrays['W_' + gate].shape != (self.hidden, self.hidden + self.input_size) \
                    or self.arrays['b_' + gate].shape != (self.hidden,):
                raise InputError('Cell weights for gate {0} have the wrong shape'.format(gate))

    @classmethod
    def zeros(cls, kind, hidden, input_size):
        '''Return a cell with every weight and bias set to zero.'''

        arrays = {}
        for gate in CELL_GATES[kind]:
            arrays['W_' + gate] = np.zeros((hidden, hidden + input_size))
            arrays['b_' + gate] = np.zeros(hidden)
        return cls(kind, hidden, input_size, arrays)

    def touch(self):
        '''Record that the weights have been changed in place.'''

        self.version += 1

class CellCache:
    '''The intermediate values of one cell_forward call.'''

    __slots__ = ('params', 'version', 'single', 'o_prev', 'joint', 'joint_reset', 'z', 'r',
                 'h', 'ctemp', 'gate_out', 'c')

    def __init__(self, params, single):
        self.params = params
        self.version = params.version
        self.single = single
        self.ctemp = None
        self.gate_out = None
        self.c = None

def cell_forward(params, x_t, o_prev):
    '''Advance a recurrent cell by one node. x_t is an input vector (or a batch of them,
    one per row) and o_prev the previous output. Returns the new output and a cache for
    cell_backward.

    The multi-gated cell computes z = sigma(W_z [o_prev, x] + b_z), r likewise,
    h = tanh(W_h [r * o_prev, x] + b_h), ctemp = tanh(W_ctemp [o_prev, x] + b_ctemp),
    c = (1 - z) * h + z * o_prev and outputs c * sigma(ctemp). The GRU outputs
    (1 - z) * o_prev + z * h.'''

    x_t = np.asarray(x_t, dtype=np.float64)
    o_prev = np.asarray(o_prev, dtype=np.float64)
    single = x_t.ndim == 1
    x_t = np.atleast_2d(x_t)
    o_prev = np.atleast_2d(o_prev)
    if x_t.shape[1] != params.input_size or o_prev.shape[1] != params.hidden \
            or x_t.shape[0] != o_prev.shape[0]:
        raise DimensionError('Cell expects inputs of width {0} and state of width {1}, got '
                             '{2} and {3}'.format(params.input_size, params.hidden,
                                                  x_t.shape, o_prev.shape))

    w = params.arrays
    cache = CellCache(params, single)
    joint = np.concatenate((o_prev, x_t), axis=1)
    z = expit(joint @ w['W_z'].T + w['b_z'])
    r = expit(joint @ w['W_r'].T + w['b_r'])
    joint_reset = np.concatenate((r * o_prev, x_t), axis=1)
    h = np.tanh(joint_reset @ w['W_h'].T + w['b_h'])

    if params.kind == CellKind.MULTIGATED:
        ctemp = np.tanh(joint @ w['W_ctemp'].T + w['b_ctemp'])
        gate_out = expit(ctemp)
        c = (1.0 - z) * h + z * o_prev
        o_t = c * gate_out
        cache.ctemp = ctemp
        cache.gate_out = gate_out
        cache.c = c
    else:
        o_t = (1.0 - z) * o_prev + z * h

    cache.o_prev = o_prev
    cache.joint = joint
    cache.joint_reset = joint_reset
    cache.z = z
    cache.r = r
    cache.h = h
    return (o_t[0] if single else o_t), cache

def cell_backward(cache, grad_o_t):
    '''Back-propagate the gradient of a loss with respect to a cell output. Returns a
    dictionary of parameter gradients (keyed like CellParams.arrays), the gradient with
    respect to the input and the gradient with respect to the previous output.'''

    params = cache.params
    if cache.version != params.version:
        raise CacheMismatchError('Cell cache is from version {0} of the weights, which are '
                                 'now at version {1}'.format(cache.version, params.version))
    grad_o_t = np.atleast_2d(np.asarray(grad_o_t, dtype=np.float64))
    if grad_o_t.shape != cache.z.shape:
        raise CacheMismatchError('Output gradient shape {0} does not match the cache {1}'
                                 .format(grad_o_t.shape, cache.z.shape))

    w = params.arrays
    hidden = params.hidden
    z, r, h, o_prev = cache.z, cache.r, cache.h, cache.o_prev
    grads = {}

    if params.kind == CellKind.MULTIGATED:
        grad_c = grad_o_t * cache.gate_out
        grad_ctemp_pre = grad_o_t * cache.c * cache.gate_out * (1.0 - cache.gate_out) \
            * (1.0 - cache.ctemp * cache.ctemp)
        grad_z = grad_c * (o_prev - h)
        grad_h = grad_c * (1.0 - z)
        grad_o_prev = grad_c * z
        grads['W_ctemp'] = grad_ctemp_pre.T @ cache.joint
        grads['b_ctemp'] = grad_ctemp_pre.sum(axis=0)
        grad_joint = grad_ctemp_pre @ w['W_ctemp']
    else:
        grad_z = grad_o_t * (h - o_prev)
        grad_h = grad_o_t * z
        grad_o_prev = grad_o_t * (1.0 - z)
        grad_joint = np.zeros_like(cache.joint)

    grad_h_pre = grad_h * (1.0 - h * h)
    grads['W_h'] = grad_h_pre.T @ cache.joint_reset
    grads['b_h'] = grad_h_pre.sum(axis=0)
    grad_joint_reset = grad_h_pre @ w['W_h']
    grad_reset_state = grad_joint_reset[:, :hidden]
    grad_x = grad_joint_reset[:, hidden:].copy()
    grad_o_prev = grad_o_prev + grad_reset_state * r

    grad_r_pre = grad_reset_state * o_prev * r * (1.0 - r)
    grads['W_r'] = grad_r_pre.T @ cache.joint
    grads['b_r'] = grad_r_pre.sum(axis=0)
    grad_joint = grad_joint + grad_r_pre @ w['W_r']

    grad_z_pre = grad_z * z * (1.0 - z)
    grads['W_z'] = grad_z_pre.T @ cache.joint
    grads['b_z'] = grad_z_pre.sum(axis=0)
    grad_joint = grad_joint + grad_z_pre @ w['W_z']

    grad_o_prev = grad_o_prev + grad_joint[:, :hidden]
    grad_x = grad_x + grad_joint[:, hidden:]

    if cache.single:
        return grads, grad_x[0], grad_o_prev[0]
    return grads, grad_x, grad_o_prev

def to_nodes(windows, nodes):
    '''Reshape a batch of windows (batch x timestep x features, or one timestep x
    features window) so that each of the T nodes sees timestep / T consecutive frames as
    one input vector.'''

    windows = np.asarray(windows, dtype=np.float64)
    single = windows.ndim == 2
    if single:
        windows = windows[np.newaxis]
    batch, timestep, width = windows.shape
    if timestep % nodes:
        raise DimensionError('Window of {0} frames cannot be divided between {1} nodes'
                             .format(timestep, nodes))
    result = windows.reshape(batch, nodes, (timestep // nodes) * width)
    return result[0] if single else result

def unroll(cell, inputs):
    '''Run a cell over batch x T x input inputs from a zero initial state. Returns the
    batch x T x hidden outputs and the per-node caches.'''

    batch, nodes, _ = inputs.shape
    state = np.zeros((batch, cell.hidden))
    outputs = np.empty((batch, nodes, cell.hidden))
    caches = []
    for node in range(nodes):
        state, cache = cell_forward(cell, inputs[:, node], state)
        outputs[:, node] = state
        caches.append(cache)
    return outputs, caches

def unroll_backward(caches, grad_outputs):
    '''Back-propagate batch x T x hidden output gradients through an unrolled cell.
    Returns the parameter gradients summed over nodes and the input gradients.'''

    grad_state = np.zeros_like(grad_outputs[:, 0])
    grad_inputs = []
    totals = None
    for node in reversed(range(len(caches))):
        grads, grad_x, grad_state = cell_backward(caches[node],
                                                  grad_outputs[:, node] + grad_state)
        grad_inputs.append(grad_x)
        if totals is None:
            totals = grads
        else:
            for key, value in grads.items():
                totals[key] += value
    grad_inputs.reverse()
    return totals, np.stack(grad_inputs, axis=1)

def dcmnn_forward(cell1, cell2, x1, x2):
    '''Unroll the two channel cells independently over node-shaped inputs (batch x T x
    input for each channel). Returns the outputs O1 and O2 (batch x T x hidden) and the
    caches of each channel.'''

    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.ndim != 3 or x2.ndim != 3 or x1.shape[:2] != x2.shape[:2]:
        raise DimensionError('Both channels need batch x nodes x input arrays with the same '
                             'batch and node counts, not {0} and {1}'
                             .format(x1.shape, x2.shape))
    outputs1, caches1 = unroll(cell1, x1)
    outputs2, caches2 = unroll(cell2, x2)
    return outputs1, outputs2, (caches1, caches2)

class CorrUnitParams:
    '''The correlation computing unit: for each channel three tanh layers of the given
    widths followed by a linear class head (C outputs) and a linear correlation head
    (k_corr outputs). arrays is keyed 'c<channel>.<layer>.W' and '.b', the layers being
    l1, l2, l3, cls and corr.'''

    LAYERS = ('l1', 'l2', 'l3')

    __slots__ = ('hidden', 'widths', 'classes', 'k_corr', 'arrays', 'version')

    def __init__(self, hidden, widths, classes, k_corr, arrays=None, rng=None):
        widths = tuple(widths)
        if len(widths) != 3:
            raise InputError('The correlation unit needs exactly three layer widths')
        if k_corr < 1 or classes < 1:
            raise InputError('k_corr and the class count must be at least 1')
        self.hidden = hidden
        self.widths = widths
        self.classes = classes
        self.k_corr = k_corr
        self.version = 0
        if arrays is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            arrays = {}
            for channel in (1, 2):
                for name, (fan_out, fan_in) in self.layer_shapes().items():
                    arrays['c{0}.{1}.W'.format(channel, name)] = \
                        glorot_uniform(rng, fan_out, fan_in)
                    arrays['c{0}.{1}.b'.format(channel, name)] = np.zeros(fan_out)
        self.arrays = arrays
        for channel in (1, 2):
            for name, shape in self.layer_shapes().items():
                if arrays['c{0}.{1}.W'.format(channel, name)].shape != shape:
                    raise InputError('Layer {0} of channel {1} has the wrong shape'
                                     .format(name, channel))

    def layer_shapes(self):
        '''Return a dictionary of layer name to weight matrix shape.'''

        sizes = (self.hidden,) + self.widths
        shapes = {name: (sizes[i + 1], sizes[i]) for i, name in enumerate(self.LAYERS)}
        shapes['cls'] = (self.classes, self.widths[-1])
        shapes['corr'] = (self.k_corr, self.widths[-1])
        return shapes

    def layer(self, channel, name):
        '''Return the weight matrix and bias of a layer.'''

        prefix = 'c{0}.{1}.'.format(channel, name)
        return self.arrays[prefix + 'W'], self.arrays[prefix + 'b']

    def touch(self):
        '''Record that the weights have been changed in place.'''

        self.version += 1

def mlp_forward(unit, channel, o):
    '''Evaluate one channel's perceptron on rows of node outputs. Returns the class
    logits, the correlation head output and the layer activations needed by
    mlp_backward.'''

    activations = [o]
    for name in unit.LAYERS:
        weight, bias = unit.layer(channel, name)
        activations.append(np.tanh(activations[-1] @ weight.T + bias))
    cls_w, cls_b = unit.layer(channel, 'cls')
    corr_w, corr_b = unit.layer(channel, 'corr')
    return activations[-1] @ cls_w.T + cls_b, activations[-1] @ corr_w.T + corr_b, activations

def mlp_backward(unit, channel, activations, grad_logits, grad_h):
    '''Back-propagate head gradients through one channel's perceptron. Returns the
    parameter gradients and the gradient with respect to the node outputs.'''

    prefix = 'c{0}.'.format(channel)
    grads = {}
    top = activations[-1]
    cls_w, _ = unit.layer(channel, 'cls')
    corr_w, _ = unit.layer(channel, 'corr')
    grads[prefix + 'cls.W'] = grad_logits.T @ top
    grads[prefix + 'cls.b'] = grad_logits.sum(axis=0)
    grads[prefix + 'corr.W'] = grad_h.T @ top
    grads[prefix + 'corr.b'] = grad_h.sum(axis=0)
    grad_a = grad_logits @ cls_w + grad_h @ corr_w

    for index in reversed(range(len(unit.LAYERS))):
        name = unit.LAYERS[index]
        weight, _ = unit.layer(channel, name)
        output = activations[index + 1]
        grad_pre = grad_a * (1.0 - output * output)
        grads[prefix + name + '.W'] = grad_pre.T @ activations[index]
        grads[prefix + name + '.b'] = grad_pre.sum(axis=0)
        grad_a = grad_pre @ weight
    return grads, grad_a

class UnitCache:
    '''The activations of both channels' perceptrons, for corr_unit_backward.'''

    __slots__ = ('unit', 'version', 'activations1', 'activations2')

    def __init__(self, unit, activations1, activations2):
        self.unit = unit
        self.version = unit.version
        self.activations1 = activations1
        self.activations2 = activations2

def corr_unit_forward(unit, o1, o2):
    '''Evaluate the correlation computing unit on node outputs of the two channels (one
    row per node). Returns (logits1, logits2, h1, h2, cache).'''

    o1 = np.atleast_2d(np.asarray(o1, dtype=np.float64))
    o2 = np.atleast_2d(np.asarray(o2, dtype=np.float64))
    if o1.shape[1] != unit.hidden or o2.shape[1] != unit.hidden:
        raise DimensionError('Correlation unit expects node outputs of width {0}'
                             .format(unit.hidden))
    logits1, h1, activations1 = mlp_forward(unit, 1, o1)
    logits2, h2, activations2 = mlp_forward(unit, 2, o2)
    return logits1, logits2, h1, h2, UnitCache(unit, activations1, activations2)

def corr_unit_backward(cache, grad_logits1, grad_logits2, grad_h1, grad_h2):
    '''Return the parameter gradients of the correlation unit and the gradients with
    respect to the node outputs of each channel.'''

    unit = cache.unit
    if cache.version != unit.version:
        raise CacheMismatchError('Correlation unit cache is stale')
    grads1, grad_o1 = mlp_backward(unit, 1, cache.activations1, grad_logits1, grad_h1)
    grads2, grad_o2 = mlp_backward(unit, 2, cache.activations2, grad_logits2, grad_h2)
    grads1.update(grads2)
    return grads1, grad_o1, grad_o2

def cca_corr(h1, h2, ridge):
    '''Return the total canonical correlation of two views (n x k each): the sum of the
    singular values of S11^(-1/2) S12 S22^(-1/2), where the covariances are computed from
    the batch-centred views and r*I is added to S11 and S22. Also returns the gradients
    of the correlation with respect to h1 and h2.'''

    h1 = numkit.as_matrix(h1, 'h1')
    h2 = numkit.as_matrix(h2, 'h2')
    count = h1.shape[0]
    if count < 2 or h2.shape[0] != count:
        raise InputError('CCA needs two views with the same number (at least 2) of rows')

    centered1 = h1 - h1.mean(axis=0)
    centered2 = h2 - h2.mean(axis=0)
    scale = 1.0 / (count - 1)
    s11 = scale * centered1.T @ centered1
    s22 = scale * centered2.T @ centered2
    s12 = scale * centered1.T @ centered2

    root11 = numkit.inv_sqrt_psd(s11, ridge)
    root22 = numkit.inv_sqrt_psd(s22, ridge)
    u, singular, vt = numkit.svd(root11 @ s12 @ root22)
    corr = float(np.sum(singular))

    delta12 = root11 @ u @ vt @ root22
    delta11 = -0.5 * root11 @ (u * singular) @ u.T @ root11
    delta22 = -0.5 * root22 @ (vt.T * singular) @ vt @ root22
    grad1 = scale * (2.0 * centered1 @ delta11 + centered2 @ delta12.T)
    grad2 = scale * (2.0 * centered2 @ delta22 + centered1 @ delta12)
    return corr, grad1, grad2

def softmax_cross_entropy(logits, labels):
    '''Return the mean softmax cross-entropy of rows of logits against integer labels and
    its gradient with respect to the logits.'''

    logits = np.atleast_2d(logits)
    labels = np.asarray(labels)
    rows = np.arange(logits.shape[0])
    if np.any(labels < 0) or np.any(labels >= logits.shape[1]):
        raise InputError('Labels must lie in [0, {0})'.format(logits.shape[1]))
    loss = float(np.mean(logsumexp(logits, axis=1) - logits[rows, labels]))
    grad = softmax(logits, axis=1)
    grad[rows, labels] -= 1.0
    return loss, grad / logits.shape[0]

class JointLoss:
    '''The joint training loss: the classification losses of each channel, the
    correlation term -corr_weight * corr / k_corr, their sum and the gradients of the sum
    with respect to the logits and to corr.'''

    __slots__ = ('class1', 'class2', 'corr_term', 'total', 'grad_logits1', 'grad_logits2',
                 'grad_corr')

    def __init__(self, class1, class2, corr_term, grad_logits1, grad_logits2, grad_corr):
        self.class1 = class1
        self.class2 = class2
        self.corr_term = corr_term
        self.total = class1 + class2 + corr_term
        self.grad_logits1 = grad_logits1
        self.grad_logits2 = grad_logits2
        self.grad_corr = grad_corr

def joint_loss(logits1, logits2, labels, corr, k_corr, corr_weight=1.0):
    '''Return the JointLoss for a batch of logits of both channels, their labels and the
    canonical correlation of the correlation heads. A corr_weight of 0 drops the
    correlation term, leaving the plain two-channel network (DCMNN).'''

    class1, grad1 = softmax_cross_entropy(logits1, labels)
    class2, grad2 = softmax_cross_entropy(logits2, labels)
    return JointLoss(class1, class2, -corr_weight * corr / k_corr, grad1, grad2,
                     -corr_weight / k_corr)

class TrainConfig:
    '''Training settings for train_corrmnn.'''

    __slots__ = ('cell', 'hidden', 'mlp_widths', 'k_corr', 'learning_rate', 'batch_size',
                 'epochs', 'cca_ridge', 'corr_weight', 'seed')

    def __init__(self, cell=CellKind.MULTIGATED, hidden=256, mlp_widths=(128, 64, 32),
                 k_corr=10, learning_rate=0.01, batch_size=256, epochs=50, cca_ridge=1e-4,
                 seed=0, corr_weight=1.0):
        if min(hidden, k_corr, batch_size, epochs) < 1 or min(mlp_widths) < 1:
            raise InputError('Network sizes, batch size and epochs must be positive')
        if learning_rate <= 0.0 or cca_ridge <= 0.0:
            raise InputError('The learning rate and CCA ridge must be positive')
        if corr_weight < 0.0:
            raise InputError('The correlation weight must not be negative')
        self.cell = cell
        self.hidden = hidden
        self.mlp_widths = tuple(mlp_widths)
        self.k_corr = k_corr
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.cca_ridge = cca_ridge
        self.corr_weight = corr_weight
        self.seed = seed

    @classmethod
    def from_section(cls, section, seed):
        '''Build the settings from a CorrMnnSection.'''

        return cls(cell=section.cell, hidden=section.hidden, mlp_widths=section.mlp_widths,
                   k_corr=section.k_corr, learning_rate=section.learning_rate,
                   batch_size=section.batch_size, epochs=section.epochs,
                   cca_ridge=section.cca_ridge, seed=seed,
                   corr_weight=section.corr_weight)

    def without_correlation(self):
        '''Return a copy of these settings with the correlation term dropped.'''

        return TrainConfig(self.cell, self.hidden, self.mlp_widths, self.k_corr,
                           self.learning_rate, self.batch_size, self.epochs, self.cca_ridge,
                           self.seed, corr_weight=0.0)

class CorrMnnModel:
    '''A CorrMNN network: a cell per channel, the correlation unit, the node count and the
    per-epoch training loss.'''

    __slots__ = ('cell1', 'cell2', 'unit', 'nodes', 'cca_ridge', 'corr_weight', 'loss_curve')

    def __init__(self, cell1, cell2, unit, nodes, cca_ridge=1e-4, loss_curve=None,
                 corr_weight=1.0):
        if cell1.hidden != unit.hidden or cell2.hidden != unit.hidden:
            raise InputError('Cells and correlation unit disagree on the hidden size')
        self.cell1 = cell1
        self.cell2 = cell2
        self.unit = unit
        self.nodes = nodes
        self.cca_ridge = cca_ridge
        self.corr_weight = corr_weight
        self.loss_curve = list(loss_curve) if loss_curve is not None else []

    @classmethod
    def initialise(cls, input1, input2, nodes, classes, config):
        '''Create a network with freshly initialised weights for inputs of the given
        per-node widths.'''

        rng = np.random.default_rng(config.seed)
        cell1 = CellParams(config.cell, config.hidden, input1, rng=rng)
        cell2 = CellParams(config.cell, config.hidden, input2, rng=rng)
        unit = CorrUnitParams(config.hidden, config.mlp_widths, classes, config.k_corr,
                              rng=rng)
        return cls(cell1, cell2, unit, nodes, config.cca_ridge,
                   corr_weight=config.corr_weight)

    @property
    def k_corr(self):
        '''The width of each correlation head.'''

        return self.unit.k_corr

    @property
    def classes(self):
        '''The number of classes of the class heads.'''

        return self.unit.classes

    def parameters(self):
        '''Return every weight array in a single dictionary with unique keys. The arrays
        are the model's own, so in-place updates change the model.'''

        result = {}
        for prefix, arrays in (('cell1.', self.cell1.arrays), ('cell2.', self.cell2.arrays),
                               ('unit.', self.unit.arrays)):
            for key, value in arrays.items():
                result[prefix + key] = value
        return result

    def touch(self):
        '''Record that the weights have been changed in place.'''

        self.cell1.touch()
        self.cell2.touch()
        self.unit.touch()

    def node_inputs(self, samples):
        '''Return the node-shaped inputs of both channels for a list of samples.'''

        x1 = to_nodes(np.stack([sample.x1 for sample in samples]), self.nodes)
        x2 = to_nodes(np.stack([sample.x2 for sample in samples]), self.nodes)
        return x1, x2

    def forward(self, x1, x2):
        '''Evaluate the network on node-shaped inputs. Returns logits and head outputs of
        both channels, each shaped batch x T x width, and the caches.'''

        outputs1, outputs2, cell_caches = dcmnn_forward(self.cell1, self.cell2, x1, x2)
        batch, nodes, hidden = outputs1.shape
        logits1, logits2, h1, h2, unit_cache = \
            corr_unit_forward(self.unit, outputs1.reshape(batch * nodes, hidden),
                              outputs2.reshape(batch * nodes, hidden))
        shape = (batch, nodes, -1)
        return (logits1.reshape(shape), logits2.reshape(shape), h1.reshape(shape),
                h2.reshape(shape), (cell_caches, unit_cache))

    def loss_and_grads(self, x1, x2, labels):
        '''Return the JointLoss of a batch, with classification and correlation pooled
        over every node of every sample, and the gradients of its total with respect to
        every parameter.'''

        logits1, logits2, h1, h2, (cell_caches, unit_cache) = self.forward(x1, x2)
        batch, nodes, _ = logits1.shape
        rows = batch * nodes
        node_labels = np.repeat(np.asarray(labels), nodes)

        corr, grad_h1, grad_h2 = cca_corr(h1.reshape(rows, -1), h2.reshape(rows, -1),
                                          self.cca_ridge)
        loss = joint_loss(logits1.reshape(rows, -1), logits2.reshape(rows, -1),
                          node_labels, corr, self.k_corr, self.corr_weight)

        unit_grads, grad_o1, grad_o2 = corr_unit_backward(unit_cache, loss.grad_logits1,
                                                          loss.grad_logits2,
                                                          loss.grad_corr * grad_h1,
                                                          loss.grad_corr * grad_h2)
        cell1_grads, _ = unroll_backward(cell_caches[0], grad_o1.reshape(batch, nodes, -1))
        cell2_grads, _ = unroll_backward(cell_caches[1], grad_o2.reshape(batch, nodes, -1))

        grads = {}
        for prefix, part in (('cell1.', cell1_grads), ('cell2.', cell2_grads),
                             ('unit.', unit_grads)):
            for key, value in part.items():
                grads[prefix + key] = value
        return loss, grads

def train_corrmnn(samples, config, classes=None, nodes=10):
    '''Train a CorrMNN on a list of BimodalSample with mini-batch Adam. Each epoch visits
    the samples in a fresh order drawn from the seeded generator; the loss curve records
    the sample-weighted mean total loss of each epoch. A batch whose pooled node count is
    below 2 cannot be used for CCA and is skipped. A non-finite loss raises
    ConvergenceError.'''

    if not samples:
        raise InputError('CorrMNN training needs at least one sample')
    if classes is None:
        classes = max(sample.label for sample in samples) + 1

    labels = np.array([sample.label for sample in samples])
    first_nodes = to_nodes(samples[0].x1, nodes), to_nodes(samples[0].x2, nodes)
    model = CorrMnnModel.initialise(first_nodes[0].shape[1], first_nodes[1].shape[1], nodes,
                                    classes, config)
    x1, x2 = model.node_inputs(samples)
    params = model.parameters()
    optimiser = Adam(config.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])

    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        total = 0.0
        weight = 0
        for batch_number, start in enumerate(range(0, len(samples), config.batch_size)):
            batch = order[start:start + config.batch_size]
            if batch.size * nodes < 2:
                logger.debug('Skipping batch %d of epoch %d: too few nodes for CCA',
                             batch_number, epoch)
                continue
            loss, grads = model.loss_and_grads(x1[batch], x2[batch], labels[batch])
            if not math.isfinite(loss.total) \
                    or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise ConvergenceError('CorrMNN training diverged at epoch {0}, batch {1}: '
                                       'loss {2!r} (classification {3!r} + {4!r}, '
                                       'correlation {5!r})'
                                       .format(epoch, batch_number, loss.total, loss.class1,
                                               loss.class2, loss.corr_term))
            optimiser.step(params, grads)
            model.touch()
            total += loss.total * batch.size
            weight += batch.size
        if weight:
            model.loss_curve.append(total / weight)
            logger.debug('CorrMNN epoch %d: loss %.6f', epoch, model.loss_curve[-1])

    if model.loss_curve:
        logger.info('CorrMNN trained for %d epochs, final loss %.6f', config.epochs,
                    model.loss_curve[-1])
    return model

def temporal_features(model, samples):
    '''Return F_tp for a list of samples as an n x T x (2 k_corr) array.'''

    x1, x2 = model.node_inputs(samples)
    _, _, h1, h2, _ = model.forward(x1, x2)
    return np.concatenate((h1, h2), axis=2)

def extract_temporal_features(model, sample):
    '''Return F_tp for one sample: the correlation heads of both channels concatenated at
    each node, as a T x (2 k_corr) array.'''

    return temporal_features(model, [sample])[0]

def predict_classes(model, samples):
    '''Classify samples with the class heads alone, averaging the softmax output over
    nodes and channels. Returns the predicted labels and the n x C averaged
    probabilities.'''

    x1, x2 = model.node_inputs(samples)
    logits1, logits2, _, _, _ = model.forward(x1, x2)
    probabilities = 0.5 * (softmax(logits1, axis=2).mean(axis=1)
                           + softmax(logits2, axis=2).mean(axis=1))
    return np.argmax(probabilities, axis=1), probabilities
