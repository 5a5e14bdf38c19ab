'''This module stores fitted models in a versioned flat binary layout and writes
plain-text dumps of them. All integers and reals are little-endian:

    magic b'GFMB' | version u32 | kind 8 bytes ASCII, NUL padded | array count u32
    then for each array:
    name length u16 | name UTF-8 | ndim u32 | dims u64 * ndim | data f64 * prod(dims)

A model is stored as a list of named arrays. Each model type is registered with the
kind tag written to the header and the functions that convert it to and from its
arrays.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import struct

import numpy as np

from . import CellKind, DataFormatError
from . import artifacts, corrmnn, discriminator, sfe

MAGIC = b'GFMB'
VERSION = 1
HEADER = struct.Struct('<4sI8sI')
NAME_LENGTH = struct.Struct('<H')
NDIM = struct.Struct('<I')

def encode_arrays(kind, arrays):
    '''Return the binary form of a list of (name, array) pairs under the given kind.'''

    kind_bytes = kind.encode('ascii')
    if len(kind_bytes) > 8:
        raise ValueError('Model kind {0} is longer than 8 characters'.format(kind))
    parts = [HEADER.pack(MAGIC, VERSION, kind_bytes.ljust(8, b'\0'), len(arrays))]
    for name, value in arrays:
        value = np.asarray(value, dtype='<f8')
        name_bytes = name.encode('utf-8')
        parts.append(NAME_LENGTH.pack(len(name_bytes)))
        parts.append(name_bytes)
        parts.append(NDIM.pack(value.ndim))
        parts.append(struct.pack('<{0}Q'.format(value.ndim), *value.shape))
        parts.append(np.ascontiguousarray(value).tobytes())
    return b''.join(parts)

def decode_arrays(data):
    '''Return the kind and the dictionary of named arrays stored in binary data.'''

    if len(data) < HEADER.size:
        raise DataFormatError('Model data is truncated')
    magic, version, kind_bytes, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DataFormatError('Model data does not start with {0!r}'.format(MAGIC))
    if version != VERSION:
        raise DataFormatError('Model data has unsupported version {0}'.format(version))
    offset = HEADER.size
    arrays = {}
    try:
        for _ in range(count):
            (name_length,) = NAME_LENGTH.unpack_from(data, offset)
            offset += NAME_LENGTH.size
            name = data[offset:offset + name_length].decode('utf-8')
            offset += name_length
            (ndim,) = NDIM.unpack_from(data, offset)
            offset += NDIM.size
            shape = struct.unpack_from('<{0}Q'.format(ndim), data, offset)
            offset += 8 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if offset + 8 * size > len(data):
                raise DataFormatError('Model data is truncated in array {0}'.format(name))
            arrays[name] = np.frombuffer(data, dtype='<f8', count=size,
                                         offset=offset).reshape(shape).astype(np.float64)
            offset += 8 * size
    except struct.error as err:
        raise DataFormatError('Model data is truncated: {0}'.format(err)) from err
    if offset != len(data):
        raise DataFormatError('Model data has {0} unexpected trailing bytes'
                              .format(len(data) - offset))
    return kind_bytes.rstrip(b'\0').decode('ascii'), arrays

class ModelRegistry():
    '''This class maps model types to the kind tags and conversion functions used to
    store them. to_arrays returns a list of (name, array) pairs and from_arrays rebuilds
    the model from the dictionary of arrays.'''

    def __init__(self):
        self.by_type = dict()
        self.by_kind = dict()

    def register(self, kind, model_type, to_arrays, from_arrays):
        '''Register a model type under a kind tag.'''

        self.by_type[model_type] = (kind, to_arrays)
        self.by_kind[kind] = from_arrays

    def encode(self, model):
        '''Return the binary form of a registered model.'''

        if type(model) not in self.by_type:
            raise TypeError('No binary layout registered for {0}'.format(type(model).__name__))
        kind, to_arrays = self.by_type[type(model)]
        return encode_arrays(kind, to_arrays(model))

    def decode(self, data):
        '''Rebuild a model from its binary form.'''

        kind, arrays = decode_arrays(data)
        if kind not in self.by_kind:
            raise DataFormatError('Unknown model kind \'{0}\''.format(kind))
        try:
            return self.by_kind[kind](arrays)
        except KeyError as err:
            raise DataFormatError('Model of kind {0} lacks array {1}'.format(kind, err)) \
                from err

    def text_dump(self, model):
        '''Return a plain-text listing of every array of a registered model.'''

        kind, to_arrays = self.by_type[type(model)]
        lines = ['# gaitfusion model kind {0}'.format(kind)]
        for name, value in to_arrays(model):
            value = np.asarray(value, dtype=np.float64)
            lines.append('# {0} {1}'.format(name, 'x'.join(str(d) for d in value.shape)
                                            or 'scalar'))
            rows = value.reshape(value.shape[0], -1) if value.ndim > 1 \
                else value.reshape(1, -1)
            for row in rows:
                lines.append(' '.join(artifacts.format_real(v) for v in row))
        return '\n'.join(lines) + '\n'

def _gmm_arrays(model):
    return [('weights', model.weights), ('means', model.means),
            ('variances', model.variances), ('trace', np.array(model.trace))]

def _gmm_model(arrays):
    return sfe.GmmModel(arrays['weights'], arrays['means'], arrays['variances'],
                        trace=arrays['trace'])

def _lda_arrays(model):
    return [('projection', model.projection), ('mean', model.mean),
            ('classes', model.classes), ('class_means', model.class_means),
            ('ridge', np.array([model.ridge]))]

def _lda_model(arrays):
    return sfe.LdaModel(arrays['projection'], arrays['mean'],
                        arrays['classes'].astype(int), arrays['class_means'],
                        float(arrays['ridge'][0]))

def _hmm_arrays(model):
    return [('initial', model.initial), ('transitions', model.transitions),
            ('means', model.means), ('variances', model.variances),
            ('var_floor', np.array([model.var_floor])), ('trace', np.array(model.trace))]

def _hmm_model(arrays):
    return discriminator.GaussianHmm(arrays['initial'], arrays['transitions'],
                                     arrays['means'], arrays['variances'],
                                     float(arrays['var_floor'][0]), arrays['trace'])

def _corrmnn_arrays(model):
    cell, unit = model.cell1, model.unit
    shape = np.array([cell.kind.value, cell.hidden, cell.input_size, model.cell2.input_size,
                      model.nodes, unit.classes, unit.k_corr] + list(unit.widths),
                     dtype=np.float64)
    result = [('shape', shape), ('cca_ridge', np.array([model.cca_ridge])),
              ('corr_weight', np.array([model.corr_weight])),
              ('loss_curve', np.array(model.loss_curve))]
    result.extend(sorted(model.parameters().items()))
    return result

def _corrmnn_model(arrays):
    shape = [int(v) for v in arrays['shape']]
    kind, hidden, input1, input2, nodes, classes, k_corr = shape[:7]
    kind = CellKind(kind)

    def part(prefix):
        return {key[len(prefix):]: value.copy() for key, value in arrays.items()
                if key.startswith(prefix)}

    cell1 = corrmnn.CellParams(kind, hidden, input1, part('cell1.'))
    cell2 = corrmnn.CellParams(kind, hidden, input2, part('cell2.'))
    unit = corrmnn.CorrUnitParams(hidden, shape[7:], classes, k_corr, part('unit.'))
    return corrmnn.CorrMnnModel(cell1, cell2, unit, nodes, float(arrays['cca_ridge'][0]),
                                arrays['loss_curve'], float(arrays['corr_weight'][0]))

REGISTRY = ModelRegistry()
REGISTRY.register('gmm', sfe.GmmModel, _gmm_arrays, _gmm_model)
REGISTRY.register('lda', sfe.LdaModel, _lda_arrays, _lda_model)
REGISTRY.register('hmm', discriminator.GaussianHmm, _hmm_arrays, _hmm_model)
REGISTRY.register('corrmnn', corrmnn.CorrMnnModel, _corrmnn_arrays, _corrmnn_model)

def save_model(model, path):
    '''Atomically write a model in the binary layout.'''

    artifacts.atomic_write(path, REGISTRY.encode(model))

def load_model(path):
    '''Read a model written by save_model.'''

    with open(path, 'rb') as model_file:
        return REGISTRY.decode(model_file.read())

def text_dump(model):
    '''Return the plain-text dump of a model.'''

    return REGISTRY.text_dump(model)
