'''Test gaitfusion.serialize_json and gaitfusion.serialize_binary'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import json
import struct

import numpy as np
import pytest

from gaitfusion import CellKind, ConfigError, DataFormatError
from gaitfusion import config, corrmnn, discriminator, metrics, sfe
import gaitfusion.serialize_binary as serialize_binary
import gaitfusion.serialize_json as serialize_json

def test_json_config(small_config):

    small_config.corrmnn.cell = CellKind.GRU
    text = serialize_json.dumps(small_config)
    obj = json.loads(text)
    assert obj['__ExperimentConfig__'] == 'ExperimentConfig'
    assert obj['corrmnn']['cell'] == 'gru'
    assert obj['corrmnn']['mlp_widths'] == [32, 16, 8]
    assert obj['sfe']['d_out'] is None

    decoded = serialize_json.GaitFusionDecoder().decode(text)
    assert isinstance(decoded, config.ExperimentConfig)
    assert decoded._text() == small_config._text()
    assert decoded.corrmnn.cell == CellKind.GRU

def test_json_config_bad_values(small_config):

    obj = json.loads(serialize_json.dumps(small_config))
    obj['hmm']['states'] = 0
    with pytest.raises(ConfigError):
        serialize_json.GaitFusionDecoder().decode(json.dumps(obj))

    obj = json.loads(serialize_json.dumps(small_config))
    obj['hmm'] = 3
    with pytest.raises(ConfigError):
        serialize_json.GaitFusionDecoder().decode(json.dumps(obj))

def test_json_section():

    section = config.ExperimentConfig().window
    obj = json.loads(serialize_json.dumps(section))
    assert obj['__ConfigSection__'] == 'window'
    assert obj['nodes'] == 10

def test_json_report():

    report = metrics.compute_metrics([0, 1, 1], [0, 1, 0],
                                     [[1.0, 0.0], [0.0, 1.0], [0.6, 0.4]], ['a', 'b'])
    report.timings['sfe'] = 1.5
    obj = json.loads(serialize_json.dumps(report))

    assert obj['__MetricsReport__'] == 'MetricsReport'
    assert obj['accuracy'] == pytest.approx(2.0 / 3.0)
    assert obj['confusion'] == [[1, 0], [1, 1]]
    assert obj['timings'] == {'sfe': 1.5}
    # The infinite starting threshold has no JSON form
    assert obj['roc']['a'][0] == [None, 0.0, 0.0]

    # Plain dictionaries come back from the decoder unchanged
    assert serialize_json.GaitFusionDecoder().decode(json.dumps(obj)) == obj

def test_json_nan_is_null():

    assert serialize_json.GaitFusionEncoder.serialize_value(float('nan')) is None
    assert serialize_json.GaitFusionEncoder.serialize_value(np.int64(3)) == 3
    with pytest.raises(TypeError):
        serialize_json.GaitFusionEncoder.serialize_value(object())

def test_binary_arrays():

    data = serialize_binary.encode_arrays('test', [('a', np.arange(6.0).reshape(2, 3)),
                                                   ('scalar', np.array(2.5))])
    assert data[:4] == b'GFMB'
    assert struct.unpack_from('<I', data, 4)[0] == serialize_binary.VERSION
    assert data[8:16] == b'test\0\0\0\0'

    kind, arrays = serialize_binary.decode_arrays(data)
    assert kind == 'test'
    assert np.array_equal(arrays['a'], np.arange(6.0).reshape(2, 3))
    assert arrays['scalar'].shape == ()

    with pytest.raises(ValueError):
        serialize_binary.encode_arrays('much_too_long', [])

def test_binary_errors():

    data = serialize_binary.encode_arrays('test', [('a', np.ones(4))])

    with pytest.raises(DataFormatError, match='truncated'):
        serialize_binary.decode_arrays(data[:10])

    with pytest.raises(DataFormatError, match='truncated'):
        serialize_binary.decode_arrays(data[:-8])

    with pytest.raises(DataFormatError, match='trailing'):
        serialize_binary.decode_arrays(data + b'\0')

    with pytest.raises(DataFormatError, match='GFMB'):
        serialize_binary.decode_arrays(b'XXXX' + data[4:])

    with pytest.raises(DataFormatError, match='version'):
        serialize_binary.decode_arrays(data[:4] + struct.pack('<I', 99) + data[8:])

    with pytest.raises(DataFormatError, match='Unknown model kind'):
        serialize_binary.REGISTRY.decode(data)

    with pytest.raises(DataFormatError, match='lacks array'):
        serialize_binary.REGISTRY.decode(serialize_binary.encode_arrays('gmm', []))

    with pytest.raises(TypeError):
        serialize_binary.REGISTRY.encode(object())

def test_gmm_and_lda_models(tmp_path, rng):

    gmm = sfe.GmmModel([0.25, 0.75], rng.standard_normal((2, 3)),
                       rng.uniform(0.5, 1.5, (2, 3)), trace=[-10.0, -9.5])
    path = str(tmp_path / 'gmm.bin')
    serialize_binary.save_model(gmm, path)
    loaded = serialize_binary.load_model(path)
    assert isinstance(loaded, sfe.GmmModel)
    assert np.array_equal(loaded.weights, gmm.weights)
    assert np.array_equal(loaded.means, gmm.means)
    assert np.array_equal(loaded.variances, gmm.variances)
    assert loaded.trace == gmm.trace

    lda = sfe.LdaModel(rng.standard_normal((5, 2)), rng.standard_normal(5), [0, 1, 2],
                       rng.standard_normal((3, 2)), ridge=1e-6)
    loaded = serialize_binary.REGISTRY.decode(serialize_binary.REGISTRY.encode(lda))
    assert np.array_equal(loaded.projection, lda.projection)
    assert list(loaded.classes) == [0, 1, 2]
    assert loaded.ridge == 1e-6

def test_hmm_model(rng):

    model = discriminator.GaussianHmm([0.4, 0.6], [[0.9, 0.1], [0.2, 0.8]],
                                      rng.standard_normal((2, 4)), np.ones((2, 4)),
                                      var_floor=1e-3, trace=[-5.0])
    loaded = serialize_binary.REGISTRY.decode(serialize_binary.REGISTRY.encode(model))
    sequence = rng.standard_normal((6, 4))
    assert discriminator.forward_loglik(loaded, sequence) == \
        discriminator.forward_loglik(model, sequence)
    assert loaded.var_floor == 1e-3

@pytest.mark.parametrize('kind', (CellKind.MULTIGATED, CellKind.GRU))
def test_corrmnn_model(kind):

    settings = corrmnn.TrainConfig(cell=kind, hidden=4, mlp_widths=(5, 4, 3), k_corr=2,
                                   seed=5)
    model = corrmnn.CorrMnnModel.initialise(3, 2, 5, 3, settings)
    model.loss_curve = [2.0, 1.5]
    model.corr_weight = 0.25
    loaded = serialize_binary.REGISTRY.decode(serialize_binary.REGISTRY.encode(model))

    assert loaded.cell1.kind == kind
    assert loaded.nodes == 5
    assert loaded.classes == 3
    assert loaded.k_corr == 2
    assert loaded.unit.widths == model.unit.widths
    assert loaded.loss_curve == [2.0, 1.5]
    assert loaded.corr_weight == 0.25
    original = model.parameters()
    restored = loaded.parameters()
    assert sorted(original) == sorted(restored)
    assert all(np.array_equal(original[key], restored[key]) for key in original)

def test_text_dump():

    model = discriminator.GaussianHmm([1.0], [[1.0]], [[0.5, 0.25]], [[1.0, 2.0]])
    lines = serialize_binary.text_dump(model).splitlines()
    assert lines[0] == '# gaitfusion model kind hmm'
    assert '# means 1x2' in lines
    assert lines[lines.index('# means 1x2') + 1] == '0.5 0.25'
