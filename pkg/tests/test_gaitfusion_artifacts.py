'''Test gaitfusion.artifacts and gaitfusion.stagelog'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import io
import os

import numpy as np
import pytest

from gaitfusion import ConfigError, DataFormatError, GaitFusionError, SingularityError, \
    StageError
import gaitfusion.artifacts as artifacts
from gaitfusion.stagelog import StageLog, open_stage_log

def test_format_real():

    assert artifacts.format_real(0.1) == '0.10000000000000001'
    assert float(artifacts.format_real(1.0 / 3.0)) == 1.0 / 3.0
    assert artifacts.format_real(float('nan')) == 'nan'
    assert artifacts.format_real(np.float64(2.0)) == '2'

def test_csv_text():

    text = artifacts.csv_text(('name', 'value'), [('a', 0.5), ('b', 3), ('c', True)])
    assert text == 'name,value\na,0.5\nb,3\nc,True\n'

def test_atomic_write(tmp_path):

    path = str(tmp_path / 'out.txt')
    artifacts.atomic_write(path, 'first')
    artifacts.atomic_write(path, b'second')
    with open(path, 'rb') as result:
        assert result.read() == b'second'
    assert os.listdir(str(tmp_path)) == ['out.txt']

def test_output_set(tmp_path):

    outputs = artifacts.OutputSet(str(tmp_path / 'new'))
    first = outputs.write('a.txt', 'a')
    outputs.write_csv('b.csv', ('x',), [(1,)])
    outputs.write('a.txt', 'again')
    assert outputs.written == [first, outputs.path('b.csv')]

    (tmp_path / 'new' / 'other.txt').write_text('not ours')
    outputs.remove_all()
    assert os.listdir(str(tmp_path / 'new')) == ['other.txt']

def test_stage_log():

    log_text = io.StringIO()
    log = StageLog(log_text)
    with log.stage('first'):
        log.note('inside')
    assert 'first' in log.timings

    with pytest.raises(StageError) as excinfo:
        with log.stage('second'):
            raise SingularityError('not positive definite')
    assert excinfo.value.stage == 'second'
    assert excinfo.value.exit_code == 4
    assert 'second' in log.timings

    # Errors that are already attributed to a stage pass through unchanged
    inner = StageError('inner', DataFormatError('bad'))
    with pytest.raises(StageError) as excinfo:
        with log.stage('outer'):
            raise inner
    assert excinfo.value is inner
    assert excinfo.value.exit_code == 3

    lines = log_text.getvalue().splitlines()
    assert "Stage 'first' started" in lines
    assert 'inside' in lines
    assert any(line.startswith("Stage 'second' failed after") for line in lines)

def test_stage_error_exit_code():

    assert StageError('x', KeyError('k')).exit_code == GaitFusionError.exit_code
    assert StageError('x', ValueError('v')).exit_code == GaitFusionError.exit_code
    assert StageError('x', np.linalg.LinAlgError('singular')).exit_code == 4
    assert StageError('x', ZeroDivisionError()).exit_code == 4
    assert StageError('x', FloatingPointError()).exit_code == 4
    assert StageError('x', FileNotFoundError('missing')).exit_code == 3
    assert StageError('x', ConfigError('bad')).exit_code == 2

def test_stage_log_library_errors():

    log = StageLog(io.StringIO())
    with pytest.raises(StageError) as excinfo:
        with log.stage('solve'):
            np.linalg.cholesky(-np.eye(2))
    assert isinstance(excinfo.value.cause, np.linalg.LinAlgError)
    assert excinfo.value.exit_code == 4

    with pytest.raises(StageError) as excinfo:
        with log.stage('read'):
            open(os.path.join(os.sep, 'no', 'such', 'file'), 'r')
    assert excinfo.value.exit_code == 3

def test_open_stage_log(tmp_path):

    path = str(tmp_path / 'stages.log')
    log = open_stage_log(path)
    with log.stage('only'):
        pass
    log.close()
    log = open_stage_log(path)
    log.close()
    with open(path, 'r') as log_file:
        assert log_file.read().count('New Experiment Log Started') == 2
