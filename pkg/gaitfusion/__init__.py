'''gaitfusion is a package that classifies bimodal gait recordings by combining three
feature extractors: a spatial Fisher-vector encoder (SFE), a correlative dual-channel
recurrent network (CorrMNN) and a bank of per-class hidden Markov models (the
multi-switch discriminator). It is intended to be usable as a library, but it also
provides an experiment command-line interface that wires the modules together, computes
metrics and exports the fitted models and features.

All numerical work is done with numpy and scipy on dense arrays. Python 3.8+ is
required.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

from enum import Enum

import numpy as np

class DescriptorKind(Enum):
    '''This enumeration identifies how a DescriptorSet was derived from a window of raw
    frames.'''

    DIRECT = 1
    TIME_STATS = 2
    FREQ_SPECTRUM = 3

class CellKind(Enum):
    '''This enumeration selects the recurrent cell used in each CorrMNN channel.
    MULTIGATED is the cell with the additional temporary-state path that gates the output,
    GRU is the plain gated recurrent unit it was derived from.'''

    MULTIGATED = 1
    GRU = 2

class DataSource(Enum):
    '''This enumeration specifies where an experiment obtains its bimodal samples.'''

    SYNTHETIC = 1
    GAITNDD = 2
    CSV = 3

class GaitFusionError(Exception):
    '''Base class for exceptions defined by gaitfusion. The exit_code attribute is the
    process exit status used by the command-line interface.'''

    exit_code = 1

class ConfigError(GaitFusionError):
    '''An experiment configuration could not be parsed or failed validation.'''

    exit_code = 2

class DataError(GaitFusionError):
    '''Input data could not be used.'''

    exit_code = 3

class DataFormatError(DataError):
    '''A data file is malformed or does not contain what was asked of it.'''

class StratificationError(DataError):
    '''A class does not have enough samples to be split into training and test
    partitions.'''

class NumericError(GaitFusionError):
    '''A numerical procedure failed.'''

    exit_code = 4

class SingularityError(NumericError):
    '''A matrix that must be positive definite is not.'''

class ConvergenceError(NumericError):
    '''An iterative procedure produced non-finite values.'''

class InputError(GaitFusionError, ValueError):
    '''The inputs to an operation are not finite, or their shapes are inconsistent with
    each other or with the operation's preconditions.'''

    exit_code = 4

class DimensionError(InputError):
    '''A requested output dimension or an observation width is not supported by the
    model.'''

class CacheMismatchError(InputError):
    '''A backward pass was given a cache that does not belong to the current
    parameters.'''

class StageError(GaitFusionError):
    '''An error raised inside a named stage of an experiment. The underlying error is
    available as the cause and determines the exit code: a gaitfusion error keeps its
    own, numerical failures from numpy or arithmetic give 4, failed file operations give
    3 and anything else 1.'''

    def __init__(self, stage, cause):
        super().__init__('Stage \'{0}\' failed: {1}'.format(stage, cause))
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self):
        if isinstance(self.cause, GaitFusionError):
            return self.cause.exit_code
        if isinstance(self.cause, (np.linalg.LinAlgError, ArithmeticError)):
            return NumericError.exit_code
        if isinstance(self.cause, OSError):
            return DataError.exit_code
        return GaitFusionError.exit_code
