'''A stage log that records the progress of an experiment to a file or stdout, times each
stage and turns errors raised inside a stage into StageError.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import contextlib
import sys
import time

import numpy as np

from . import GaitFusionError, StageError

class StageLog:
    '''A log of experiment stages. Each stage started with the stage context manager
    writes a line when it starts and when it finishes (or fails), and its elapsed time is
    kept in timings. Exceptions leaving a stage are re-raised as StageError naming the
    stage, unless they already are one.'''

    def __init__(self, log_file=sys.stdout):
        self.log_file = log_file
        self.timings = dict()
        self.log_file.write("***New Experiment Log Started***\n\n")
        self.log_file.flush()

    def note(self, message):
        '''Write a free-form line to the log.'''

        self.log_file.write('{}\n'.format(message))
        self.log_file.flush()

    @contextlib.contextmanager
    def stage(self, name):
        '''Run the body of a with statement as the named stage.'''

        self.log_file.write("Stage '{}' started\n".format(name))
        self.log_file.flush()
        start = time.perf_counter()
        try:
            yield self
        except StageError:
            raise
        except (GaitFusionError, ValueError, OSError, ArithmeticError,
                np.linalg.LinAlgError) as err:
            elapsed = time.perf_counter() - start
            self.timings[name] = elapsed
            self.log_file.write("Stage '{}' failed after {:.3f} s: {}\n"
                                .format(name, elapsed, err))
            self.log_file.flush()
            raise StageError(name, err) from err
        elapsed = time.perf_counter() - start
        self.timings[name] = elapsed
        self.log_file.write("Stage '{}' finished in {:.3f} s\n".format(name, elapsed))
        self.log_file.flush()

    def close(self):
        '''Close the log. Also closes the file associated with the object unless that is
        sys.stdout or sys.stderr.'''

        self.log_file.write("Closing log\n\n")
        self.log_file.flush()
        if self.log_file not in (sys.stdout, sys.stderr):
            self.log_file.close()

def open_stage_log(target):
    '''Return a StageLog writing to stdout if target is None or 'STDOUT', or appending to
    the named file otherwise.'''

    if target is None or target == 'STDOUT':
        return StageLog(sys.stdout)
    return StageLog(open(target, 'a'))
