'''This module writes experiment output files. Every file is written to a temporary file
in the destination directory and then renamed into place, so a reader never sees a
partly written file.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import csv
import io
import logging
import math
import os
import tempfile

logger = logging.getLogger(__name__)

def format_real(value):
    '''Format a real number with enough digits to be read back exactly.'''

    value = float(value)
    if math.isnan(value):
        return 'nan'
    return '{0:.17g}'.format(value)

def format_cell(value):
    '''Format a CSV cell: reals with format_real, anything else with str.'''

    if isinstance(value, bool) or isinstance(value, str):
        return str(value)
    if isinstance(value, int):
        return str(value)
    try:
        return format_real(value)
    except (TypeError, ValueError):
        return str(value)

def csv_text(header, rows):
    '''Return CSV text with a header line followed by the given rows.'''

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(value) for value in row])
    return buffer.getvalue()

def atomic_write(path, data):
    '''Write bytes or text to path by writing a temporary file in the same directory and
    renaming it over path.'''

    directory = os.path.dirname(os.path.abspath(path))
    if isinstance(data, str):
        data = data.encode('utf-8')
    handle, temporary = tempfile.mkstemp(dir=directory, prefix='.' + os.path.basename(path),
                                         suffix='.tmp')
    try:
        with os.fdopen(handle, 'wb') as output:
            output.write(data)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise

class OutputSet:
    '''The files written by one experiment into a directory. remove_all deletes every file
    written so far, which is used to clean up after a failed run.'''

    def __init__(self, directory):
        self.directory = directory
        self.written = []
        os.makedirs(directory, exist_ok=True)

    def path(self, name):
        '''Return the full path of an output file.'''

        return os.path.join(self.directory, name)

    def write(self, name, data):
        '''Atomically write text or bytes to the named file.'''

        path = self.path(name)
        atomic_write(path, data)
        if path not in self.written:
            self.written.append(path)
        logger.debug('Wrote %s', path)
        return path

    def write_csv(self, name, header, rows):
        '''Atomically write a CSV file with a header line.'''

        return self.write(name, csv_text(header, rows))

    def remove_all(self):
        '''Remove every file written through this OutputSet.'''

        for path in self.written:
            if os.path.exists(path):
                os.remove(path)
        self.written = []
