'''Allows gaitfusion to be run with python -m gaitfusion.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import sys

from .cli import main

sys.exit(main())
