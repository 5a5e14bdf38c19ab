'''The setuptools script to manage the gaitfusion package.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

from setuptools import setup, find_packages
setup(
    name="gaitfusion",
    version="0.0.1",
    packages=find_packages(exclude=('tests', 'tests.*', 'examples', 'examples.*')),

    python_requires='>=3.8',
    install_requires=['numpy>=1.20', 'scipy>=1.6'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['gaitfusion = gaitfusion.cli:main']},

    author="James Humphry",
    description="Bimodal gait classification with Fisher-vector, correlative recurrent "
                "network and HMM features.",
    license="ISC",
    keywords="gait classification multimodal fisher-vector cca hmm",
)
