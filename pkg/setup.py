# **************************************************************************
# *
# * This program is free software; you can redistribute it and/or modify
# * it under the terms of the GNU General Public License as published by
# * the Free Software Foundation; either version 3 of the License, or
# * (at your option) any later version.
# *
# * This program is distributed in the hope that it will be useful,
# * but WITHOUT ANY WARRANTY; without even the implied warranty of
# * MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# * GNU General Public License for more details.
# *
# **************************************************************************

"""A setuptools based setup module for the pprlvgan plugin.
See:
https://packaging.python.org/en/latest/distributing.html
"""

from setuptools import setup, find_packages
from codecs import open
from os import path

from pprlvgan import __version__

here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with open(path.join(here, 'README.rst'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='pprlvgan',
    version=__version__,
    description='Privacy-preserving representation learning with a '
                'VAE-GAN: identity-invariant expression features, '
                'attack evaluation and face synthesis',
    long_description=long_description,
    classifiers=[
        'Development Status :: 4 - Beta',
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
        'Programming Language :: Python :: 3'
    ],
    keywords='privacy de-identification vae gan facial-expression pytorch',
    packages=find_packages(),
    python_requires='>=3.7',
    install_requires=['scipion-pyworkflow', 'emtable', 'torch', 'numpy',
                      'Pillow', 'matplotlib'],
    entry_points={
        'pyworkflow.plugin': 'pprlvgan = pprlvgan',
        'console_scripts': ['pprlvgan = pprlvgan.cli:main'],
    },
)
