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
"""
Experiment configuration files: one STAR data block (data_config) with
one key-value pair per ExperimentConfig field, e.g.:

    data_config

    _seed         42
    _epochs       300
    _leftOut      none
"""

from ..constants import CONFIG_TABLE
from ..objects import ExperimentConfig
from .convert_utils import writeKeyValueStar, readKeyValueStar


def writeConfig(path, config):
    """ Write all fields of an ExperimentConfig. """
    return writeKeyValueStar(path, config.toStrDict(), CONFIG_TABLE)


def readConfigValues(path):
    """ Read the raw (string) values of a config file. Keys are checked
    later, when the ExperimentConfig is created. """
    return readKeyValueStar(path, CONFIG_TABLE)


def readConfig(path, **overrides):
    """ Read a config file, missing keys take default values and
    unknown keys raise ValidationError. Overrides win over the file.
    """
    values = readConfigValues(path)
    values.update(overrides)
    return ExperimentConfig.fromDict(values)
