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

import os
import logging

import pyworkflow.plugin
import pyworkflow.utils as pwutils

from .constants import *

__version__ = '1.0.0'

logger = logging.getLogger(__name__)


class Plugin(pyworkflow.plugin.Plugin):
    _url = "https://github.com/pprlvgan/pprlvgan"

    @classmethod
    def _defineVariables(cls):
        cls._defineVar(PPRLVGAN_DEVICE, 'cpu')
        cls._defineVar(PPRLVGAN_THREADS, '1')

    @classmethod
    def getEnviron(cls):
        """ No external binaries are needed, the current environment
        is used as is. """
        return pwutils.Environ(os.environ)

    @classmethod
    def defineBinaries(cls, env):
        pass

    @classmethod
    def getDevice(cls):
        """ Return the torch device string used for all computations. """
        return cls.getVar(PPRLVGAN_DEVICE,
                          os.environ.get(PPRLVGAN_DEVICE, 'cpu'))

    @classmethod
    def getThreads(cls):
        """ Number of intra-op threads used by torch. """
        value = cls.getVar(PPRLVGAN_THREADS,
                           os.environ.get(PPRLVGAN_THREADS, '1'))
        try:
            return max(1, int(value))
        except (TypeError, ValueError):
            logger.warning("Invalid %s value '%s', using 1 thread",
                           PPRLVGAN_THREADS, value)
            return 1

    @classmethod
    def setupTorch(cls):
        """ Configure torch threads and determinism for this process. """
        import torch

        torch.set_num_threads(cls.getThreads())
        if cls.getDevice() == 'cpu':
            torch.use_deterministic_algorithms(True)
        return torch.device(cls.getDevice())
