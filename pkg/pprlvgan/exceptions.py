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
Error classes raised across the package. Each one carries the exit code
that the command line returns for it.
"""

from .constants import (EXIT_VALIDATION, EXIT_STORAGE, EXIT_DIVERGENCE,
                        EXIT_CHECKPOINT, EXIT_SYNTH_ARGS)


class PprlVganError(Exception):
    EXIT_CODE = EXIT_VALIDATION


class ValidationError(PprlVganError, ValueError):
    """ Invalid input values, shapes, labels or configuration. """
    pass


class StratificationError(ValidationError):
    """ A (identity, expression) cell can not be split. """
    pass


class NumericError(ValidationError):
    """ Non-finite values where finite ones are required. """
    pass


class SynthArgumentError(ValidationError):
    EXIT_CODE = EXIT_SYNTH_ARGS


class StorageError(PprlVganError, OSError):
    EXIT_CODE = EXIT_STORAGE


class CheckpointError(PprlVganError):
    """ Unreadable checkpoint, version mismatch or architecture mismatch
    (against the config or the manifest being used).
    """
    EXIT_CODE = EXIT_CHECKPOINT


class DivergenceError(PprlVganError, RuntimeError):
    """ Raised when a training objective becomes non-finite.
    The snapshot dict holds the diagnostic values at the failing step
    and the path of the last good checkpoint (if any).
    """
    EXIT_CODE = EXIT_DIVERGENCE

    def __init__(self, message, snapshot=None):
        PprlVganError.__init__(self, message)
        self.snapshot = dict(snapshot or {})

    def __str__(self):
        msg = PprlVganError.__str__(self)
        if self.snapshot:
            items = ', '.join('%s=%s' % (k, v)
                              for k, v in self.snapshot.items())
            msg += ' (%s)' % items
        return msg
