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
Checkpoint files: a torch-serialized dict with a format version, the
architecture as STAR key-value text, all network state (parameters,
batch-norm running statistics and update counters) and extra info
about the training run.
"""

import os
import logging

import torch

import pyworkflow.utils as pwutils

from ..constants import CHECKPOINT_VERSION, ARCH_TABLE
from ..exceptions import CheckpointError, StorageError, ValidationError
from ..objects import ArchConfig
from .convert_utils import keyValueToString, keyValueFromString

logger = logging.getLogger(__name__)


def saveCheckpoint(model, path, **extra):
    """ Write the model to path. The file is first written with a
    temporary name and then renamed, so an existing checkpoint is
    never left half-written.
    Params:
        model: ModelBundle instance.
        path: output file.
        extra: additional (primitive) values stored in the 'extra' dict.
    """
    payload = {
        'version': CHECKPOINT_VERSION,
        'arch': keyValueToString(model.arch.toStrDict(), ARCH_TABLE),
        'state': {k: v.detach().cpu().clone()
                  for k, v in model.state_dict().items()},
        'counters': model.getCounters(),
        'extra': dict(extra),
    }
    tmpPath = '%s.tmp' % path
    try:
        pwutils.makePath(os.path.dirname(path) or '.')
        torch.save(payload, tmpPath)
        os.replace(tmpPath, path)
    except OSError as e:
        pwutils.cleanPath(tmpPath)
        raise StorageError("Could not write checkpoint %s: %s" % (path, e))
    logger.debug("Checkpoint written: %s %s", path, payload['counters'])
    return path


def _readPayload(path):
    if not os.path.exists(path):
        raise CheckpointError("Checkpoint not found: %s" % path)
    try:
        payload = torch.load(path, map_location='cpu')
    except Exception as e:
        raise CheckpointError("Could not read checkpoint %s: %s" % (path, e))
    if not isinstance(payload, dict) or 'version' not in payload:
        raise CheckpointError("%s is not a checkpoint file" % path)
    if payload['version'] != CHECKPOINT_VERSION:
        raise CheckpointError("Checkpoint %s has version %s, expected %s"
                              % (path, payload['version'],
                                 CHECKPOINT_VERSION))
    return payload


def readCheckpointArch(path):
    """ Architecture stored in a checkpoint, without building the model. """
    payload = _readPayload(path)
    try:
        return ArchConfig.fromDict(keyValueFromString(payload['arch'],
                                                      ARCH_TABLE))
    except ValidationError as e:
        raise CheckpointError("Invalid architecture in %s: %s" % (path, e))


def readCheckpointExtra(path):
    return dict(_readPayload(path).get('extra', {}))


def loadCheckpoint(path, arch=None):
    """ Load a ModelBundle from path.
    Params:
        arch: if given, the stored architecture must be equal to it.
    """
    from ..nets import ModelBundle

    payload = _readPayload(path)
    try:
        stored = ArchConfig.fromDict(keyValueFromString(payload['arch'],
                                                        ARCH_TABLE))
    except ValidationError as e:
        raise CheckpointError("Invalid architecture in %s: %s" % (path, e))

    if arch is not None and arch != stored:
        diff = ', '.join('%s: %s != %s' % (k, v, getattr(stored, k))
                         for k, v in arch.toDict().items()
                         if getattr(stored, k) != v)
        raise CheckpointError("Architecture mismatch with checkpoint %s (%s)"
                              % (path, diff))

    model = ModelBundle(stored)
    try:
        model.load_state_dict(payload['state'])
    except (RuntimeError, KeyError) as e:
        raise CheckpointError("Checkpoint %s does not match its "
                              "architecture: %s" % (path, e))
    model.checkpointPath = path
    model.checkpointExtra = dict(payload.get('extra', {}))
    return model
