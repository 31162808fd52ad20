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
Utility functions for conversions between pixel arrays, tensors, image
files and key-value STAR blocks.
"""

import os
import io
import hashlib

import numpy as np
import torch
from PIL import Image
from emtable import Table

import pyworkflow.utils as pwutils

from ..exceptions import ValidationError, StorageError


def normalizeImage(raw):
    """ Map 8-bit pixel values [0, 255] to [-1, 1] (v / 127.5 - 1).
    Params:
        raw: HxWx3 array (or tensor) with values in [0, 255].
    Return:
        float32 numpy array (or float tensor if a tensor was given).
    """
    if isinstance(raw, torch.Tensor):
        raw = raw.to(torch.float64)
        if raw.numel() and (raw.min() < 0 or raw.max() > 255):
            raise ValidationError("Pixel values out of range [0, 255]")
        return (raw / 127.5 - 1.0).to(torch.float32)

    raw = np.asarray(raw, dtype=np.float64)
    if raw.size and (raw.min() < 0 or raw.max() > 255):
        raise ValidationError("Pixel values out of range [0, 255]: "
                              "[%s, %s]" % (raw.min(), raw.max()))
    return (raw / 127.5 - 1.0).astype(np.float32)


def denormalizeImage(img):
    """ Inverse of normalizeImage, returning uint8 values.
    Values are clipped to [-1, 1] and rounded to the nearest level.
    """
    if isinstance(img, torch.Tensor):
        img = img.detach().cpu().numpy()
    img = np.clip(np.asarray(img, dtype=np.float64), -1.0, 1.0)
    return np.rint((img + 1.0) * 127.5).astype(np.uint8)


def oneHot(index, n):
    """ Identity code: length-n float vector with a single 1 at index. """
    if not 0 <= int(index) < n:
        raise ValidationError("Index %s out of range [0, %d)" % (index, n))
    code = torch.zeros(n)
    code[int(index)] = 1.0
    return code


def oneHotBatch(indexes, n):
    """ Stack of identity codes for a 1D tensor of indexes. """
    indexes = torch.as_tensor(indexes, dtype=torch.long)
    if indexes.numel() and (indexes.min() < 0 or indexes.max() >= n):
        raise ValidationError("Indexes out of range [0, %d)" % n)
    return torch.nn.functional.one_hot(indexes, n).to(torch.float32)


def imageToTensor(img):
    """ HxWx3 normalized array to a 3xHxW float tensor. """
    return torch.from_numpy(np.ascontiguousarray(
        np.asarray(img, dtype=np.float32).transpose(2, 0, 1)))


def tensorToImage(tensor):
    """ 3xHxW tensor to HxWx3 float32 numpy array. """
    return tensor.detach().cpu().numpy().transpose(1, 2, 0).astype(np.float32)


def readImage(path, imageSize=None):
    """ Read an image file as normalized HxWx3 float32 array.
    If imageSize is given the image is resized to a square of that size.
    """
    try:
        with Image.open(path) as img:
            img = img.convert('RGB')
            if imageSize is not None and img.size != (imageSize, imageSize):
                img = img.resize((imageSize, imageSize), Image.BILINEAR)
            raw = np.asarray(img, dtype=np.uint8)
    except OSError as e:
        raise StorageError("Could not read image %s: %s" % (path, e))
    return normalizeImage(raw)


def writeImage(path, img):
    """ Write a normalized HxWx3 array (or 3xHxW tensor) as 8-bit RGB PNG. """
    if isinstance(img, torch.Tensor):
        img = tensorToImage(img)
    try:
        pwutils.makePath(os.path.dirname(path) or '.')
        Image.fromarray(denormalizeImage(img), mode='RGB').save(path)
    except OSError as e:
        raise StorageError("Could not write image %s: %s" % (path, e))
    return path


def writeRawImage(path, raw):
    """ Write an HxWx3 uint8 array as PNG. """
    try:
        Image.fromarray(np.asarray(raw, dtype=np.uint8), mode='RGB').save(path)
    except OSError as e:
        raise StorageError("Could not write image %s: %s" % (path, e))
    return path


def fileDigest(path):
    """ SHA-256 of a file content. """
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            h.update(chunk)
    return h.hexdigest()


def stateDigest(module):
    """ SHA-256 over all parameters and buffers of a torch module.
    Used to check that some code did not modify a network.
    """
    h = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def paramDigest(module):
    """ SHA-256 over the trainable parameters only (no running stats). """
    h = hashlib.sha256()
    for name, p in module.named_parameters():
        h.update(name.encode())
        h.update(p.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


# ----------------- STAR key-value blocks ------------------------------------

def _keyValueTable(values):
    """ Create a single-row table with all values as strings. """
    table = Table(columns=[Table.Column(k, type=str) for k in values])
    table.addRow(**{k: str(v) for k, v in values.items()})
    return table


def writeKeyValueStar(path, values, tableName):
    """ Write a dict as a single-row STAR data block. """
    try:
        with open(path, 'w') as f:
            _keyValueTable(values).writeStar(f, tableName=tableName,
                                             singleRow=True)
    except OSError as e:
        raise StorageError("Could not write %s: %s" % (path, e))
    return path


def keyValueToString(values, tableName):
    f = io.StringIO()
    _keyValueTable(values).writeStar(f, tableName=tableName, singleRow=True)
    return f.getvalue()


def _tableToDict(table):
    if len(table) != 1:
        raise ValidationError("Expected a single row key-value block, "
                              "found %d rows" % len(table))
    return {k: str(v) for k, v in table[0]._asdict().items()}


def readKeyValueStar(path, tableName):
    """ Read a single-row STAR data block as a dict of strings. """
    if not os.path.exists(path):
        raise StorageError("Missing file: %s" % path)
    try:
        return _tableToDict(Table(fileName=path, tableName=tableName))
    except OSError as e:
        raise StorageError("Could not read %s: %s" % (path, e))
    except ValidationError:
        raise
    except Exception as e:
        raise ValidationError("Invalid STAR block '%s' in %s: %s"
                              % (tableName, path, e))


def keyValueFromString(text, tableName):
    table = Table()
    table.readStar(io.StringIO(text), tableName=tableName)
    return _tableToDict(table)
