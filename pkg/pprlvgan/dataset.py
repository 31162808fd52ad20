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
import math
import logging
from collections import namedtuple

import numpy as np
import torch

import pyworkflow.utils as pwutils

from .constants import *
from .exceptions import ValidationError, StratificationError, StorageError
from .convert import (DatasetManifest, ManifestRecord, readImage, writeImage,
                      imageToTensor)

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = ('.png', '.jpg', '.jpeg', '.bmp')

LabeledImage = namedtuple('LabeledImage', ['pixels', 'identity', 'expression'])

# Tensors of a whole split: images N x 3 x H x W in [-1, 1], labels N
LabeledBatch = namedtuple('LabeledBatch',
                          ['images', 'identities', 'expressions', 'files'])


def getTrainCount(n, trainFraction):
    """ Number of train records of a cell with n records (rounded down). """
    return int(math.floor(trainFraction * n + 1e-9))


def splitDataset(manifest, trainFraction, seed):
    """ Assign train/test tags per (identity, expression) cell.
    Each cell gets floor(trainFraction * n) train records, picked
    without replacement from a random stream of (seed, identity,
    expression); the remainder goes to test. Empty cells and cells too
    small for one train record raise StratificationError.
    Return a new DatasetManifest, the input one is not modified.
    """
    if not 0 < trainFraction < 1:
        raise ValidationError("trainFraction must be in (0, 1), got %s"
                              % trainFraction)
    tags = {}
    for (i, e), records in manifest.getCells().items():
        if not records:
            raise StratificationError("Empty cell (identity %d, expression "
                                      "%d), can not stratify the split"
                                      % (i, e))
        nTrain = getTrainCount(len(records), trainFraction)
        if nTrain == 0:
            raise StratificationError("Cell (identity %d, expression %d) "
                                      "has %d records, none would go to "
                                      "train with fraction %s"
                                      % (i, e, len(records), trainFraction))
        rng = np.random.default_rng([seed, i, e])
        order = rng.permutation(len(records))
        for rank, k in enumerate(order):
            tags[records[k].file] = SPLIT_TRAIN if rank < nTrain else SPLIT_TEST

    records = [r._replace(split=tags[r.file]) for r in manifest]
    return manifest.clone(records, trainFraction=trainFraction)


def loadImages(manifest, split=None, leftOut=None):
    """ Load the images of a split as a LabeledBatch.
    Params:
        split: 'train', 'test' or None for all records.
        leftOut: optional (identity, expression) cell to exclude.
    """
    records = manifest.getRecords(split=split, leftOut=leftOut)
    imageSize = manifest.imageSize or None
    images = []
    for r in records:
        pixels = readImage(manifest.getPath(r), imageSize)
        imageSize = pixels.shape[0]
        images.append(imageToTensor(pixels))

    if images:
        imagesTensor = torch.stack(images)
    else:
        size = manifest.imageSize or 0
        imagesTensor = torch.zeros((0, 3, size, size))
    return LabeledBatch(imagesTensor,
                        torch.tensor([r.identity for r in records],
                                     dtype=torch.long),
                        torch.tensor([r.expression for r in records],
                                     dtype=torch.long),
                        [r.file for r in records])


def getLabeledImage(batch, index):
    """ LabeledImage (HxWx3 pixels) of one item of a LabeledBatch. """
    return LabeledImage(batch.images[index].permute(1, 2, 0),
                        int(batch.identities[index]),
                        int(batch.expressions[index]))


def subsetBatch(batch, indexes):
    indexes = torch.as_tensor(indexes, dtype=torch.long)
    return LabeledBatch(batch.images[indexes], batch.identities[indexes],
                        batch.expressions[indexes],
                        [batch.files[int(k)] for k in indexes])


def iterateBatches(batch, batchSize, generator, dropLast=True):
    """ Yield shuffled mini-batches (LabeledBatch) of a whole split.
    The order only depends on the state of the torch generator.
    """
    n = len(batch.images)
    order = torch.randperm(n, generator=generator)
    stop = (n // batchSize) * batchSize if dropLast else n
    for start in range(0, stop, batchSize):
        yield subsetBatch(batch, order[start:start + batchSize])


def getBatchCount(n, batchSize, dropLast=True):
    return n // batchSize if dropLast else int(math.ceil(n / batchSize))


def _labelNames(dirNames):
    """ Order label directories; expression names known in the cardinal
    set keep the canonical order. """
    if all(d.lower() in EXPRESSIONS for d in dirNames):
        return sorted(dirNames, key=lambda d: EXPRESSIONS.index(d.lower()))
    return sorted(dirNames)


def importImageFolder(inputDir, outDir, imageSize, seed=0):
    """ Create a dataset from a folder tree <identity>/<expression>/<images>.
    Images are resized to imageSize x imageSize RGB and written as PNG into
    outDir/images together with outDir/manifest.csv (not split yet).
    """
    if not os.path.isdir(inputDir):
        raise StorageError("Input folder not found: %s" % inputDir)

    identities = sorted(d for d in os.listdir(inputDir)
                        if os.path.isdir(os.path.join(inputDir, d)))
    expressionSet = set()
    for idName in identities:
        idDir = os.path.join(inputDir, idName)
        expressionSet.update(d for d in os.listdir(idDir)
                             if os.path.isdir(os.path.join(idDir, d)))
    expressions = _labelNames(list(expressionSet))
    if not identities or not expressions:
        raise ValidationError("No <identity>/<expression> folders found in %s"
                              % inputDir)

    pwutils.makePath(os.path.join(outDir, IMAGES_DIR))
    records = []
    for i, idName in enumerate(identities):
        for e, exprName in enumerate(expressions):
            cellDir = os.path.join(inputDir, idName, exprName)
            if not os.path.isdir(cellDir):
                continue
            files = sorted(f for f in os.listdir(cellDir)
                           if f.lower().endswith(IMAGE_EXTENSIONS))
            for k, f in enumerate(files):
                pixels = readImage(os.path.join(cellDir, f), imageSize)
                fn = os.path.join(IMAGES_DIR, 'id%03d_e%02d_%04d.png' % (i, e, k))
                writeImage(os.path.join(outDir, fn), pixels)
                records.append(ManifestRecord(fn, i, e, ''))

    logger.info("Imported %d images of %d identities and %d expressions "
                "from %s", len(records), len(identities), len(expressions),
                inputDir)
    manifest = DatasetManifest(records, nIdentities=len(identities),
                               nExpressions=len(expressions),
                               imageSize=imageSize, seed=seed,
                               rootDir=os.path.abspath(outDir))
    manifest.write(os.path.join(outDir, MANIFEST_FILE))
    return manifest
