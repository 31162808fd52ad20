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
Privacy attacks on protected images and latent representations, measured
as correct classification rates (CCR) of identity and expression
classifiers:

    unconstrained   classifiers trained and tested on raw images
    I               trained on raw train images, tested on the protected
                    versions of every test image (one per identity code)
    II              trained and tested on protected images (all codes)
    III             fully-connected classifiers on encoder means
    random_baseline chance level, 1/N_id and 1/N_e

Identification truth is always the identity of the source image.
"""

import os
import csv
import json
import logging
from collections import namedtuple

import torch
from torch import nn

from .constants import *
from .exceptions import ValidationError, StorageError, PprlVganError
from .objects import AttackConfig, AttackReport
from .convert import oneHotBatch, stateDigest
from .nets import (convTrunk, initWeights, evalMode, recalibrateStatistics,
                   encode, decode)
from .dataset import loadImages

logger = logging.getLogger(__name__)

ProtectedSet = namedtuple('ProtectedSet',
                          ['images', 'identities', 'expressions', 'codes'])

# Images per forward pass when protecting or predicting
CHUNK_SIZE = 256


def ccr(predicted, truth):
    """ Fraction of positions where predicted equals truth. """
    predicted = torch.as_tensor(predicted).reshape(-1)
    truth = torch.as_tensor(truth).reshape(-1)
    if len(predicted) != len(truth) or len(truth) == 0:
        raise ValidationError("CCR needs two label lists of equal, non-zero "
                              "length (got %d and %d)"
                              % (len(predicted), len(truth)))
    return float((predicted.to(truth.dtype) == truth).double().mean())


def protect(model, images, c):
    """ Privacy-protected version decode(encode(I).mean, c) of images.
    c can be a single identity code (used for every image) or one code
    per image. """
    latent = encode(model, images)
    c = torch.as_tensor(c, dtype=torch.float32)
    if c.dim() == 1:
        c = c.unsqueeze(0).expand(latent.mean.shape[0], -1)
    return decode(model, latent.mean, c)


def expandProtected(model, images, identities, expressions):
    """ N_id-fold expansion: the protected version of every image with
    every identity code, ordered image by image. Labels are those of the
    source images.
    """
    nIds = model.arch.nIdentities
    n = len(images)
    outputs = []
    for start in range(0, n, CHUNK_SIZE):
        chunk = images[start:start + CHUNK_SIZE]
        m = len(chunk)
        latent = encode(model, chunk)
        means = latent.mean.repeat_interleave(nIds, dim=0)
        codes = oneHotBatch(torch.arange(nIds).repeat(m), nIds)
        outputs.append(decode(model, means, codes).cpu())
    protected = torch.cat(outputs) if outputs else images.new_zeros(
        (0,) + tuple(images.shape[1:]))
    codeIndexes = torch.arange(nIds).repeat(n)
    return ProtectedSet(protected,
                        identities.repeat_interleave(nIds),
                        expressions.repeat_interleave(nIds),
                        codeIndexes)


def checkTruthLabels(protectedSet, identities, nIds):
    """ Identification truth must be the source identity, never the code. """
    expected = identities.repeat_interleave(nIds)
    if not torch.equal(protectedSet.identities, expected):
        raise PprlVganError("Protected set truth labels are not the source "
                            "identities")


# ----------------- Attacker classifiers -------------------------------------

class ConvClassifier(nn.Module):
    """ Classifier with the structure of one discriminator head:
    conv stages, shared-width FC layer and an nClasses output. """
    def __init__(self, arch, nClasses):
        super().__init__()
        self.trunk, width = convTrunk(arch)
        self.fc = nn.Linear(width, arch.fcWidth)
        self.activation = nn.LeakyReLU(arch.leakySlope)
        self.head = nn.Linear(arch.fcWidth, nClasses)

    def forward(self, x):
        return self.head(self.activation(self.fc(self.trunk(x).flatten(1))))


class AnnClassifier(nn.Module):
    """ Fully-connected classifier of latent representations. """
    def __init__(self, inputWidth, nClasses, hiddenLayers=3, hiddenUnits=256,
                 leakySlope=0.2):
        super().__init__()
        layers = []
        width = inputWidth
        for _ in range(hiddenLayers):
            layers += [nn.Linear(width, hiddenUnits), nn.LeakyReLU(leakySlope)]
            width = hiddenUnits
        layers.append(nn.Linear(width, nClasses))
        self.layers = nn.Sequential(*layers)

    def forward(self, x):
        return self.layers(x)


def _seed(seed, stream):
    return int(seed) * 1000 + stream


def trainClassifier(classifier, inputs, labels, config, seed):
    """ Train a classifier with cross-entropy and RMSprop.
    Weights are initialized like the main networks from seed, and
    mini-batches are shuffled from the same seed. Batch-norm statistics
    are recomputed over inputs with the final weights.
    """
    generator = torch.Generator().manual_seed(int(seed))
    initWeights(classifier, generator)
    optimizer = torch.optim.RMSprop(classifier.parameters(),
                                    lr=config.learningRate,
                                    alpha=config.rmsDecay, momentum=0)
    lossFunc = nn.CrossEntropyLoss()
    n = len(inputs)
    classifier.train()
    for epoch in range(config.epochs):
        order = torch.randperm(n, generator=generator)
        total = 0.0
        for start in range(0, n, config.batchSize):
            idx = order[start:start + config.batchSize]
            if len(idx) < 2:
                continue
            optimizer.zero_grad()
            loss = lossFunc(classifier(inputs[idx]), labels[idx])
            loss.backward()
            optimizer.step()
            total += loss.detach().item() * len(idx)
        logger.debug("Attacker %s epoch %d: loss %0.4f",
                     type(classifier).__name__, epoch + 1, total / max(n, 1))
    recalibrateStatistics(classifier, inputs, CHUNK_SIZE)
    classifier.eval()
    return classifier


def predictLabels(classifier, inputs):
    with evalMode(classifier):
        return torch.cat([classifier(inputs[s:s + CHUNK_SIZE]).argmax(dim=1)
                          for s in range(0, len(inputs), CHUNK_SIZE)])


EvaluationClassifiers = namedtuple('EvaluationClassifiers',
                                   ['identity', 'expression'])


def trainConvClassifiers(arch, images, identities, expressions, config, seed):
    """ Identity (D2-shaped) and expression (D3-shaped) classifiers. """
    idClassifier = trainClassifier(ConvClassifier(arch, arch.nIdentities),
                                   images, identities, config,
                                   _seed(seed, 1))
    exprClassifier = trainClassifier(ConvClassifier(arch, arch.nExpressions),
                                     images, expressions, config,
                                     _seed(seed, 2))
    return EvaluationClassifiers(idClassifier, exprClassifier)


def trainEvaluationClassifiers(arch, trainData, config=None, seed=0):
    """ Classifiers trained on raw training images, used both by the
    unconstrained baseline and by scenario I, and to evaluate syntheses. """
    config = config or AttackConfig()
    return trainConvClassifiers(arch, trainData.images, trainData.identities,
                                trainData.expressions, config, seed)


# ----------------- Scenarios ------------------------------------------------

def _checkModel(model, allowUntrained):
    if not allowUntrained and int(model.gSteps) == 0:
        raise ValidationError("The model has not been trained (0 generator "
                              "updates)")


def _splits(manifest, trainData, testData):
    if trainData is None:
        trainData = loadImages(manifest, SPLIT_TRAIN)
    if testData is None:
        testData = loadImages(manifest, SPLIT_TEST)
    if len(trainData.images) == 0 or len(testData.images) == 0:
        raise ValidationError("Attacks need non-empty train and test splits")
    return trainData, testData


def _report(scenario, model, idCcr, exprCcr, nTrain, nTest, attacker, seed,
            nIds, nExprs):
    report = AttackReport(scenario=scenario, identificationCcr=idCcr,
                          expressionCcr=exprCcr,
                          identificationChance=1.0 / nIds,
                          expressionChance=1.0 / nExprs,
                          nTrain=nTrain, nTest=nTest, attacker=attacker,
                          seed=int(seed),
                          checkpoint=os.path.basename(
                              getattr(model, 'checkpointPath', '') or '')
                          if model is not None else '',
                          modelDigest=stateDigest(model)
                          if model is not None else '')
    report.validate()
    logger.info(str(report))
    return report


class _Untouched:
    """ Check that a block of code does not modify the protected model. """
    def __init__(self, model):
        self.model = model

    def __enter__(self):
        self.digest = stateDigest(self.model)
        return self

    def __exit__(self, excType, excValue, tb):
        if excType is None and stateDigest(self.model) != self.digest:
            raise PprlVganError("Attacker training modified the protected "
                                "model")
        return False


def runScenario1(model, manifest, seed, config=None, trainData=None,
                 testData=None, classifiers=None, allowUntrained=False):
    """ Attacker with the unaltered training set, scoring the N_id
    protected versions of each test image. """
    _checkModel(model, allowUntrained)
    config = config or AttackConfig()
    trainData, testData = _splits(manifest, trainData, testData)
    arch = model.arch
    with _Untouched(model):
        if classifiers is None:
            classifiers = trainEvaluationClassifiers(arch, trainData, config,
                                                     seed)
        expanded = expandProtected(model, testData.images,
                                   testData.identities, testData.expressions)
        checkTruthLabels(expanded, testData.identities, arch.nIdentities)
        idCcr = ccr(predictLabels(classifiers.identity, expanded.images),
                    expanded.identities)
        exprCcr = ccr(predictLabels(classifiers.expression, expanded.images),
                      expanded.expressions)
    return _report(SCENARIO_1, model, idCcr, exprCcr, len(trainData.images),
                   len(expanded.images), ATTACKER_CONV, seed,
                   arch.nIdentities, arch.nExpressions)


def runScenario2(model, manifest, seed, config=None, trainData=None,
                 testData=None, allowUntrained=False):
    """ Attacker trained on the protected training images (all codes)
    labeled with their source identities and expressions. """
    _checkModel(model, allowUntrained)
    config = config or AttackConfig()
    trainData, testData = _splits(manifest, trainData, testData)
    arch = model.arch
    with _Untouched(model):
        trainExpanded = expandProtected(model, trainData.images,
                                        trainData.identities,
                                        trainData.expressions)
        checkTruthLabels(trainExpanded, trainData.identities, arch.nIdentities)
        classifiers = trainConvClassifiers(arch, trainExpanded.images,
                                           trainExpanded.identities,
                                           trainExpanded.expressions,
                                           config, seed)
        expanded = expandProtected(model, testData.images,
                                   testData.identities, testData.expressions)
        checkTruthLabels(expanded, testData.identities, arch.nIdentities)
        idCcr = ccr(predictLabels(classifiers.identity, expanded.images),
                    expanded.identities)
        exprCcr = ccr(predictLabels(classifiers.expression, expanded.images),
                      expanded.expressions)
    return _report(SCENARIO_2, model, idCcr, exprCcr,
                   len(trainExpanded.images), len(expanded.images),
                   ATTACKER_CONV, seed, arch.nIdentities, arch.nExpressions)


def encodeMeans(model, images):
    return torch.cat([encode(model, images[s:s + CHUNK_SIZE]).mean.cpu()
                      for s in range(0, len(images), CHUNK_SIZE)])


def runScenario3(model, manifest, seed, config=None, trainData=None,
                 testData=None, allowUntrained=False):
    """ Attacker with access to the encoder: fully-connected classifiers
    on the encoder means, no expansion. """
    _checkModel(model, allowUntrained)
    config = config or AttackConfig()
    trainData, testData = _splits(manifest, trainData, testData)
    arch = model.arch
    with _Untouched(model):
        trainFeatures = encodeMeans(model, trainData.images)
        testFeatures = encodeMeans(model, testData.images)
        width = trainFeatures.shape[1]

        def _ann(nClasses):
            return AnnClassifier(width, nClasses, config.hiddenLayers,
                                 config.hiddenUnits, arch.leakySlope)

        idClassifier = trainClassifier(_ann(arch.nIdentities), trainFeatures,
                                       trainData.identities, config,
                                       _seed(seed, 3))
        exprClassifier = trainClassifier(_ann(arch.nExpressions),
                                         trainFeatures, trainData.expressions,
                                         config, _seed(seed, 4))
        idCcr = ccr(predictLabels(idClassifier, testFeatures),
                    testData.identities)
        exprCcr = ccr(predictLabels(exprClassifier, testFeatures),
                      testData.expressions)
    return _report(SCENARIO_3, model, idCcr, exprCcr, len(trainData.images),
                   len(testData.images), ATTACKER_ANN, seed,
                   arch.nIdentities, arch.nExpressions)


def runUnconstrainedBaseline(manifest, seed, arch, config=None,
                             trainData=None, testData=None, classifiers=None):
    """ Same classifiers as scenario I, on raw test images. """
    config = config or AttackConfig()
    trainData, testData = _splits(manifest, trainData, testData)
    if classifiers is None:
        classifiers = trainEvaluationClassifiers(arch, trainData, config, seed)
    idCcr = ccr(predictLabels(classifiers.identity, testData.images),
                testData.identities)
    exprCcr = ccr(predictLabels(classifiers.expression, testData.images),
                  testData.expressions)
    return _report(SCENARIO_UNCONSTRAINED, None, idCcr, exprCcr,
                   len(trainData.images), len(testData.images),
                   ATTACKER_CONV, seed, arch.nIdentities, arch.nExpressions)


def randomBaseline(manifest, seed=0):
    """ Chance level, no classifier is trained. """
    nTest = len(manifest.getRecords(split=SPLIT_TEST))
    return _report(SCENARIO_RANDOM, None, 1.0 / manifest.nIdentities,
                   1.0 / manifest.nExpressions, 0, nTest, ATTACKER_NONE,
                   seed, manifest.nIdentities, manifest.nExpressions)


# ----------------- Report files ---------------------------------------------

def writeReport(report, path):
    try:
        with open(path, 'w') as f:
            json.dump(report.toDict(), f, indent=2, sort_keys=True)
            f.write('\n')
    except OSError as e:
        raise StorageError("Could not write report %s: %s" % (path, e))
    return path


def readReport(path):
    with open(path) as f:
        return AttackReport.fromDict(json.load(f))


def writeCcrTable(reports, path):
    """ Aggregate CSV with one row per scenario. """
    try:
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(CCR_TABLE_COLUMNS)
            for r in reports:
                writer.writerow([r.scenario.get(),
                                 '%0.6f' % r.identificationCcr.get(),
                                 '%0.6f' % r.expressionCcr.get(),
                                 r.nTrain.get(), r.nTest.get()])
    except OSError as e:
        raise StorageError("Could not write %s: %s" % (path, e))
    return path
