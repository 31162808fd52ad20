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

import dataclasses
from dataclasses import dataclass
import math

import pyworkflow.object as pwobj

from .constants import *
from .exceptions import ValidationError


def parseBool(value):
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s in ('1', 'true', 'yes', 'on'):
        return True
    if s in ('0', 'false', 'no', 'off'):
        return False
    raise ValidationError("Invalid boolean value '%s'" % value)


def parseLeftOut(value):
    """ Parse a left-out (identity, expression) pair.
    Accepts None, 'none', an 'i,e' string or a 2-items sequence.
    """
    if value is None:
        return None
    if isinstance(value, str):
        s = value.strip().lower()
        if s in ('', 'none', 'null'):
            return None
        parts = s.split(',')
    else:
        parts = list(value)
    if len(parts) != 2:
        raise ValidationError("Left-out value '%s' should be 'identity,"
                              "expression'" % (value,))
    try:
        return int(parts[0]), int(parts[1])
    except (TypeError, ValueError):
        raise ValidationError("Left-out value '%s' should contain two "
                              "integers" % (value,))


def formatLeftOut(leftOut):
    return 'none' if leftOut is None else '%d,%d' % tuple(leftOut)


class ConfigBase:
    """ Common behaviour of all configuration dataclasses: conversion
    from/to flat dictionaries with string parsing and validation.
    """
    # Fields holding a left-out pair instead of a scalar
    _pairFields = ('leftOut',)

    @classmethod
    def fieldNames(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def parseValue(cls, name, value):
        """ Convert value (possibly a string read from a file or the
        command line) to the type of field 'name'. """
        fieldMap = {f.name: f for f in dataclasses.fields(cls)}
        if name not in fieldMap:
            raise ValidationError("Unknown key '%s' for %s"
                                  % (name, cls.__name__))
        if name in cls._pairFields:
            return parseLeftOut(value)

        fieldType = fieldMap[name].type
        if isinstance(fieldType, str):
            fieldType = {'int': int, 'float': float, 'bool': bool,
                         'str': str}.get(fieldType, str)
        try:
            if fieldType is bool:
                return parseBool(value)
            if fieldType is int:
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError()
                return int(value)
            if fieldType is float:
                return float(value)
        except (TypeError, ValueError):
            raise ValidationError("Invalid value '%s' for key '%s'"
                                  % (value, name))
        return value

    @classmethod
    def fromDict(cls, d, validate=True):
        """ Create a config from a dictionary, unknown keys are rejected
        and missing ones take their default value. """
        values = {k: cls.parseValue(k, v) for k, v in d.items()}
        obj = cls(**values)
        if validate:
            obj.validate()
        return obj

    def toDict(self):
        return dataclasses.asdict(self)

    def toStrDict(self):
        """ String values, as written in key-value files. """
        result = {}
        for k, v in self.toDict().items():
            if k in self._pairFields:
                result[k] = formatLeftOut(v)
            else:
                result[k] = repr(v) if isinstance(v, float) else str(v)
        return result

    def update(self, **kwargs):
        """ Return a new validated config with some values replaced. """
        values = self.toDict()
        for k, v in kwargs.items():
            values[k] = self.parseValue(k, v)
        return type(self).fromDict(values)

    def validate(self):
        pass

    def _check(self, condition, message, *args):
        if not condition:
            raise ValidationError("%s: %s" % (type(self).__name__,
                                              message % args))


@dataclass
class ToyfacesSpec(ConfigBase):
    nIdentities: int = 6
    nExpressions: int = N_EXPRESSIONS
    samplesPerCell: int = 20
    imageSize: int = 32
    positionJitter: float = 0.03
    scaleJitter: float = 0.04
    colorJitter: float = 0.02
    seed: int = 42
    threads: int = 1

    def validate(self):
        self._check(self.nIdentities >= 1, "nIdentities must be >= 1")
        self._check(self.nExpressions == N_EXPRESSIONS,
                    "nExpressions must be %d", N_EXPRESSIONS)
        self._check(self.samplesPerCell >= 2, "samplesPerCell must be >= 2")
        self._check(isPowerOfTwo(self.imageSize) and self.imageSize >= 16,
                    "imageSize must be a power of two >= 16")
        for name in ('positionJitter', 'scaleJitter', 'colorJitter'):
            self._check(getattr(self, name) >= 0, "%s must be >= 0", name)
        self._check(self.threads >= 1, "threads must be >= 1")

    def getNumberOfImages(self):
        return self.nIdentities * self.nExpressions * self.samplesPerCell


def isPowerOfTwo(n):
    return isinstance(n, int) and n > 0 and (n & (n - 1)) == 0


@dataclass
class ArchConfig(ConfigBase):
    """ Scalable version of the encoder/decoder/discriminator family.
    The number of stride-2 stages is log2(imageSize) - 2 so the tensor
    before flattening is always 4x4.
    """
    imageSize: int = 32
    baseChannels: int = 16
    latentDim: int = 32
    nIdentities: int = 6
    nExpressions: int = N_EXPRESSIONS
    leakySlope: float = 0.2
    scaleFactor: float = 1.0
    fcWidth: int = 256
    bnDecay: float = 0.99

    def validate(self):
        self._check(isPowerOfTwo(self.imageSize)
                    and 16 <= self.imageSize <= 256,
                    "imageSize must be a power of two in [16, 256], "
                    "got %s", self.imageSize)
        self._check(self.baseChannels >= 1, "baseChannels must be >= 1")
        self._check(self.latentDim >= 8, "latentDim must be >= 8")
        self._check(self.nIdentities >= 2, "nIdentities must be >= 2")
        self._check(self.nExpressions >= 2, "nExpressions must be >= 2")
        self._check(0 < self.leakySlope < 1, "leakySlope must be in (0, 1)")
        self._check(self.scaleFactor > 0, "scaleFactor must be > 0")
        self._check(self.fcWidth >= 1, "fcWidth must be >= 1")
        self._check(0 < self.bnDecay < 1, "bnDecay must be in (0, 1)")
        self._check(self.getLatentDim() >= 8,
                    "scaled latent dimension must be >= 8")

    def getStages(self):
        return int(math.log2(self.imageSize)) - 2

    def getBaseChannels(self):
        return max(1, int(round(self.baseChannels * self.scaleFactor)))

    def getLatentDim(self):
        return max(8, int(round(self.latentDim * self.scaleFactor)))


@dataclass
class LossWeights(ConfigBase):
    d1: float = 0.25
    d2: float = 0.5
    d3: float = 0.25
    g1: float = 0.108
    g2: float = 0.6
    g3: float = 0.29
    g4: float = 0.002

    def validate(self):
        for k, v in self.toDict().items():
            self._check(v >= 0, "weight %s must be >= 0", k)


@dataclass
class TrainConfig(ConfigBase):
    epochs: int = 300
    batchSize: int = 64
    learningRate: float = 0.0002
    rmsDecay: float = 0.9
    gStepsPerDStep: int = 2
    weights: LossWeights = dataclasses.field(default_factory=LossWeights)
    seed: int = 42
    leftOut: tuple = None
    checkpointInterval: int = 50
    previewInterval: int = 0
    nonSaturating: bool = False
    discLabelsOnFake: bool = False

    @classmethod
    def fromDict(cls, d, validate=True):
        d = dict(d)
        weights = d.pop('weights', None)
        if isinstance(weights, dict):
            weights = LossWeights.fromDict(weights)
        obj = super().fromDict(d, validate=False)
        if weights is not None:
            obj.weights = weights
        if validate:
            obj.validate()
        return obj

    @classmethod
    def parseValue(cls, name, value):
        if name == 'weights':
            return value
        return super().parseValue(name, value)

    def validate(self):
        self._check(self.epochs >= 0, "epochs must be >= 0")
        self._check(self.batchSize >= 2, "batchSize must be >= 2")
        self._check(self.learningRate >= 0, "learningRate must be >= 0")
        self._check(0 <= self.rmsDecay < 1, "rmsDecay must be in [0, 1)")
        self._check(self.gStepsPerDStep >= 1, "gStepsPerDStep must be >= 1")
        self._check(self.checkpointInterval >= 0,
                    "checkpointInterval must be >= 0")
        self._check(self.previewInterval >= 0,
                    "previewInterval must be >= 0")
        self.weights.validate()


@dataclass
class AttackConfig(ConfigBase):
    epochs: int = 30
    batchSize: int = 64
    learningRate: float = 0.0002
    rmsDecay: float = 0.9
    hiddenLayers: int = 3
    hiddenUnits: int = 256

    def validate(self):
        self._check(self.epochs >= 1, "attack epochs must be >= 1")
        self._check(self.batchSize >= 2, "attack batchSize must be >= 2")
        self._check(self.learningRate > 0, "attack learningRate must be > 0")
        self._check(self.hiddenLayers >= 1, "hiddenLayers must be >= 1")
        self._check(self.hiddenUnits >= 1, "hiddenUnits must be >= 1")


@dataclass
class MaskSpec(ConfigBase):
    """ Completion mask, either a named template region or an explicit
    binary HxW array (1 marks missing pixels). """
    region: str = MASK_UPPER_FACE
    mask: object = None

    def validate(self):
        if self.mask is None:
            self._check(self.region in MASK_REGIONS,
                        "unknown mask region '%s', use one of: %s",
                        self.region, ', '.join(MASK_REGIONS))

    def toArray(self, imageSize):
        """ Return the mask as an imageSize x imageSize float32 array. """
        import numpy as np

        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=np.float32)
            if mask.shape != (imageSize, imageSize):
                raise ValidationError("Mask shape %s does not match image "
                                      "size %d" % (mask.shape, imageSize))
            if not np.all((mask == 0) | (mask == 1)):
                raise ValidationError("Mask values must be 0 or 1")
            return mask

        r0, r1, c0, c1 = MASK_REGIONS[self.region]
        mask = np.zeros((imageSize, imageSize), dtype=np.float32)
        mask[int(round(r0 * imageSize)):int(round(r1 * imageSize)),
             int(round(c0 * imageSize)):int(round(c1 * imageSize))] = 1
        low, high = MASK_COVERAGE_RANGE
        if not low <= mask.mean() <= high:
            raise ValidationError("Mask '%s' covers %0.3f of a %d px image, "
                                  "outside [%s, %s]" % (self.region,
                                                        mask.mean(), imageSize,
                                                        low, high))
        return mask

    def getCoverage(self, imageSize):
        return float(self.toArray(imageSize).mean())


@dataclass
class ExperimentConfig(ConfigBase):
    """ Flat union of every option used by the command line.
    Keys are the ones accepted in config files and as --flags.
    """
    seed: int = 42
    # toyfaces
    nIdentities: int = 6
    nExpressions: int = N_EXPRESSIONS
    samplesPerCell: int = 20
    imageSize: int = 32
    positionJitter: float = 0.03
    scaleJitter: float = 0.04
    colorJitter: float = 0.02
    trainFraction: float = 0.85
    threads: int = 1
    # architecture
    baseChannels: int = 16
    latentDim: int = 32
    leakySlope: float = 0.2
    scaleFactor: float = 1.0
    fcWidth: int = 256
    bnDecay: float = 0.99
    # training
    epochs: int = 300
    batchSize: int = 64
    learningRate: float = 0.0002
    rmsDecay: float = 0.9
    gStepsPerDStep: int = 2
    lambdaD1: float = 0.25
    lambdaD2: float = 0.5
    lambdaD3: float = 0.25
    lambdaG1: float = 0.108
    lambdaG2: float = 0.6
    lambdaG3: float = 0.29
    lambdaG4: float = 0.002
    leftOut: tuple = None
    checkpointInterval: int = 50
    previewInterval: int = 0
    nonSaturating: bool = False
    discLabelsOnFake: bool = False
    # attack
    attackEpochs: int = 30
    attackBatchSize: int = 64
    attackLearningRate: float = 0.0002
    annHiddenLayers: int = 3
    annHiddenUnits: int = 256

    def validate(self):
        self._check(0 < self.trainFraction < 1,
                    "trainFraction must be in (0, 1)")
        self.getToyfacesSpec().validate()
        self.getArchConfig().validate()
        self.getTrainConfig().validate()
        self.getAttackConfig().validate()

    def getToyfacesSpec(self):
        return ToyfacesSpec(nIdentities=self.nIdentities,
                            nExpressions=self.nExpressions,
                            samplesPerCell=self.samplesPerCell,
                            imageSize=self.imageSize,
                            positionJitter=self.positionJitter,
                            scaleJitter=self.scaleJitter,
                            colorJitter=self.colorJitter,
                            seed=self.seed,
                            threads=self.threads)

    def getArchConfig(self, nIdentities=None, nExpressions=None,
                      imageSize=None):
        """ Architecture for this experiment, dataset dimensions
        (from a manifest) take precedence when given. """
        return ArchConfig(imageSize=imageSize or self.imageSize,
                          baseChannels=self.baseChannels,
                          latentDim=self.latentDim,
                          nIdentities=nIdentities or self.nIdentities,
                          nExpressions=nExpressions or self.nExpressions,
                          leakySlope=self.leakySlope,
                          scaleFactor=self.scaleFactor,
                          fcWidth=self.fcWidth,
                          bnDecay=self.bnDecay)

    def getLossWeights(self):
        return LossWeights(d1=self.lambdaD1, d2=self.lambdaD2,
                           d3=self.lambdaD3, g1=self.lambdaG1,
                           g2=self.lambdaG2, g3=self.lambdaG3,
                           g4=self.lambdaG4)

    def getTrainConfig(self):
        return TrainConfig(epochs=self.epochs,
                           batchSize=self.batchSize,
                           learningRate=self.learningRate,
                           rmsDecay=self.rmsDecay,
                           gStepsPerDStep=self.gStepsPerDStep,
                           weights=self.getLossWeights(),
                           seed=self.seed,
                           leftOut=self.leftOut,
                           checkpointInterval=self.checkpointInterval,
                           previewInterval=self.previewInterval,
                           nonSaturating=self.nonSaturating,
                           discLabelsOnFake=self.discLabelsOnFake)

    def getAttackConfig(self):
        return AttackConfig(epochs=self.attackEpochs,
                            batchSize=self.attackBatchSize,
                            learningRate=self.attackLearningRate,
                            rmsDecay=self.rmsDecay,
                            hiddenLayers=self.annHiddenLayers,
                            hiddenUnits=self.annHiddenUnits)


# --------- Records written to metrics and report files  -----------------

class StepMetrics(pwobj.Object):
    """ Values logged after each training step. """
    def __init__(self, **kwargs):
        pwobj.Object.__init__(self)
        self.step = pwobj.Integer(kwargs.get('step', None))
        self.epoch = pwobj.Integer(kwargs.get('epoch', None))
        self.dObjective = pwobj.Float(kwargs.get('dObjective', None))
        self.gObjective = pwobj.Float(kwargs.get('gObjective', None))
        self.kl = pwobj.Float(kwargs.get('kl', None))
        self.d1Real = pwobj.Float(kwargs.get('d1Real', None))
        self.d1Fake = pwobj.Float(kwargs.get('d1Fake', None))
        self.dSteps = pwobj.Integer(kwargs.get('dSteps', None))
        self.gSteps = pwobj.Integer(kwargs.get('gSteps', None))
        self.wallClock = pwobj.Float(kwargs.get('wallClock', None))

    _keys = ['step', 'epoch', 'dObjective', 'gObjective', 'kl',
             'd1Real', 'd1Fake', 'dSteps', 'gSteps', 'wallClock']

    def toDict(self):
        d = {'type': 'step'}
        d.update((k, getattr(self, k).get()) for k in self._keys)
        return d

    def isFinite(self):
        return all(math.isfinite(getattr(self, k).get())
                   for k in ('dObjective', 'gObjective', 'kl'))

    def __str__(self):
        return ("step %d: D=%0.4f G=%0.4f KL=%0.4f D1(real)=%0.3f "
                "D1(fake)=%0.3f" % (self.step.get(), self.dObjective.get(),
                                    self.gObjective.get(), self.kl.get(),
                                    self.d1Real.get(), self.d1Fake.get()))


class AttackReport(pwobj.Object):
    """ Result of one privacy attack scenario (or baseline). """
    def __init__(self, **kwargs):
        pwobj.Object.__init__(self)
        self.scenario = pwobj.String(kwargs.get('scenario', None))
        self.identificationCcr = pwobj.Float(
            kwargs.get('identificationCcr', None))
        self.expressionCcr = pwobj.Float(kwargs.get('expressionCcr', None))
        self.identificationChance = pwobj.Float(
            kwargs.get('identificationChance', None))
        self.expressionChance = pwobj.Float(
            kwargs.get('expressionChance', None))
        self.nTrain = pwobj.Integer(kwargs.get('nTrain', None))
        self.nTest = pwobj.Integer(kwargs.get('nTest', None))
        self.attacker = pwobj.String(kwargs.get('attacker', None))
        self.seed = pwobj.Integer(kwargs.get('seed', None))
        self.checkpoint = pwobj.String(kwargs.get('checkpoint', None))
        self.modelDigest = pwobj.String(kwargs.get('modelDigest', None))

    _keys = ['scenario', 'identificationCcr', 'expressionCcr',
             'identificationChance', 'expressionChance', 'nTrain', 'nTest',
             'attacker', 'seed', 'checkpoint', 'modelDigest']

    def toDict(self):
        return {k: getattr(self, k).get() for k in self._keys}

    @classmethod
    def fromDict(cls, d):
        return cls(**{k: d.get(k) for k in cls._keys})

    def validate(self):
        for k in ('identificationCcr', 'expressionCcr'):
            v = getattr(self, k).get()
            if v is None or not 0 <= v <= 1:
                raise ValidationError("AttackReport %s out of [0, 1]: %s"
                                      % (k, v))

    def __str__(self):
        return ("%-14s id CCR %6.2f%%  expr CCR %6.2f%%  (train %d, "
                "test %d)" % (self.scenario.get(),
                              100 * self.identificationCcr.get(),
                              100 * self.expressionCcr.get(),
                              self.nTrain.get() or 0, self.nTest.get() or 0))
