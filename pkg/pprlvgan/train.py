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
Alternating adversarial training. Each step does one ascent step of the
discriminator objective (discriminator parameters only) followed by
gStepsPerDStep descent steps of the generator objective (encoder and
decoder parameters only).
"""

import os
import json
import time
import logging
from contextlib import contextmanager

import numpy as np
import torch
from emtable import Table

import pyworkflow.utils as pwutils

from .constants import *
from .exceptions import ValidationError, DivergenceError, NumericError
from .objects import StepMetrics
from .convert import oneHotBatch, saveCheckpoint, loadCheckpoint
from .nets import buildModels, sampleLatent
from .loss import klStandardNormal, discriminatorObjective, generatorObjective
from .dataset import loadImages, iterateBatches, getBatchCount

logger = logging.getLogger(__name__)

EPOCH_COLUMNS = ['epoch', 'steps', 'dObjective', 'gObjective', 'kl',
                 'klMax', 'd1Real', 'd1Fake', 'dSteps', 'gSteps']


def _scalar(tensor):
    return tensor.detach().item()


@contextmanager
def frozenStatistics(module):
    """ Keep batch-norm running statistics (all buffers) of module
    unchanged while it is used for forward passes in train mode. """
    saved = [b.detach().clone() for b in module.buffers()]
    try:
        yield module
    finally:
        with torch.no_grad():
            for b, s in zip(module.buffers(), saved):
                b.copy_(s)


class VganTrainer:
    """ Hold the optimizers and the random stream of a training run. """

    def __init__(self, model, config, generator=None):
        config.validate()
        self.model = model
        self.config = config
        self.generator = generator or \
            torch.Generator().manual_seed(int(config.seed))
        self.optimizerD = self._createOptimizer(model.discriminatorParameters())
        self.optimizerG = self._createOptimizer(model.generatorParameters())
        self._startTime = time.time()

    def _createOptimizer(self, params):
        return torch.optim.RMSprop(params, lr=self.config.learningRate,
                                   alpha=self.config.rmsDecay, momentum=0)

    def _sampleCodes(self, n):
        """ Uniform target identities and their one-hot codes. """
        nIds = self.model.arch.nIdentities
        target = torch.randint(nIds, (n,), generator=self.generator)
        device = self.model.getDevice()
        return target.to(device), oneHotBatch(target, nIds).to(device)

    def _synthesize(self, images, codes, phase):
        latent = self.model.encoder(images)
        try:
            f = sampleLatent(latent, generator=self.generator)
        except NumericError:
            self._checkFinite({'latent': float('nan')}, phase)
        return latent, self.model.decoder(f, codes)

    def _checkFinite(self, values, phase):
        bad = {k: v for k, v in values.items() if not np.isfinite(v)}
        if bad:
            counters = self.model.getCounters()
            snapshot = dict(phase=phase, **counters)
            snapshot.update(values)
            raise DivergenceError("Non-finite %s objective at D step %d"
                                  % (phase, counters['dSteps']), snapshot)

    def trainStep(self, batch):
        """ One discriminator update followed by gStepsPerDStep generator
        updates on this batch. Return the StepMetrics. """
        config = self.config
        model = self.model
        weights = config.weights
        device = model.getDevice()
        images = batch.images.to(device)
        identity = batch.identities.to(device)
        expression = batch.expressions.to(device)
        n = images.shape[0]
        if n < 2:
            raise ValidationError("Batches need at least 2 images")
        model.train()

        # Discriminator step, synthesized images from the same real batch
        target, codes = self._sampleCodes(n)
        with torch.no_grad(), frozenStatistics(model.encoder), \
                frozenStatistics(model.decoder):
            _, fake = self._synthesize(images, codes, 'discriminator')

        self.optimizerD.zero_grad()
        realOut = model.discriminator(images)
        fakeOut = model.discriminator(fake)
        dObjective = discriminatorObjective(
            realOut, fakeOut.realProb, identity, expression, weights,
            fakeOut=fakeOut, targetIdentity=target,
            labelsOnFake=config.discLabelsOnFake)
        self._checkFinite({'dObjective': _scalar(dObjective)},
                          'discriminator')
        (-dObjective).backward()
        self.optimizerD.step()
        model.dSteps.add_(1)
        d1Real = _scalar(realOut.realProb.mean())
        d1Fake = _scalar(fakeOut.realProb.mean())

        # Generator steps, new codes and noise each time. D statistics are
        # restored only once backward no longer needs them.
        for _ in range(config.gStepsPerDStep):
            target, codes = self._sampleCodes(n)
            with frozenStatistics(model.discriminator):
                latent, fake = self._synthesize(images, codes,
                                                 'generator')
                try:
                    kl = klStandardNormal(latent)
                except NumericError:
                    # reported below as a divergence
                    kl = torch.tensor(float('nan'))
                fakeOut = model.discriminator(fake)
                gObjective = generatorObjective(
                    fakeOut, target, expression, kl, weights,
                    nonSaturating=config.nonSaturating)
                self._checkFinite({'gObjective': _scalar(gObjective),
                                   'kl': _scalar(kl)}, 'generator')
                self.optimizerG.zero_grad()
                gObjective.backward()
                self.optimizerG.step()
            model.gSteps.add_(1)

        counters = model.getCounters()
        return StepMetrics(step=counters['dSteps'],
                           epoch=counters['epoch'],
                           dObjective=_scalar(dObjective),
                           gObjective=_scalar(gObjective),
                           kl=_scalar(kl), d1Real=d1Real, d1Fake=d1Fake,
                           dSteps=counters['dSteps'],
                           gSteps=counters['gSteps'],
                           wallClock=time.time() - self._startTime)


def trainStep(model, batch, config, generator):
    """ Single training step with fresh optimizers (see VganTrainer). """
    return VganTrainer(model, config, generator).trainStep(batch)


class MetricsLog:
    """ Keep the metrics records of a run and stream them to a JSON-lines
    file when a path is given. """

    def __init__(self, path=None, append=False):
        self.records = []
        self._file = None
        if path:
            pwutils.makePath(os.path.dirname(path) or '.')
            self._file = open(path, 'a' if append else 'w')

    def add(self, record):
        self.records.append(record)
        if self._file is not None:
            self._file.write(json.dumps(record, sort_keys=True) + '\n')
            self._file.flush()

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None

    def getSteps(self):
        return [r for r in self.records if r['type'] == 'step']

    def getEpochs(self):
        return [r for r in self.records if r['type'] == 'epoch']


def readMetrics(path):
    """ Read a metrics JSON-lines file as a list of dicts. """
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def summarizeEpoch(epoch, steps, model):
    """ Epoch summary record from the list of step StepMetrics dicts. """
    def _mean(key):
        return float(np.mean([s[key] for s in steps])) if steps else 0.0

    counters = model.getCounters()
    return {'type': 'epoch', 'epoch': epoch, 'steps': len(steps),
            'dObjective': _mean('dObjective'),
            'gObjective': _mean('gObjective'),
            'kl': _mean('kl'),
            'klMax': float(max(s['kl'] for s in steps)) if steps else 0.0,
            'd1Real': _mean('d1Real'), 'd1Fake': _mean('d1Fake'),
            'dSteps': counters['dSteps'], 'gSteps': counters['gSteps'],
            'wallClock': steps[-1]['wallClock'] if steps else 0.0}


def writeEpochsTable(path, epochRecords):
    """ Per-epoch summary as a STAR table. """
    table = Table(columns=[Table.Column(c, type=int if c in
                                        ('epoch', 'steps', 'dSteps',
                                         'gSteps') else float)
                           for c in EPOCH_COLUMNS])
    for r in epochRecords:
        table.addRow(*[r[c] for c in EPOCH_COLUMNS])
    with open(path, 'w') as f:
        table.writeStar(f, tableName=EPOCHS_TABLE)
    return table


def checkHealth(summary, klReference):
    """ Log warnings for D1 collapse and KL explosion at epoch end.
    Return the names of the failed checks. """
    failed = []
    low, high = D1_HEALTHY_BAND
    for key in ('d1Real', 'd1Fake'):
        if not low < summary[key] < high:
            failed.append(key)
            logger.warning("Epoch %d: mean %s = %0.3f outside (%0.1f, %0.1f), "
                           "discriminator may be collapsing", summary['epoch'],
                           key, summary[key], low, high)
    if klReference and summary['klMax'] > KL_EXPLOSION_FACTOR * klReference:
        failed.append('klMax')
        logger.warning("Epoch %d: KL max %0.3f above %gx the first epoch "
                       "maximum (%0.3f)", summary['epoch'], summary['klMax'],
                       KL_EXPLOSION_FACTOR, klReference)
    return failed


def _writePreview(model, previewImages, path):
    from .synth import replaceIdentityAll
    from .viewers import writeGrid

    rows = [[img] + replaceIdentityAll(model, img) for img in previewImages]
    writeGrid(path, rows)


def train(manifest, arch, config, outDir=None, resumeFrom=None,
          trainData=None, device=None):
    """ Train a ModelBundle on the train split of manifest.

    Params:
        manifest: DatasetManifest with train/test tags.
        arch: ArchConfig of the networks.
        config: TrainConfig. Images of the config.leftOut cell are
            excluded from training.
        outDir: if given, write checkpoints, metrics.jsonl, epochs.star
            and the loss plot there.
        resumeFrom: checkpoint to continue from (same architecture).
        trainData: preloaded LabeledBatch (skips reading the images).
        device: torch device for the networks (CPU by default).
    Return:
        (model, list of metrics records)
    """
    config.validate()
    arch.validate()
    if trainData is None:
        trainData = loadImages(manifest, SPLIT_TRAIN, leftOut=config.leftOut)
    nTrain = len(trainData.images)
    if nTrain == 0:
        raise ValidationError("Empty training set (left out: %s)"
                              % (config.leftOut,))
    if nTrain < config.batchSize:
        raise ValidationError("Only %d training images, fewer than the "
                              "batch size %d" % (nTrain, config.batchSize))

    if resumeFrom:
        model = loadCheckpoint(resumeFrom, arch)
    else:
        model = buildModels(arch, initSeed=config.seed)
    if device is not None:
        model.to(device)
    startEpoch = int(model.epoch)
    generator = torch.Generator().manual_seed(int(config.seed) * 100003
                                              + startEpoch)
    trainer = VganTrainer(model, config, generator)

    stepsPerEpoch = getBatchCount(nTrain, config.batchSize)
    logger.info("Training on %d images, %d steps per epoch, epochs %d-%d",
                nTrain, stepsPerEpoch, startEpoch + 1, config.epochs)

    metricsPath = os.path.join(outDir, METRICS_FILE) if outDir else None
    log = MetricsLog(metricsPath, append=bool(resumeFrom))
    extra = {'leftOut': 'none' if config.leftOut is None
             else '%d,%d' % tuple(config.leftOut),
             'seed': int(config.seed), 'nTrain': nTrain}
    lastCheckpoint = resumeFrom
    klReference = None
    previewImages = trainData.images[:min(4, nTrain)]

    def _save(path):
        return saveCheckpoint(model, path, **extra) if outDir else None

    try:
        if config.epochs == 0 and outDir:
            lastCheckpoint = _save(os.path.join(outDir, MODEL_FILE))

        for epoch in range(startEpoch + 1, config.epochs + 1):
            steps = []
            for batch in iterateBatches(trainData, config.batchSize,
                                        generator):
                try:
                    metrics = trainer.trainStep(batch)
                except DivergenceError as e:
                    e.snapshot['epoch'] = epoch
                    e.snapshot['lastCheckpoint'] = lastCheckpoint
                    raise
                record = metrics.toDict()
                record['epoch'] = epoch
                steps.append(record)
                log.add(record)
                logger.debug(str(metrics))

            model.epoch.fill_(epoch)
            summary = summarizeEpoch(epoch, steps, model)
            log.add(summary)
            if klReference is None:
                klReference = summary['klMax']
            logger.info("Epoch %d/%d: D=%0.4f G=%0.4f KL=%0.3f "
                        "D1(real)=%0.3f D1(fake)=%0.3f", epoch, config.epochs,
                        summary['dObjective'], summary['gObjective'],
                        summary['kl'], summary['d1Real'], summary['d1Fake'])
            checkHealth(summary, klReference)

            if outDir and config.previewInterval and \
                    epoch % config.previewInterval == 0:
                _writePreview(model, previewImages,
                              os.path.join(outDir, PREVIEWS_DIR,
                                           'epoch_%03d.png' % epoch))
            if epoch == config.epochs:
                lastCheckpoint = _save(os.path.join(outDir, MODEL_FILE)) \
                    if outDir else None
            elif config.checkpointInterval and \
                    epoch % config.checkpointInterval == 0:
                lastCheckpoint = _save(os.path.join(
                    outDir, CHECKPOINTS_DIR, 'epoch_%03d.pt' % epoch)) \
                    if outDir else None
    finally:
        log.close()
        if outDir and log.getEpochs():
            # Resumed runs append, so the table covers earlier epochs too
            epochs = [r for r in readMetrics(metricsPath)
                      if r['type'] == 'epoch']
            table = writeEpochsTable(os.path.join(outDir, EPOCHS_FILE),
                                     epochs)
            from .viewers import plotEpochs
            plotEpochs(table, os.path.join(outDir, LOSSES_PLOT))

    return model, log.records
