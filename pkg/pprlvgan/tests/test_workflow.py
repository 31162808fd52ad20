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
import unittest

from pyworkflow.tests import BaseTest, setupTestOutput
from pyworkflow.utils import magentaStr, envVarOn

from pprlvgan.constants import *
from pprlvgan.objects import ExperimentConfig
from pprlvgan.convert import DatasetManifest, loadCheckpoint
from pprlvgan.dataset import loadImages
from pprlvgan.train import readMetrics
from pprlvgan.cli import cmdData, cmdTrain, cmdAttack
import pprlvgan.attack as attack
import pprlvgan.synth as synth

from .tools import *


def _withoutClock(records):
    return [{k: v for k, v in r.items() if k != 'wallClock'}
            for r in records]


class TestDeterminism(BaseTest):
    """ Two end-to-end runs with the same seeds give the same logs and
    the same attack report. """

    @classmethod
    def setUpClass(cls):
        setupTestOutput(cls)

    def _run(self, name):
        config = tinyExperimentConfig(epochs=2)
        root = self.getOutputPath(name)
        manifestPath = cmdData(config, os.path.join(root, 'data'))
        runDir = os.path.join(root, 'run')
        modelPath = cmdTrain(config, manifestPath, runDir)
        attackDir = os.path.join(root, 'attack')
        cmdAttack(config, modelPath, manifestPath, '1', attackDir)
        with open(os.path.join(attackDir, REPORT_FILE % SCENARIO_1)) as f:
            reportText = f.read()
        return readMetrics(os.path.join(runDir, METRICS_FILE)), reportText

    def test_endToEnd(self):
        print(magentaStr("\n==> Testing end-to-end determinism:"))
        metrics1, report1 = self._run('run1')
        metrics2, report2 = self._run('run2')
        # 42 train images in batches of 8, 2 epochs
        self.assertEqual(len(metrics1), 2 * 5 + 2)
        self.assertEqual(_withoutClock(metrics1), _withoutClock(metrics2))
        self.assertEqual(report1, report2)


@unittest.skipUnless(envVarOn(PPRLVGAN_LONG_TESTS),
                     "set %s=1 to run the full desk training tests"
                     % PPRLVGAN_LONG_TESTS)
class TestDeskTrends(BaseTest):
    """ Trends of the default desk configuration (6 identities, 32 px,
    default epochs). These take minutes of CPU time. """

    LEFT_OUT = (2, 5)

    @classmethod
    def setUpClass(cls):
        setupTestOutput(cls)
        cls.config = ExperimentConfig()
        cls.manifestPath = cmdData(cls.config, cls.getOutputPath('data'))
        cls.modelPath = cmdTrain(cls.config, cls.manifestPath,
                                 cls.getOutputPath('run'))
        cls.manifest = DatasetManifest.read(cls.manifestPath)
        cls.trainData = loadImages(cls.manifest, SPLIT_TRAIN)

    def test_privacyGap(self):
        print(magentaStr("\n==> Testing privacy gap on the desk config:"))
        outDir = self.getOutputPath('attack')
        cmdAttack(self.config, self.modelPath, self.manifestPath,
                  'unconstrained,1,2', outDir)

        def _read(scenario):
            return attack.readReport(os.path.join(outDir,
                                                  REPORT_FILE % scenario))

        free = _read(SCENARIO_UNCONSTRAINED)
        s1 = _read(SCENARIO_1)
        s2 = _read(SCENARIO_2)
        self.assertGreaterEqual(free.identificationCcr.get(), 0.95)
        self.assertGreaterEqual(free.expressionCcr.get(), 0.80)
        self.assertLessEqual(s1.identificationCcr.get(), 1 / 6.0 + 0.10)
        self.assertGreaterEqual(s1.expressionCcr.get(),
                                0.70 * free.expressionCcr.get())
        self.assertGreaterEqual(s2.identificationCcr.get(),
                                s1.identificationCcr.get())

    def test_priorSamples(self):
        print(magentaStr("\n==> Testing identities of prior samples:"))
        model = loadCheckpoint(self.modelPath)
        classifiers = attack.trainEvaluationClassifiers(
            model.arch, self.trainData, self.config.getAttackConfig(),
            self.config.seed)
        rate = synth.priorIdentityRate(model, classifiers, 60,
                                       seed=self.config.seed)
        self.assertGreater(rate, 1 / 6.0 + 0.10)

    def test_leftOutSynthesis(self):
        print(magentaStr("\n==> Testing left-out expression synthesis:"))
        config = self.config.update(leftOut=self.LEFT_OUT)
        modelPath = cmdTrain(config, self.manifestPath,
                             self.getOutputPath('run_leftout'),
                             leftOutGiven=True)
        model = loadCheckpoint(modelPath)
        classifiers = attack.trainEvaluationClassifiers(
            model.arch, self.trainData, config.getAttackConfig(), config.seed)
        donors = synth.selectDonors(self.trainData, self.LEFT_OUT)
        self.assertGreaterEqual(len(donors), 30)
        rate = synth.leftOutRate(model, classifiers, donors, self.LEFT_OUT)
        self.assertGreaterEqual(rate, 2.0 / 7)
