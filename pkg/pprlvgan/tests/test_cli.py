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
import csv
import json

from PIL import Image

from pyworkflow.tests import BaseTest, setupTestOutput
from pyworkflow.utils import magentaStr

from pprlvgan.constants import *
from pprlvgan.exceptions import ValidationError
from pprlvgan.objects import ExperimentConfig
from pprlvgan.convert import (DatasetManifest, writeConfig, fileDigest,
                              readCheckpointExtra, loadCheckpoint)
from pprlvgan.cli import main, resolveConfig, parseScenarios
import pprlvgan.attack as attack

from .tools import *


class TestConfigResolution(BaseTest):

    @classmethod
    def setUpClass(cls):
        setupTestOutput(cls)

    def test_precedence(self):
        print(magentaStr("\n==> Testing config precedence:"))
        fn = self.getOutputPath('config.star')
        writeConfig(fn, ExperimentConfig(seed=3, epochs=5, batchSize=32))

        config = resolveConfig(fn)
        self.assertEqual((config.seed, config.epochs, config.batchSize),
                         (3, 5, 32))
        config = resolveConfig(fn, 'full', {'epochs': '7'})
        self.assertEqual(config.epochs, 7)
        self.assertEqual(config.seed, 3)
        self.assertEqual(config.imageSize, 64)
        self.assertEqual(config.batchSize, 256)
        config = resolveConfig(fn, 'full', {'imageSize': '32'})
        self.assertEqual(config.imageSize, 32)
        self.assertEqual(resolveConfig(), ExperimentConfig())

        with self.assertRaises(ValidationError):
            resolveConfig(preset='huge')
        with self.assertRaises(ValidationError):
            resolveConfig(overrides={'epochs': 'ten'})

    def test_attackOptions(self):
        config = ExperimentConfig(seed=3, attackEpochs=4, annHiddenUnits=8)
        attackConfig = config.getAttackConfig()
        self.assertEqual((attackConfig.epochs, attackConfig.hiddenUnits),
                         (4, 8))
        # Scenarios receive the experiment seed as an argument
        self.assertNotIn('seed', attackConfig.toDict())

    def test_scenarios(self):
        self.assertEqual(parseScenarios('3,1'), [SCENARIO_1, SCENARIO_3])
        self.assertEqual(parseScenarios('all'), SCENARIOS)
        self.assertEqual(parseScenarios('random,II'),
                         [SCENARIO_RANDOM, SCENARIO_2])
        with self.assertRaises(ValidationError):
            parseScenarios('4')
        with self.assertRaises(ValidationError):
            parseScenarios(',')


class TestCommandLine(BaseTest):
    """ data -> train -> attack -> synth on the tiny configuration. """

    @classmethod
    def setUpClass(cls):
        setupTestOutput(cls)
        cls.dataDir = cls.getOutputPath('data')
        cls.runDir = cls.getOutputPath('run')
        cls.manifestPath = os.path.join(cls.dataDir, MANIFEST_FILE)
        cls.modelPath = os.path.join(cls.runDir, MODEL_FILE)
        cls.dataCode = main(['data', '--out', cls.dataDir, '--left-out',
                             '1,3'] + TINY_FLAGS)
        cls.trainCode = main(['train', '--manifest', cls.manifestPath,
                              '--out', cls.runDir, '--epochs', '1']
                             + TINY_FLAGS)

    def _path(self, *paths):
        return self.getOutputPath(*paths)

    def test_data(self):
        print(magentaStr("\n==> Testing data command:"))
        self.assertEqual(self.dataCode, EXIT_OK)
        manifest = DatasetManifest.read(self.manifestPath)
        self.assertEqual(len(manifest), 56)
        self.assertEqual(manifest.leftOut, (1, 3))
        self.assertEqual(len(manifest.getRecords(split=SPLIT_TRAIN)), 42)
        with open(os.path.join(self.dataDir, RUN_FILE)) as f:
            info = json.load(f)
        self.assertEqual(info['command'], 'data')
        self.assertEqual(info['outputs']['manifestDigest'],
                         fileDigest(self.manifestPath))
        self.assertTrue(os.path.exists(os.path.join(self.dataDir,
                                                    CONFIG_FILE)))

        again = self._path('data_again')
        self.assertEqual(main(['data', '--out', again, '--left-out', '1,3']
                              + TINY_FLAGS), EXIT_OK)
        self.assertEqual(fileDigest(os.path.join(again, MANIFEST_FILE)),
                         fileDigest(self.manifestPath))

    def test_train(self):
        print(magentaStr("\n==> Testing train command:"))
        self.assertEqual(self.trainCode, EXIT_OK)
        extra = readCheckpointExtra(self.modelPath)
        # Left-out cell taken from the manifest
        self.assertEqual(extra['leftOut'], '1,3')
        self.assertEqual(extra['nTrain'], 42 - 3)
        for fn in (METRICS_FILE, EPOCHS_FILE, LOSSES_PLOT, RUN_FILE):
            self.assertTrue(os.path.exists(os.path.join(self.runDir, fn)), fn)

        zeroDir = self._path('run_zero')
        self.assertEqual(main(['train', '--manifest', self.manifestPath,
                               '--out', zeroDir, '--epochs', '0']
                              + TINY_FLAGS), EXIT_OK)
        model = loadCheckpoint(os.path.join(zeroDir, MODEL_FILE))
        self.assertEqual(model.getCounters()['gSteps'], 0)

    def test_attack(self):
        print(magentaStr("\n==> Testing attack command:"))
        outDir = self._path('attack')
        self.assertEqual(main(['attack', '--checkpoint', self.modelPath,
                               '--manifest', self.manifestPath,
                               '--out', outDir, '--scenarios', 'all']
                              + TINY_FLAGS), EXIT_OK)
        for scenario in SCENARIOS:
            report = attack.readReport(os.path.join(outDir,
                                                    REPORT_FILE % scenario))
            self.assertEqual(report.scenario.get(), scenario)
        with open(os.path.join(outDir, CCR_TABLE_FILE)) as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], CCR_TABLE_COLUMNS)
        self.assertEqual([r[0] for r in rows[1:]], SCENARIOS)

    def test_synth(self):
        print(magentaStr("\n==> Testing synth command:"))
        manifest = DatasetManifest.read(self.manifestPath)
        input1 = manifest.getPath(manifest[0])
        input2 = manifest.getPath(manifest[1])
        base = ['--checkpoint', self.modelPath]

        def _size(outDir, name):
            with Image.open(os.path.join(outDir, name)) as img:
                return img.size

        outDir = self._path('synth_replace')
        self.assertEqual(main(['synth', 'replace', '--out', outDir,
                               '--input', input1] + base), EXIT_OK)
        # input + 2 identities, 16 px cells with 2 px padding
        self.assertEqual(_size(outDir, 'replace_grid.png'), (56, 20))
        self.assertTrue(os.path.exists(os.path.join(outDir,
                                                    'replace_id01.png')))

        outDir = self._path('synth_prior')
        self.assertEqual(main(['synth', 'prior', '--out', outDir,
                               '--samples', '2'] + base), EXIT_OK)
        self.assertEqual(_size(outDir, 'prior_grid.png'), (38, 38))

        outDir = self._path('synth_morph')
        self.assertEqual(main(['synth', 'morph', '--out', outDir,
                               '--input', input1, '--input2', input2,
                               '--identity', '0', '--steps', '3'] + base),
                         EXIT_OK)
        # 3 cells: both sources and one interpolated frame
        self.assertEqual(_size(outDir, 'morph_strip.png'), (56, 20))
        self.assertTrue(os.path.exists(os.path.join(outDir, 'morph_02.png')))
        self.assertFalse(os.path.exists(os.path.join(outDir,
                                                     'morph_03.png')))

        outDir = self._path('synth_complete')
        self.assertEqual(main(['synth', 'complete', '--out', outDir,
                               '--input', input1, '--identity', '0',
                               '--mask', MASK_MOUTH] + base), EXIT_OK)
        self.assertEqual(_size(outDir, 'complete_grid.png'), (56, 20))

    def test_exitCodes(self):
        print(magentaStr("\n==> Testing exit codes:"))
        self.assertEqual(main([]), EXIT_VALIDATION)
        self.assertEqual(main(['data', '--out', self._path('x'),
                               '--epoch', '3']), EXIT_VALIDATION)
        self.assertEqual(main(['data', '--out', self._path('x'),
                               '--imageSize', '48']), EXIT_VALIDATION)
        self.assertEqual(main(['train', '--manifest',
                               self._path('missing.csv'),
                               '--out', self._path('y')]), EXIT_STORAGE)

        other = self._path('other', MANIFEST_FILE)
        createLabelManifest(3, 7, 2).write(other)
        self.assertEqual(main(['attack', '--checkpoint', self.modelPath,
                               '--manifest', other,
                               '--out', self._path('z')]), EXIT_CHECKPOINT)

        self.assertEqual(main(['synth', 'paint', '--checkpoint',
                               self.modelPath, '--out', self._path('s')]),
                         EXIT_SYNTH_ARGS)
        manifest = DatasetManifest.read(self.manifestPath)
        input1 = manifest.getPath(manifest[0])
        self.assertEqual(main(['synth', 'morph', '--checkpoint',
                               self.modelPath, '--out', self._path('s'),
                               '--input', input1, '--input2', input1,
                               '--identity', '0', '--steps', '1']),
                         EXIT_SYNTH_ARGS)
        self.assertEqual(main(['synth', 'complete', '--checkpoint',
                               self.modelPath, '--out', self._path('s'),
                               '--input', input1]), EXIT_SYNTH_ARGS)
