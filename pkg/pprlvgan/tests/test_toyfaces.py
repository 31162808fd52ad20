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

import numpy as np
from PIL import Image

from pyworkflow.tests import BaseTest, setupTestOutput
from pyworkflow.utils import magentaStr

from pprlvgan.constants import *
from pprlvgan.exceptions import ValidationError
from pprlvgan.objects import ToyfacesSpec
from pprlvgan.convert import DatasetManifest, fileDigest
from pprlvgan.toyfaces import generateToyfaces, renderRecord

from .tools import *


class TestToyfaces(BaseTest):

    @classmethod
    def setUpClass(cls):
        setupTestOutput(cls)

    def test_defaultSize(self):
        print(magentaStr("\n==> Testing toyfaces default size:"))
        spec = ToyfacesSpec()
        spec.validate()
        self.assertEqual(spec.getNumberOfImages(), 840)
        self.assertEqual(spec.nExpressions, 7)

    def test_invalidSpec(self):
        print(magentaStr("\n==> Testing toyfaces parameter validation:"))
        for kwargs in [dict(nExpressions=5), dict(samplesPerCell=1),
                       dict(imageSize=24), dict(scaleJitter=-0.1)]:
            with self.assertRaises(ValidationError):
                ToyfacesSpec(**kwargs).validate()

    def test_generate(self):
        print(magentaStr("\n==> Testing toyfaces generation:"))
        outDir = self.getOutputPath('tiny')
        manifest = generateToyfaces(ToyfacesSpec(**TINY_TOYFACES), outDir)
        self.assertEqual(len(manifest), 2 * 7 * 4)
        self.assertTrue(all(r.split == '' for r in manifest))
        self.assertTrue(os.path.exists(os.path.join(outDir, MANIFEST_FILE)))

        for r in manifest[:3]:
            with Image.open(manifest.getPath(r)) as img:
                self.assertEqual(img.mode, 'RGB')
                self.assertEqual(img.size, (16, 16))

        read = DatasetManifest.read(os.path.join(outDir, MANIFEST_FILE))
        self.assertEqual(list(read), list(manifest))
        self.assertEqual(read.imageSize, 16)

    def test_determinism(self):
        print(magentaStr("\n==> Testing toyfaces determinism:"))
        spec = ToyfacesSpec(**TINY_TOYFACES)
        m1 = generateToyfaces(spec, self.getOutputPath('run1'))
        parallel = ToyfacesSpec(threads=3, **TINY_TOYFACES)
        m2 = generateToyfaces(parallel, self.getOutputPath('run2'))
        self.assertEqual([r.file for r in m1], [r.file for r in m2])
        for r1, r2 in zip(m1, m2):
            self.assertEqual(fileDigest(m1.getPath(r1)),
                             fileDigest(m2.getPath(r2)))

    def test_zeroJitter(self):
        print(magentaStr("\n==> Testing toyfaces without jitter:"))
        spec = ToyfacesSpec(nIdentities=2, samplesPerCell=3, positionJitter=0,
                            scaleJitter=0, colorJitter=0)
        for e in range(spec.nExpressions):
            first = renderRecord(spec, 1, e, 0)
            for s in (1, 2):
                self.assertTrue(np.array_equal(first,
                                               renderRecord(spec, 1, e, s)))

    def test_labelFidelity(self):
        """ Nearest-centroid classifiers on zero-jitter renders recover
        both labels of every image. """
        print(magentaStr("\n==> Testing toyfaces label fidelity:"))
        spec = ToyfacesSpec(nIdentities=6, samplesPerCell=2,
                            positionJitter=0, scaleJitter=0, colorJitter=0)
        images = {(i, e): renderRecord(spec, i, e, 0).astype(np.float64)
                  for i in range(spec.nIdentities)
                  for e in range(spec.nExpressions)}
        idCentroids = [np.mean([images[(i, e)]
                                for e in range(spec.nExpressions)], axis=0)
                       for i in range(spec.nIdentities)]
        exprCentroids = [np.mean([images[(i, e)]
                                  for i in range(spec.nIdentities)], axis=0)
                         for e in range(spec.nExpressions)]

        def _nearest(img, centroids):
            return int(np.argmin([np.sum((img - c) ** 2) for c in centroids]))

        for (i, e), img in images.items():
            self.assertEqual(_nearest(img, idCentroids), i)
            self.assertEqual(_nearest(img, exprCentroids), e)

    def test_sizes(self):
        print(magentaStr("\n==> Testing toyfaces image sizes:"))
        for size in (16, 32, 64):
            spec = ToyfacesSpec(imageSize=size)
            img = renderRecord(spec, 0, 3, 0)
            self.assertEqual(img.shape, (size, size, 3))
            self.assertEqual(img.dtype, np.uint8)
