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

import math

import torch
from torch.distributions import Normal

from pyworkflow.tests import BaseTest
from pyworkflow.utils import magentaStr

from pprlvgan.constants import LOG_EPS
from pprlvgan.exceptions import ValidationError, NumericError
from pprlvgan.objects import LossWeights
from pprlvgan.convert import oneHotBatch
from pprlvgan.nets import (buildModels, initWeights, sampleLatent,
                           GaussianLatent, DiscriminatorOutput)
from pprlvgan.loss import (klStandardNormal, discriminatorObjective,
                           generatorObjective)

from .tools import *

LN_HALF = math.log(0.5)


def _output(realProb, trueProb, labels, nClasses, n=4):
    """ DiscriminatorOutput (float64) with probability trueProb at the
    given labels for both the identity and expression heads. """
    def _probs(k):
        rest = (1.0 - trueProb) / (k - 1)
        probs = torch.full((n, k), rest, dtype=torch.float64)
        probs[torch.arange(n), labels] = trueProb
        return probs

    return DiscriminatorOutput(
        torch.full((n,), realProb, dtype=torch.float64),
        _probs(nClasses[0]), _probs(nClasses[1]))


class TestKL(BaseTest):

    def test_closedForm(self):
        print(magentaStr("\n==> Testing KL closed form:"))
        zero = GaussianLatent(torch.zeros(2, 5), torch.zeros(2, 5))
        self.assertEqual(float(klStandardNormal(zero)), 0.0)

        one = GaussianLatent(torch.tensor([[1.0]]), torch.tensor([[0.0]]))
        self.assertAlmostEqual(float(klStandardNormal(one)), 0.5, places=6)

        ln4 = math.log(4)
        wide = GaussianLatent(torch.tensor([[0.0]]), torch.tensor([[ln4]]))
        self.assertAlmostEqual(float(klStandardNormal(wide)),
                               0.5 * (4 - 1 - ln4), places=5)
        self.assertAlmostEqual(0.5 * (4 - 1 - ln4), 0.8069, places=4)

    def test_randomPairs(self):
        print(magentaStr("\n==> Testing KL on random values:"))
        generator = torch.Generator().manual_seed(0)
        mu = torch.randn(100, generator=generator, dtype=torch.float64) * 2
        lv = torch.randn(100, generator=generator, dtype=torch.float64)
        for m, v in zip(mu, lv):
            kl = klStandardNormal(GaussianLatent(m.view(1, 1), v.view(1, 1)))
            expected = 0.5 * (float(m) ** 2 + math.exp(float(v)) - 1
                              - float(v))
            self.assertAlmostEqual(float(kl), expected, places=10)
            self.assertGreaterEqual(float(kl), 0.0)

        # Sum over dimensions, mean over the batch
        batch = GaussianLatent(mu.view(10, 10), lv.view(10, 10))
        perItem = 0.5 * (mu ** 2 + lv.exp() - 1 - lv)
        self.assertAlmostEqual(float(klStandardNormal(batch)),
                               float(perItem.view(10, 10).sum(1).mean()),
                               places=10)

    def test_monteCarlo(self):
        print(magentaStr("\n==> Testing KL against Monte Carlo estimates:"))
        generator = torch.Generator().manual_seed(1)
        prior = Normal(0.0, 1.0)
        for mean, logVariance in [(1.0, 0.0), (0.0, math.log(4)),
                                  (-0.7, -0.5)]:
            q = Normal(torch.tensor(mean, dtype=torch.float64),
                       torch.tensor(math.exp(logVariance / 2),
                                    dtype=torch.float64))
            w = torch.randn(1000000, generator=generator,
                            dtype=torch.float64)
            z = mean + math.exp(logVariance / 2) * w
            estimate = float((q.log_prob(z) - prior.log_prob(z)).mean())
            latent = GaussianLatent(torch.tensor([[mean]]),
                                    torch.tensor([[logVariance]]))
            self.assertAlmostEqual(float(klStandardNormal(latent)), estimate,
                                   delta=0.01)

    def test_nonFinite(self):
        latent = GaussianLatent(torch.tensor([[float('inf')]]),
                                torch.zeros(1, 1))
        with self.assertRaises(NumericError):
            klStandardNormal(latent)


class TestObjectives(BaseTest):

    identity = torch.tensor([0, 1, 1, 0])
    expression = torch.tensor([3, 6, 0, 2])

    def _realOut(self, realProb, trueProb):
        return DiscriminatorOutput(
            torch.full((4,), realProb, dtype=torch.float64),
            _output(realProb, trueProb, self.identity, (2, 7)).identityProbs,
            _output(realProb, trueProb, self.expression, (7, 7)).identityProbs)

    def test_discriminatorExamples(self):
        print(magentaStr("\n==> Testing discriminator objective values:"))
        half = self._realOut(0.5, 0.5)
        fake = torch.full((4,), 0.5, dtype=torch.float64)
        value = discriminatorObjective(half, fake, self.identity,
                                       self.expression)
        # 0.25 * 2 ln(1/2) + 0.5 ln(1/2) + 0.25 ln(1/2)
        self.assertAlmostEqual(float(value), 1.25 * LN_HALF, places=6)
        self.assertAlmostEqual(float(value), -0.866434, places=6)

        perfect = self._realOut(1.0, 1.0)
        value = discriminatorObjective(perfect,
                                       torch.zeros(4, dtype=torch.float64),
                                       self.identity, self.expression)
        self.assertAlmostEqual(float(value), 0.0, places=6)
        self.assertLessEqual(float(value), 0.0)

        zero = LossWeights(d1=0, d2=0, d3=0)
        self.assertEqual(float(discriminatorObjective(
            half, fake, self.identity, self.expression, zero)), 0.0)

    def test_discriminatorLabelsOnFake(self):
        half = self._realOut(0.5, 0.5)
        target = torch.tensor([1, 1, 0, 0])
        fakeOut = DiscriminatorOutput(
            torch.full((4,), 0.5, dtype=torch.float64),
            _output(0.5, 0.5, target, (2, 7)).identityProbs,
            _output(0.5, 0.5, self.expression, (7, 7)).identityProbs)
        value = discriminatorObjective(half, fakeOut.realProb, self.identity,
                                       self.expression, fakeOut=fakeOut,
                                       targetIdentity=target,
                                       labelsOnFake=True)
        self.assertAlmostEqual(float(value), 1.25 * LN_HALF, places=6)
        with self.assertRaises(ValidationError):
            discriminatorObjective(half, fakeOut.realProb, self.identity,
                                   self.expression, labelsOnFake=True)

    def test_monotonicity(self):
        print(magentaStr("\n==> Testing objective monotonicity:"))
        fake = torch.full((4,), 0.4, dtype=torch.float64)

        def _value(realProb=0.5, trueProb=0.5, fakeProb=None):
            return float(discriminatorObjective(
                self._realOut(realProb, trueProb),
                fake if fakeProb is None else torch.full(
                    (4,), fakeProb, dtype=torch.float64),
                self.identity, self.expression))

        self.assertGreater(_value(realProb=0.6), _value(realProb=0.5))
        self.assertGreater(_value(trueProb=0.7), _value(trueProb=0.6))
        self.assertLess(_value(fakeProb=0.6), _value(fakeProb=0.5))

    def test_clamp(self):
        print(magentaStr("\n==> Testing probability clamp:"))
        p = 2 * LOG_EPS + 1e-9
        realOut = self._realOut(1 - p, 0.5)
        fake = torch.full((4,), p, dtype=torch.float64)
        value = discriminatorObjective(realOut, fake, self.identity,
                                       self.expression)
        expected = 0.25 * (math.log(1 - p) + math.log(1 - p)) + \
            0.75 * LN_HALF
        self.assertAlmostEqual(float(value), expected, places=12)

        # Fully saturated probabilities stay finite
        saturated = generatorObjective(_output(1.0, 1.0, self.identity,
                                               (2, 7)),
                                       self.identity, self.identity, 0.0)
        self.assertTrue(math.isfinite(float(saturated)))

    def test_generatorExamples(self):
        print(magentaStr("\n==> Testing generator objective values:"))
        target = torch.tensor([1, 0, 0, 1])
        fakeOut = DiscriminatorOutput(
            torch.full((4,), 0.5, dtype=torch.float64),
            _output(0.5, 0.5, target, (2, 7)).identityProbs,
            _output(0.5, 0.5, self.expression, (7, 7)).identityProbs)
        value = generatorObjective(fakeOut, target, self.expression, 0.0)
        self.assertAlmostEqual(float(value), 0.998 * LN_HALF, places=6)
        self.assertAlmostEqual(float(value), -0.6918, delta=1e-4)

        value = generatorObjective(fakeOut, target, self.expression, 10.0)
        self.assertAlmostEqual(float(value), 0.998 * LN_HALF + 0.02, places=6)
        self.assertAlmostEqual(float(value), -0.6718, delta=1e-4)

        value = generatorObjective(fakeOut, target, self.expression, 0.0,
                                   nonSaturating=True)
        self.assertAlmostEqual(float(value), -0.998 * LN_HALF, places=6)

        fooled = DiscriminatorOutput(
            torch.ones(4, dtype=torch.float64),
            _output(1.0, 1.0, target, (2, 7)).identityProbs,
            _output(1.0, 1.0, self.expression, (7, 7)).identityProbs)
        value = generatorObjective(fooled, target, self.expression, 0.0)
        self.assertAlmostEqual(float(value), 0.998 * math.log(LOG_EPS),
                               places=4)

    def test_labelErrors(self):
        print(magentaStr("\n==> Testing objective label checks:"))
        half = self._realOut(0.5, 0.5)
        fake = torch.full((4,), 0.5, dtype=torch.float64)
        with self.assertRaises(ValidationError):
            discriminatorObjective(half, fake, torch.tensor([0, 1, 2, 0]),
                                   self.expression)
        with self.assertRaises(ValidationError):
            discriminatorObjective(half, fake, self.identity,
                                   torch.tensor([0, 7, 1, 1]))
        with self.assertRaises(ValidationError):
            discriminatorObjective(half, fake[:3], self.identity,
                                   self.expression)
        with self.assertRaises(ValidationError):
            generatorObjective(half, torch.tensor([0, 0, 0, 5]),
                               self.expression, 0.0)
        with self.assertRaises(ValidationError):
            generatorObjective(half, self.identity, self.expression, -1.0)


class TestGradients(BaseTest):
    """ Analytic gradients of both objectives against central finite
    differences, in double precision. """

    STEP = 1e-5
    N_PARAMS = 24

    @classmethod
    def setUpClass(cls):
        arch = tinyArch(fcWidth=8)
        cls.model = buildModels(arch, initSeed=0)
        initWeights(cls.model, torch.Generator().manual_seed(2), std=0.1)
        cls.model.double().eval()
        batch = randomBatch(4, arch, seed=1)
        cls.images = batch.images.double()
        cls.identity = batch.identities
        cls.expression = batch.expressions
        cls.target = torch.tensor([1, 0, 1, 0])
        cls.codes = oneHotBatch(cls.target, 2).double()

    def _dObjective(self):
        model = self.model
        realOut = model.discriminator(self.images)
        with torch.no_grad():
            fake = model.decoder(model.encoder(self.images).mean, self.codes)
        return discriminatorObjective(realOut,
                                      model.discriminator(fake).realProb,
                                      self.identity, self.expression)

    def _gObjective(self, weights=None):
        model = self.model
        latent = model.encoder(self.images)
        f = sampleLatent(latent, seed=3)
        fakeOut = model.discriminator(model.decoder(f, self.codes))
        return generatorObjective(fakeOut, self.target, self.expression,
                                  klStandardNormal(latent), weights)

    def _checkGradients(self, objective, params, seed):
        self.model.zero_grad()
        objective().backward()
        sizes = [p.numel() for p in params]
        generator = torch.Generator().manual_seed(seed)
        picks = torch.randint(sum(sizes), (self.N_PARAMS,),
                              generator=generator).tolist()
        for flat in picks:
            k = 0
            while flat >= sizes[k]:
                flat -= sizes[k]
                k += 1
            p = params[k]
            analytic = float(p.grad.view(-1)[flat])
            with torch.no_grad():
                original = float(p.view(-1)[flat])
                p.view(-1)[flat] = original + self.STEP
                plus = float(objective())
                p.view(-1)[flat] = original - self.STEP
                minus = float(objective())
                p.view(-1)[flat] = original
            numeric = (plus - minus) / (2 * self.STEP)
            scale = max(abs(analytic), abs(numeric))
            self.assertLessEqual(abs(analytic - numeric),
                                 1e-3 * scale + 1e-9,
                                 "param %d[%d]: %g vs %g"
                                 % (k, flat, analytic, numeric))

    def test_discriminatorGradients(self):
        print(magentaStr("\n==> Testing discriminator objective gradients:"))
        self._checkGradients(self._dObjective,
                             self.model.discriminatorParameters(), seed=0)

    def test_generatorGradients(self):
        print(magentaStr("\n==> Testing generator objective gradients:"))
        self._checkGradients(self._gObjective,
                             self.model.generatorParameters(), seed=1)

    def test_noReconstructionTerm(self):
        """ With only the KL weight on, nothing reaches the decoder. """
        print(magentaStr("\n==> Testing absence of pixel reconstruction:"))
        weights = LossWeights(g1=0, g2=0, g3=0, g4=0.002)
        self.model.zero_grad()
        self._gObjective(weights).backward()
        for p in self.model.decoder.parameters():
            self.assertTrue(p.grad is None or bool((p.grad == 0).all()))
        self.assertTrue(any(p.grad is not None and bool((p.grad != 0).any())
                            for p in self.model.encoder.parameters()))
