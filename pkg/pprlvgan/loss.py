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
KL term and the adversarial objectives of the discriminator (maximized)
and of the generator (minimized). Expectations are batch means and every
probability is clamped to [LOG_EPS, 1 - LOG_EPS] before taking its log.
There is no pixel reconstruction term.
"""

import torch

from .constants import LOG_EPS
from .exceptions import ValidationError, NumericError
from .objects import LossWeights


def _log(p):
    return torch.log(p.clamp(LOG_EPS, 1.0 - LOG_EPS))


def _log1m(p):
    return torch.log(1.0 - p.clamp(LOG_EPS, 1.0 - LOG_EPS))


def _checkLabels(labels, n, name, batchSize):
    labels = torch.as_tensor(labels, dtype=torch.long)
    if labels.dim() != 1 or labels.shape[0] != batchSize:
        raise ValidationError("Expected %d %s labels, got shape %s"
                              % (batchSize, name, tuple(labels.shape)))
    if labels.numel() and (labels.min() < 0 or labels.max() >= n):
        raise ValidationError("%s labels out of range [0, %d)" % (name, n))
    return labels


def pickProbability(probs, labels):
    """ probs[k, labels[k]] for each row k. """
    return probs.gather(1, labels.to(probs.device).unsqueeze(1)).squeeze(1)


def klStandardNormal(latent):
    """ KL(N(mean, diag(exp(logVariance))) || N(0, I)), summed over
    latent dimensions and averaged over the batch. """
    mean, logVariance = latent
    if mean.dim() == 1:
        mean, logVariance = mean.unsqueeze(0), logVariance.unsqueeze(0)
    if not (torch.isfinite(mean).all() and torch.isfinite(logVariance).all()):
        raise NumericError("Non-finite latent values in KL term")
    kl = 0.5 * (mean ** 2 + torch.exp(logVariance) - 1.0 - logVariance)
    return kl.sum(dim=1).mean()


def discriminatorObjective(realOut, fakeRealProb, identity, expression,
                           weights=None, fakeOut=None, targetIdentity=None,
                           labelsOnFake=False):
    """ Objective maximized by the discriminator:

        d1 * [mean log D1(I) + mean log(1 - D1(G(I, c)))]
      + d2 * mean log D2_{identity}(I)
      + d3 * mean log D3_{expression}(I)

    Params:
        realOut: DiscriminatorOutput of the real batch.
        fakeRealProb: D1 on the synthesized batch.
        identity, expression: labels of the real batch.
        labelsOnFake: if True, the identity/expression terms also average
            over the synthesized images (fakeOut) with labels
            (targetIdentity, expression).
    """
    weights = weights or LossWeights()
    n = realOut.realProb.shape[0]
    if fakeRealProb.shape[0] != n:
        raise ValidationError("Real (%d) and fake (%d) batch sizes differ"
                              % (n, fakeRealProb.shape[0]))
    identity = _checkLabels(identity, realOut.identityProbs.shape[1],
                            'identity', n)
    expression = _checkLabels(expression, realOut.expressionProbs.shape[1],
                              'expression', n)

    realFake = _log(realOut.realProb).mean() + _log1m(fakeRealProb).mean()
    idTerm = _log(pickProbability(realOut.identityProbs, identity)).mean()
    exprTerm = _log(pickProbability(realOut.expressionProbs,
                                    expression)).mean()

    if labelsOnFake:
        if fakeOut is None or targetIdentity is None:
            raise ValidationError("labelsOnFake needs the fake outputs and "
                                  "the target identities")
        targetIdentity = _checkLabels(targetIdentity,
                                      fakeOut.identityProbs.shape[1],
                                      'target identity', n)
        fakeId = _log(pickProbability(fakeOut.identityProbs,
                                      targetIdentity)).mean()
        fakeExpr = _log(pickProbability(fakeOut.expressionProbs,
                                        expression)).mean()
        idTerm = 0.5 * (idTerm + fakeId)
        exprTerm = 0.5 * (exprTerm + fakeExpr)

    return weights.d1 * realFake + weights.d2 * idTerm + weights.d3 * exprTerm


def generatorObjective(fakeOut, targetIdentity, expression, kl,
                       weights=None, nonSaturating=False):
    """ Objective minimized by the generator (encoder + decoder):

        g1 * mean log(1 - D1(G)) + g2 * mean log(1 - D2_{target}(G))
      + g3 * mean log(1 - D3_{expression}(G)) + g4 * kl

    With nonSaturating=True each log(1 - p) is replaced by -log(p).
    """
    weights = weights or LossWeights()
    n = fakeOut.realProb.shape[0]
    targetIdentity = _checkLabels(targetIdentity,
                                  fakeOut.identityProbs.shape[1],
                                  'target identity', n)
    expression = _checkLabels(expression, fakeOut.expressionProbs.shape[1],
                              'expression', n)
    kl = torch.as_tensor(kl, dtype=fakeOut.realProb.dtype)
    klValue = kl.detach().item()
    if klValue < -1e-6:
        raise ValidationError("KL term must be >= 0, got %s" % klValue)

    probs = [fakeOut.realProb,
             pickProbability(fakeOut.identityProbs, targetIdentity),
             pickProbability(fakeOut.expressionProbs, expression)]
    if nonSaturating:
        terms = [-_log(p).mean() for p in probs]
    else:
        terms = [_log1m(p).mean() for p in probs]

    return weights.g1 * terms[0] + weights.g2 * terms[1] + \
        weights.g3 * terms[2] + weights.g4 * kl
