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
Image synthesis with a trained model: identity replacement, sampling
from the latent prior, expression morphing and image completion.

Every function uses the encoder mean (never a sampled latent) and decodes
one image at a time, so the same input always gives the same pixels.
"""

import logging

import numpy as np
import torch

from .exceptions import ValidationError, SynthArgumentError
from .objects import MaskSpec
from .convert import oneHot
from .nets import encode, decode

logger = logging.getLogger(__name__)


def _identityCode(model, c):
    """ Accept an identity index or a code vector of length N_id. """
    nIds = model.arch.nIdentities
    if isinstance(c, (int, np.integer)):
        return oneHot(int(c), nIds)
    code = torch.as_tensor(c, dtype=torch.float32).reshape(-1)
    if code.numel() != nIds:
        raise ValidationError("Identity code of length %d, expected %d"
                              % (code.numel(), nIds))
    return code


def _singleImage(image):
    image = torch.as_tensor(image, dtype=torch.float32)
    if image.dim() == 4 and image.shape[0] == 1:
        image = image[0]
    if image.dim() != 3:
        raise ValidationError("Expected a single 3xHxW image, got shape %s"
                              % (tuple(image.shape),))
    return image


def _encodeMean(model, image):
    return encode(model, _singleImage(image).unsqueeze(0)).mean[0]


def _decodeOne(model, f, code):
    return decode(model, f.unsqueeze(0), code.unsqueeze(0))[0].cpu()


def replaceIdentity(model, image, c):
    """ Keep the expression of image and replace its identity by the one
    of code c: decode(encode(image).mean, c). Return a 3xHxW tensor. """
    return _decodeOne(model, _encodeMean(model, image), _identityCode(model, c))


def replaceIdentityAll(model, image):
    """ One replacement per identity code, in code order. """
    f = _encodeMean(model, image)
    return [_decodeOne(model, f, oneHot(i, model.arch.nIdentities))
            for i in range(model.arch.nIdentities)]


def sampleFromPrior(model, c, seed):
    """ Decode a standard normal latent vector drawn from seed together
    with the identity code c. The expression is not controlled. """
    generator = torch.Generator().manual_seed(int(seed))
    f = torch.randn(model.arch.getLatentDim(), generator=generator)
    return _decodeOne(model, f, _identityCode(model, c))


def getMorphWeights(nSteps):
    if int(nSteps) < 2:
        raise SynthArgumentError("Morphing needs at least 2 steps, got %s"
                                 % nSteps)
    nSteps = int(nSteps)
    return [k / (nSteps - 1) for k in range(nSteps)]


def morphLatents(model, image1, image2, nSteps):
    """ Latent vectors (1 - a) f1 + a f2 for a uniformly spaced on [0, 1],
    with fk the encoder mean of image k. Return a nSteps x latent tensor.
    """
    weights = getMorphWeights(nSteps)
    f1 = _encodeMean(model, image1)
    f2 = _encodeMean(model, image2)
    return torch.stack([(1.0 - a) * f1 + a * f2 for a in weights])


def morph(model, image1, image2, c, nSteps, identities=None):
    """ Expression morphing between two images of the same subject.
    Params:
        identities: optional (identity1, identity2) of the sources, only
            used to warn about cross-subject morphing.
    Return:
        list of nSteps 3xHxW tensors; the first and last ones are the
        identity replacements of image1 and image2.
    """
    if identities is not None and identities[0] != identities[1]:
        logger.warning("Morphing between different subjects (%s and %s), "
                       "results are not meaningful", *identities)
    code = _identityCode(model, c)
    return [_decodeOne(model, f, code)
            for f in morphLatents(model, image1, image2, nSteps)]


def getMaskTensor(mask, imageSize):
    """ HxW float tensor (1 = missing) from a MaskSpec, region name or
    explicit 0/1 array. """
    if isinstance(mask, str):
        mask = MaskSpec(region=mask)
    elif not isinstance(mask, MaskSpec):
        mask = MaskSpec(mask=np.asarray(torch.as_tensor(mask).cpu()))
    mask.validate()
    return torch.from_numpy(mask.toArray(imageSize))


def maskImage(image, mask):
    """ Query image with the masked pixels set to 0. """
    image = _singleImage(image)
    mask = getMaskTensor(mask, image.shape[-1])
    return image * (1 - mask)


def complete(model, query, mask, c):
    """ Fill the masked region of query with the corresponding pixels of
    its reconstruction decode(encode(query).mean, c). Pixels outside the
    mask are returned unchanged.
    """
    query = _singleImage(query)
    maskTensor = getMaskTensor(mask, model.arch.imageSize)
    if bool((maskTensor == 1).all()):
        logger.warning("Completion mask covers the whole image, the result "
                       "is a full synthesis")
    synthesized = replaceIdentity(model, query, c)
    return torch.where(maskTensor.bool().expand_as(query), synthesized, query)


# ----------------- Evaluation helpers ---------------------------------------

def selectDonors(data, leftOut):
    """ Images of the left-out expression e from subjects other than the
    left-out identity i (the donors of left-out synthesis). """
    identity, expression = leftOut
    keep = (data.expressions == expression) & (data.identities != identity)
    return data.images[keep]


def leftOutRate(model, classifiers, donors, leftOut):
    """ Fraction of donor-driven syntheses with the left-out identity code
    on which the expression classifier predicts the left-out expression.
    """
    from .attack import predictLabels

    identity, expression = leftOut
    if len(donors) == 0:
        raise ValidationError("No donor images for left-out cell %s"
                              % (leftOut,))
    outputs = torch.stack([replaceIdentity(model, img, identity)
                           for img in donors])
    predicted = predictLabels(classifiers.expression, outputs)
    return float((predicted == expression).double().mean())


def priorIdentityRate(model, classifiers, nSamples, seed=0):
    """ Fraction of prior samples (codes cycling over the identities,
    seeds seed, seed + 1, ...) classified as their coded identity. """
    from .attack import predictLabels

    nIds = model.arch.nIdentities
    codes = [k % nIds for k in range(nSamples)]
    outputs = torch.stack([sampleFromPrior(model, code, seed + k)
                           for k, code in enumerate(codes)])
    predicted = predictLabels(classifiers.identity, outputs)
    return float((predicted == torch.tensor(codes)).double().mean())
