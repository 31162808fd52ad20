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
Encoder, decoder and three-headed discriminator networks.

All of them share the same structure of stride-2 stages (5x5 kernels)
so the tensor before flattening is always 4x4, whatever the image size:

    encoder:        conv stages -> FC mean, FC log-variance
    decoder:        FC (latent + identity code) -> 4x4 -> deconv stages -> tanh
    discriminator:  conv stages -> FC -> real (sigmoid),
                                         identity (softmax),
                                         expression (softmax)
"""

from collections import namedtuple
from contextlib import contextmanager

import torch
from torch import nn
from torch.optim.swa_utils import update_bn

from .exceptions import ValidationError, NumericError
from .objects import ArchConfig


GaussianLatent = namedtuple('GaussianLatent', ['mean', 'logVariance'])

DiscriminatorOutput = namedtuple('DiscriminatorOutput',
                                 ['realProb', 'identityProbs',
                                  'expressionProbs'])

KERNEL = 5
INIT_STD = 1e-2


def _bn2d(channels, arch):
    # torch momentum is the weight of the new batch statistic
    return nn.BatchNorm2d(channels, momentum=1.0 - arch.bnDecay)


def convTrunk(arch):
    """ Stride-2 conv stages down to 4x4, each with BN and LeakyReLU.
    Return the module and the flattened output width. """
    layers = []
    inChannels = 3
    base = arch.getBaseChannels()
    for k in range(arch.getStages()):
        outChannels = base * 2 ** k
        layers += [nn.Conv2d(inChannels, outChannels, KERNEL, stride=2,
                             padding=KERNEL // 2),
                   _bn2d(outChannels, arch),
                   nn.LeakyReLU(arch.leakySlope)]
        inChannels = outChannels
    return nn.Sequential(*layers), inChannels * 4 * 4


class Encoder(nn.Module):
    def __init__(self, arch):
        super().__init__()
        self.trunk, width = convTrunk(arch)
        self.meanHead = nn.Linear(width, arch.getLatentDim())
        self.logVarianceHead = nn.Linear(width, arch.getLatentDim())

    def forward(self, x):
        h = self.trunk(x).flatten(1)
        return GaussianLatent(self.meanHead(h), self.logVarianceHead(h))


class Decoder(nn.Module):
    def __init__(self, arch):
        super().__init__()
        base = arch.getBaseChannels()
        stages = arch.getStages()
        self.fcChannels = 4 * base
        self.fc = nn.Linear(arch.getLatentDim() + arch.nIdentities,
                            self.fcChannels * 4 * 4)
        self.fcActivation = nn.LeakyReLU(arch.leakySlope)

        layers = []
        inChannels = self.fcChannels
        for k in range(stages - 1):
            outChannels = base * 2 ** (stages - 1 - k)
            layers += [nn.ConvTranspose2d(inChannels, outChannels, KERNEL,
                                          stride=2, padding=KERNEL // 2,
                                          output_padding=1),
                       _bn2d(outChannels, arch),
                       nn.LeakyReLU(arch.leakySlope)]
            inChannels = outChannels
        # Last deconvolution is not batch-normalized
        layers += [nn.ConvTranspose2d(inChannels, 3, KERNEL, stride=2,
                                      padding=KERNEL // 2, output_padding=1),
                   nn.Tanh()]
        self.deconv = nn.Sequential(*layers)

    def forward(self, f, c):
        h = self.fcActivation(self.fc(torch.cat([f, c], dim=1)))
        return self.deconv(h.view(-1, self.fcChannels, 4, 4))


class Discriminator(nn.Module):
    """ Shared trunk (conv stages + first FC layer) and three heads. """
    def __init__(self, arch):
        super().__init__()
        self.trunk, width = convTrunk(arch)
        self.fc = nn.Linear(width, arch.fcWidth)
        self.fcActivation = nn.LeakyReLU(arch.leakySlope)
        self.realHead = nn.Linear(arch.fcWidth, 1)
        self.identityHead = nn.Linear(arch.fcWidth, arch.nIdentities)
        self.expressionHead = nn.Linear(arch.fcWidth, arch.nExpressions)

    def forward(self, x):
        h = self.fcActivation(self.fc(self.trunk(x).flatten(1)))
        return DiscriminatorOutput(
            torch.sigmoid(self.realHead(h)).squeeze(1),
            torch.softmax(self.identityHead(h), dim=1),
            torch.softmax(self.expressionHead(h), dim=1))


class ModelBundle(nn.Module):
    """ Encoder, decoder and discriminator of one experiment, together
    with the architecture config and the update counters.
    Encoder and decoder together are the generator G.
    """
    def __init__(self, arch):
        super().__init__()
        arch.validate()
        self.arch = arch
        self.encoder = Encoder(arch)
        self.decoder = Decoder(arch)
        self.discriminator = Discriminator(arch)
        self.register_buffer('dSteps', torch.zeros((), dtype=torch.long))
        self.register_buffer('gSteps', torch.zeros((), dtype=torch.long))
        self.register_buffer('epoch', torch.zeros((), dtype=torch.long))

    def generatorParameters(self):
        return list(self.encoder.parameters()) + \
               list(self.decoder.parameters())

    def discriminatorParameters(self):
        return list(self.discriminator.parameters())

    def getCounters(self):
        return {'dSteps': int(self.dSteps), 'gSteps': int(self.gSteps),
                'epoch': int(self.epoch)}

    def countParameters(self):
        """ Number of trainable parameters per network. """
        counts = {name: sum(p.numel() for p in getattr(self, name).parameters())
                  for name in ('encoder', 'decoder', 'discriminator')}
        counts['total'] = sum(counts.values())
        return counts

    def getDevice(self):
        return next(self.parameters()).device


def initWeights(module, generator, std=INIT_STD):
    """ Zero-mean Gaussian weights, zero biases, unit BN scales.
    Parameters are visited in module registration order. """
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                w = torch.randn(m.weight.shape, generator=generator) * std
                m.weight.copy_(w)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.BatchNorm2d):
                m.reset_running_stats()
                m.weight.fill_(1.0)
                m.bias.zero_()


def buildModels(arch, initSeed=0):
    """ Create a ModelBundle for this architecture, initialized from
    initSeed (equal seeds give identical parameters).
    """
    if not isinstance(arch, ArchConfig):
        raise ValidationError("Expected an ArchConfig, got %s" % type(arch))
    model = ModelBundle(arch)
    initWeights(model, torch.Generator().manual_seed(int(initSeed)))
    return model


@contextmanager
def evalMode(module):
    """ Run a block in inference mode (BN running statistics, no grad),
    restoring the previous train/eval state afterwards. """
    wasTraining = module.training
    module.eval()
    try:
        with torch.no_grad():
            yield module
    finally:
        module.train(wasTraining)


def recalibrateStatistics(module, inputs, chunkSize=256):
    """ Recompute the batch-norm running statistics of module with its
    current weights, as the plain average over chunks of inputs.
    Return:
        the number of batch-norm layers recalibrated.
    """
    nNorms = sum(1 for m in module.modules()
                 if isinstance(m, nn.modules.batchnorm._BatchNorm))
    if nNorms and len(inputs):
        update_bn([inputs[s:s + chunkSize]
                   for s in range(0, len(inputs), chunkSize)], module)
    return nNorms


def _checkImages(model, images):
    if not isinstance(images, torch.Tensor):
        images = torch.as_tensor(images)
    if images.dim() == 3:
        images = images.unsqueeze(0)
    size = model.arch.imageSize
    if images.dim() != 4 or tuple(images.shape[1:]) != (3, size, size):
        raise ValidationError("Expected images of shape (N, 3, %d, %d), got %s"
                              % (size, size, tuple(images.shape)))
    if images.numel() and (images.min() < -1 - 1e-6 or images.max() > 1 + 1e-6):
        raise ValidationError("Image values must be in [-1, 1]")
    return images.to(device=model.getDevice(), dtype=torch.float32)


def _checkVectors(tensor, width, name):
    tensor = torch.as_tensor(tensor, dtype=torch.float32)
    if tensor.dim() == 1:
        tensor = tensor.unsqueeze(0)
    if tensor.dim() != 2 or tensor.shape[1] != width:
        raise ValidationError("Expected %s of width %d, got shape %s"
                              % (name, width, tuple(tensor.shape)))
    return tensor


def encode(model, images):
    """ Return the GaussianLatent (mean, log-variance) of a batch of
    images (N x 3 x H x W, values in [-1, 1]). BN layers use running
    statistics so the result does not depend on the rest of the batch.
    """
    images = _checkImages(model, images)
    with evalMode(model):
        return model.encoder(images)


def decode(model, f, c):
    """ Synthesize images from latent vectors f and identity codes c. """
    device = model.getDevice()
    f = _checkVectors(f, model.arch.getLatentDim(), 'latent').to(device)
    c = _checkVectors(c, model.arch.nIdentities, 'identity code').to(device)
    if f.shape[0] != c.shape[0]:
        raise ValidationError("Batch sizes of latent (%d) and identity code "
                              "(%d) differ" % (f.shape[0], c.shape[0]))
    with evalMode(model):
        return model.decoder(f, c)


def discriminate(model, images):
    """ Forward pass of the discriminator, returning its three outputs. """
    images = _checkImages(model, images)
    with evalMode(model):
        return model.discriminator(images)


def sampleLatent(latent, seed=None, generator=None, deterministic=False):
    """ Reparameterized sample mean + exp(logVariance / 2) * w.
    Params:
        latent: GaussianLatent batch.
        seed: seed for the standard normal noise w (ignored if a
            generator is given).
        generator: torch.Generator to draw w from.
        deterministic: if True, return the mean itself.
    """
    mean, logVariance = latent
    if deterministic:
        return mean
    if not (torch.isfinite(mean).all() and torch.isfinite(logVariance).all()):
        raise NumericError("Non-finite latent mean or log-variance")
    if generator is None:
        generator = torch.Generator().manual_seed(int(seed or 0))
    w = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
    return mean + torch.exp(0.5 * logVariance) * w.to(mean.device)
