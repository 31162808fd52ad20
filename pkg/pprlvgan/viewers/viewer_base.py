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
import torch
from matplotlib.figure import Figure
from matplotlib.backends.backend_agg import FigureCanvasAgg

import pyworkflow.utils as pwutils

from ..convert import denormalizeImage, tensorToImage, writeRawImage


class VganPlotter:
    """ Class to create line plots of training metadata tables. """

    def __init__(self, x=1, y=1, mainTitle="", figsize=(8, 5)):
        self.figure = Figure(figsize=figsize)
        FigureCanvasAgg(self.figure)
        if mainTitle:
            self.figure.suptitle(mainTitle)
        self._axes = [self.figure.add_subplot(y, x, k + 1)
                      for k in range(x * y)]
        self._current = 0

    def createSubPlot(self, title, xlabel, ylabel):
        ax = self._axes[self._current]
        self._current = min(self._current + 1, len(self._axes) - 1)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        self._ax = ax
        return ax

    def plotData(self, xx, yy, color='g', **kwargs):
        self._ax.plot(xx, yy, color=color, **kwargs)

    def plotMd(self, mdTable, mdLabelX, mdLabelY, color='g', **kwargs):
        """ Plot table column mdLabelY against mdLabelX. """
        xx = mdTable.getColumnValues(mdLabelX)
        yy = mdTable.getColumnValues(mdLabelY)
        self.plotData(list(xx), list(yy), color, **kwargs)

    def legend(self):
        self._ax.legend(loc='best')

    def savefig(self, path):
        pwutils.makePath(os.path.dirname(path) or '.')
        self.figure.tight_layout()
        self.figure.savefig(path)
        return path


def plotEpochs(epochsTable, path):
    """ Plot objectives, KL and D1 probabilities per epoch into path. """
    plotter = VganPlotter(x=3, y=1, figsize=(13, 4),
                          mainTitle="Training summary")
    plotter.createSubPlot("Objectives", "epoch", "value")
    plotter.plotMd(epochsTable, 'epoch', 'dObjective', color='b',
                   label='discriminator (max)')
    plotter.plotMd(epochsTable, 'epoch', 'gObjective', color='r',
                   label='generator (min)')
    plotter.legend()
    plotter.createSubPlot("KL term", "epoch", "KL")
    plotter.plotMd(epochsTable, 'epoch', 'kl', color='g', label='mean')
    plotter.plotMd(epochsTable, 'epoch', 'klMax', color='k', label='max',
                   linestyle='--')
    plotter.legend()
    plotter.createSubPlot("D1 mean probability", "epoch", "probability")
    plotter.plotMd(epochsTable, 'epoch', 'd1Real', color='b', label='real')
    plotter.plotMd(epochsTable, 'epoch', 'd1Fake', color='r', label='fake')
    plotter.legend()
    return plotter.savefig(path)


def _toUint8(img):
    if isinstance(img, torch.Tensor):
        img = tensorToImage(img) if img.dim() == 3 and img.shape[0] == 3 \
            else img.detach().cpu().numpy()
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img
    return denormalizeImage(img)


def tileImages(rows, padding=2, background=255):
    """ Compose a grid image from a list of rows, each row being a list of
    images (HxWx3 normalized arrays, 3xHxW tensors or uint8 arrays).
    Missing cells (None) are left blank.
    """
    cells = [[None if img is None else _toUint8(img) for img in row]
             for row in rows]
    first = next(img for row in cells for img in row if img is not None)
    h, w = first.shape[:2]
    nCols = max(len(row) for row in cells)
    grid = np.full((len(cells) * (h + padding) + padding,
                    nCols * (w + padding) + padding, 3), background,
                   dtype=np.uint8)
    for r, row in enumerate(cells):
        for c, img in enumerate(row):
            if img is None:
                continue
            y = padding + r * (h + padding)
            x = padding + c * (w + padding)
            grid[y:y + h, x:x + w] = img
    return grid


def writeGrid(path, rows, padding=2):
    """ Write a composite grid image (see tileImages) as PNG. """
    pwutils.makePath(os.path.dirname(path) or '.')
    return writeRawImage(path, tileImages(rows, padding))
