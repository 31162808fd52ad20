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
Procedural labeled face images (toyfaces).

Every face is drawn in normalized template coordinates (u = column,
v = row, both in [0, 1]). The identity controls the palette (background,
hair, skin) and the face shape; the expression controls brows, eyes and
mouth, which always sit at the same template positions:

    brows   around v = 0.40, from u = 0.5 +- 0.07 to 0.5 +- 0.19
    eyes    centred at (0.5 +- 0.12, 0.47)
    mouth   centred at (0.5, 0.78)

Each record gets its own random stream from (seed, record index), used
for the position/scale/colour jitter, so rendering order does not matter.
Images are rendered at twice the target size and block-averaged.
"""

import os
import logging
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from matplotlib.colors import hsv_to_rgb

import pyworkflow.utils as pwutils

from .constants import *
from .exceptions import StorageError
from .convert import DatasetManifest, ManifestRecord, writeRawImage

logger = logging.getLogger(__name__)

SUPERSAMPLING = 2
# Stream id mixed with the seed for per-identity attributes
IDENTITY_STREAM = 7919

FACE_CENTER = (0.5, 0.54)
EYE_CENTER_V = 0.47
EYE_OFFSET_U = 0.12
EYE_RADIUS_U = 0.055
PUPIL_RADIUS = 0.025
BROW_V = 0.40
BROW_INNER_U = 0.07
BROW_OUTER_U = 0.19
BROW_HALF_THICKNESS = 0.018
MOUTH_CENTER = (0.5, 0.78)
MOUTH_HALF_THICKNESS = 0.0175

FEATURE_COLOR = np.array([0.12, 0.08, 0.06])
SCLERA_COLOR = np.array([0.97, 0.97, 0.97])
MOUTH_COLOR = np.array([0.40, 0.06, 0.08])

ExpressionShape = namedtuple('ExpressionShape',
                             ['browHeight', 'browTilt', 'eyeOpen',
                              'mouthCurve', 'mouthOpen', 'mouthWidth'])

# browHeight > 0 lowers the brows, browTilt > 0 lowers their inner ends,
# mouthCurve > 0 lifts the mouth corners.
EXPRESSION_SHAPES = {
    'anger':    ExpressionShape(0.02, 0.035, 0.018, -0.01, 0.0, 0.09),
    'disgust':  ExpressionShape(0.01, 0.02, 0.014, -0.035, 0.01, 0.11),
    'fear':     ExpressionShape(-0.035, -0.025, 0.04, -0.015, 0.035, 0.10),
    'joy':      ExpressionShape(0.0, 0.0, 0.026, 0.05, 0.02, 0.15),
    'neutral':  ExpressionShape(0.0, 0.0, 0.026, 0.0, 0.0, 0.11),
    'sadness':  ExpressionShape(0.0, -0.035, 0.02, -0.05, 0.0, 0.12),
    'surprise': ExpressionShape(-0.05, 0.0, 0.045, 0.0, 0.06, 0.06),
}

IdentityStyle = namedtuple('IdentityStyle',
                           ['background', 'hair', 'skin', 'faceRadiusU',
                            'faceRadiusV', 'hairline'])


def getIdentityStyle(identity, nIdentities, seed):
    """ Palette and face shape of one identity. Hair and background hues
    are spread evenly over the colour wheel. """
    rng = np.random.default_rng([seed, IDENTITY_STREAM, identity])
    hue = identity / float(nIdentities)
    hair = hsv_to_rgb([hue, 0.75, rng.uniform(0.30, 0.55)])
    background = hsv_to_rgb([(hue + 0.5) % 1.0, 0.35, rng.uniform(0.55, 0.75)])
    skin = hsv_to_rgb([rng.uniform(0.04, 0.10), rng.uniform(0.20, 0.45),
                       rng.uniform(0.75, 0.95)])
    return IdentityStyle(background, hair, skin,
                         faceRadiusU=rng.uniform(0.31, 0.38),
                         faceRadiusV=rng.uniform(0.38, 0.44),
                         hairline=rng.uniform(0.22, 0.30))


def _segmentDistance(u, v, p0, p1):
    """ Distance from every (u, v) point to the segment p0-p1. """
    d = np.subtract(p1, p0)
    t = ((u - p0[0]) * d[0] + (v - p0[1]) * d[1]) / float(d @ d)
    t = np.clip(t, 0, 1)
    return np.hypot(u - (p0[0] + t * d[0]), v - (p0[1] + t * d[1]))


def _paint(canvas, mask, color):
    canvas[mask] = color


def renderFace(style, shape, imageSize, offset=(0.0, 0.0), scale=1.0,
               colorShift=None):
    """ Render one face as an imageSize x imageSize x 3 uint8 array.
    Params:
        style: IdentityStyle of the subject.
        shape: ExpressionShape of the expression.
        offset: (du, dv) translation of the whole face.
        scale: zoom factor around the image centre.
        colorShift: RGB offset added to background, hair and skin.
    """
    n = imageSize * SUPERSAMPLING
    grid = (np.arange(n) + 0.5) / n
    # Back to template coordinates
    u = (grid[None, :] - 0.5 - offset[0]) / scale + 0.5
    v = (grid[:, None] - 0.5 - offset[1]) / scale + 0.5
    u, v = np.broadcast_arrays(u, v)

    shift = np.zeros(3) if colorShift is None else np.asarray(colorShift)
    background = np.clip(style.background + shift, 0, 1)
    hair = np.clip(style.hair + shift, 0, 1)
    skin = np.clip(style.skin + shift, 0, 1)

    canvas = np.empty((n, n, 3))
    canvas[:] = background

    cu, cv = FACE_CENTER
    ru, rv = style.faceRadiusU, style.faceRadiusV
    hairMask = ((u - cu) / (ru + 0.05)) ** 2 + ((v - cv + 0.04) / (rv + 0.06)) ** 2 <= 1
    _paint(canvas, hairMask & (v < cv), hair)
    faceMask = ((u - cu) / ru) ** 2 + ((v - cv) / rv) ** 2 <= 1
    _paint(canvas, faceMask, skin)
    _paint(canvas, faceMask & (v < style.hairline), hair)

    # Brows
    browV = BROW_V + shape.browHeight
    for side in (-1, 1):
        inner = (0.5 + side * BROW_INNER_U, browV + shape.browTilt)
        outer = (0.5 + side * BROW_OUTER_U, browV - shape.browTilt)
        _paint(canvas, _segmentDistance(u, v, inner, outer)
               <= BROW_HALF_THICKNESS, FEATURE_COLOR)

    # Eyes: sclera ellipse and pupil clipped to it
    for side in (-1, 1):
        eu = 0.5 + side * EYE_OFFSET_U
        eye = ((u - eu) / EYE_RADIUS_U) ** 2 + \
              ((v - EYE_CENTER_V) / shape.eyeOpen) ** 2 <= 1
        _paint(canvas, eye, SCLERA_COLOR)
        pupil = np.hypot(u - eu, v - EYE_CENTER_V) <= PUPIL_RADIUS
        _paint(canvas, eye & pupil, FEATURE_COLOR)

    # Mouth: parabolic centre line, opening widest in the middle
    mu, mv = MOUTH_CENTER
    t = (u - mu) / shape.mouthWidth
    inside = np.abs(t) <= 1
    bend = 1 - t ** 2
    centerLine = mv + shape.mouthCurve * bend
    halfHeight = MOUTH_HALF_THICKNESS + shape.mouthOpen * bend
    _paint(canvas, inside & (np.abs(v - centerLine) <= halfHeight),
           MOUTH_COLOR)

    img = canvas.reshape(imageSize, SUPERSAMPLING, imageSize,
                         SUPERSAMPLING, 3).mean(axis=(1, 3))
    return np.rint(np.clip(img, 0, 1) * 255).astype(np.uint8)


def getRecordIndex(spec, identity, expression, sample):
    return (identity * spec.nExpressions + expression) * \
        spec.samplesPerCell + sample


def renderRecord(spec, identity, expression, sample):
    """ Render the image of one record of the dataset. """
    index = getRecordIndex(spec, identity, expression, sample)
    rng = np.random.default_rng([spec.seed, index])
    offset = rng.uniform(-1, 1, size=2) * spec.positionJitter
    scale = 1.0 + rng.uniform(-1, 1) * spec.scaleJitter
    colorShift = rng.uniform(-1, 1, size=3) * spec.colorJitter
    style = getIdentityStyle(identity, spec.nIdentities, spec.seed)
    shape = EXPRESSION_SHAPES[EXPRESSIONS[expression]]
    return renderFace(style, shape, spec.imageSize, offset, scale, colorShift)


def getRecordFile(identity, expression, sample):
    return os.path.join(IMAGES_DIR, 'id%03d_%s_%03d.png'
                        % (identity, EXPRESSIONS[expression], sample))


def generateToyfaces(spec, outDir):
    """ Render all identity x expression x sample images described by spec into
    outDir/images and write outDir/manifest.csv (records not split yet).
    Return the DatasetManifest.
    """
    spec.validate()
    try:
        pwutils.makePath(os.path.join(outDir, IMAGES_DIR))
    except OSError as e:
        raise StorageError("Could not create %s: %s" % (outDir, e))

    cells = [(i, e, s) for i in range(spec.nIdentities)
             for e in range(spec.nExpressions)
             for s in range(spec.samplesPerCell)]

    def _writeRecord(cell):
        fn = getRecordFile(*cell)
        writeRawImage(os.path.join(outDir, fn), renderRecord(spec, *cell))
        return ManifestRecord(fn, cell[0], cell[1], '')

    logger.info("Rendering %d toyfaces images (%d threads) into %s",
                len(cells), spec.threads, outDir)
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as executor:
            records = list(executor.map(_writeRecord, cells))
    else:
        records = [_writeRecord(c) for c in cells]

    manifest = DatasetManifest(records, nIdentities=spec.nIdentities,
                               nExpressions=spec.nExpressions,
                               imageSize=spec.imageSize, seed=spec.seed,
                               rootDir=os.path.abspath(outDir))
    manifest.write(os.path.join(outDir, MANIFEST_FILE))
    return manifest
