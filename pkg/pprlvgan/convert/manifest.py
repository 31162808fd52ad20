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
from collections import namedtuple, OrderedDict

import pyworkflow.utils as pwutils

from ..constants import *
from ..exceptions import ValidationError, StorageError
from ..objects import parseLeftOut, formatLeftOut
from .convert_utils import writeKeyValueStar, readKeyValueStar


ManifestRecord = namedtuple('ManifestRecord',
                            ['file', 'identity', 'expression', 'split'])


class DatasetManifest:
    """ Store the records of a labeled face dataset together with
    its dimensions. Records can be iterated, filtered by split and
    grouped by (identity, expression) cell.

    On disk the records go to a CSV file (file,identity,expression,split)
    with paths relative to the manifest location, and the dataset
    dimensions to a STAR sidecar with the same base name.
    """

    def __init__(self, records=None, nIdentities=0, nExpressions=0,
                 imageSize=0, seed=0, trainFraction=None, leftOut=None,
                 rootDir=None):
        self._records = [ManifestRecord(*r) for r in (records or [])]
        self.nIdentities = nIdentities
        self.nExpressions = nExpressions
        self.imageSize = imageSize
        self.seed = seed
        self.trainFraction = trainFraction
        self.leftOut = parseLeftOut(leftOut)
        # Folder where the relative image paths are rooted
        self.rootDir = rootDir or ''
        self.validate()

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def __getitem__(self, item):
        return self._records[item]

    def __str__(self):
        return self.toString()

    def validate(self):
        for r in self._records:
            if not 0 <= r.identity < self.nIdentities:
                raise ValidationError("Identity %s out of range [0, %d) "
                                      "for %s" % (r.identity,
                                                  self.nIdentities, r.file))
            if not 0 <= r.expression < self.nExpressions:
                raise ValidationError("Expression %s out of range [0, %d) "
                                      "for %s" % (r.expression,
                                                  self.nExpressions, r.file))
            if r.split not in SPLITS + ['']:
                raise ValidationError("Invalid split tag '%s' for %s"
                                      % (r.split, r.file))
        if self.leftOut is not None:
            i, e = self.leftOut
            if not (0 <= i < self.nIdentities and 0 <= e < self.nExpressions):
                raise ValidationError("Left-out cell %s out of range"
                                      % (self.leftOut,))

    def getRecords(self, split=None, leftOut=None):
        """ Return records, optionally only those from a split and
        excluding the left-out (identity, expression) cell. """
        result = []
        for r in self._records:
            if split is not None and r.split != split:
                continue
            if leftOut is not None and \
                    (r.identity, r.expression) == tuple(leftOut):
                continue
            result.append(r)
        return result

    def getCells(self, records=None):
        """ Group records by (identity, expression), sorted by cell. """
        cells = OrderedDict()
        for i in range(self.nIdentities):
            for e in range(self.nExpressions):
                cells[(i, e)] = []
        for r in (self._records if records is None else records):
            cells[(r.identity, r.expression)].append(r)
        return cells

    def getPath(self, record):
        return os.path.join(self.rootDir, record.file)

    def clone(self, records=None, **kwargs):
        """ New manifest with the same dimensions (and some replaced). """
        params = dict(nIdentities=self.nIdentities,
                      nExpressions=self.nExpressions,
                      imageSize=self.imageSize, seed=self.seed,
                      trainFraction=self.trainFraction,
                      leftOut=self.leftOut, rootDir=self.rootDir)
        params.update(kwargs)
        return DatasetManifest(self._records if records is None else records,
                               **params)

    def getMetadata(self):
        return OrderedDict([
            ('nIdentities', self.nIdentities),
            ('nExpressions', self.nExpressions),
            ('imageSize', self.imageSize),
            ('seed', self.seed),
            ('trainFraction', 'none' if self.trainFraction is None
             else repr(float(self.trainFraction))),
            ('leftOut', formatLeftOut(self.leftOut)),
        ])

    def toString(self):
        """ Human readable summary with counts per cell and split. """
        lines = ["%d records, %d identities x %d expressions, %dx%d px"
                 % (len(self), self.nIdentities, self.nExpressions,
                    self.imageSize, self.imageSize)]
        counts = {s: len(self.getRecords(split=s)) for s in SPLITS}
        lines.append("train: %(train)d   test: %(test)d" % counts)
        if self.leftOut is not None:
            lines.append("left out cell (identity, expression): %d,%d"
                         % tuple(self.leftOut))
        header = "id \\ expr " + ' '.join('%7s' % e[:7] for e in
                                          self._expressionNames())
        lines.append(header)
        cells = self.getCells()
        for i in range(self.nIdentities):
            row = []
            for e in range(self.nExpressions):
                recs = cells[(i, e)]
                nTrain = sum(1 for r in recs if r.split == SPLIT_TRAIN)
                row.append('%7s' % ('%d/%d' % (nTrain, len(recs) - nTrain)))
            lines.append('%9d ' % i + ' '.join(row))
        return '\n'.join(lines)

    def _expressionNames(self):
        if self.nExpressions == N_EXPRESSIONS:
            return EXPRESSIONS
        return [str(e) for e in range(self.nExpressions)]

    def write(self, path):
        """ Write the CSV records and the STAR metadata sidecar. """
        try:
            pwutils.makePath(os.path.dirname(path) or '.')
            with open(path, 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(MANIFEST_COLUMNS)
                for r in self._records:
                    writer.writerow([r.file, r.identity, r.expression, r.split])
        except OSError as e:
            raise StorageError("Could not write manifest %s: %s" % (path, e))
        writeKeyValueStar(getMetadataPath(path), self.getMetadata(),
                          MANIFEST_TABLE)
        return path

    @staticmethod
    def read(path):
        """ Read a manifest CSV (and its STAR sidecar if present). When the
        sidecar is missing, dimensions are inferred from the labels. """
        if not os.path.exists(path):
            raise StorageError("Manifest not found: %s" % path)
        records = []
        try:
            with open(path, encoding='utf-8', newline='') as f:
                reader = csv.reader(f)
                header = next(reader, None)
                if header != MANIFEST_COLUMNS:
                    raise ValidationError("Invalid manifest header %s, "
                                          "expected %s"
                                          % (header, MANIFEST_COLUMNS))
                for row in reader:
                    if not row:
                        continue
                    if len(row) != len(MANIFEST_COLUMNS):
                        raise ValidationError("Invalid manifest row: %s"
                                              % row)
                    records.append(ManifestRecord(row[0], int(row[1]),
                                                  int(row[2]), row[3]))
        except OSError as e:
            raise StorageError("Could not read manifest %s: %s" % (path, e))
        except ValueError as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError("Invalid labels in manifest %s: %s"
                                  % (path, e))

        metaPath = getMetadataPath(path)
        if os.path.exists(metaPath):
            meta = readKeyValueStar(metaPath, MANIFEST_TABLE)
            params = dict(nIdentities=int(meta['nIdentities']),
                          nExpressions=int(meta['nExpressions']),
                          imageSize=int(meta['imageSize']),
                          seed=int(meta['seed']),
                          leftOut=meta.get('leftOut'))
            fraction = meta.get('trainFraction', 'none')
            params['trainFraction'] = None if fraction == 'none' \
                else float(fraction)
        else:
            params = dict(
                nIdentities=max(r.identity for r in records) + 1,
                nExpressions=max(r.expression for r in records) + 1)

        return DatasetManifest(records,
                               rootDir=os.path.dirname(os.path.abspath(path)),
                               **params)


def getMetadataPath(manifestPath):
    return pwutils.replaceExt(manifestPath, 'star')
