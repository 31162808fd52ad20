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

from .convert_utils import *
from .manifest import ManifestRecord, DatasetManifest, getMetadataPath
from .config import writeConfig, readConfig, readConfigValues
from .checkpoint import (saveCheckpoint, loadCheckpoint, readCheckpointArch,
                         readCheckpointExtra)
