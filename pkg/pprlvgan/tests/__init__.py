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

from .test_convert import *
from .test_toyfaces import *
from .test_dataset import *
from .test_nets import *
from .test_loss import *
from .test_train import *
from .test_attack import *
from .test_synth import *
from .test_cli import *
from .test_workflow import *
