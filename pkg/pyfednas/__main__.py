#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import sys
from ._cli import main

sys.exit(main())
