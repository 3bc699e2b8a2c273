#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
