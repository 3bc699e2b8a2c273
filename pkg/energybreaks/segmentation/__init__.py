#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Change-point searches: dynamic programming, and recursive splitting. """

from .partition import (InfeasibleConfigError, Partition, SegmentCostCache, SeriesPoint, DetectionResult,
                        location_test, partition_dispersion, partition_energy)
from .dp        import dp_known_k, dp_unknown_k
from .nsa       import NsaConfig, nsa
from .detector  import ALGORITHMS, DetectorConfig, detect

__all__ = [
    'InfeasibleConfigError', 'Partition', 'SegmentCostCache', 'SeriesPoint', 'DetectionResult',
    'location_test', 'partition_dispersion', 'partition_energy', 'dp_known_k', 'dp_unknown_k', 'NsaConfig', 'nsa',
    'ALGORITHMS', 'DetectorConfig', 'detect',
]
