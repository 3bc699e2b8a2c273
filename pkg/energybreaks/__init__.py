#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Structural change points in sparse multi-response regressions, located by energy distances. """

#
# Quick-use aliases
#
__all__ = [
    'TimeSeriesDataset', 'read_dataset', 'write_dataset',
    'EnergyReport', 'ResidualCluster', 'dispersion_decomposition', 'permutation_test',
    'fit_penalized', 'select_gamma_bic',
    'DetectorConfig', 'DetectionResult', 'InfeasibleConfigError', 'detect', 'dp_known_k', 'dp_unknown_k', 'nsa',
    'ModelSpec', 'generate', 'run_benchmark',
]

# Data.
from .dataset      import TimeSeriesDataset, read_dataset, write_dataset

# Statistics.
from .energy       import EnergyReport, ResidualCluster, dispersion_decomposition, permutation_test
from .regression   import fit_penalized, select_gamma_bic

# Searches.
from .segmentation import DetectorConfig, DetectionResult, InfeasibleConfigError, detect, dp_known_k, dp_unknown_k, nsa

# Benchmarks.
from .simulation   import ModelSpec, generate, run_benchmark
