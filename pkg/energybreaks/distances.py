#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Pairwise Euclidean distance kernels, raised to an energy exponent.

Residual sets are compared through sums of ``|a_i - b_j|^alpha`` over every pair of
points. Full distance matrices are quadratic in memory; so the sums here are accumulated
over row blocks of the first operand, and only :func:`alpha_distance_matrix` ever
materializes a complete matrix.
"""

import unittest

import numpy as np
from scipy.spatial.distance import cdist

__all__ = ['as_points', 'alpha_distance_matrix', 'alpha_distance_sum']


# Rows per block when accumulating distance sums; 1024 x 1024 doubles is 8 MiB.
BLOCK_ROWS = 1024


def as_points(values):
    """ Returns ``values`` as a contiguous (n, q) float64 array; 1D input is one point per entry. """

    points = np.ascontiguousarray(values, dtype=np.float64)

    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2:
        raise ValueError(f"points must be a 1D or 2D array, not a {points.ndim}D one")

    return points


def _powered(distances, exponent):
    if exponent != 1:
        np.power(distances, exponent, out=distances)
    return distances


def alpha_distance_matrix(a, b=None, exponent=1.0):
    """ Returns the matrix of ``|a_i - b_j|^exponent``; ``b`` defaults to ``a``. """

    a = as_points(a)
    b = a if b is None else as_points(b)

    if a.shape[1] != b.shape[1]:
        raise ValueError(f"cannot compare {a.shape[1]}-dimensional points with {b.shape[1]}-dimensional ones")

    return _powered(cdist(a, b, 'euclidean'), exponent)


def alpha_distance_sum(a, b, exponent=1.0, block_rows=BLOCK_ROWS):
    """ Returns the sum of ``|a_i - b_j|^exponent`` over all pairs, accumulated blockwise. """

    a = as_points(a)
    b = as_points(b)

    if a.shape[1] != b.shape[1]:
        raise ValueError(f"cannot compare {a.shape[1]}-dimensional points with {b.shape[1]}-dimensional ones")

    total = 0.0
    for start in range(0, a.shape[0], block_rows):
        block = _powered(cdist(a[start:start + block_rows], b, 'euclidean'), exponent)
        total += float(block.sum())

    return total



class DistanceKernelTest(unittest.TestCase):

    def test_three_four_five(self):
        a = np.array([[0.0, 0.0], [3.0, 4.0]])
        b = np.array([[0.0, 0.0]])

        self.assertEqual(alpha_distance_sum(a, b), 5.0)
        np.testing.assert_array_equal(alpha_distance_matrix(a, b), [[0.0], [5.0]])

    def test_blocking_matches_single_pass(self):
        rng = np.random.default_rng(3)
        a, b = rng.standard_normal((37, 3)), rng.standard_normal((23, 3))

        single  = alpha_distance_sum(a, b, exponent=0.5)
        blocked = alpha_distance_sum(a, b, exponent=0.5, block_rows=5)
        self.assertAlmostEqual(single, blocked, delta=1e-12 * single)

    def test_one_dimensional_input_is_a_column(self):
        self.assertEqual(as_points([1.0, 2.0, 3.0]).shape, (3, 1))

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            alpha_distance_sum(np.zeros((2, 2)), np.zeros((2, 3)))


if __name__ == "__main__":
    unittest.main()
