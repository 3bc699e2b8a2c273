#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Energy distance statistics over clusters of regression residuals.

The energy distance between two samples compares the mean distance *between* them
with the mean distances *within* each of them:

    d_alpha(A, B) = |A||B| / (|A| + |B|) * (2 mu(A, B) - mu(A, A) - mu(B, B))

where ``mu(A, B)`` is the mean of ``|a_i - b_j|^alpha`` over all pairs, and
``0 < alpha < 2``. It vanishes exactly when both samples come from the same distribution.
Summing pairwise distances over several clusters gives the between-cluster dispersion
``S``; together with the within-cluster dispersion ``W`` it partitions the total dispersion
``T`` of the pooled sample, exactly as an analysis of variance does:

    T = S + W,      F = (S / k) / (W / (N - k - 1))

for ``k + 1`` clusters and ``N`` pooled points. ``F`` is turned into a test of equal
distributions by recomputing it under random relabelings of the pooled points.

All means here are V-statistics (the zero diagonal is kept in the ``n^2`` denominator);
that is the form in which ``T = S + W`` holds exactly.
"""

import logging
import unittest
import collections

from dataclasses import dataclass, field, replace
from typing      import Optional

import numpy as np

from .distances  import as_points, alpha_distance_sum, alpha_distance_matrix
from .utils      import WorkPool, replicate_generator, slow_test

__all__ = [
    'DEFAULT_ALPHA', 'check_alpha', 'ResidualCluster', 'EnergyReport', 'HypothesisTest',
    'pairwise_alpha_mean', 'two_sample_energy', 'multi_sample_energy',
    'dispersion_decomposition', 'permutation_test',
]

logger = logging.getLogger(__name__)


#
# Inputs and results.
#

DEFAULT_ALPHA = 1.0


def check_alpha(alpha):
    """ Validates an energy exponent; returns it as a float.

    The energy distance is only a metric on distributions for exponents in (0, 2).
    """
    alpha = float(alpha)
    if not 0 < alpha < 2:
        raise ValueError(f"the energy exponent must lie strictly between 0 and 2, not {alpha}")
    return alpha


@dataclass(frozen=True)
class ResidualCluster:
    """ The residual vectors of one regime, one row per time step.

    Attributes
    ----------
    points: (n, q) ndarray
        The residuals; stored read-only.
    regime_index: int
        Which regime these residuals belong to.
    """

    points:       np.ndarray
    regime_index: int = 0

    def __post_init__(self):
        points = np.array(as_points(self.points), copy=True)

        if points.shape[0] < 1:
            raise ValueError("a residual cluster needs at least one point")
        if points.shape[1] < 1:
            raise ValueError("residual vectors need at least one component")
        if not np.all(np.isfinite(points)):
            raise ValueError(f"residual cluster {self.regime_index} contains non-finite values")

        points.setflags(write=False)
        object.__setattr__(self, 'points', points)


    @classmethod
    def of(cls, values, regime_index=0):
        """ Returns ``values`` as a ResidualCluster; existing clusters pass through unchanged. """
        if isinstance(values, cls):
            return values
        return cls(values, regime_index)


    def __len__(self):
        return self.points.shape[0]

    @property
    def dimension(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class EnergyReport:
    """ The dispersion decomposition of a set of residual clusters.

    Attributes
    ----------
    s_alpha: float
        Between-cluster dispersion; the multi-sample energy distance.
    t_alpha: float
        Total dispersion of the pooled residuals.
    w_alpha: float
        Within-cluster dispersion.
    f_alpha: float
        The ratio statistic; ``inf`` when the within-cluster dispersion vanishes.
    p_value: float or None
        Permutation p-value of ``f_alpha``, if one was computed.
    degenerate: bool
        True if the within-cluster dispersion is zero, which leaves ``f_alpha`` undefined.
    """

    s_alpha:      float
    t_alpha:      float
    w_alpha:      float
    f_alpha:      float
    p_value:      Optional[float] = None
    degenerate:   bool = False
    num_clusters: int  = 0
    total_size:   int  = 0

    def with_p_value(self, p_value):
        return replace(self, p_value=p_value)


    def as_dict(self):
        """ Returns the statistics as JSON-ready values; an infinite F becomes None. """
        return {
            's_alpha':    self.s_alpha,
            't_alpha':    self.t_alpha,
            'w_alpha':    self.w_alpha,
            'f_alpha':    self.f_alpha if np.isfinite(self.f_alpha) else None,
            'p_value':    self.p_value,
            'degenerate': self.degenerate,
        }


HypothesisTest = collections.namedtuple('HypothesisTest', ['p_value', 'statistic', 'degenerate'])


#
# Distances between clusters.
#

def _points_of(cluster):
    if isinstance(cluster, ResidualCluster):
        return cluster.points

    points = as_points(cluster)
    if points.shape[0] < 1:
        raise ValueError("cannot compute distances for an empty cluster")
    return points


def pairwise_alpha_mean(a, b, alpha=DEFAULT_ALPHA):
    """ Returns the mean of ``|a_i - b_j|^alpha`` over all pairs of points of ``a`` and ``b``.

    When ``a`` and ``b`` are the same cluster, the zero diagonal terms stay in the
    ``n^2`` denominator (V-statistic form).
    """
    alpha = check_alpha(alpha)
    a, b  = _points_of(a), _points_of(b)

    return alpha_distance_sum(a, b, exponent=alpha) / (a.shape[0] * b.shape[0])


def _canonical_order_key(points):
    return (points.shape, points.tobytes())


def two_sample_energy(a, b, alpha=DEFAULT_ALPHA, unbiased=False):
    """ Returns the scaled two-sample energy distance ``d_alpha(a, b)``.

    Parameters
    ----------
    a, b: ResidualCluster or array_like
        The two samples; rows are observations.
    alpha: float
        The distance exponent, in (0, 2).
    unbiased: bool
        If True, the within-sample means exclude the zero diagonal (U-statistic form).
        The result is then no longer guaranteed to be non-negative, and does not satisfy
        the dispersion decomposition.
    """
    alpha = check_alpha(alpha)
    a, b  = _points_of(a), _points_of(b)

    if a.shape[1] != b.shape[1]:
        raise ValueError(f"cannot compare {a.shape[1]}-dimensional residuals with {b.shape[1]}-dimensional ones")

    # Always evaluate the arguments in one fixed order, so d(a, b) and d(b, a) agree to the bit.
    if _canonical_order_key(b) < _canonical_order_key(a):
        a, b = b, a

    n, m = a.shape[0], b.shape[0]

    between = alpha_distance_sum(a, b, exponent=alpha) / (n * m)
    if unbiased:
        if n < 2 or m < 2:
            raise ValueError("the unbiased energy distance needs at least two points per sample")
        within_a = alpha_distance_sum(a, a, exponent=alpha) / (n * (n - 1))
        within_b = alpha_distance_sum(b, b, exponent=alpha) / (m * (m - 1))
    else:
        within_a = alpha_distance_sum(a, a, exponent=alpha) / (n * n)
        within_b = alpha_distance_sum(b, b, exponent=alpha) / (m * m)

    distance = (n * m / (n + m)) * (2 * between - within_a - within_b)

    # The V-statistic form is non-negative; only rounding can push it below zero.
    if not unbiased:
        distance = max(distance, 0.0)

    return distance


def _check_clusters(clusters):
    clusters = [ResidualCluster.of(cluster, index) for index, cluster in enumerate(clusters)]

    if len(clusters) < 2:
        raise ValueError(f"energy statistics need at least two clusters, not {len(clusters)}")

    dimensions = {cluster.dimension for cluster in clusters}
    if len(dimensions) != 1:
        raise ValueError(f"all residual clusters must share one dimension; got {sorted(dimensions)}")

    return clusters


def multi_sample_energy(clusters, total_T=None, alpha=DEFAULT_ALPHA):
    """ Returns the multi-sample energy statistic ``S_alpha`` of two or more clusters.

    This is the sum, over every pair of clusters, of their two-sample energy distance
    weighted by ``(n_i + n_j) / (2 T)``.

    Parameters
    ----------
    clusters: sequence of ResidualCluster or array_like
    total_T: int, optional
        The pooled sample size; must equal the sum of the cluster sizes if given.
    alpha: float
        The distance exponent, in (0, 2).
    """
    clusters = _check_clusters(clusters)
    sizes    = [len(cluster) for cluster in clusters]

    pooled_size = sum(sizes)
    if total_T is not None and total_T != pooled_size:
        raise ValueError(f"total_T is {total_T}, but the clusters hold {pooled_size} residuals")

    statistic = 0.0
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            weight = (sizes[i] + sizes[j]) / (2 * pooled_size)
            statistic += weight * two_sample_energy(clusters[i], clusters[j], alpha)

    return statistic


def _ratio_statistic(between, within, num_clusters, pooled_size):
    """ Returns F and whether it is degenerate. """

    if within <= 0:
        return float('inf'), True

    k = num_clusters - 1
    return (between / k) / (within / (pooled_size - k - 1)), False


def dispersion_decomposition(clusters, alpha=DEFAULT_ALPHA):
    """ Decomposes the dispersion of two or more residual clusters.

    Returns an :class:`EnergyReport` holding the total (``T``), between (``S``) and
    within (``W``) dispersions, and the ratio statistic ``F``; no p-value is attached.
    If every cluster is constant, ``W`` vanishes; ``F`` is then reported as ``inf``,
    and the report is flagged as degenerate.
    """
    alpha    = check_alpha(alpha)
    clusters = _check_clusters(clusters)
    pooled   = np.vstack([cluster.points for cluster in clusters])
    size     = pooled.shape[0]

    total   = alpha_distance_sum(pooled, pooled, exponent=alpha) / (2 * size)
    within  = sum(alpha_distance_sum(c.points, c.points, exponent=alpha) / (2 * len(c)) for c in clusters)
    between = multi_sample_energy(clusters, size, alpha)

    f_alpha, degenerate = _ratio_statistic(between, within, len(clusters), size)

    return EnergyReport(
        s_alpha      = between,
        t_alpha      = total,
        w_alpha      = within,
        f_alpha      = f_alpha,
        degenerate   = degenerate,
        num_clusters = len(clusters),
        total_size   = size,
    )


#
# Permutation inference.
#

class _PooledDistances:
    """ The full distance matrix of a pooled sample; evaluates F for any relabeling. """

    def __init__(self, clusters, alpha):
        pooled = np.vstack([cluster.points for cluster in clusters])

        self.sizes       = [len(cluster) for cluster in clusters]
        self.boundaries  = np.cumsum([0] + self.sizes)
        self.size        = pooled.shape[0]
        self.matrix      = alpha_distance_matrix(pooled, exponent=alpha)
        self.total       = float(self.matrix.sum()) / (2 * self.size)


    def statistic(self, order):
        """ Returns (F, degenerate) when cluster j holds the pooled points ``order[b_j:b_{j+1}]``. """

        within = 0.0
        for j, cluster_size in enumerate(self.sizes):
            members = order[self.boundaries[j]:self.boundaries[j + 1]]
            within += float(self.matrix[np.ix_(members, members)].sum()) / (2 * cluster_size)

        return _ratio_statistic(self.total - within, within, len(self.sizes), self.size)


def permutation_test(clusters, alpha=DEFAULT_ALPHA, num_permutations=199, rng_seed=0,
                     strictly_positive=False, pool=None):
    """ Tests whether residual clusters share one distribution, by permuting their labels.

    The pooled residuals are relabeled uniformly at random ``num_permutations`` times,
    keeping the cluster sizes; ``F`` is recomputed for each relabeling. The p-value is the
    fraction ``#{r : F_r >= F} / (R + 1)``, which may be zero; ``strictly_positive``
    selects the ``(1 + #{r : F_r >= F}) / (R + 1)`` convention instead.

    Replicate ``r`` draws its relabeling from its own stream, derived from ``rng_seed``
    and ``r``; so the result is reproducible and independent of the pool size.

    Returns
    -------
    HypothesisTest
        The p-value, the observed F, and whether the observed F was degenerate. A
        degenerate observation (zero within-cluster dispersion) yields ``1 / (R + 1)``.
    """
    alpha    = check_alpha(alpha)
    clusters = _check_clusters(clusters)

    if num_permutations < 1:
        raise ValueError(f"a permutation test needs at least one permutation, not {num_permutations}")

    distances = _PooledDistances(clusters, alpha)
    if distances.size < 4:
        raise ValueError(f"a permutation test needs at least four pooled residuals, not {distances.size}")

    observed, degenerate = distances.statistic(np.arange(distances.size))
    if degenerate:
        logger.debug("within-cluster dispersion vanishes; reporting the smallest p-value")
        return HypothesisTest(p_value=1 / (num_permutations + 1), statistic=observed, degenerate=True)

    def replicate(index):
        order = replicate_generator(rng_seed, index).permutation(distances.size)
        return distances.statistic(order)[0]

    pool = pool or WorkPool(threads=1)
    replicates = pool.map(replicate, range(num_permutations))

    exceedances = sum(1 for statistic in replicates if statistic >= observed)
    if strictly_positive:
        exceedances += 1

    return HypothesisTest(p_value=exceedances / (num_permutations + 1), statistic=observed, degenerate=False)



#
# Reference implementations and tests.
#

def _naive_mean(a, b, alpha):
    total = 0.0
    for u in a:
        for v in b:
            total += float(np.sqrt(np.sum((u - v) ** 2))) ** alpha
    return total / (len(a) * len(b))


def _naive_energy(a, b, alpha):
    n, m = len(a), len(b)
    return (n * m / (n + m)) * (2 * _naive_mean(a, b, alpha) - _naive_mean(a, a, alpha) - _naive_mean(b, b, alpha))


def _random_clusters(rng, count, sizes=(5, 50), dimension=1):
    return [rng.standard_normal((rng.integers(*sizes, endpoint=True), dimension)) * rng.uniform(0.5, 2)
            + rng.uniform(-1, 1) for _ in range(count)]


class PairwiseMeanTest(unittest.TestCase):

    def test_single_pair(self):
        self.assertEqual(pairwise_alpha_mean([0.0], [1.0], 1), 1.0)

    def test_cluster_with_itself(self):
        self.assertEqual(pairwise_alpha_mean([[2.0, 3.0]], [[2.0, 3.0]], 1), 0.0)

    def test_three_four_five(self):
        self.assertEqual(pairwise_alpha_mean([[0.0, 0.0], [3.0, 4.0]], [[0.0, 0.0]], 1), 2.5)

    def test_errors(self):
        with self.assertRaises(ValueError):
            pairwise_alpha_mean(np.zeros((0, 2)), np.zeros((3, 2)))
        with self.assertRaises(ValueError):
            pairwise_alpha_mean(np.zeros((2, 2)), np.zeros((3, 3)))
        with self.assertRaises(ValueError):
            pairwise_alpha_mean([0.0], [1.0], 2.0)


class TwoSampleEnergyTest(unittest.TestCase):

    def test_identical_samples(self):
        sample = np.random.default_rng(1).standard_normal((30, 2))
        self.assertEqual(two_sample_energy(sample, sample), 0.0)

    def test_reordered_samples(self):
        sample = np.random.default_rng(2).standard_normal((30, 2))
        self.assertAlmostEqual(two_sample_energy(sample, sample[::-1]), 0.0, places=12)

    def test_single_points(self):
        self.assertEqual(two_sample_energy([0.0], [1.0], 1), 1.0)

    def test_matches_double_loop(self):
        rng  = np.random.default_rng(5)
        a, b = rng.standard_normal((20, 1)), rng.standard_normal((20, 1)) + 5

        expected = _naive_energy(a, b, 1.0)
        self.assertGreater(expected, 0)
        self.assertAlmostEqual(two_sample_energy(a, b), expected, delta=1e-12 * expected)

    def test_symmetry_is_exact(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            a, b = _random_clusters(rng, 2, dimension=3)
            self.assertEqual(two_sample_energy(a, b, 0.7), two_sample_energy(b, a, 0.7))

    def test_scaling(self):
        rng  = np.random.default_rng(7)
        a, b = rng.standard_normal((15, 2)), rng.standard_normal((25, 2)) + 1

        # Doubling is exact in binary floating point, and so is its effect on a Euclidean norm.
        self.assertEqual(two_sample_energy(2 * a, 2 * b, 1.0), 2 * two_sample_energy(a, b, 1.0))

        for alpha in (0.5, 1.5):
            scaled, original = two_sample_energy(3 * a, 3 * b, alpha), two_sample_energy(a, b, alpha)
            self.assertAlmostEqual(scaled, 3 ** alpha * original, delta=1e-12 * scaled)

    def test_unbiased_variant(self):
        rng  = np.random.default_rng(8)
        a, b = rng.standard_normal((10, 1)), rng.standard_normal((12, 1))

        def u_mean(x):
            return _naive_mean(x, x, 1.0) * len(x) / (len(x) - 1)

        expected = (10 * 12 / 22) * (2 * _naive_mean(a, b, 1.0) - u_mean(a) - u_mean(b))
        self.assertAlmostEqual(two_sample_energy(a, b, unbiased=True), expected, places=12)


class MultiSampleEnergyTest(unittest.TestCase):

    def test_identical_clusters(self):
        sample = np.random.default_rng(9).standard_normal((12, 2))
        self.assertEqual(multi_sample_energy([sample, sample], 24), 0.0)

    def test_two_clusters_reduce_to_one_pair(self):
        rng  = np.random.default_rng(10)
        a, b = rng.standard_normal((10, 1)), rng.standard_normal((14, 1))
        self.assertEqual(multi_sample_energy([a, b], 24), (24 / 48) * two_sample_energy(a, b))

    def test_weighted_pair_sum(self):
        rng = np.random.default_rng(11)
        a, b, c = (rng.standard_normal((n, 2)) for n in (10, 15, 20))

        expected = ((25 / 90) * _naive_energy(a, b, 1.0) + (30 / 90) * _naive_energy(a, c, 1.0)
                    + (35 / 90) * _naive_energy(b, c, 1.0))
        self.assertAlmostEqual(multi_sample_energy([a, b, c], 45), expected, delta=1e-12 * expected)

    def test_errors(self):
        with self.assertRaises(ValueError):
            multi_sample_energy([[0.0, 1.0]], 2)
        with self.assertRaises(ValueError):
            multi_sample_energy([[0.0, 1.0], [2.0, 3.0]], 5)


class DispersionDecompositionTest(unittest.TestCase):

    def test_constant_clusters_are_degenerate(self):
        report = dispersion_decomposition([np.ones((4, 2)), np.ones((6, 2))])

        self.assertEqual(report.s_alpha, 0.0)
        self.assertEqual(report.w_alpha, 0.0)
        self.assertTrue(report.degenerate)
        self.assertEqual(report.f_alpha, float('inf'))

    def test_single_zero_points(self):
        report = dispersion_decomposition([[0.0], [0.0]])
        self.assertEqual(report.t_alpha, 0.0)
        self.assertTrue(report.degenerate)

    def test_decomposition_identity(self):
        rng = np.random.default_rng(12)

        for instance in range(1000):
            dimension = (1, 3)[instance % 2]
            alpha     = (0.5, 1.0, 1.5)[instance % 3]
            clusters  = _random_clusters(rng, rng.integers(2, 5, endpoint=True), dimension=dimension)

            report = dispersion_decomposition(clusters, alpha)
            self.assertLessEqual(abs(report.t_alpha - (report.s_alpha + report.w_alpha)),
                                 1e-9 * max(1.0, report.t_alpha))
            self.assertGreaterEqual(report.s_alpha, 0.0)
            self.assertGreaterEqual(report.w_alpha, 0.0)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(13)

        for instance in range(200):
            alpha    = (0.5, 1.0, 1.5)[instance % 3]
            count    = int(rng.integers(2, 4, endpoint=True))
            clusters = _random_clusters(rng, count, sizes=(2, 100 // count), dimension=1 + instance % 3)
            pooled   = np.vstack(clusters)
            size     = len(pooled)

            total   = (size / 2) * _naive_mean(pooled, pooled, alpha)
            within  = sum((len(c) / 2) * _naive_mean(c, c, alpha) for c in clusters)
            between = sum(((len(clusters[i]) + len(clusters[j])) / (2 * size)) * _naive_energy(clusters[i], clusters[j], alpha)
                          for i in range(count) for j in range(i + 1, count))

            report = dispersion_decomposition(clusters, alpha)
            self.assertAlmostEqual(report.t_alpha, total,   delta=1e-12 * max(1.0, total))
            self.assertAlmostEqual(report.w_alpha, within,  delta=1e-12 * max(1.0, within))
            self.assertAlmostEqual(report.s_alpha, between, delta=1e-12 * max(1.0, between))

    def test_ratio_is_scale_invariant(self):
        clusters = _random_clusters(np.random.default_rng(14), 3, dimension=2)

        for alpha in (0.5, 1.0, 1.5):
            original = dispersion_decomposition(clusters, alpha).f_alpha
            scaled   = dispersion_decomposition([7.5 * c for c in clusters], alpha).f_alpha
            self.assertAlmostEqual(original, scaled, delta=1e-10 * original)


class PermutationTestTest(unittest.TestCase):

    def test_separated_clusters(self):
        rng      = np.random.default_rng(15)
        clusters = [rng.standard_normal((10, 1)), rng.standard_normal((12, 1)) + 100]

        self.assertEqual(permutation_test(clusters, num_permutations=99, rng_seed=1).p_value, 0.0)
        self.assertEqual(permutation_test(clusters, num_permutations=99, rng_seed=1, strictly_positive=True).p_value, 0.01)

    def test_determinism(self):
        clusters = _random_clusters(np.random.default_rng(16), 3)

        first  = permutation_test(clusters, num_permutations=49, rng_seed=5)
        second = permutation_test(clusters, num_permutations=49, rng_seed=5)
        with WorkPool(threads=4) as pool:
            parallel = permutation_test(clusters, num_permutations=49, rng_seed=5, pool=pool)

        self.assertEqual(first, second)
        self.assertEqual(first, parallel)

    def test_degenerate_observation(self):
        result = permutation_test([np.zeros((3, 1)), np.ones((3, 1))], num_permutations=9)

        self.assertTrue(result.degenerate)
        self.assertEqual(result.p_value, 0.1)

    def test_observed_statistic_matches_decomposition(self):
        clusters = _random_clusters(np.random.default_rng(17), 3, dimension=2)

        observed = permutation_test(clusters, num_permutations=1).statistic
        expected = dispersion_decomposition(clusters).f_alpha
        self.assertAlmostEqual(observed, expected, delta=1e-9 * expected)

    def test_rejects_tiny_samples(self):
        with self.assertRaises(ValueError):
            permutation_test([[0.0], [1.0, 2.0]], num_permutations=9)
        with self.assertRaises(ValueError):
            permutation_test([[0.0, 1.0], [1.0, 2.0]], num_permutations=0)

    def _null_p_values(self, replicates, size, num_permutations):
        rng = np.random.default_rng(18)
        return np.array([
            permutation_test([rng.standard_normal((size, 1)), rng.standard_normal((size, 1))],
                             num_permutations=num_permutations, rng_seed=index).p_value
            for index in range(replicates)
        ])

    def test_null_p_values_are_uniform(self):
        from scipy import stats

        p_values = self._null_p_values(replicates=200, size=20, num_permutations=99)
        self.assertGreater(stats.kstest(p_values, 'uniform').pvalue, 0.01)

    @slow_test
    def test_null_calibration_campaign(self):
        from scipy import stats

        p_values = self._null_p_values(replicates=500, size=100, num_permutations=199)
        self.assertGreater(stats.kstest(p_values, 'uniform').pvalue, 0.01)
        self.assertLess(abs(np.mean(p_values < 0.05) - 0.05), 0.03)


if __name__ == "__main__":
    unittest.main()
