#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Partitions of a timeline, the segment cost cache, and the change-point location test.

Throughout this package, a change point ``c`` marks the first row of a new regime; the
regimes of a partition with change points ``c_1 < ... < c_k`` of a T-row dataset are
the half-open spans ``[0, c_1), [c_1, c_2), ..., [c_k, T)``. Spans are written as
``(start, stop)`` pairs.
"""

import logging
import unittest

from collections import namedtuple
from dataclasses import dataclass, field, replace
from typing      import List, Optional, Tuple

import numpy as np

from ..dataset    import TimeSeriesDataset
from ..distances  import alpha_distance_sum
from ..energy     import (DEFAULT_ALPHA, EnergyReport, ResidualCluster, check_alpha, dispersion_decomposition,
                          multi_sample_energy, permutation_test, two_sample_energy)
from ..regression import DEFAULT_GRID_SIZE, RegimeFit, residuals_with, select_gamma_bic
from ..utils      import WorkPool, slow_test

__all__ = [
    'InfeasibleConfigError', 'Partition', 'SegmentCostCache', 'SeriesPoint', 'DetectionResult',
    'added_energy', 'partition_energy', 'partition_dispersion', 'location_test', 'build_result',
]

logger = logging.getLogger(__name__)


class InfeasibleConfigError(ValueError):
    """ Raised when a detector configuration cannot be satisfied by the data it is given. """


#
# Partitions.
#

@dataclass(frozen=True)
class Partition:
    """ An ordered set of change points within a timeline of ``total_T`` rows.

    Attributes
    ----------
    change_points: tuple of int
        Strictly increasing first rows of every regime but the first.
    total_T: int
        The length of the timeline.
    tau: int
        The minimum regime length; every span, the first and last included, is at least this long.
    """

    change_points: Tuple[int, ...]
    total_T:       int
    tau:           int = 1

    def __post_init__(self):
        change_points = tuple(int(point) for point in self.change_points)
        object.__setattr__(self, 'change_points', change_points)

        if self.tau < 1:
            raise ValueError(f"the minimum regime length must be positive, not {self.tau}")

        boundaries = (0, *change_points, self.total_T)
        for start, stop in zip(boundaries[:-1], boundaries[1:]):
            if stop - start < self.tau:
                raise ValueError(f"change points {list(change_points)} leave the span [{start}, {stop}) "
                                 f"shorter than the minimum regime length {self.tau}")


    @property
    def k(self):
        return len(self.change_points)

    @property
    def boundaries(self):
        return (0, *self.change_points, self.total_T)

    @property
    def spans(self):
        """ The (start, stop) span of every regime, in order. """
        boundaries = self.boundaries
        return list(zip(boundaries[:-1], boundaries[1:]))

    @property
    def fractions(self):
        """ The change points as fractions of the timeline. """
        return [point / self.total_T for point in self.change_points]


    def with_point(self, point):
        """ Returns a new partition with one more change point. """
        return Partition(tuple(sorted((*self.change_points, point))), self.total_T, self.tau)


#
# Segment fits and distances.
#

class SegmentCostCache:
    """ Memoizes per-segment penalized fits and the energy distances between their residuals.

    Every entry is a pure function of its key, so entries may be computed concurrently:
    racing writers store identical values, and :meth:`dict.setdefault` keeps the first.

    Parameters
    ----------
    dataset: TimeSeriesDataset
        The data every segment is cut from.
    alpha: float
        The energy exponent.
    grid_size: int
        The size of each segment's penalty grid.
    intercept: bool
        Whether segment fits include an intercept.
    pool: WorkPool, optional
        Used by :meth:`prefetch`.
    """

    def __init__(self, dataset, alpha=DEFAULT_ALPHA, grid_size=DEFAULT_GRID_SIZE, intercept=False, pool=None):
        self.dataset   = dataset
        self.alpha     = check_alpha(alpha)
        self.grid_size = grid_size
        self.intercept = intercept
        self.pool      = pool or WorkPool(threads=1)

        # (start, stop) -> RegimeFit
        self.fits = {}

        # ((start, stop), (start, stop)) -> d_alpha, keyed in sorted order
        self.distances = {}

        # (start, stop) -> within-regime dispersion of the span's own residuals
        self.dispersions = {}


    def fit(self, start, stop):
        """ Returns the BIC-selected fit of the rows ``[start, stop)``. """
        key = (start, stop)

        cached = self.fits.get(key)
        if cached is not None:
            return cached

        fit = select_gamma_bic(self.dataset.span(start, stop), grid_size=self.grid_size, intercept=self.intercept)
        return self.fits.setdefault(key, fit)


    def distance(self, first, second):
        """ Returns the energy distance between the residuals of two spans' own fits. """
        key = (first, second) if first <= second else (second, first)

        cached = self.distances.get(key)
        if cached is not None:
            return cached

        distance = two_sample_energy(self.fit(*key[0]).residuals, self.fit(*key[1]).residuals, self.alpha)
        return self.distances.setdefault(key, distance)


    def within(self, start, stop):
        """ Returns the dispersion of the span's own residuals, ``sum |r_i - r_j|^alpha / (2 n)``. """
        key = (start, stop)

        cached = self.dispersions.get(key)
        if cached is not None:
            return cached

        points     = self.fit(start, stop).residuals.points
        dispersion = alpha_distance_sum(points, points, exponent=self.alpha) / (2 * (stop - start))
        return self.dispersions.setdefault(key, dispersion)


    def prefetch(self, spans, dispersions=False):
        """ Fits every span not yet cached, spreading the work over the pool.

        With ``dispersions``, each span's within-regime dispersion is computed as well.
        """
        table, task = (self.dispersions, self.within) if dispersions else (self.fits, self.fit)

        missing = sorted({span for span in spans if span not in table})
        if missing:
            self.pool.map(lambda span: task(*span), missing)
            logger.debug("cache now holds %d fits and %d distances", len(self.fits), len(self.distances))


def added_energy(cache, previous_spans, new_span):
    """ Returns the energy added to a partition by appending one more regime.

    This is the sum, over every existing regime, of its distance to the new regime,
    weighted by ``(n_j + n_new) / (2 T)`` with ``T`` the length of the whole dataset.
    """
    total_T   = cache.dataset.T
    new_size  = new_span[1] - new_span[0]

    energy = 0.0
    for span in previous_spans:
        weight  = (span[1] - span[0] + new_size) / (2 * total_T)
        energy += weight * cache.distance(span, new_span)

    return energy


def partition_energy(cache, spans):
    """ Returns the multi-sample energy statistic of a partition, accumulated regime by regime. """

    energy = 0.0
    for index in range(1, len(spans)):
        energy += added_energy(cache, spans[:index], spans[index])

    return energy


def partition_dispersion(cache, spans):
    """ Returns the total dispersion of a partition's residuals: its between-regime energy
    plus the within-regime dispersion of every regime.

    Each regime brings its own fit, so the pooled residuals change with the partition;
    a smaller total means the regimes' own fits leave more homogeneous residuals.
    """
    return partition_energy(cache, spans) + sum(cache.within(*span) for span in spans)


#
# Location test.
#

def location_test(dataset, regime_start, regime_stop, delta, alpha=DEFAULT_ALPHA, num_permutations=199,
                  rng_seed=0, cache=None, pool=None, grid_size=DEFAULT_GRID_SIZE, intercept=False, tau=2):
    """ Tests for a change point at ``delta`` inside the regime ``[regime_start, regime_stop)``.

    The left part ``[regime_start, delta)`` is fit on its own; its coefficients are then
    applied, unchanged, to the right part ``[delta, regime_stop)``. Under the null of no
    change, the left residuals and these cross-applied right residuals share one
    distribution; the returned test compares them by permutation.

    Both parts must hold at least ``tau`` rows, and never fewer than two.

    Returns
    -------
    HypothesisTest
        The permutation p-value and the observed ratio statistic.
    """
    side = max(2, tau)
    if not regime_start + side <= delta <= regime_stop - side:
        raise ValueError(f"a location test at {delta} needs at least {side} observations on either side "
                         f"within [{regime_start}, {regime_stop})")

    if cache is not None:
        left = cache.fit(regime_start, delta)
    else:
        left = select_gamma_bic(dataset.span(regime_start, delta), grid_size=grid_size, intercept=intercept)

    right = residuals_with(dataset.span(delta, regime_stop), left.beta, regime_index=1)
    return permutation_test([left.residuals, right], alpha, num_permutations, rng_seed, pool=pool)


#
# Results.
#

SeriesPoint = namedtuple('SeriesPoint', ['index', 'statistic', 'window'])


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """ The outcome of a change-point search.

    Attributes
    ----------
    algorithm: str
        Which search produced this result.
    partition: Partition
        The detected change points.
    fits: list of RegimeFit
        One final fit per regime, in time order.
    s_alpha: float
        The multi-sample energy statistic of the final regimes.
    per_step_p_values: list of float
        Every p-value computed while deciding which points to keep.
    trace: list of dict
        Diagnostic records of the candidate evaluations.
    series: list of SeriesPoint
        The statistic over candidate positions, for plotting.
    report: EnergyReport or None
        The dispersion decomposition of the final regimes; None for a single regime.
    low_contrast: bool
        True if the candidates were too alike for the chosen location to mean much.
    """

    algorithm:         str
    partition:         Partition
    fits:              List[RegimeFit]
    s_alpha:           float
    per_step_p_values: List[float]           = field(default_factory=list)
    trace:             List[dict]            = field(default_factory=list)
    series:            List[SeriesPoint]     = field(default_factory=list)
    report:            Optional[EnergyReport] = None
    low_contrast:      bool                  = False

    def __post_init__(self):
        if len(self.fits) != self.partition.k + 1:
            raise ValueError(f"{self.partition.k} change point(s) need {self.partition.k + 1} fits, "
                             f"not {len(self.fits)}")

        for fit, (start, stop) in zip(self.fits, self.partition.spans):
            if (fit.segment.start, fit.segment.end + 1) != (start, stop):
                raise ValueError(f"fit of {fit.segment} does not cover the regime [{start}, {stop})")


    @property
    def change_points(self):
        return list(self.partition.change_points)


    def as_dict(self, regressor_names=None, response_names=None):
        """ Returns the result as JSON-ready values. """

        regimes = [{
            'start':                fit.segment.start,
            'end':                  fit.segment.end,
            'gamma':                fit.gamma,
            'bic':                  fit.bic if np.isfinite(fit.bic) else None,
            'exact_fit':            fit.exact_fit,
            'nonzero_coefficients': fit.beta.nonzero_entries(regressor_names, response_names),
        } for fit in self.fits]

        statistics = self.report.as_dict() if self.report else {'s_alpha': self.s_alpha}

        return {
            'algorithm':     self.algorithm,
            'change_points': self.change_points,
            'regimes':       regimes,
            'statistics':    statistics,
            'p_values':      list(self.per_step_p_values),
            'low_contrast':  self.low_contrast,
        }


def build_result(algorithm, partition, cache, s_alpha=None, **details):
    """ Refits the final regimes of a partition and wraps them into a DetectionResult. """

    spans = partition.spans
    cache.prefetch(spans)

    fits = []
    for index, span in enumerate(spans):
        fit = cache.fit(*span)
        fits.append(replace(fit, residuals=ResidualCluster(fit.residuals.points, index)))

    report = None
    if len(fits) > 1:
        report = dispersion_decomposition([fit.residuals for fit in fits], cache.alpha)
        if s_alpha is None:
            s_alpha = report.s_alpha

    return DetectionResult(algorithm, partition, fits, 0.0 if s_alpha is None else s_alpha, report=report, **details)



#
# Test data.
#

def _regime_dataset(rng, breaks, betas, total_T, noise_variance=0.1, p=None):
    """ Univariate regression data whose coefficients switch at ``breaks``. """

    betas = [np.asarray(beta, dtype=float) for beta in betas]
    x = rng.standard_normal((total_T, len(betas[0])))
    y = np.empty(total_T)

    boundaries = (0, *breaks, total_T)
    for beta, start, stop in zip(betas, boundaries[:-1], boundaries[1:]):
        y[start:stop] = x[start:stop] @ beta

    y += np.sqrt(noise_variance) * rng.standard_normal(total_T)
    return TimeSeriesDataset(y, x)


class PartitionTest(unittest.TestCase):

    def test_spans_tile_the_timeline(self):
        partition = Partition((30, 70), 100, tau=10)
        self.assertEqual(partition.spans, [(0, 30), (30, 70), (70, 100)])
        self.assertEqual(partition.k, 2)
        self.assertEqual(partition.fractions, [0.3, 0.7])

    def test_minimum_length(self):
        Partition((10,), 20, tau=10)

        with self.assertRaises(ValueError):
            Partition((9,), 20, tau=10)
        with self.assertRaises(ValueError):
            Partition((11,), 20, tau=10)
        with self.assertRaises(ValueError):
            Partition((40, 30), 100, tau=1)
        with self.assertRaises(ValueError):
            Partition((0,), 100, tau=1)

    def test_with_point(self):
        partition = Partition((50,), 100, tau=10).with_point(20)
        self.assertEqual(partition.change_points, (20, 50))


class SegmentCostCacheTest(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(0)
        self.dataset = _regime_dataset(rng, [40], [[1.0, 0.0], [-1.0, 2.0]], 80)

    def test_distances_are_symmetric(self):
        cache = SegmentCostCache(self.dataset, grid_size=5)
        forward = cache.distance((0, 40), (40, 80))

        self.assertEqual(forward, cache.distance((40, 80), (0, 40)))
        self.assertEqual(len(cache.distances), 1)

    def test_entries_are_reproducible(self):
        cache = SegmentCostCache(self.dataset, grid_size=5)
        fresh = SegmentCostCache(self.dataset, grid_size=5)

        cache.distance((0, 30), (30, 80))
        self.assertEqual(cache.distance((0, 30), (30, 80)), fresh.distance((30, 80), (0, 30)))
        np.testing.assert_array_equal(cache.fit(0, 30).beta.values, fresh.fit(0, 30).beta.values)

    def test_parallel_prefetch_matches_serial(self):
        spans = [(0, start) for start in range(10, 70, 7)]

        with WorkPool(threads=4) as pool:
            parallel = SegmentCostCache(self.dataset, grid_size=5, pool=pool)
            parallel.prefetch(spans)

        serial = SegmentCostCache(self.dataset, grid_size=5)
        for span in spans:
            np.testing.assert_array_equal(parallel.fits[span].residuals.points, serial.fit(*span).residuals.points)

    def test_partition_energy_matches_direct_statistic(self):
        cache = SegmentCostCache(self.dataset, grid_size=5)
        spans = [(0, 25), (25, 40), (40, 80)]

        direct = multi_sample_energy([cache.fit(*span).residuals for span in spans], alpha=cache.alpha)
        self.assertAlmostEqual(partition_energy(cache, spans), direct, delta=1e-12 * max(1.0, direct))

    def test_partition_dispersion_is_the_total_of_the_pooled_residuals(self):
        cache = SegmentCostCache(self.dataset, grid_size=5)
        spans = [(0, 25), (25, 40), (40, 80)]

        report = dispersion_decomposition([cache.fit(*span).residuals for span in spans], cache.alpha)
        self.assertAlmostEqual(partition_dispersion(cache, spans), report.t_alpha, delta=1e-9 * report.t_alpha)
        self.assertAlmostEqual(sum(cache.within(*span) for span in spans), report.w_alpha,
                               delta=1e-9 * max(1.0, report.w_alpha))
        self.assertEqual(len(cache.dispersions), 3)


class LocationTestTest(unittest.TestCase):

    def test_contract(self):
        rng = np.random.default_rng(1)
        dataset = _regime_dataset(rng, [], [[1.0, 1.0]], 60)

        result = location_test(dataset, 0, 60, 30, num_permutations=19)
        self.assertTrue(0 <= result.p_value <= 1)

        with self.assertRaises(ValueError):
            location_test(dataset, 0, 60, 1)
        with self.assertRaises(ValueError):
            location_test(dataset, 0, 60, 59)

    def test_both_sides_hold_the_minimum_regime_length(self):
        rng = np.random.default_rng(6)
        dataset = _regime_dataset(rng, [], [[1.0, 1.0]], 60)

        location_test(dataset, 0, 60, 20, num_permutations=9, tau=20, grid_size=5)
        location_test(dataset, 0, 60, 40, num_permutations=9, tau=20, grid_size=5)

        with self.assertRaises(ValueError):
            location_test(dataset, 0, 60, 19, tau=20)
        with self.assertRaises(ValueError):
            location_test(dataset, 0, 60, 41, tau=20)

    def test_detects_a_coefficient_jump(self):
        rng = np.random.default_rng(2)
        rejections = 0

        for trial in range(30):
            dataset = _regime_dataset(rng, [100], [[1.0, 1.0, 1.0, 0.0, 0.0], [3.0, 3.0, 3.0, 0.0, 0.0]], 200)
            result  = location_test(dataset, 0, 200, 100, num_permutations=99, rng_seed=trial, grid_size=10)
            rejections += result.p_value < 0.05

        self.assertGreaterEqual(rejections, 29)

    def _null_p_values(self, trials, num_permutations):
        rng = np.random.default_rng(3)
        p_values = []

        for trial in range(trials):
            dataset = _regime_dataset(rng, [], [[1.0, -1.0]], 200)
            result  = location_test(dataset, 0, 200, 100, num_permutations=num_permutations,
                                    rng_seed=trial, grid_size=10)
            p_values.append(result.p_value)

        return np.array(p_values)

    def test_null_p_values_are_roughly_uniform(self):
        from scipy import stats

        p_values = self._null_p_values(200, 99)
        self.assertGreater(stats.kstest(p_values, 'uniform').pvalue, 0.01)

    @slow_test
    def test_null_calibration_campaign(self):
        from scipy import stats

        p_values = self._null_p_values(500, 199)
        self.assertGreater(stats.kstest(p_values, 'uniform').pvalue, 0.01)
        self.assertLessEqual(abs(np.mean(p_values < 0.05) - 0.05), 0.03)


class DetectionResultTest(unittest.TestCase):

    def test_fits_must_tile_the_partition(self):
        rng   = np.random.default_rng(4)
        cache = SegmentCostCache(_regime_dataset(rng, [30], [[1.0], [2.0]], 60), grid_size=5)
        result = build_result("test", Partition((30,), 60, tau=10), cache)

        self.assertEqual(len(result.fits), 2)
        self.assertEqual([fit.residuals.regime_index for fit in result.fits], [0, 1])
        self.assertAlmostEqual(result.s_alpha, result.report.s_alpha)

        with self.assertRaises(ValueError):
            DetectionResult("test", Partition((20,), 60, tau=10), result.fits, 0.0)

    def test_single_regime_has_no_report(self):
        rng   = np.random.default_rng(5)
        cache = SegmentCostCache(_regime_dataset(rng, [], [[1.0]], 40), grid_size=5)
        result = build_result("test", Partition((), 40, tau=10), cache)

        self.assertIsNone(result.report)
        self.assertEqual(result.s_alpha, 0.0)
        self.assertEqual(result.as_dict()['change_points'], [])


if __name__ == "__main__":
    unittest.main()
