#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Change-point search by dynamic programming.

For a known number of change points, optimal partitions of ever longer prefixes of
the timeline are built left to right: the best ``m``-point partition of the first
``t`` rows extends one of the stored ``m - 1``-point partitions by a final regime, and
pays the energy that regime adds against every regime already stored. Because that
added energy depends on the whole stored partition, each table entry keeps its full
list of regimes.

For an unknown number, points are added one at a time: each step refits both halves of
every admissible split, looks for the split whose regimes leave the least total
dispersion of residuals, and keeps it only if a location test rejects "no change" at
that split.
"""

import math
import logging
import unittest

from itertools import combinations

import numpy as np

from ..dataset    import TimeSeriesDataset
from ..energy     import DEFAULT_ALPHA, check_alpha
from ..regression import DEFAULT_GRID_SIZE
from ..utils      import Deadline, TimeBudgetExceeded, WorkPool, derive_seed, slow_test
from .partition   import (InfeasibleConfigError, Partition, SegmentCostCache, SeriesPoint, _regime_dataset,
                          added_energy, build_result, location_test, partition_dispersion, partition_energy)

__all__ = ['dp_known_k', 'dp_unknown_k', 'DEFAULT_ETA', 'LOW_CONTRAST_TOLERANCE']

logger = logging.getLogger(__name__)


DEFAULT_ETA            = 0.1
LOW_CONTRAST_TOLERANCE = 1e-6


def _cache_for(dataset, alpha, cache, grid_size, intercept, pool):
    if cache is None:
        return SegmentCostCache(dataset, alpha, grid_size, intercept, pool)

    if cache.dataset is not dataset:
        raise ValueError("the segment cache belongs to a different dataset")
    if cache.alpha != check_alpha(alpha):
        raise ValueError(f"the segment cache was built for alpha={cache.alpha}, not {alpha}")

    return cache


def _is_low_contrast(values):
    best, median = min(values), float(np.median(values))
    return median - best <= LOW_CONTRAST_TOLERANCE * abs(median)


def dp_known_k(dataset, k, tau, alpha=DEFAULT_ALPHA, cache=None, deadline=None, grid_size=DEFAULT_GRID_SIZE,
               intercept=False, pool=None):
    """ Places exactly ``k`` change points by dynamic programming.

    Parameters
    ----------
    dataset: TimeSeriesDataset
    k: int
        The number of change points; at least one.
    tau: int
        The minimum regime length.
    alpha: float
        The energy exponent.
    cache: SegmentCostCache, optional
        Fits and distances to reuse; one is created if not given.
    deadline: Deadline, optional
        Polled once per table entry.

    Returns
    -------
    DetectionResult
        With ``series`` holding the statistic for every position of the last change point;
        ``low_contrast`` is set when the best of those is indistinguishable from their median.
    """
    total_T = dataset.T

    if k < 1:
        raise ValueError(f"dynamic programming needs at least one change point to place, not {k}")
    if tau < 2:
        raise ValueError(f"regimes must be at least two observations long, not {tau}")
    if (k + 1) * tau > total_T:
        raise InfeasibleConfigError(f"{k + 1} regimes of at least {tau} rows do not fit into {total_T} rows")

    cache    = _cache_for(dataset, alpha, cache, grid_size, intercept, pool)
    deadline = deadline or Deadline()

    # best[t] = (S, spans) for the best partition of rows [0, t) at the current stage.
    best = {t: (0.0, ((0, t),)) for t in range(tau, total_T - k * tau + 1)}
    candidates = []

    for m in range(1, k + 1):
        stops = [total_T] if m == k else range((m + 1) * tau, total_T - (k - m) * tau + 1)
        cache.prefetch((start, stop) for stop in stops for start in range(m * tau, stop - tau + 1))

        stage = {}
        for stop in stops:
            deadline.check()

            candidates = []
            for start in range(m * tau, stop - tau + 1):
                energy, spans = best[start]
                candidates.append((energy + added_energy(cache, spans, (start, stop)), start))

            # Tuples compare by energy first; on ties, the earliest start wins.
            energy, start = min(candidates)
            stage[stop] = (energy, best[start][1] + ((start, stop),))

        best = stage
        logger.debug("stage %d of %d: %d partial partitions", m, k, len(stage))

    energy, spans = best[total_T]
    partition = Partition(tuple(start for start, _ in spans[1:]), total_T, tau)

    low_contrast = _is_low_contrast([value for value, _ in candidates])
    if low_contrast:
        logger.info("all candidate partitions have nearly the same energy; the location is not meaningful")

    return build_result("dp", partition, cache, s_alpha=energy,
        series       = [SeriesPoint(start, value, 0) for value, start in candidates],
        trace        = [{'kind': 'dp', 'k': k, 'change_points': list(partition.change_points), 's_alpha': energy}],
        low_contrast = low_contrast,
    )


def _split_candidates(start, stop, tau, eta):
    """ Returns the admissible split positions of the regime ``[start, stop)``. """
    width = stop - start
    lower = max(math.ceil(start + width * eta), start + tau)
    upper = min(math.floor(stop - width * eta), stop - tau)
    return range(lower, upper + 1)


def dp_unknown_k(dataset, tau, alpha=DEFAULT_ALPHA, p0=0.05, num_permutations=199, max_k=None, cache=None,
                 eta=DEFAULT_ETA, rng_seed=0, reoptimize=False, deadline=None, grid_size=DEFAULT_GRID_SIZE,
                 intercept=False, pool=None):
    """ Adds change points one at a time, for as long as location tests support them.

    Starting from a single regime, every step considers splitting each regime ``[a, b)``
    at any position at least ``eta (b - a)`` and ``tau`` rows from its ends, and picks
    the split whose regimes' own residuals have the smallest total dispersion ``T_alpha``,
    between-regime energy plus within-regime dispersion. That split is kept
    if the location test at it has a p-value below ``p0``; the search stops at the first
    split that is not kept, or after ``max_k`` points.

    With ``reoptimize``, every accepted point triggers a :func:`dp_known_k` pass that
    re-places all points found so far.
    """
    total_T = dataset.T

    if tau < 2:
        raise ValueError(f"regimes must be at least two observations long, not {tau}")
    if not 0 < p0 < 1:
        raise ValueError(f"the critical value must lie strictly between 0 and 1, not {p0}")
    if not 0 < eta < 0.5:
        raise ValueError(f"the location margin must lie strictly between 0 and 0.5, not {eta}")
    if 2 * tau > total_T:
        raise InfeasibleConfigError(f"a regime of at least {tau} rows leaves no room for a split of {total_T} rows")

    if max_k is None:
        max_k = total_T // tau - 1
    if max_k < 0:
        raise ValueError(f"the maximum number of change points cannot be negative, not {max_k}")

    cache     = _cache_for(dataset, alpha, cache, grid_size, intercept, pool)
    deadline  = deadline or Deadline()
    partition = Partition((), total_T, tau)

    p_values, trace, series = [], [], []

    while partition.k < max_k:
        spans = partition.spans

        proposals = [(index, delta) for index, (start, stop) in enumerate(spans)
                     for delta in _split_candidates(start, stop, tau, eta)]
        if not proposals:
            break

        cache.prefetch((span for index, delta in proposals
                        for span in ((spans[index][0], delta), (delta, spans[index][1]))), dispersions=True)

        scored = []
        for index, delta in proposals:
            deadline.check()
            start, stop = spans[index]
            augmented   = spans[:index] + [(start, delta), (delta, stop)] + spans[index + 1:]
            scored.append((partition_dispersion(cache, augmented), delta, index))

        # Ties go to the earliest split position.
        dispersion, delta, index = min(scored)
        series = [SeriesPoint(candidate, value, partition.k) for value, candidate, _ in scored]

        start, stop = spans[index]
        test = location_test(dataset, start, stop, delta, cache.alpha, num_permutations,
                             rng_seed=derive_seed(rng_seed, partition.k, delta), cache=cache, pool=cache.pool, tau=tau)
        p_values.append(test.p_value)
        trace.append({
            'kind':      'location_test',
            'step':      partition.k,
            'regime':    [start, stop],
            'delta':     delta,
            't_alpha':   dispersion,
            'f_alpha':   test.statistic if np.isfinite(test.statistic) else None,
            'p_value':   test.p_value,
            'accepted':  test.p_value < p0,
        })

        if test.p_value >= p0:
            break

        partition = partition.with_point(delta)
        logger.info("accepted change point %d (p=%.4g); %d so far", delta, test.p_value, partition.k)

        if reoptimize:
            placed = dp_known_k(dataset, partition.k, tau, cache.alpha, cache, deadline)
            partition = placed.partition
            trace.extend(placed.trace)

    return build_result("dp", partition, cache, per_step_p_values=p_values, trace=trace, series=series)



#
# Reference search and tests.
#

def _exhaustive_search(cache, k, tau):
    """ Returns (energy, change points) of the best k-point partition, by trying them all. """
    total_T = cache.dataset.T
    best = None

    for points in combinations(range(tau, total_T - tau + 1), k):
        boundaries = (0, *points, total_T)
        if any(stop - start < tau for start, stop in zip(boundaries[:-1], boundaries[1:])):
            continue

        candidate = (partition_energy(cache, list(zip(boundaries[:-1], boundaries[1:]))), points)
        if best is None or candidate < best:
            best = candidate

    return best


_LOW  = [1.0, 1.0, 1.0, 0.0, 0.0]
_HIGH = [3.0, 3.0, 3.0, 0.0, 0.0]


class KnownCountTest(unittest.TestCase):

    def test_single_point_location(self):
        rng  = np.random.default_rng(0)
        hits = 0

        for _ in range(20):
            dataset = _regime_dataset(rng, [60], [_LOW, _HIGH], 120)
            cache   = SegmentCostCache(dataset, grid_size=10)
            result  = dp_known_k(dataset, 1, 20, cache=cache)

            energy, points = _exhaustive_search(cache, 1, 20)
            self.assertEqual(result.partition.change_points, points)
            self.assertEqual(result.s_alpha, energy)
            hits += 58 <= points[0] <= 62

        self.assertGreaterEqual(hits, 19)

    def test_two_points_match_exhaustive_search(self):
        dataset = _regime_dataset(np.random.default_rng(1), [60, 120], [_LOW, _HIGH, _LOW], 180)
        cache   = SegmentCostCache(dataset, grid_size=10)

        result = dp_known_k(dataset, 2, 30, cache=cache)
        energy, points = _exhaustive_search(cache, 2, 30)

        self.assertEqual(result.partition.change_points, points)
        self.assertEqual(result.s_alpha, energy)

    @slow_test
    def test_exhaustive_search_campaign(self):
        rng = np.random.default_rng(2)

        for _ in range(20):
            dataset = _regime_dataset(rng, [60], [_LOW, _HIGH], 120)
            cache   = SegmentCostCache(dataset)
            self.assertEqual(dp_known_k(dataset, 1, 20, cache=cache).partition.change_points,
                             _exhaustive_search(cache, 1, 20)[1])

        for _ in range(20):
            dataset = _regime_dataset(rng, [60, 120], [_LOW, _HIGH, _LOW], 180)
            cache   = SegmentCostCache(dataset)
            self.assertEqual(dp_known_k(dataset, 2, 30, cache=cache).partition.change_points,
                             _exhaustive_search(cache, 2, 30)[1])

    def _check_richer_partitions(self, instances):
        rng = np.random.default_rng(3)

        for _ in range(instances):
            dataset = _regime_dataset(rng, [60, 120], [_LOW, _HIGH, _LOW], 180)
            cache   = SegmentCostCache(dataset, grid_size=10)

            one = dp_known_k(dataset, 1, 30, cache=cache)
            two = dp_known_k(dataset, 2, 30, cache=cache)
            self.assertLessEqual(two.s_alpha, one.s_alpha)

    def test_richer_partition_fits_better(self):
        self._check_richer_partitions(5)

    @slow_test
    def test_richer_partition_campaign(self):
        self._check_richer_partitions(50)

    def test_flat_data_is_low_contrast(self):
        x = np.random.default_rng(4).standard_normal((60, 2))
        result = dp_known_k(TimeSeriesDataset(np.zeros(60), x), 1, 10, grid_size=5)

        self.assertTrue(result.low_contrast)
        self.assertEqual(result.s_alpha, 0.0)

    def test_series_covers_every_position(self):
        dataset = _regime_dataset(np.random.default_rng(5), [40], [_LOW, _HIGH], 80)
        result  = dp_known_k(dataset, 1, 10, grid_size=5)

        self.assertEqual([point.index for point in result.series], list(range(10, 71)))
        self.assertEqual(min(point.statistic for point in result.series), result.s_alpha)

    def test_infeasible(self):
        dataset = _regime_dataset(np.random.default_rng(6), [], [_LOW], 50)

        with self.assertRaises(InfeasibleConfigError):
            dp_known_k(dataset, 2, 20)
        with self.assertRaises(ValueError):
            dp_known_k(dataset, 0, 20)

    def test_deadline(self):
        dataset = _regime_dataset(np.random.default_rng(7), [], [_LOW], 50)

        with self.assertRaises(TimeBudgetExceeded):
            dp_known_k(dataset, 1, 10, grid_size=5, deadline=Deadline(0, clock=iter(range(10 ** 6)).__next__))


class UnknownCountTest(unittest.TestCase):

    def test_zero_budget_returns_one_regime(self):
        dataset = _regime_dataset(np.random.default_rng(8), [30], [_LOW, _HIGH], 60)
        result  = dp_unknown_k(dataset, 10, max_k=0, grid_size=5)

        self.assertEqual(result.change_points, [])
        self.assertEqual(len(result.fits), 1)
        self.assertEqual(result.per_step_p_values, [])

    def test_finds_two_breaks(self):
        dataset = _regime_dataset(np.random.default_rng(9), [60, 120], [_LOW, _HIGH, _LOW], 180)
        result  = dp_unknown_k(dataset, 20, p0=0.01, num_permutations=99, grid_size=10)

        self.assertEqual(result.partition.k, 2)
        for found, expected in zip(result.change_points, [60, 120]):
            self.assertLessEqual(abs(found - expected), 3)

        # Every accepted step, then the attempt that was turned down.
        self.assertEqual(len(result.per_step_p_values), 3)
        self.assertTrue(all(p < 0.01 for p in result.per_step_p_values[:2]))
        self.assertGreaterEqual(result.per_step_p_values[-1], 0.01)

    def test_places_every_break_of_the_benchmark_models(self):
        from ..simulation import ModelSpec, generate

        for model_id in (1, 5):
            spec    = ModelSpec.from_table(model_id, noise_parameterization='std').with_timeline(300)
            dataset = generate(spec, seed=model_id)
            result  = dp_unknown_k(dataset, 20, num_permutations=99, max_k=3, grid_size=10)

            self.assertEqual(result.partition.k, 3)
            for found, expected in zip(result.change_points, spec.true_change_points):
                self.assertLessEqual(abs(found - expected), 3)

    def test_steps_minimize_the_total_dispersion(self):
        dataset = _regime_dataset(np.random.default_rng(14), [40], [_LOW, _HIGH], 100)
        cache   = SegmentCostCache(dataset, grid_size=5)
        result  = dp_unknown_k(dataset, 20, num_permutations=49, max_k=1, cache=cache)

        first = result.trace[0]
        best  = min(partition_dispersion(cache, [(0, delta), (delta, 100)]) for delta in range(20, 81))
        self.assertEqual(first['t_alpha'], best)
        self.assertEqual(min(point.statistic for point in result.series), best)

    def test_null_data_rarely_gains_points(self):
        rng = np.random.default_rng(10)
        empty = 0

        for trial in range(20):
            dataset = _regime_dataset(rng, [], [_LOW], 120)
            empty  += dp_unknown_k(dataset, 20, num_permutations=99, grid_size=10, rng_seed=trial).partition.k == 0

        self.assertGreaterEqual(empty, 17)

    def test_reoptimization_keeps_the_partition_valid(self):
        dataset = _regime_dataset(np.random.default_rng(11), [60, 120], [_LOW, _HIGH, _LOW], 180)
        result  = dp_unknown_k(dataset, 30, num_permutations=99, grid_size=10, max_k=2, reoptimize=True)

        self.assertEqual(result.partition.k, 2)
        self.assertEqual(len(result.fits), 3)

    def test_determinism_across_thread_counts(self):
        dataset = _regime_dataset(np.random.default_rng(12), [50], [_LOW, _HIGH], 100)
        serial  = dp_unknown_k(dataset, 20, num_permutations=49, grid_size=5, rng_seed=3)

        with WorkPool(threads=4) as pool:
            parallel = dp_unknown_k(dataset, 20, num_permutations=49, grid_size=5, rng_seed=3, pool=pool)

        self.assertEqual(serial.change_points, parallel.change_points)
        self.assertEqual(serial.per_step_p_values, parallel.per_step_p_values)
        self.assertEqual(serial.s_alpha, parallel.s_alpha)

    def test_rejects_bad_parameters(self):
        dataset = _regime_dataset(np.random.default_rng(13), [], [_LOW], 60)

        with self.assertRaises(ValueError):
            dp_unknown_k(dataset, 10, p0=1.5)
        with self.assertRaises(ValueError):
            dp_unknown_k(dataset, 10, eta=0.5)
        with self.assertRaises(InfeasibleConfigError):
            dp_unknown_k(dataset, 40)


if __name__ == "__main__":
    unittest.main()
