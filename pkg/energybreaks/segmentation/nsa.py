#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Change-point search by recursive splitting.

The search region is cut into segments of roughly equal length. Every pair of
adjacent segments is compared under the null of no change: the first segment's
coefficients are applied to the second, and the two residual sets are tested for a
common distribution. Where the test rejects, the search either zooms into the pair
(plus a margin of ``tau`` rows on each side) with shorter segments, or, once the pair
is too short to split further, pins the change point down to the position that
maximizes the ratio statistic.
"""

import math
import logging
import unittest

from dataclasses import dataclass, replace
from typing      import Optional

import numpy as np

from ..energy     import DEFAULT_ALPHA, check_alpha, dispersion_decomposition, permutation_test
from ..regression import DEFAULT_GRID_SIZE, residuals_with
from ..utils      import Deadline, WorkPool, derive_seed, slow_test
from .dp          import DEFAULT_ETA
from .partition   import InfeasibleConfigError, Partition, SegmentCostCache, SeriesPoint, _regime_dataset, build_result

__all__ = ['NsaConfig', 'nsa']

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NsaConfig:
    """ Parameters of the splitting search.

    Attributes
    ----------
    s, e: int or None
        Bounds of the region expected to hold the change points; default to ``tau`` and ``T - tau``.
    l: int
        The initial segment length; at least ``tau``.
    p0: float
        The critical value of the pair tests.
    gamma_decay: float
        Segment lengths shrink by this factor with each level of recursion, but never below ``tau``.
    tau: int
        The minimum regime length.
    eta: float
        Localization keeps at least this fraction of its window, and at least ``tau // 2`` rows,
        on either side of every candidate.
    """

    s:                Optional[int] = None
    e:                Optional[int] = None
    l:                int   = 50
    p0:               float = 0.05
    gamma_decay:      float = 0.6
    tau:              int   = 50
    eta:              float = DEFAULT_ETA
    alpha:            float = DEFAULT_ALPHA
    num_permutations: int   = 199
    rng_seed:         int   = 0
    grid_size:        int   = DEFAULT_GRID_SIZE
    intercept:        bool  = False

    def __post_init__(self):
        try:
            check_alpha(self.alpha)
        except ValueError as error:
            raise InfeasibleConfigError(str(error)) from error

        if self.tau < 2:
            raise InfeasibleConfigError(f"tau must be at least 2, not {self.tau}")
        if self.l < self.tau:
            raise InfeasibleConfigError(f"the segment length l={self.l} must be at least tau={self.tau}")
        if not 0 < self.p0 < 1:
            raise InfeasibleConfigError(f"p0 must lie strictly between 0 and 1, not {self.p0}")
        if not 0 < self.gamma_decay < 1:
            raise InfeasibleConfigError(f"gamma_decay must lie strictly between 0 and 1, not {self.gamma_decay}")
        if not 0 < self.eta < 0.5:
            raise InfeasibleConfigError(f"eta must lie strictly between 0 and 0.5, not {self.eta}")
        if self.num_permutations < 1:
            raise InfeasibleConfigError(f"num_permutations must be at least 1, not {self.num_permutations}")


    def resolve(self, total_T):
        """ Returns this configuration with its search bounds filled in for a T-row dataset. """
        s = self.tau if self.s is None else self.s
        e = total_T - self.tau if self.e is None else self.e

        if not self.tau <= s < e <= total_T - self.tau:
            raise InfeasibleConfigError(f"the search bounds need tau <= s < e <= T - tau; "
                                        f"got tau={self.tau}, s={s}, e={e}, T={total_T}")

        return replace(self, s=s, e=e)


class _SplittingSearch:
    """ State of one run of the splitting search. """

    def __init__(self, dataset, config, cache, pool, deadline):
        self.dataset  = dataset
        self.config   = config
        self.cache    = cache
        self.pool     = pool
        self.deadline = deadline

        # (position, statistic) for every localized change point, in discovery order.
        self.found    = []
        self.p_values = []
        self.trace    = []
        self.series   = []


    def pair_test(self, pair):
        """ Tests two adjacent spans, using the first span's coefficients on both. """
        (start, middle), (_, stop) = pair

        first  = self.cache.fit(start, middle)
        second = residuals_with(self.dataset.span(middle, stop), first.beta, regime_index=1)

        return permutation_test([first.residuals, second], self.config.alpha, self.config.num_permutations,
                                rng_seed=derive_seed(self.config.rng_seed, start, middle, stop))


    def search(self, s, e, l, first=False, depth=0):
        self.deadline.check()

        total_T, tau = self.dataset.T, self.config.tau

        # Outside the first call, a region always yields at least one pair to compare.
        count  = max((e - s) // l, 1 if first else 2)
        length = (e - s) // count
        bounds = [s + index * length for index in range(count)] + [e]
        spans  = list(zip(bounds[:-1], bounds[1:]))

        if first:
            spans = [(0, s)] + spans + [(e, total_T)]

        pairs = [(left, right) for left, right in zip(spans[:-1], spans[1:])
                 if left[1] - left[0] >= 2 and right[1] - right[0] >= 2]

        self.cache.prefetch(left for left, _ in pairs)
        tests = self.pool.map(self.pair_test, pairs)

        for (left, right), test in zip(pairs, tests):
            self.p_values.append(test.p_value)
            self.trace.append({
                'kind':    'pair_test',
                'depth':   depth,
                'left':    list(left),
                'right':   list(right),
                'p_value': test.p_value,
            })

            if test.p_value >= self.config.p0:
                continue

            region = (max(0, left[0] - tau), min(total_T, right[1] + tau))

            # Zooming in must shrink the region, or the recursion could revisit it forever.
            if right[1] - left[0] > 2 * tau and region[1] - region[0] < e - s:
                self.search(*region, max(int(self.config.gamma_decay * l), tau), depth=depth + 1)
            else:
                self.localize(*region)


    def localize(self, start, stop):
        """ Records the position within ``[start, stop)`` that maximizes the location statistic. """
        self.deadline.check()

        side = max(2, self.config.tau // 2, math.ceil(self.config.eta * (stop - start)))
        candidates = list(range(start + side, stop - side + 1))
        if not candidates:
            return

        def statistic(delta):
            left  = self.cache.fit(start, delta)
            right = residuals_with(self.dataset.span(delta, stop), left.beta, regime_index=1)
            return dispersion_decomposition([left.residuals, right], self.config.alpha).f_alpha

        statistics = self.pool.map(statistic, candidates)

        # Strict comparison: on ties, the earliest position stays selected.
        best = 0
        for index, value in enumerate(statistics):
            if value > statistics[best]:
                best = index

        window = len(self.found)
        self.series.extend(SeriesPoint(delta, value, window) for delta, value in zip(candidates, statistics))
        self.found.append((candidates[best], statistics[best]))
        self.trace.append({
            'kind':    'localize',
            'window':  [start, stop],
            'delta':   candidates[best],
            'f_alpha': statistics[best] if np.isfinite(statistics[best]) else None,
        })
        logger.debug("localized a change point at %d within [%d, %d)", candidates[best], start, stop)


    def change_points(self):
        """ Returns the localized points, keeping the strongest of any that lie within tau of each other. """
        total_T, tau = self.dataset.T, self.config.tau

        admissible = [(position, value) for position, value in self.found if tau <= position <= total_T - tau]
        kept = []

        for position, _ in sorted(admissible, key=lambda item: (-item[1], item[0])):
            if all(abs(position - other) >= tau for other in kept):
                kept.append(position)

        return sorted(kept)


def nsa(dataset, config=None, cache=None, pool=None, deadline=None):
    """ Runs the splitting search over a dataset.

    Parameters
    ----------
    dataset: TimeSeriesDataset
    config: NsaConfig, optional
        Defaults to ``NsaConfig()``.
    cache: SegmentCostCache, optional
        Fits to reuse; must match the configuration's alpha.
    pool: WorkPool, optional
        Runs the pair tests of one level, and the candidates of one localization, in parallel.
    deadline: Deadline, optional
        Polled at every level of recursion.

    Returns
    -------
    DetectionResult
        With ``per_step_p_values`` holding every pair test's p-value in the order they were
        made, and ``series`` holding the location statistic across each localization window.
    """
    config   = (config or NsaConfig()).resolve(dataset.T)
    pool     = pool or WorkPool(threads=1)
    deadline = deadline or Deadline()

    if cache is None:
        cache = SegmentCostCache(dataset, config.alpha, config.grid_size, config.intercept, pool)
    elif cache.dataset is not dataset or cache.alpha != check_alpha(config.alpha):
        raise ValueError("the segment cache does not match this dataset and configuration")

    search = _SplittingSearch(dataset, config, cache, pool, deadline)
    search.search(config.s, config.e, config.l, first=True)

    partition = Partition(tuple(search.change_points()), dataset.T, config.tau)
    logger.info("splitting search found %d change point(s): %s", partition.k, list(partition.change_points))

    return build_result("nsa", partition, cache,
        per_step_p_values = search.p_values,
        trace             = search.trace,
        series            = search.series,
    )



_LOW  = [1.0, 1.0, 1.0, 0.0, 0.0]
_HIGH = [3.0, 3.0, 3.0, 0.0, 0.0]


class NsaConfigTest(unittest.TestCase):

    def test_defaults_resolve(self):
        config = NsaConfig().resolve(600)
        self.assertEqual((config.s, config.e), (50, 550))

    def test_rejects_infeasible_settings(self):
        with self.assertRaises(InfeasibleConfigError):
            NsaConfig(l=20, tau=50)
        with self.assertRaises(InfeasibleConfigError):
            NsaConfig(gamma_decay=1.0)
        with self.assertRaises(InfeasibleConfigError):
            NsaConfig(eta=0.5)
        with self.assertRaises(InfeasibleConfigError):
            NsaConfig(alpha=2.0)
        with self.assertRaises(InfeasibleConfigError):
            NsaConfig().resolve(90)
        with self.assertRaises(InfeasibleConfigError):
            NsaConfig(s=10).resolve(600)


class SplittingSearchTest(unittest.TestCase):

    def test_finds_separated_breaks(self):
        dataset = _regime_dataset(np.random.default_rng(0), [100, 200], [_LOW, _HIGH, _LOW], 300)
        config  = NsaConfig(tau=30, l=30, num_permutations=99, grid_size=10, p0=0.01)
        result  = nsa(dataset, config)

        self.assertEqual(result.partition.k, 2)
        for found, expected in zip(result.change_points, [100, 200]):
            self.assertLessEqual(abs(found - expected), 5)

    def test_points_respect_the_minimum_gap(self):
        rng = np.random.default_rng(1)

        for _ in range(3):
            dataset = _regime_dataset(rng, [60, 90, 150], [_LOW, _HIGH, _LOW, _HIGH], 200)
            result  = nsa(dataset, NsaConfig(tau=20, l=25, num_permutations=49, grid_size=5))

            gaps = np.diff(result.partition.boundaries)
            self.assertTrue(np.all(gaps >= 20))
            self.assertEqual(len(result.fits), result.partition.k + 1)

    def test_null_data_rarely_gains_points(self):
        rng = np.random.default_rng(2)
        empty = 0

        for trial in range(20):
            dataset = _regime_dataset(rng, [], [[1.0]], 150)
            config  = NsaConfig(tau=50, l=50, num_permutations=99, grid_size=10, rng_seed=trial)
            empty  += nsa(dataset, config).partition.k == 0

        self.assertGreaterEqual(empty, 15)

    def test_localization_keeps_the_eta_margin(self):
        dataset = _regime_dataset(np.random.default_rng(6), [120], [_LOW, _HIGH], 240)
        result  = nsa(dataset, NsaConfig(tau=40, l=40, eta=0.3, num_permutations=49, grid_size=5))

        windows = [entry for entry in result.trace if entry['kind'] == 'localize']
        self.assertTrue(windows)

        for entry in windows:
            start, stop = entry['window']
            margin = math.ceil(0.3 * (stop - start))
            self.assertTrue(start + margin <= entry['delta'] <= stop - margin)

    def test_small_region_terminates(self):
        dataset = _regime_dataset(np.random.default_rng(3), [60], [_LOW, _HIGH], 120)
        result  = nsa(dataset, NsaConfig(s=40, e=80, tau=40, l=40, num_permutations=49, grid_size=5))

        self.assertLessEqual(max((entry.get('depth', 0) for entry in result.trace), default=0), 1)
        self.assertEqual(len(result.fits), result.partition.k + 1)

    def test_determinism_across_thread_counts(self):
        dataset = _regime_dataset(np.random.default_rng(4), [80], [_LOW, _HIGH], 200)
        config  = NsaConfig(tau=25, l=40, num_permutations=49, grid_size=5, rng_seed=7)
        serial  = nsa(dataset, config)

        with WorkPool(threads=4) as pool:
            parallel = nsa(dataset, config, pool=pool)

        self.assertEqual(serial.change_points, parallel.change_points)
        self.assertEqual(serial.per_step_p_values, parallel.per_step_p_values)
        self.assertEqual(serial.series, parallel.series)

    @slow_test
    def test_null_campaign(self):
        rng = np.random.default_rng(5)
        empty = 0

        for trial in range(100):
            dataset = _regime_dataset(rng, [], [[1.0]], 150)
            empty  += nsa(dataset, NsaConfig(tau=50, l=50, rng_seed=trial)).partition.k == 0

        self.assertGreaterEqual(empty, 90)


if __name__ == "__main__":
    unittest.main()
