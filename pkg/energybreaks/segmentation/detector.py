#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" One configuration object, and one entry point, for every change-point search. """

import logging
import unittest

from dataclasses import asdict, dataclass, replace
from typing      import Optional

import numpy as np

from ..energy     import DEFAULT_ALPHA, check_alpha, permutation_test
from ..regression import DEFAULT_GRID_SIZE
from ..utils      import Deadline, WorkPool, derive_seed
from .dp          import DEFAULT_ETA, dp_known_k, dp_unknown_k
from .nsa         import NsaConfig, nsa
from .partition   import InfeasibleConfigError, SegmentCostCache, _regime_dataset

__all__ = ['ALGORITHMS', 'DetectorConfig', 'detect']

logger = logging.getLogger(__name__)


ALGORITHMS = ('nsa', 'dp')


@dataclass(frozen=True)
class DetectorConfig:
    """ Everything needed to run a change-point search.

    Attributes
    ----------
    algorithm: str
        ``"nsa"`` for the splitting search, ``"dp"`` for dynamic programming.
    num_change_points: int or None
        For ``"dp"``: place exactly this many points, instead of testing for each one.
    max_k: int or None
        For ``"dp"``: the most points to add; defaults to ``T // tau - 1``.
    reoptimize: bool
        For ``"dp"``: re-place every point after each one is accepted.
    final_test: bool
        Attach a permutation p-value to the decomposition of the final regimes.
    time_budget: float or None
        Wall-clock seconds after which the search gives up.
    threads: int or None
        Worker threads; defaults to the ``ENERGYBREAKS_THREADS`` environment variable.
    """

    algorithm:         str            = 'nsa'
    tau:               int            = 50
    alpha:             float          = DEFAULT_ALPHA
    p0:                float          = 0.05
    num_permutations:  int            = 199
    eta:               float          = DEFAULT_ETA
    l:                 int            = 50
    gamma_decay:       float          = 0.6
    s:                 Optional[int]  = None
    e:                 Optional[int]  = None
    max_k:             Optional[int]  = None
    num_change_points: Optional[int]  = None
    reoptimize:        bool           = False
    final_test:        bool           = False
    gamma_grid_size:   int            = DEFAULT_GRID_SIZE
    intercept:         bool           = False
    seed:              int            = 0
    threads:           Optional[int]  = None
    time_budget:       Optional[float] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InfeasibleConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")

        try:
            check_alpha(self.alpha)
        except ValueError as error:
            raise InfeasibleConfigError(str(error)) from error

        if self.tau < 2:
            raise InfeasibleConfigError(f"tau must be at least 2, not {self.tau}")
        if not 0 < self.p0 < 1:
            raise InfeasibleConfigError(f"p0 must lie strictly between 0 and 1, not {self.p0}")
        if not 0 < self.eta < 0.5:
            raise InfeasibleConfigError(f"eta must lie strictly between 0 and 0.5, not {self.eta}")
        if self.num_permutations < 1:
            raise InfeasibleConfigError(f"num_permutations must be at least 1, not {self.num_permutations}")
        if self.gamma_grid_size < 1:
            raise InfeasibleConfigError(f"the penalty grid needs at least one point, not {self.gamma_grid_size}")
        if self.num_change_points is not None and self.num_change_points < 1:
            raise InfeasibleConfigError(f"num_change_points must be at least 1, not {self.num_change_points}")
        if self.max_k is not None and self.max_k < 0:
            raise InfeasibleConfigError(f"max_k cannot be negative, not {self.max_k}")
        if self.time_budget is not None and self.time_budget <= 0:
            raise InfeasibleConfigError(f"the time budget must be positive, not {self.time_budget}")

        if self.algorithm == 'nsa':
            self.nsa_config()


    def nsa_config(self):
        return NsaConfig(
            s                = self.s,
            e                = self.e,
            l                = self.l,
            p0               = self.p0,
            gamma_decay      = self.gamma_decay,
            tau              = self.tau,
            eta              = self.eta,
            alpha            = self.alpha,
            num_permutations = self.num_permutations,
            rng_seed         = self.seed,
            grid_size        = self.gamma_grid_size,
            intercept        = self.intercept,
        )


    def with_seed(self, seed):
        return replace(self, seed=seed)


    def as_dict(self):
        return asdict(self)


def detect(dataset, config=None, pool=None):
    """ Runs the configured search over a dataset; returns its DetectionResult.

    Raises
    ------
    InfeasibleConfigError
        If the configuration cannot be applied to a dataset of this length.
    TimeBudgetExceeded
        If the search runs past ``config.time_budget``.
    """
    config   = config or DetectorConfig()
    deadline = Deadline(config.time_budget)

    owned = pool is None
    pool  = pool or WorkPool(config.threads)

    logger.info("running %s over %d observations (q=%d, p=%d)", config.algorithm, dataset.T, dataset.q, dataset.p)

    try:
        cache = SegmentCostCache(dataset, config.alpha, config.gamma_grid_size, config.intercept, pool)

        if config.algorithm == 'nsa':
            result = nsa(dataset, config.nsa_config(), cache, pool, deadline)
        elif config.num_change_points is not None:
            result = dp_known_k(dataset, config.num_change_points, config.tau, config.alpha, cache, deadline)
        else:
            result = dp_unknown_k(dataset, config.tau, config.alpha, config.p0, config.num_permutations,
                                  config.max_k, cache, config.eta, config.seed, config.reoptimize, deadline)

        if config.final_test and result.report is not None:
            test = permutation_test([fit.residuals for fit in result.fits], config.alpha, config.num_permutations,
                                    rng_seed=derive_seed(config.seed, dataset.T), pool=pool)
            result = replace(result, report=result.report.with_p_value(test.p_value))

    finally:
        if owned:
            pool.close()

    logger.info("%s finished with change points %s", config.algorithm, result.change_points)
    return result



class DetectTest(unittest.TestCase):

    def setUp(self):
        self.dataset = _regime_dataset(np.random.default_rng(0), [60], [[1.0, 1.0, 0.0], [3.0, 3.0, 0.0]], 120)

    def test_every_algorithm_finds_the_break(self):
        for config in (DetectorConfig('nsa', tau=30, l=30, num_permutations=49, gamma_grid_size=5),
                       DetectorConfig('dp', tau=30, num_permutations=49, gamma_grid_size=5, p0=0.01),
                       DetectorConfig('dp', tau=30, num_change_points=1, gamma_grid_size=5)):
            result = detect(self.dataset, config)

            self.assertEqual(result.partition.k, 1, config.algorithm)
            self.assertLessEqual(abs(result.change_points[0] - 60), 3)

    def test_final_test_attaches_a_p_value(self):
        config = DetectorConfig('dp', tau=30, num_change_points=1, gamma_grid_size=5, final_test=True,
                                num_permutations=19)
        report = detect(self.dataset, config).report

        self.assertIsNotNone(report.p_value)
        self.assertTrue(0 <= report.p_value <= 1)

    def test_configuration_errors(self):
        with self.assertRaises(InfeasibleConfigError):
            DetectorConfig('magic')
        with self.assertRaises(InfeasibleConfigError):
            DetectorConfig(tau=50, l=10)
        with self.assertRaises(InfeasibleConfigError):
            detect(self.dataset, DetectorConfig('dp', tau=50, num_change_points=2))
        with self.assertRaises(InfeasibleConfigError):
            detect(self.dataset, DetectorConfig('nsa', tau=70, l=70))

    def test_eta_reaches_the_splitting_search(self):
        config = DetectorConfig('nsa', tau=20, l=30, eta=0.3)
        self.assertEqual(config.nsa_config().eta, 0.3)

    def test_config_round_trips_through_a_dict(self):
        config = DetectorConfig('dp', tau=20, max_k=3)
        self.assertEqual(DetectorConfig(**config.as_dict()), config)


if __name__ == "__main__":
    unittest.main()
