#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Shared plumbing: worker pools, seed streams, time budgets and test gating. """

import os
import time
import logging
import unittest

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from scipy import stats

__all__ = [
    'THREADS_ENVIRONMENT_VARIABLE', 'default_thread_count', 'WorkPool',
    'derive_seed', 'replicate_generator', 'Deadline', 'TimeBudgetExceeded',
    'slow_test', 'rate_at_least',
]

logger = logging.getLogger(__name__)


#
# Thread pools.
#

THREADS_ENVIRONMENT_VARIABLE = "ENERGYBREAKS_THREADS"


def default_thread_count():
    """ Returns the worker count requested by the environment; or 1 if none was requested. """

    requested = os.environ.get(THREADS_ENVIRONMENT_VARIABLE)
    if not requested:
        return 1

    try:
        threads = int(requested)
    except ValueError:
        raise ValueError(f"{THREADS_ENVIRONMENT_VARIABLE} must be an integer, not {requested!r}")

    if threads < 1:
        raise ValueError(f"{THREADS_ENVIRONMENT_VARIABLE} must be at least 1, not {threads}")

    return threads


class WorkPool:
    """ Order-preserving map over a thread pool.

    Every task handed to a WorkPool must be a pure function of its argument;
    results are always returned in submission order, so the outcome of a computation
    never depends on the number of threads used to perform it. A pool with a single
    thread evaluates everything inline, which keeps tracebacks readable.

    Parameters
    ----------
    threads: int, optional
        The number of workers; defaults to :func:`default_thread_count`.
    """

    def __init__(self, threads=None):
        self.threads = default_thread_count() if threads is None else int(threads)
        if self.threads < 1:
            raise ValueError(f"a work pool needs at least one thread, not {self.threads}")

        self._executor = None


    def map(self, function, items):
        """ Applies ``function`` to every item; returns the results as a list, in order. """
        items = list(items)

        if self.threads == 1 or len(items) < 2:
            return [function(item) for item in items]

        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.threads)

        return list(self._executor.map(function, items))


    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None


    def __enter__(self):
        return self

    def __exit__(self, *_):
        self.close()


#
# Seed streams.
#

def derive_seed(seed, *keys):
    """ Derives a 32-bit child seed from ``seed`` and a tuple of non-negative integer keys.

    Derivation is counter-based: the child depends only on the seed and its keys, never
    on how many other children were drawn before it.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(key) for key in keys))
    return int(sequence.generate_state(1)[0])


def replicate_generator(seed, *keys):
    """ Returns an independent numpy Generator for the stream identified by ``keys``. """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(key) for key in keys))
    return np.random.default_rng(sequence)


#
# Cooperative time budgets.
#

class TimeBudgetExceeded(RuntimeError):
    """ Raised when a detector runs past the wall-clock budget it was given. """


class Deadline:
    """ A wall-clock budget that long-running loops poll via :meth:`check`.

    Parameters
    ----------
    seconds: float or None
        The budget, starting now. None means "no budget".
    """

    def __init__(self, seconds=None, clock=time.monotonic):
        self._clock   = clock
        self.seconds  = seconds
        self._expires = None if seconds is None else clock() + seconds


    @property
    def expired(self):
        return self._expires is not None and self._clock() > self._expires


    def check(self):
        if self.expired:
            raise TimeBudgetExceeded(f"exceeded the time budget of {self.seconds} seconds")


#
# Test helpers.
#

SLOW_TESTS_ENVIRONMENT_VARIABLE = "ENERGYBREAKS_SLOW_TESTS"


def slow_test(test):
    """ Decorator that skips a Monte Carlo campaign unless slow tests were requested. """
    enabled = os.environ.get(SLOW_TESTS_ENVIRONMENT_VARIABLE, "") not in ("", "0")
    return unittest.skipUnless(enabled, f"set {SLOW_TESTS_ENVIRONMENT_VARIABLE}=1 to run")(test)


def rate_at_least(hits, trials, rate, level=0.01):
    """ Returns True unless ``hits`` successes in ``trials`` are significantly fewer than ``rate`` predicts.

    Monte Carlo campaigns use this to check a success-rate bar: the check fails only when a
    one-sided binomial test rejects "the true rate is at least ``rate``" at ``level``.
    """
    if not 0 <= hits <= trials:
        raise ValueError(f"cannot score {hits} hit(s) in {trials} trial(s)")

    return bool(stats.binom.cdf(hits, trials, rate) > level)



class WorkPoolTest(unittest.TestCase):

    def test_results_keep_submission_order(self):
        items = list(range(50))

        with WorkPool(threads=1) as serial, WorkPool(threads=4) as parallel:
            self.assertEqual(serial.map(lambda x: x * x, items), parallel.map(lambda x: x * x, items))

    def test_rejects_empty_pool(self):
        with self.assertRaises(ValueError):
            WorkPool(threads=0)


class SeedDerivationTest(unittest.TestCase):

    def test_children_are_stable(self):
        self.assertEqual(derive_seed(7, 1, 2), derive_seed(7, 1, 2))
        self.assertNotEqual(derive_seed(7, 1, 2), derive_seed(7, 2, 1))

    def test_generators_do_not_depend_on_draw_order(self):
        first  = replicate_generator(11, 3).standard_normal(4)
        replicate_generator(11, 0).standard_normal(100)
        second = replicate_generator(11, 3).standard_normal(4)
        np.testing.assert_array_equal(first, second)


class RateTest(unittest.TestCase):

    def test_bar(self):
        self.assertTrue(rate_at_least(100, 100, 0.95))
        self.assertTrue(rate_at_least(90, 100, 0.9))
        self.assertTrue(rate_at_least(86, 100, 0.9))
        self.assertFalse(rate_at_least(80, 100, 0.9))
        self.assertFalse(rate_at_least(60, 100, 0.9))

    def test_rejects_impossible_counts(self):
        with self.assertRaises(ValueError):
            rate_at_least(11, 10, 0.5)


class DeadlineTest(unittest.TestCase):

    def test_unbounded_deadline_never_expires(self):
        Deadline(None).check()

    def test_expired_deadline_raises(self):
        ticks = iter([0.0, 10.0])
        deadline = Deadline(1.0, clock=lambda: next(ticks))

        with self.assertRaises(TimeBudgetExceeded):
            deadline.check()


if __name__ == "__main__":
    unittest.main()
