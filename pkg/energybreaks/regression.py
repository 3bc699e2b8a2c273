#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" L1-penalized multi-response regression on dataset segments.

Each segment is fit by minimizing, separately for every response column,

    sum_t (y_t - x_t' b)^2  +  gamma * sum_j |b_j|

with cyclic coordinate descent. Regressors are rescaled before fitting, so that one
value of ``gamma`` means the same thing for every variable; coefficients are always
reported on the original scale. Without an intercept, each column is scaled to unit
root-mean-square (centering would introduce an implicit intercept); with one, columns
are centered and scaled to unit variance, and the intercept is left unpenalized.

The penalty weight for a segment is chosen from a grid by the Bayesian information
criterion, walking the grid from the sparsest fit downwards and warm-starting each
fit from the previous one. Every fit on the path is scored, and reported, by the
least-squares refit of the columns it keeps; the walk stops once a response keeps more
than half as many columns as the segment has rows. Once a segment of ``n`` rows has more
than ``sqrt(n)`` regressors, the criterion gains the extended-BIC term
``2 xi ln C(p, |support|)``, with ``xi = 1 - ln n / (2 ln p)`` clipped to [0, 1].
"""

import logging
import unittest

from dataclasses import dataclass
from typing      import Optional

import numba
import numpy as np

from scipy.special import gammaln

from .dataset    import TimeSeriesDataset
from .energy     import ResidualCluster
from .utils      import rate_at_least, slow_test

__all__ = [
    'CoefficientMatrix', 'RegimeFit', 'fit_penalized', 'select_gamma_bic', 'residuals_with',
    'gamma_max', 'default_gamma_grid', 'kkt_violation', 'DEFAULT_GRID_SIZE',
]

logger = logging.getLogger(__name__)


DEFAULT_GRID_SIZE  = 50
GRID_DEPTH         = 1e-4
SOLVER_TOLERANCE   = 1e-8
SOLVER_MAX_SWEEPS  = 10_000


#
# Results.
#

@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """ A p x q coefficient matrix, plus an optional unpenalized intercept per response.

    Attributes
    ----------
    values: (p, q) ndarray
        Regressor coefficients, on the regressors' original scale.
    intercept: (q,) ndarray or None
        Per-response intercepts; None for a model without intercept.
    """

    values:    np.ndarray
    intercept: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ValueError(f"coefficients must form a p x q matrix, not a {values.ndim}D array")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

        if self.intercept is not None:
            intercept = np.array(self.intercept, dtype=np.float64, copy=True).reshape(-1)
            if intercept.shape[0] != values.shape[1]:
                raise ValueError(f"expected {values.shape[1]} intercepts, got {intercept.shape[0]}")
            intercept.setflags(write=False)
            object.__setattr__(self, 'intercept', intercept)


    @classmethod
    def zeros(cls, p, q):
        return cls(np.zeros((p, q)))


    @property
    def p(self):
        return self.values.shape[0]

    @property
    def q(self):
        return self.values.shape[1]

    @property
    def support(self):
        """ The (row, column) positions of all nonzero coefficients. """
        return frozenset(zip(*(index.tolist() for index in np.nonzero(self.values))))


    def nonzero_entries(self, regressor_names=None, response_names=None):
        """ Returns the nonzero coefficients as a list of {var, response, value} records. """
        rows, columns = np.nonzero(self.values)

        return [{
            'var':      regressor_names[row] if regressor_names else int(row),
            'response': response_names[column] if response_names else int(column),
            'value':    float(self.values[row, column]),
        } for row, column in zip(rows, columns)]


@dataclass(frozen=True, eq=False)
class RegimeFit:
    """ The selected fit of one segment, together with its residuals.

    Attributes
    ----------
    segment: SegmentView
        The rows that were fit.
    beta: CoefficientMatrix
        The least-squares coefficients on the columns the selected penalty weight kept.
    residuals: ResidualCluster
        ``y_t - x_t' beta`` for every row of the segment.
    gamma: float
        The selected penalty weight.
    bic: float
        The information criterion of the selected fit; ``-inf`` for an exact fit.
    exact_fit: bool
        True if the selected fit reproduces the responses exactly.
    """

    segment:   object
    beta:      CoefficientMatrix
    residuals: ResidualCluster
    gamma:     float
    bic:       float
    exact_fit: bool = False

    @property
    def rss(self):
        return float(np.sum(self.residuals.points ** 2))


#
# Standardized least-squares problems.
#

class _StandardizedProblem:
    """ The sufficient statistics of one segment, with regressors rescaled. """

    def __init__(self, segment, intercept=False, standardize=True):
        if segment.length < 2:
            raise ValueError(f"cannot fit a segment of {segment.length} observation(s)")

        regressors = segment.regressors
        responses  = segment.responses

        self.intercept = intercept
        self.n         = segment.length

        if intercept:
            self.x_center = regressors.mean(axis=0)
            self.y_center = responses.mean(axis=0)
            regressors    = regressors - self.x_center
            responses     = responses - self.y_center
        else:
            self.x_center = np.zeros(regressors.shape[1])
            self.y_center = np.zeros(responses.shape[1])

        if standardize:
            scale = np.sqrt(np.mean(regressors ** 2, axis=0))
        else:
            scale = np.ones(regressors.shape[1])

        # Constant columns (all-zero once centered) take no part in the fit.
        self.active = scale > 0
        self.scale  = np.where(self.active, scale, 1.0)

        design = np.ascontiguousarray(regressors / self.scale)
        self.gram = np.ascontiguousarray(design.T @ design)

        # Each response column is reduced on its own, so a column's fit never depends on its neighbours.
        self.xty = np.empty((design.shape[1], responses.shape[1]))
        self.yty = np.empty(responses.shape[1])
        for column in range(responses.shape[1]):
            target = np.ascontiguousarray(responses[:, column])
            self.xty[:, column] = design.T @ target
            self.yty[column]    = target @ target


    def standardize(self, beta):
        """ Converts original-scale coefficients into this problem's coordinates. """
        return beta.values * self.scale[:, None]


    def unstandardize(self, standardized):
        values = np.where(self.active[:, None], standardized / self.scale[:, None], 0.0)
        intercept = self.y_center - self.x_center @ values if self.intercept else None
        return CoefficientMatrix(values, intercept)


@numba.njit(cache=True, nogil=True)
def _objective(gram, xty, yty, gamma, beta):
    quadratic = 0.0
    linear    = 0.0
    penalty   = 0.0

    for j in range(beta.shape[0]):
        if beta[j] != 0.0:
            row = 0.0
            for k in range(beta.shape[0]):
                row += gram[j, k] * beta[k]
            quadratic += beta[j] * row
        linear  += xty[j] * beta[j]
        penalty += abs(beta[j])

    return yty - 2.0 * linear + quadratic + gamma * penalty


@numba.njit(cache=True, nogil=True)
def _coordinate_descent(gram, xty, yty, gamma, beta, tolerance, max_sweeps, history):
    """ Minimizes one response column's objective in place; returns (sweeps, converged). """

    track     = history.shape[0] > 0
    threshold = 0.5 * gamma

    if track:
        history[0] = _objective(gram, xty, yty, gamma, beta)

    for sweep in range(max_sweeps):
        largest_change = 0.0

        for j in range(beta.shape[0]):
            curvature = gram[j, j]
            if curvature <= 0.0:
                beta[j] = 0.0
                continue

            # Correlation of column j with the partial residual that excludes column j.
            rho = xty[j]
            for k in range(beta.shape[0]):
                rho -= gram[j, k] * beta[k]
            rho += curvature * beta[j]

            if rho > threshold:
                updated = (rho - threshold) / curvature
            elif rho < -threshold:
                updated = (rho + threshold) / curvature
            else:
                updated = 0.0

            change = abs(updated - beta[j])
            if change > largest_change:
                largest_change = change
            beta[j] = updated

        if track:
            history[sweep + 1] = _objective(gram, xty, yty, gamma, beta)

        if largest_change < tolerance:
            return sweep + 1, True

    return max_sweeps, False


def _solve(problem, gamma, start, tolerance, max_sweeps, check_objective):
    """ Solves every response column of a standardized problem; returns standardized coefficients. """

    solution = np.array(start, dtype=np.float64, copy=True)

    for column in range(solution.shape[1]):
        beta    = np.ascontiguousarray(solution[:, column])
        history = np.empty(max_sweeps + 1 if check_objective else 0)
        xty     = np.ascontiguousarray(problem.xty[:, column])

        sweeps, converged = _coordinate_descent(problem.gram, xty, problem.yty[column], float(gamma),
                                                beta, tolerance, max_sweeps, history)
        solution[:, column] = beta

        if not converged:
            logger.warning("coordinate descent hit its %d-sweep cap (gamma=%g, response %d)",
                           max_sweeps, gamma, column)

        if check_objective:
            trajectory = history[:sweeps + 1]
            slack = 1e-10 * max(1.0, abs(trajectory[0]))
            assert np.all(np.diff(trajectory) <= slack), "coordinate descent increased its objective"

    return solution


def _check_gamma(gamma):
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma < 0:
        raise ValueError(f"the penalty weight must be a finite, non-negative number, not {gamma}")
    return gamma


#
# Public operations.
#

def fit_penalized(segment, gamma, intercept=False, standardize=True, warm_start=None,
                  tolerance=SOLVER_TOLERANCE, max_sweeps=SOLVER_MAX_SWEEPS, check_objective=False):
    """ Fits an L1-penalized regression of a segment's responses on its regressors.

    Parameters
    ----------
    segment: SegmentView
        The rows to fit; at least two.
    gamma: float
        The penalty weight, in the units of the rescaled problem.
    intercept: bool
        Whether to fit an unpenalized intercept per response.
    standardize: bool
        Whether to rescale the regressors before fitting.
    warm_start: CoefficientMatrix, optional
        Where to start the descent.
    tolerance: float
        Descent stops once no coefficient moves by more than this in a sweep.
    max_sweeps: int
        Upper bound on the number of sweeps per response.
    check_objective: bool
        Assert after every sweep that the objective did not increase.
    """
    gamma   = _check_gamma(gamma)
    problem = _StandardizedProblem(segment, intercept, standardize)

    if warm_start is None:
        start = np.zeros_like(problem.xty)
    else:
        start = problem.standardize(warm_start)

    return problem.unstandardize(_solve(problem, gamma, start, tolerance, max_sweeps, check_objective))


def residuals_with(segment, beta, regime_index=0):
    """ Returns the residuals ``y_t - x_t' beta`` over a segment, using any coefficients.

    The coefficients need not come from the same segment: applying one segment's fit
    to another gives the cross-applied residuals used by the location tests.
    """
    if beta.values.shape != (segment.dataset.p, segment.dataset.q):
        raise ValueError(f"coefficients of shape {beta.values.shape} do not fit a dataset with "
                         f"p={segment.dataset.p} regressors and q={segment.dataset.q} responses")

    residuals = segment.responses - segment.regressors @ beta.values
    if beta.intercept is not None:
        residuals = residuals - beta.intercept

    return ResidualCluster(residuals, regime_index)


def gamma_max(segment, intercept=False, standardize=True):
    """ Returns the smallest penalty weight whose fit is identically zero. """
    problem = _StandardizedProblem(segment, intercept, standardize)
    return 2.0 * float(np.max(np.abs(problem.xty))) if problem.xty.size else 0.0


def default_gamma_grid(segment, size=DEFAULT_GRID_SIZE, intercept=False, standardize=True):
    """ Returns ``size`` log-spaced penalty weights from ``gamma_max`` down to 1e-4 of it. """

    if size < 1:
        raise ValueError(f"a penalty grid needs at least one point, not {size}")

    upper = gamma_max(segment, intercept, standardize)
    if upper == 0:
        return np.zeros(1)

    return np.geomspace(upper, upper * GRID_DEPTH, size)


def _dimension_weight(n, p):
    """ The extended-BIC weight ``xi``; zero unless ``p > sqrt(n)``. """
    if p < 2 or n < 2:
        return 0.0
    return min(1.0, max(0.0, 1.0 - np.log(n) / (2.0 * np.log(p))))


def _bic(rss, n, q, support_sizes, p=1):
    if rss <= 0:
        return float('-inf')

    support_sizes = np.asarray(support_sizes)
    bic = n * q * np.log(rss / (n * q)) + support_sizes.sum() * np.log(n)

    weight = _dimension_weight(n, p)
    if weight > 0:
        log_choices = gammaln(p + 1) - gammaln(support_sizes + 1) - gammaln(p - support_sizes + 1)
        bic += 2.0 * weight * float(log_choices.sum())

    return float(bic)


def _refit_on_support(problem, standardized):
    """ Least-squares coefficients of every response on the columns its penalized fit kept. """
    refit = np.zeros_like(standardized)

    for column in range(standardized.shape[1]):
        kept = np.flatnonzero(standardized[:, column])
        if kept.size:
            gram = problem.gram[np.ix_(kept, kept)]
            refit[kept, column] = np.linalg.lstsq(gram, problem.xty[kept, column], rcond=None)[0]

    return refit


def select_gamma_bic(segment, gamma_grid=None, grid_size=DEFAULT_GRID_SIZE, intercept=False,
                     standardize=True, regime_index=0):
    """ Walks a grid of penalty weights; returns the fit with the lowest BIC.

    Each penalty weight selects a set of columns; the fit reported for it is the
    least-squares refit on those columns. The criterion is
    ``n q ln(RSS / (n q)) + |support| ln(n)`` for a segment of ``n`` rows, plus the
    extended-BIC term when the regressors outnumber ``sqrt(n)``. The walk stops before
    any response keeps more than ``n // 2`` columns. Ties go to the larger penalty weight
    (the sparser model). A fit with zero residual sum of squares scores ``-inf`` and is
    flagged as exact.
    """
    problem = _StandardizedProblem(segment, intercept, standardize)

    if gamma_grid is None:
        upper = 2.0 * float(np.max(np.abs(problem.xty))) if problem.xty.size else 0.0
        gamma_grid = np.geomspace(upper, upper * GRID_DEPTH, grid_size) if upper > 0 else np.zeros(1)

    grid = sorted({_check_gamma(gamma) for gamma in gamma_grid}, reverse=True)
    if not grid:
        raise ValueError("the penalty grid is empty")

    n, p, q     = segment.length, segment.dataset.p, segment.dataset.q
    max_support = max(1, n // 2)

    standardized = np.zeros_like(problem.xty)
    best = None

    for gamma in grid:
        standardized = _solve(problem, gamma, standardized, SOLVER_TOLERANCE, SOLVER_MAX_SWEEPS, False)
        sizes = np.count_nonzero(standardized, axis=0)

        if best is not None and sizes.max(initial=0) > max_support:
            logger.debug("segment %s: stopping the path at gamma=%g, past %d columns", segment, gamma, max_support)
            break

        beta      = problem.unstandardize(_refit_on_support(problem, standardized))
        residuals = residuals_with(segment, beta, regime_index)
        rss       = float(np.sum(residuals.points ** 2))
        bic       = _bic(rss, n, q, sizes, p)

        # Strict comparison: on ties, the earlier (larger) penalty weight stays selected.
        if best is None or bic < best.bic:
            best = RegimeFit(segment, beta, residuals, gamma, bic, exact_fit=(rss <= 0))

    logger.debug("segment %s: selected gamma=%g with %d nonzero coefficient(s)",
                 segment, best.gamma, len(best.beta.support))
    return best


def kkt_violation(segment, beta, gamma, intercept=False, standardize=True):
    """ Returns the largest violation of the lasso optimality conditions by ``beta``.

    In the rescaled problem, a zero coefficient needs ``|2 z_j' r| <= gamma``; a nonzero
    one needs ``2 z_j' r = gamma * sign(b_j)``.
    """
    gamma        = _check_gamma(gamma)
    problem      = _StandardizedProblem(segment, intercept, standardize)
    standardized = problem.standardize(beta)
    gradient     = 2.0 * (problem.xty - problem.gram @ standardized)

    zero      = standardized == 0
    violation = np.where(zero,
                         np.maximum(np.abs(gradient) - gamma, 0.0),
                         np.abs(gradient - gamma * np.sign(standardized)))
    return float(violation.max()) if violation.size else 0.0



#
# Tests.
#

def _regression_dataset(rng, n, p, beta, noise=0.0, q=None):
    beta = np.asarray(beta, dtype=float).reshape(p, -1)
    x = rng.standard_normal((n, p))
    y = x @ beta + noise * rng.standard_normal((n, beta.shape[1]))
    return TimeSeriesDataset(y, x)


class PenalizedFitTest(unittest.TestCase):

    def test_full_shrinkage(self):
        dataset = _regression_dataset(np.random.default_rng(0), 50, 4, [1.0, -2.0, 0.0, 0.5], noise=0.1)
        segment = dataset.segment(0, 49)

        fit = fit_penalized(segment, gamma_max(segment))
        self.assertEqual(fit.support, frozenset())
        self.assertEqual(fit_penalized(segment, 10 * gamma_max(segment)).support, frozenset())

    def test_unpenalized_fit_is_least_squares(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            dataset = _regression_dataset(rng, 80, 5, rng.standard_normal((5, 2)), noise=0.5)
            segment = dataset.segment(0, 79)

            expected = np.linalg.lstsq(dataset.regressors, dataset.responses, rcond=None)[0]
            np.testing.assert_allclose(fit_penalized(segment, 0.0).values, expected, rtol=0, atol=1e-6)

    def test_intercept_is_unpenalized(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((60, 3))
        y = 4.0 + x @ np.array([[1.0], [0.0], [2.0]])
        segment = TimeSeriesDataset(y, x).segment(0, 59)

        fit = fit_penalized(segment, 0.0, intercept=True)
        np.testing.assert_allclose(fit.intercept, [4.0], atol=1e-6)
        np.testing.assert_allclose(residuals_with(segment, fit).points, 0.0, atol=1e-6)

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(3)
        truth   = np.array([1.5, 0.0, -1.0, 0.0, 0.0, 2.0, 0.0, 0.0])
        dataset = _regression_dataset(rng, 100, 8, truth)
        segment = dataset.segment(0, 99)

        fit = fit_penalized(segment, GRID_DEPTH * gamma_max(segment))
        self.assertTrue({(0, 0), (2, 0), (5, 0)} <= fit.support)
        np.testing.assert_allclose(fit.values[:, 0], truth, atol=1e-3)

    def test_optimality_conditions(self):
        rng = np.random.default_rng(4)

        for instance in range(100):
            p       = int(rng.integers(2, 12))
            dataset = _regression_dataset(rng, int(rng.integers(20, 120)), p,
                                          rng.standard_normal(p) * (rng.random(p) < 0.5), noise=0.3)
            segment = dataset.segment(0, dataset.T - 1)
            gamma   = gamma_max(segment) * 10 ** rng.uniform(-4, 0)

            fit = fit_penalized(segment, gamma, tolerance=1e-12)
            self.assertLessEqual(kkt_violation(segment, fit, gamma), 1e-6, f"instance {instance}")

    def test_objective_never_increases(self):
        rng = np.random.default_rng(5)

        for _ in range(20):
            dataset = _regression_dataset(rng, 40, 10, rng.standard_normal(10), noise=1.0)
            segment = dataset.segment(0, 39)
            fit_penalized(segment, 0.01 * gamma_max(segment), check_objective=True)

    def test_responses_are_fit_independently(self):
        rng = np.random.default_rng(6)
        dataset = _regression_dataset(rng, 70, 6, rng.standard_normal((6, 3)), noise=0.2)
        joint   = fit_penalized(dataset.segment(0, 69), 5.0)

        for column in range(3):
            alone  = TimeSeriesDataset(dataset.responses[:, [column]], dataset.regressors)
            single = fit_penalized(alone.segment(0, 69), 5.0)
            np.testing.assert_array_equal(joint.values[:, column], single.values[:, 0])

    def test_rejects_bad_input(self):
        dataset = _regression_dataset(np.random.default_rng(7), 10, 2, [1.0, 1.0])

        with self.assertRaises(ValueError):
            fit_penalized(dataset.segment(3, 3), 1.0)
        with self.assertRaises(ValueError):
            fit_penalized(dataset.segment(0, 9), -1.0)
        with self.assertRaises(ValueError):
            fit_penalized(dataset.segment(0, 9), float('nan'))


class ResidualTest(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(8)
        self.truth   = rng.standard_normal((4, 2))
        self.dataset = _regression_dataset(rng, 30, 4, self.truth)
        self.segment = self.dataset.segment(5, 24)

    def test_zero_coefficients_give_raw_responses(self):
        residuals = residuals_with(self.segment, CoefficientMatrix.zeros(4, 2))
        np.testing.assert_array_equal(residuals.points, self.segment.responses)

    def test_generating_coefficients_give_zero_residuals(self):
        residuals = residuals_with(self.segment, CoefficientMatrix(self.truth))
        np.testing.assert_allclose(residuals.points, 0.0, atol=1e-12)

    def test_matches_dense_product(self):
        beta = np.random.default_rng(9).standard_normal((4, 2))
        expected = self.dataset.responses[5:25] - self.dataset.regressors[5:25] @ beta
        np.testing.assert_allclose(residuals_with(self.segment, CoefficientMatrix(beta)).points, expected, atol=1e-12)

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            residuals_with(self.segment, CoefficientMatrix.zeros(3, 2))


class BicSelectionTest(unittest.TestCase):

    def test_singleton_grid(self):
        dataset = _regression_dataset(np.random.default_rng(10), 40, 3, [1.0, 0.0, 1.0], noise=0.1)
        fit = select_gamma_bic(dataset.segment(0, 39), [0.7])

        self.assertEqual(fit.gamma, 0.7)
        self.assertEqual(len(fit.residuals), 40)

    def test_ties_prefer_the_sparser_model(self):
        dataset = _regression_dataset(np.random.default_rng(11), 40, 3, [1.0, 0.0, 1.0], noise=0.1)
        segment = dataset.segment(0, 39)
        upper   = gamma_max(segment)

        self.assertEqual(select_gamma_bic(segment, [upper, 2 * upper]).gamma, 2 * upper)

    def test_grid_order_does_not_matter(self):
        dataset = _regression_dataset(np.random.default_rng(12), 60, 5, [1.0, 1.0, 1.0, 0.0, 0.0], noise=0.3)
        segment = dataset.segment(0, 59)
        grid    = list(default_gamma_grid(segment, 20))

        forward = select_gamma_bic(segment, grid)
        shuffled = select_gamma_bic(segment, list(np.random.default_rng(0).permutation(grid)))
        self.assertEqual(forward.gamma, shuffled.gamma)
        np.testing.assert_array_equal(forward.beta.values, shuffled.beta.values)

    def test_exact_fit_is_flagged(self):
        x = np.eye(3)
        segment = TimeSeriesDataset(np.zeros((3, 1)), x).segment(0, 2)
        fit = select_gamma_bic(segment)

        self.assertTrue(fit.exact_fit)
        self.assertEqual(fit.bic, float('-inf'))

    def test_residuals_are_recomputable(self):
        dataset = _regression_dataset(np.random.default_rng(13), 50, 4, [0.0, 2.0, 0.0, -1.0], noise=0.2)
        segment = dataset.segment(10, 49)
        fit     = select_gamma_bic(segment)

        np.testing.assert_array_equal(fit.residuals.points, residuals_with(segment, fit.beta).points)

    def test_selected_fit_is_least_squares_on_its_support(self):
        dataset = _regression_dataset(np.random.default_rng(17), 60, 5, [1.0, 1.0, 1.0, 0.0, 0.0], noise=0.3)
        segment = dataset.segment(0, 59)
        fit     = select_gamma_bic(segment)

        kept = sorted(row for row, _ in fit.beta.support)
        expected, *_ = np.linalg.lstsq(segment.regressors[:, kept], segment.responses[:, 0], rcond=None)
        np.testing.assert_allclose(fit.beta.values[kept, 0], expected, rtol=1e-8, atol=1e-10)

    def test_extended_term_only_for_wide_segments(self):
        self.assertEqual(_dimension_weight(60, 5), 0.0)
        self.assertAlmostEqual(_bic(2.0, 60, 1, [3], p=5), 60 * np.log(2.0 / 60) + 3 * np.log(60))
        self.assertGreater(_dimension_weight(50, 100), 0.5)
        self.assertGreater(_bic(2.0, 50, 1, [3], p=100), _bic(2.0, 50, 1, [3], p=5))

    def _support_hits(self, trials, n, beta, noise, expected_support, seed):
        rng  = np.random.default_rng(seed)
        hits = 0

        for _ in range(trials):
            dataset = _regression_dataset(rng, n, len(beta), beta, noise=noise)
            fit = select_gamma_bic(dataset.segment(0, n - 1))
            hits += fit.beta.support == expected_support

        return hits

    def test_pure_noise_selects_nothing(self):
        hits = self._support_hits(100, 600, [0.0] * 5, 1.0, frozenset(), seed=14)
        self.assertTrue(rate_at_least(hits, 100, 0.9), f"{hits} of 100 empty supports")

    def test_first_regime_of_the_low_dimensional_models(self):
        # Regime one of the low-dimensional benchmark models: 60 rows, error variance 0.1.
        hits = self._support_hits(100, 60, [1.0, 1.0, 1.0, 0.0, 0.0], np.sqrt(0.1),
                                  frozenset({(0, 0), (1, 0), (2, 0)}), seed=15)
        self.assertTrue(rate_at_least(hits, 100, 0.9), f"{hits} of 100 exact supports")

    def test_wide_segments_stay_sparse(self):
        # One splitting-search segment of the hundred-regressor models: 50 rows, five weighted columns.
        rng    = np.random.default_rng(18)
        beta   = np.zeros(100)
        beta[[16, 41, 66, 87, 90]] = 1.0
        signal = frozenset((row, 0) for row in (16, 41, 66, 87, 90))

        covered, sizes = 0, []
        for _ in range(20):
            fit = select_gamma_bic(_regression_dataset(rng, 50, 100, beta, noise=0.1).segment(0, 49))

            self.assertFalse(fit.exact_fit)
            covered += signal <= fit.beta.support
            sizes.append(len(fit.beta.support))

        self.assertGreaterEqual(covered, 18)
        self.assertLessEqual(np.mean(sizes), 8)

    @slow_test
    def test_first_regime_campaign(self):
        rng    = np.random.default_rng(16)
        signal = frozenset({(0, 0), (1, 0), (2, 0)})
        exact = covered = 0

        for _ in range(400):
            dataset = _regression_dataset(rng, 60, 5, [1.0, 1.0, 1.0, 0.0, 0.0], noise=np.sqrt(0.1))
            support = select_gamma_bic(dataset.segment(0, 59)).beta.support
            exact   += support == signal
            covered += signal <= support

        self.assertEqual(covered, 400)
        self.assertTrue(rate_at_least(exact, 400, 0.9), f"{exact} of 400 exact supports")


if __name__ == "__main__":
    unittest.main()
