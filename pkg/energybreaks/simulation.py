#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Benchmark data-generating processes, evaluation metrics, and replicated benchmark runs.

Every benchmark model is a regression with four regimes over a 600-step timeline,
switching at steps 60, 300 and 480:

    y_t = x_t' beta_j + u_t + v_t

with standard normal regressors ``x_t``, errors ``u_t`` drawn from a normal or a
Student-t distribution, and outliers ``v_t`` that are nonzero with a small
probability. Models (1) through (8) have five regressors; (9) and (10) have one
hundred, five of which carry any weight. Each model exists with a single response,
and with three.
"""

import io
import logging
import unittest

from collections import Counter
from dataclasses import dataclass, field, replace
from typing      import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .dataset      import DatasetFormatError, TimeSeriesDataset
from .regression   import CoefficientMatrix, residuals_with
from .segmentation import DetectorConfig, detect
from .utils        import TimeBudgetExceeded, WorkPool, derive_seed, rate_at_least, slow_test

__all__ = [
    'MODEL_IDS', 'TRUE_CHANGE_POINTS', 'TOTAL_T', 'ModelSpec', 'generate', 'generate_components',
    'r_statistic', 'fraction_error', 'ReplicateOutcome', 'BenchmarkRow', 'BenchmarkReport',
    'run_benchmark', 'read_baselines', 'FALLBACK_PENALTY_R', 'HISTOGRAM_BINS',
]

logger = logging.getLogger(__name__)


#
# Model definitions.
#

MODEL_IDS          = tuple(range(1, 11))
TRUE_CHANGE_POINTS = (60, 300, 480)
TOTAL_T            = 600

NOISE_SCALE        = 0.1
OUTLIER_SCALE      = 10.0
STUDENT_T_DOF      = 3

# 0-based positions of the weighted regressors in the hundred-regressor models.
HIGH_DIMENSIONAL_SUPPORT = (16, 41, 66, 87, 90)

# Leading coefficients of each regime. The five-regressor models weight the first three
# regressors; the hundred-regressor ones weight HIGH_DIMENSIONAL_SUPPORT, of which the
# last two always carry a one.
_SMALL_JUMPS = ((1, 1, 1), (2, 1, 1), (1, 1, 1), (1, 2, 1))
_LARGE_JUMPS = ((1, 1, 1), (1, 3, 1), (3, 3, 1), (5, 3, 1))

_UNIVARIATE_LEADS = {
    'small':  [_SMALL_JUMPS],
    'large':  [_LARGE_JUMPS],
    'sparse': [_LARGE_JUMPS],
}

_MULTIVARIATE_LEADS = {
    'small': [
        ((1, 1, 1), (2, 1, 1), (2, 1, 1), (2, 1, 1)),
        ((2, 1, 1), (2, 1, 1), (1, 1, 1), (1, 1, 1)),
        ((1, 1, 1), (1, 1, 1), (1, 1, 1), (1, 2, 1)),
    ],
    'large': [
        ((1, 1, 1), (1, 3, 1), (1, 3, 1), (5, 3, 1)),
        ((1, 3, 1), (1, 3, 1), (3, 3, 1), (1, 3, 1)),
        ((3, 3, 1), (3, 3, 1), (3, 3, 1), (3, 3, 1)),
    ],
    'sparse': [
        ((1, 1, 1), (1, 3, 1), (1, 3, 1), (1, 3, 1)),
        ((1, 3, 1), (1, 3, 1), (3, 3, 1), (3, 3, 1)),
        ((3, 3, 1), (3, 3, 1), (3, 3, 1), (5, 3, 1)),
    ],
}

# model id -> (coefficient family, error distribution, outlier probability)
_MODEL_TABLE = {
    1:  ('small',  'gaussian',  0.0),
    2:  ('small',  'student_t', 0.0),
    3:  ('small',  'gaussian',  0.1),
    4:  ('small',  'student_t', 0.1),
    5:  ('large',  'gaussian',  0.0),
    6:  ('large',  'student_t', 0.0),
    7:  ('large',  'gaussian',  0.1),
    8:  ('large',  'student_t', 0.1),
    9:  ('sparse', 'gaussian',  0.0),
    10: ('sparse', 'gaussian',  0.1),
}


def _regime_coefficients(family, p, leads_per_response, regime):
    values = np.zeros((p, len(leads_per_response)))

    for column, leads in enumerate(leads_per_response):
        lead = leads[regime]
        if family == 'sparse':
            values[list(HIGH_DIMENSIONAL_SUPPORT), column] = (*lead, 1, 1)
        else:
            values[:3, column] = lead

    return CoefficientMatrix(values)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """ One benchmark data-generating process.

    Attributes
    ----------
    model_id: int
        Which of the ten benchmark models this is.
    q, p: int
        Response and regressor counts.
    betas: tuple of CoefficientMatrix
        One p x q coefficient matrix per regime.
    error_dist: str
        ``"gaussian"`` or ``"student_t"``.
    outlier_prob: float
        The chance that a step carries an outlier.
    noise_parameterization: str
        Whether the second parameter of the error and outlier normals is a ``"variance"``
        or a standard deviation (``"std"``).
    outlier_mode: str
        ``"per_step"``: one outlier draw per step, shared by every response;
        ``"per_component"``: each response draws its own.
    zero_noise: bool
        Suppress errors and outliers entirely.
    """

    model_id:               int
    q:                      int
    p:                      int
    betas:                  Tuple[CoefficientMatrix, ...]
    error_dist:             str
    outlier_prob:           float
    true_change_points:     Tuple[int, ...] = TRUE_CHANGE_POINTS
    total_T:                int   = TOTAL_T
    noise_scale:            float = NOISE_SCALE
    outlier_scale:          float = OUTLIER_SCALE
    noise_parameterization: str   = 'variance'
    outlier_mode:           str   = 'per_step'
    zero_noise:             bool  = False

    def __post_init__(self):
        if len(self.betas) != len(self.true_change_points) + 1:
            raise ValueError(f"{len(self.true_change_points)} change points need "
                             f"{len(self.true_change_points) + 1} coefficient matrices, not {len(self.betas)}")
        if any(beta.values.shape != (self.p, self.q) for beta in self.betas):
            raise ValueError(f"every coefficient matrix must be {self.p} x {self.q}")
        if self.error_dist not in ('gaussian', 'student_t'):
            raise ValueError(f"unknown error distribution {self.error_dist!r}")
        if self.noise_parameterization not in ('variance', 'std'):
            raise ValueError(f"unknown noise parameterization {self.noise_parameterization!r}")
        if self.outlier_mode not in ('per_step', 'per_component'):
            raise ValueError(f"unknown outlier mode {self.outlier_mode!r}")
        if not 0 <= self.outlier_prob <= 1:
            raise ValueError(f"the outlier probability must lie in [0, 1], not {self.outlier_prob}")

        boundaries = (0, *self.true_change_points, self.total_T)
        if any(stop <= start for start, stop in zip(boundaries[:-1], boundaries[1:])):
            raise ValueError(f"change points {self.true_change_points} do not lie strictly within [0, {self.total_T})")


    @classmethod
    def from_table(cls, model_id, multivariate=False, **overrides):
        """ Returns benchmark model ``model_id``, with one response or with three. """

        if model_id not in _MODEL_TABLE:
            raise ValueError(f"unknown benchmark model {model_id}; expected one of {MODEL_IDS}")

        family, error_dist, outlier_prob = _MODEL_TABLE[model_id]
        leads = (_MULTIVARIATE_LEADS if multivariate else _UNIVARIATE_LEADS)[family]
        p     = 100 if family == 'sparse' else 5

        return cls(
            model_id     = model_id,
            q            = len(leads),
            p            = p,
            betas        = tuple(_regime_coefficients(family, p, leads, regime) for regime in range(4)),
            error_dist   = error_dist,
            outlier_prob = outlier_prob,
            **overrides
        )


    @property
    def name(self):
        return f"{self.model_id}" if self.q == 1 else f"{self.model_id}mv"

    @property
    def k(self):
        return len(self.true_change_points)

    def _deviation(self, scale):
        return np.sqrt(scale) if self.noise_parameterization == 'variance' else scale


    def with_timeline(self, total_T):
        """ Returns this model stretched to ``total_T`` steps, keeping the change points' fractions. """
        points = tuple(int(round(point * total_T / self.total_T)) for point in self.true_change_points)
        return replace(self, total_T=total_T, true_change_points=points)


    def truth(self):
        """ Returns the ground truth as JSON-ready values. """
        return {
            'model':         self.model_id,
            'q':             self.q,
            'p':             self.p,
            'total_T':       self.total_T,
            'change_points': list(self.true_change_points),
            'betas':         [beta.values.tolist() for beta in self.betas],
            'error_dist':    self.error_dist,
            'outlier_prob':  self.outlier_prob,
        }


#
# Generation.
#

def generate_components(spec, seed):
    """ Draws one dataset from a model; returns (dataset, errors, outliers).

    The errors and outliers are returned separately so their distributions can be checked.
    """
    rng = np.random.default_rng(int(seed))
    T, p, q = spec.total_T, spec.p, spec.q

    regressors = rng.standard_normal((T, p))
    responses  = np.empty((T, q))

    boundaries = (0, *spec.true_change_points, T)
    for beta, start, stop in zip(spec.betas, boundaries[:-1], boundaries[1:]):
        responses[start:stop] = regressors[start:stop] @ beta.values

    if spec.zero_noise:
        errors   = np.zeros((T, q))
        outliers = np.zeros((T, q))
    else:
        if spec.error_dist == 'gaussian':
            errors = rng.normal(0.0, spec._deviation(spec.noise_scale), (T, q))
        else:
            errors = stats.t.rvs(STUDENT_T_DOF, size=(T, q), random_state=rng)

        columns  = 1 if spec.outlier_mode == 'per_step' else q
        present  = rng.random((T, columns)) < spec.outlier_prob
        draws    = rng.normal(0.0, spec._deviation(spec.outlier_scale), (T, columns))
        outliers = np.broadcast_to(np.where(present, draws, 0.0), (T, q)).copy()

    dataset = TimeSeriesDataset(responses + errors + outliers, regressors)
    return dataset, errors, outliers


def generate(spec, seed):
    """ Draws one dataset from a benchmark model; the same seed always yields the same data. """
    return generate_components(spec, seed)[0]


#
# Metrics.
#

def r_statistic(true_points, estimated_points, penalty_r):
    """ Returns the prediction error of an estimate of the change points.

    Points are paired by rank; the paired location errors are summed, and every
    missing or surplus point costs ``penalty_r``.
    """
    true_points      = sorted(true_points)
    estimated_points = sorted(estimated_points)

    paired = sum(abs(truth - estimate) for truth, estimate in zip(true_points, estimated_points))
    return paired + penalty_r * abs(len(true_points) - len(estimated_points))


def fraction_error(true_points, estimated_points, total_T):
    """ Returns the summed error of the rank-paired change points, as fractions of the timeline. """
    return sum(abs(truth - estimate) / total_T
               for truth, estimate in zip(sorted(true_points), sorted(estimated_points)))


def _largest_location_error(true_points, estimated_points):
    errors = [abs(truth - estimate) for truth, estimate in zip(sorted(true_points), sorted(estimated_points))]
    return max(errors, default=None)


#
# Benchmark runs.
#

FALLBACK_PENALTY_R = 40
HISTOGRAM_BINS     = ('bin_le_m3', 'bin_m2', 'bin_m1', 'bin_0', 'bin_1', 'bin_2', 'bin_ge_3')
REPORT_COLUMNS     = ('model', 'algorithm', *HISTOGRAM_BINS, 'mean_R', 'replicates')


@dataclass(frozen=True)
class ReplicateOutcome:
    """ One detector run on one replicate; ``change_points`` is None if the run failed. """

    model:         str
    algorithm:     str
    replicate:     int
    seed:          Optional[int]
    change_points: Optional[Tuple[int, ...]]
    failure:       Optional[str] = None


@dataclass(frozen=True)
class BenchmarkRow:
    """ Aggregated outcomes of one algorithm on one model.

    ``histogram`` maps each bin of ``k_hat - k`` to a percentage of the completed runs;
    it and ``mean_R`` are None when no run completed.
    """

    model:      str
    algorithm:  str
    histogram:  Optional[dict]
    mean_R:     Optional[float]
    replicates: int
    failures:   int


@dataclass
class BenchmarkReport:
    """ The outcome of a benchmark campaign, shaped like a table of k_hat - k distributions. """

    rows:      list
    penalty_r: float
    base_seed: int
    outcomes:  list = field(default_factory=list)

    def to_frame(self):
        records = []
        for row in self.rows:
            histogram = row.histogram or {}
            records.append({
                'model':      row.model,
                'algorithm':  row.algorithm,
                **{name: histogram.get(name) for name in HISTOGRAM_BINS},
                'mean_R':     row.mean_R,
                'replicates': row.replicates,
            })

        return pd.DataFrame.from_records(records, columns=list(REPORT_COLUMNS))


    def write_csv(self, path):
        """ Writes one row per (model, algorithm); runs with no completed replicate read ``n/a``. """
        self.to_frame().to_csv(path, index=False, na_rep="n/a", lineterminator="\n")


    def as_dict(self):
        return {
            'penalty_r': self.penalty_r,
            'base_seed': self.base_seed,
            'rows': [{
                'model':      row.model,
                'algorithm':  row.algorithm,
                'histogram':  row.histogram,
                'mean_R':     row.mean_R,
                'replicates': row.replicates,
                'failures':   row.failures,
            } for row in self.rows],
            'outcomes': [{
                'model':         outcome.model,
                'algorithm':     outcome.algorithm,
                'replicate':     outcome.replicate,
                'seed':          outcome.seed,
                'change_points': None if outcome.change_points is None else list(outcome.change_points),
                'failure':       outcome.failure,
            } for outcome in self.outcomes],
        }


def _histogram_bin(difference):
    return HISTOGRAM_BINS[min(max(difference, -3), 3) + 3]


def _algorithm_names(algorithms):
    counts, names = Counter(), []

    for config in algorithms:
        counts[config.algorithm] += 1
        names.append(config.algorithm if counts[config.algorithm] == 1 else f"{config.algorithm}#{counts[config.algorithm]}")

    return names


def _penalty_r(outcomes, truths):
    """ The largest paired location error of any completed run; the fallback if fewer than two methods ran. """

    if len({outcome.algorithm for outcome in outcomes}) < 2:
        return FALLBACK_PENALTY_R

    errors = [_largest_location_error(truths[outcome.model], outcome.change_points)
              for outcome in outcomes if outcome.change_points is not None]
    errors = [error for error in errors if error is not None]

    return max(errors) if errors else FALLBACK_PENALTY_R


def read_baselines(path):
    """ Reads change points found by external methods.

    The file has columns ``model``, ``algorithm``, ``replicate`` and ``change_points``;
    the latter holds ``;``-separated indices, nothing for no change points, or ``n/a``
    for a failed run.
    """
    try:
        frame = pd.read_csv(path, dtype={'model': str, 'algorithm': str, 'change_points': str},
                            keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise DatasetFormatError(f"could not read baselines from {path}: {error}") from error

    missing = {'model', 'algorithm', 'replicate', 'change_points'} - set(frame.columns)
    if missing:
        raise DatasetFormatError(f"{path} lacks the column(s) {', '.join(sorted(missing))}")

    outcomes = []
    for record in frame.itertuples(index=False):
        text = record.change_points.strip()

        if text.lower() == "n/a":
            points, failure = None, "n/a"
        else:
            try:
                points = tuple(sorted(int(value) for value in text.split(";") if value.strip()))
            except ValueError as error:
                raise DatasetFormatError(f"{path}: unreadable change points {text!r}") from error
            failure = None

        outcomes.append(ReplicateOutcome(record.model, record.algorithm, int(record.replicate), None, points, failure))

    return outcomes


def _run_replicate(task):
    spec, replicate, base_seed, named_algorithms = task

    data_seed = derive_seed(base_seed, spec.model_id, spec.q, replicate)
    dataset   = generate(spec, data_seed)
    outcomes  = []

    for name, config in named_algorithms:
        run_seed = derive_seed(base_seed, spec.model_id, spec.q, replicate, 1)
        try:
            with WorkPool(threads=1) as pool:
                result = detect(dataset, config.with_seed(run_seed), pool=pool)
            outcomes.append(ReplicateOutcome(spec.name, name, replicate, data_seed, tuple(result.change_points)))
        except TimeBudgetExceeded:
            logger.warning("%s ran out of time on model %s, replicate %d", name, spec.name, replicate)
            outcomes.append(ReplicateOutcome(spec.name, name, replicate, data_seed, None, "timeout"))
        except Exception as error:
            logger.warning("%s failed on model %s, replicate %d: %s", name, spec.name, replicate, error)
            outcomes.append(ReplicateOutcome(spec.name, name, replicate, data_seed, None, str(error)))

    return outcomes


def run_benchmark(models, algorithms, replicates, base_seed=0, baselines=(), pool=None):
    """ Runs every algorithm on ``replicates`` datasets drawn from each model.

    Parameters
    ----------
    models: sequence of ModelSpec
    algorithms: sequence of DetectorConfig
        Named after their algorithm; repeated algorithms get a ``#n`` suffix.
    replicates: int
        Datasets per model; every algorithm sees the same datasets.
    base_seed: int
        Every dataset and detector seed derives from this, the model and the replicate index.
    baselines: sequence of ReplicateOutcome
        Results of external methods, merged into the report.
    pool: WorkPool, optional
        Runs replicates in parallel.

    Returns
    -------
    BenchmarkReport
        Failed or timed-out runs are counted as missing rather than aborting the campaign.
    """
    if replicates < 1:
        raise ValueError(f"a benchmark needs at least one replicate, not {replicates}")

    models           = list(models)
    named_algorithms = list(zip(_algorithm_names(algorithms), algorithms))
    truths           = {spec.name: spec.true_change_points for spec in models}

    unknown = {outcome.model for outcome in baselines} - set(truths)
    if unknown:
        raise DatasetFormatError(f"baselines refer to models that were not run: {', '.join(sorted(unknown))}")

    pool  = pool or WorkPool(threads=1)
    tasks = [(spec, replicate, base_seed, named_algorithms) for spec in models for replicate in range(replicates)]

    outcomes = [outcome for batch in pool.map(_run_replicate, tasks) for outcome in batch]
    outcomes.extend(baselines)

    penalty_r = _penalty_r(outcomes, truths)

    groups = {}
    for outcome in outcomes:
        groups.setdefault((outcome.model, outcome.algorithm), []).append(outcome)

    rows = []
    for (model, algorithm), group in groups.items():
        completed = [outcome for outcome in group if outcome.change_points is not None]
        truth     = truths[model]

        histogram = mean_R = None
        if completed:
            counts    = Counter(_histogram_bin(len(outcome.change_points) - len(truth)) for outcome in completed)
            histogram = {name: 100.0 * counts[name] / len(completed) for name in HISTOGRAM_BINS}
            mean_R    = float(np.mean([r_statistic(truth, outcome.change_points, penalty_r) for outcome in completed]))

        rows.append(BenchmarkRow(model, algorithm, histogram, mean_R, len(group), len(group) - len(completed)))
        logger.info("model %s, %s: %d replicate(s), mean R %s", model, algorithm, len(group), mean_R)

    return BenchmarkReport(rows, penalty_r, base_seed, outcomes)



class ModelSpecTest(unittest.TestCase):

    def test_first_model(self):
        spec = ModelSpec.from_table(1)

        self.assertEqual((spec.p, spec.q, spec.k), (5, 1, 3))
        self.assertEqual(spec.true_change_points, (60, 300, 480))
        expected = [(1, 1, 1, 0, 0), (2, 1, 1, 0, 0), (1, 1, 1, 0, 0), (1, 2, 1, 0, 0)]
        for beta, row in zip(spec.betas, expected):
            np.testing.assert_array_equal(beta.values[:, 0], row)

    def test_sparse_models(self):
        spec = ModelSpec.from_table(9)
        self.assertEqual(spec.p, 100)

        last = spec.betas[3].values[:, 0]
        self.assertEqual(sorted(np.flatnonzero(last)), [16, 41, 66, 87, 90])
        np.testing.assert_array_equal(last[[16, 41, 66, 87, 90]], [5, 3, 1, 1, 1])

    def test_multivariate_models(self):
        spec = ModelSpec.from_table(5, multivariate=True)

        self.assertEqual(spec.q, 3)
        np.testing.assert_array_equal(spec.betas[3].values[:3, :].T, [[5, 3, 1], [1, 3, 1], [3, 3, 1]])
        self.assertEqual(spec.name, "5mv")

    def test_table_attributes(self):
        self.assertEqual(ModelSpec.from_table(4).error_dist, 'student_t')
        self.assertEqual(ModelSpec.from_table(10).outlier_prob, 0.1)

        with self.assertRaises(ValueError):
            ModelSpec.from_table(11)


class GenerationTest(unittest.TestCase):

    def test_shapes(self):
        self.assertEqual(generate(ModelSpec.from_table(1), 0).responses.shape, (600, 1))
        self.assertEqual(generate(ModelSpec.from_table(9, multivariate=True), 0).regressors.shape, (600, 100))

    def test_determinism(self):
        spec = ModelSpec.from_table(4)
        first, second = generate(spec, 11), generate(spec, 11)

        np.testing.assert_array_equal(first.responses, second.responses)
        self.assertFalse(np.array_equal(first.responses, generate(spec, 12).responses))

    def test_zero_noise_is_exact(self):
        spec    = ModelSpec.from_table(5, multivariate=True, zero_noise=True)
        dataset = generate(spec, 3)

        for beta, (start, stop) in zip(spec.betas, zip((0, 60, 300, 480), (60, 300, 480, 600))):
            residuals = residuals_with(dataset.span(start, stop), beta)
            np.testing.assert_allclose(residuals.points, 0.0, atol=1e-12)

    def test_error_moments(self):
        spec = ModelSpec.from_table(1).with_timeline(100_000)
        _, errors, outliers = generate_components(spec, 5)

        self.assertLess(abs(errors.mean()), 0.01)
        self.assertLess(abs(errors.var() - 0.1), 0.01)
        self.assertFalse(outliers.any())

        spec = ModelSpec.from_table(1, noise_parameterization='std').with_timeline(100_000)
        self.assertLess(abs(generate_components(spec, 5)[1].std() - 0.1), 0.01)

    def test_regressor_covariance(self):
        dataset = generate(ModelSpec.from_table(1).with_timeline(100_000), 6)
        covariance = np.cov(dataset.regressors, rowvar=False)
        self.assertLess(np.linalg.norm(covariance - np.eye(5)), 0.05)

    def test_outlier_frequency(self):
        spec = ModelSpec.from_table(3, multivariate=True).with_timeline(100_000)
        _, _, outliers = generate_components(spec, 7)

        self.assertLess(abs(np.mean(outliers[:, 0] != 0) - 0.1), 0.01)
        np.testing.assert_array_equal(outliers[:, 0], outliers[:, 2])

        spec = replace(spec, outlier_mode='per_component')
        _, _, outliers = generate_components(spec, 7)
        self.assertFalse(np.array_equal(outliers[:, 0] != 0, outliers[:, 1] != 0))


class MetricTest(unittest.TestCase):

    def test_examples(self):
        self.assertEqual(r_statistic([60, 300, 480], [60, 300, 480], 40), 0)
        self.assertEqual(r_statistic([60, 300, 480], [], 40), 120)
        self.assertEqual(r_statistic([60], [65], 1000), 5)

    def test_symmetry_and_monotonicity(self):
        rng = np.random.default_rng(0)

        for _ in range(50):
            truth    = sorted(rng.choice(600, 3, replace=False))
            estimate = sorted(rng.choice(600, 3, replace=False))
            self.assertEqual(r_statistic(truth, estimate, 40), r_statistic(estimate, truth, 40))

            worse = list(estimate)
            worse[0] = worse[0] - 5 if worse[0] <= truth[0] else worse[0] + 5
            self.assertGreaterEqual(r_statistic(truth, sorted(worse), 40), r_statistic(truth, estimate, 40))

    def test_fraction_error(self):
        self.assertAlmostEqual(fraction_error([60, 300], [66, 294, 500], 600), 0.02)


class BenchmarkTest(unittest.TestCase):

    CONFIG = DetectorConfig('nsa', num_permutations=49, gamma_grid_size=10)

    def test_single_replicate(self):
        report = run_benchmark([ModelSpec.from_table(1)], [self.CONFIG], 1, base_seed=3)

        self.assertEqual(len(report.rows), 1)
        row = report.rows[0]
        self.assertEqual(sorted(row.histogram.values()), [0.0] * 6 + [100.0])
        self.assertEqual(report.penalty_r, FALLBACK_PENALTY_R)

    def test_reproducibility(self):
        models = [ModelSpec.from_table(5)]
        first  = run_benchmark(models, [self.CONFIG], 2, base_seed=9)

        with WorkPool(threads=2) as pool:
            second = run_benchmark(models, [self.CONFIG], 2, base_seed=9, pool=pool)

        self.assertEqual(first.as_dict(), second.as_dict())

    def test_failures_are_missing_values(self):
        config = DetectorConfig('dp', time_budget=1e-9, gamma_grid_size=5)
        report = run_benchmark([ModelSpec.from_table(1)], [config], 1)

        self.assertIsNone(report.rows[0].histogram)
        self.assertEqual(report.rows[0].failures, 1)
        self.assertEqual(report.outcomes[0].failure, "timeout")

    def test_penalty_follows_the_worst_paired_error(self):
        truths = {"1": (60, 300, 480)}
        outcomes = [
            ReplicateOutcome("1", "nsa", 0, None, (61, 305, 480)),
            ReplicateOutcome("1", "dp",  0, None, (60, 290)),
            ReplicateOutcome("1", "dp",  1, None, None, "timeout"),
        ]
        self.assertEqual(_penalty_r(outcomes, truths), 10)
        self.assertEqual(_penalty_r(outcomes[:1], truths), FALLBACK_PENALTY_R)

    def test_baselines(self):
        import os, tempfile

        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "baselines.csv")
            with open(path, "w") as file:
                file.write("model,algorithm,replicate,change_points\n1,bp,0,60;300;480\n1,bp,1,\n1,qp,0,n/a\n")

            outcomes = read_baselines(path)

        self.assertEqual([outcome.change_points for outcome in outcomes], [(60, 300, 480), (), None])

        report = run_benchmark([ModelSpec.from_table(1)], [self.CONFIG], 1, baselines=outcomes)
        self.assertEqual({row.algorithm for row in report.rows}, {"nsa", "bp", "qp"})

        frame = report.to_frame()
        self.assertEqual(list(frame.columns), list(REPORT_COLUMNS))

    def test_rejects_zero_replicates(self):
        with self.assertRaises(ValueError):
            run_benchmark([ModelSpec.from_table(1)], [self.CONFIG], 0)

    @staticmethod
    def _rows(report):
        return {(row.model, row.algorithm): row for row in report.rows}

    def _assert_exact_share(self, row, share):
        completed = row.replicates - row.failures
        hits = round(row.histogram['bin_0'] * completed / 100)
        self.assertTrue(rate_at_least(hits, completed, share), row)

    @slow_test
    def test_reproduction_of_the_clean_models(self):
        models = [ModelSpec.from_table(model_id, noise_parameterization='std') for model_id in (1, 5)]

        with WorkPool() as pool:
            report = run_benchmark(models, [DetectorConfig('nsa'), DetectorConfig('dp')], 100, pool=pool)

        for row in report.rows:
            self.assertEqual(row.failures, 0, row)
            self._assert_exact_share(row, 0.95)
            self.assertLessEqual(row.mean_R, 15.0 if row.algorithm == 'nsa' else 5.0, row)

    @slow_test
    def test_high_dimensional_models(self):
        models = [ModelSpec.from_table(model_id, noise_parameterization='std') for model_id in (9, 10)]

        with WorkPool() as pool:
            report = run_benchmark(models, [DetectorConfig('nsa')], 20, pool=pool)
            rows   = self._rows(report)

            self._assert_exact_share(rows['9', 'nsa'], 0.85)
            self._assert_exact_share(rows['10', 'nsa'], 0.75)

            # Dynamic programming over a hundred regressors overruns a short budget; such runs are n/a.
            budget = run_benchmark(models[:1], [DetectorConfig('dp', time_budget=5.0)], 3, pool=pool)

        row = self._rows(budget)['9', 'dp']
        self.assertIsNone(row.histogram)
        self.assertEqual(row.failures, 3)
        written = io.StringIO()
        budget.write_csv(written)
        self.assertIn("9,dp,n/a", written.getvalue())

    @slow_test
    def test_heavy_tails_favour_dynamic_programming(self):
        with WorkPool() as pool:
            report = run_benchmark([ModelSpec.from_table(2)], [DetectorConfig('nsa'), DetectorConfig('dp')], 50,
                                   pool=pool)

        rows = self._rows(report)
        self.assertLessEqual(rows['2', 'dp'].mean_R, rows['2', 'nsa'].mean_R)

    @slow_test
    def test_location_error_shrinks_with_the_timeline(self):
        medians = []

        for total_T in (300, 600, 1200):
            spec   = ModelSpec.from_table(5).with_timeline(total_T)
            tau    = total_T // 12
            config = DetectorConfig('nsa', tau=tau, l=tau)
            errors = []

            for replicate in range(50):
                result = detect(generate(spec, derive_seed(0, total_T, replicate)), config.with_seed(replicate))
                errors.append(fraction_error(spec.true_change_points, result.change_points, total_T))

            medians.append(float(np.median(errors)))

        self.assertLessEqual(medians[1], medians[0])
        self.assertLessEqual(medians[2], medians[1])


if __name__ == "__main__":
    unittest.main()
