#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Command-line entry point.

Subcommands:

    detect      find change points in a CSV dataset; writes a JSON result
    simulate    draw a benchmark dataset; writes CSV plus a ground-truth JSON sidecar
    benchmark   run detectors over replicated benchmark datasets; writes CSV and JSON reports
    stat        energy statistics and a permutation p-value for grouped samples

Exit codes:

    0   success
    1   unexpected failure, including a detector running out of its time budget
    2   malformed input or usage error
    3   infeasible configuration, including fewer than two groups for ``stat``
"""

import io
import os
import sys
import json
import logging
import argparse
import datetime
import unittest
import tempfile
import contextlib

from dataclasses import asdict, dataclass, field
from typing      import Optional, Tuple

import numpy as np
import pandas as pd

from .dataset      import DatasetFormatError, read_dataset, write_dataset
from .energy       import DEFAULT_ALPHA, ResidualCluster, dispersion_decomposition, permutation_test
from .regression   import DEFAULT_GRID_SIZE
from .segmentation import ALGORITHMS, DetectorConfig, InfeasibleConfigError, detect
from .simulation   import MODEL_IDS, ModelSpec, generate, read_baselines, run_benchmark
from .utils        import TimeBudgetExceeded, WorkPool

__all__ = ['EXIT_OK', 'EXIT_FAILURE', 'EXIT_USAGE', 'EXIT_INFEASIBLE', 'RunConfig', 'main']

logger = logging.getLogger(__name__)


EXIT_OK         = 0
EXIT_FAILURE    = 1
EXIT_USAGE      = 2
EXIT_INFEASIBLE = 3

COMMANDS = ('detect', 'simulate', 'benchmark', 'stat')


@dataclass(frozen=True)
class RunConfig:
    """ The fully resolved settings of one command-line run; echoed into every output. """

    command:             str
    input_path:          Optional[str]   = None
    output_path:         Optional[str]   = None
    algorithm:           str             = 'nsa'
    alpha:               float           = DEFAULT_ALPHA
    tau:                 int             = 50
    p0:                  float           = 0.05
    num_permutations:    int             = 199
    eta:                 float           = 0.1
    l:                   int             = 50
    gamma_decay:         float           = 0.6
    s:                   Optional[int]   = None
    e:                   Optional[int]   = None
    max_k:               Optional[int]   = None
    num_change_points:   Optional[int]   = None
    reoptimize:          bool            = False
    final_test:          bool            = False
    intercept:           bool            = False
    gamma_grid_size:     int             = DEFAULT_GRID_SIZE
    seed:                int             = 0
    threads:             Optional[int]   = None
    time_budget_seconds: Optional[float] = None
    series_output:       Optional[str]   = None
    trace_output:        Optional[str]   = None
    model:               int             = 1
    models:              Tuple[int, ...] = (1,)
    algorithms:          Tuple[str, ...] = ('nsa',)
    multivariate:        bool            = False
    replicates:          int             = 100
    baseline_csv:        Optional[str]   = None
    json_output:         Optional[str]   = None
    verbose:             int             = field(default=0, compare=False)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}; expected one of {COMMANDS}")

        if self.command == 'detect':
            self.detector_config()
        elif self.command == 'benchmark':
            for algorithm in self.algorithms:
                self.detector_config(algorithm)


    def detector_config(self, algorithm=None):
        """ Returns the DetectorConfig these settings describe; raises InfeasibleConfigError if there is none. """
        return DetectorConfig(
            algorithm         = algorithm or self.algorithm,
            tau               = self.tau,
            alpha             = self.alpha,
            p0                = self.p0,
            num_permutations  = self.num_permutations,
            eta               = self.eta,
            l                 = self.l,
            gamma_decay       = self.gamma_decay,
            s                 = self.s,
            e                 = self.e,
            max_k             = self.max_k,
            num_change_points = self.num_change_points,
            reoptimize        = self.reoptimize,
            final_test        = self.final_test,
            gamma_grid_size   = self.gamma_grid_size,
            intercept         = self.intercept,
            seed              = self.seed,
            threads           = self.threads,
            time_budget       = self.time_budget_seconds,
        )


    def echo(self):
        settings = asdict(self)
        settings.pop('verbose')
        return {key: list(value) if isinstance(value, tuple) else value for key, value in settings.items()}


#
# Argument parsing.
#

def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, not {text}")
    return value


def _model_id(text):
    value = int(text)
    if value not in MODEL_IDS:
        raise argparse.ArgumentTypeError(f"unknown model {text}; expected one of 1-10")
    return value


def _add_detector_arguments(parser):
    group = parser.add_argument_group("detector settings")
    group.add_argument('--alpha', type=float, default=DEFAULT_ALPHA, help="exponent of the energy distance, in (0, 2)")
    group.add_argument('--tau', type=int, default=50, help="minimum regime length")
    group.add_argument('--p0', type=float, default=0.05, help="significance level of each test")
    group.add_argument('--num-permutations', type=_positive_int, default=199, help="permutations per test")
    group.add_argument('--eta', type=float, default=0.1, help="trimming fraction of candidate splits and localization windows")
    group.add_argument('--l', type=int, default=50, help="nsa: initial segment length")
    group.add_argument('--gamma-decay', type=float, default=0.6, help="nsa: segment-length decay per recursion")
    group.add_argument('--s', type=int, help="nsa: start of the searched range; defaults to tau")
    group.add_argument('--e', type=int, help="nsa: end of the searched range; defaults to T - tau")
    group.add_argument('--max-k', type=int, help="dp: the most change points to add")
    group.add_argument('--reoptimize', action='store_true', help="dp: re-place every point after each acceptance")
    group.add_argument('--final-test', action='store_true', help="attach a p-value to the final regimes")
    group.add_argument('--intercept', action='store_true', help="fit an unpenalized intercept per response")
    group.add_argument('--gamma-grid-size', type=_positive_int, default=DEFAULT_GRID_SIZE,
                       help="candidate penalties per regime fit")
    group.add_argument('--time-budget', dest='time_budget_seconds', type=float,
                       help="wall-clock seconds allowed per detector run")


def build_parser():
    parser = argparse.ArgumentParser(prog="energybreaks",
        description="Structural change points in sparse multi-response regressions.",
        epilog="Exit codes: 0 success, 1 failure, 2 malformed input or usage, 3 infeasible configuration.")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="log more; repeat for debug output")
    parser.add_argument('--seed', type=int, default=0, help="base seed of every random stream")
    parser.add_argument('--threads', type=_positive_int, help="worker threads; defaults to $ENERGYBREAKS_THREADS")

    commands = parser.add_subparsers(dest='command', required=True)

    detect_parser = commands.add_parser('detect', help="find change points in a CSV dataset")
    detect_parser.add_argument('input_path', help="CSV with y_* response and x_* regressor columns")
    detect_parser.add_argument('-o', '--output', dest='output_path', help="JSON result file; defaults to stdout")
    detect_parser.add_argument('--algorithm', choices=ALGORITHMS, default='nsa')
    detect_parser.add_argument('--num-change-points', type=_positive_int, help="dp: place exactly this many points")
    detect_parser.add_argument('--series-output', help="CSV of the statistic over candidate positions")
    detect_parser.add_argument('--trace-output', help="line-delimited JSON of every candidate evaluation")
    _add_detector_arguments(detect_parser)

    simulate_parser = commands.add_parser('simulate', help="draw a dataset from a benchmark model")
    simulate_parser.add_argument('--model', type=_model_id, default=1)
    simulate_parser.add_argument('--multivariate', action='store_true', help="three responses instead of one")
    simulate_parser.add_argument('-o', '--output', dest='output_path', required=True, help="CSV file to write")

    benchmark_parser = commands.add_parser('benchmark', help="run detectors over replicated benchmark datasets")
    benchmark_parser.add_argument('--models', type=_model_id, nargs='+', default=[1])
    benchmark_parser.add_argument('--algorithms', choices=ALGORITHMS, nargs='+', default=['nsa'])
    benchmark_parser.add_argument('--multivariate', action='store_true')
    benchmark_parser.add_argument('--replicates', type=_positive_int, default=100)
    benchmark_parser.add_argument('--baseline-csv', help="change points found by external methods")
    benchmark_parser.add_argument('-o', '--output', dest='output_path', required=True, help="CSV report")
    benchmark_parser.add_argument('--json-output', help="JSON report; defaults to the CSV path with a .json suffix")
    _add_detector_arguments(benchmark_parser)

    stat_parser = commands.add_parser('stat', help="energy statistics of grouped samples")
    stat_parser.add_argument('input_path', help="CSV with a group column and one column per coordinate")
    stat_parser.add_argument('-o', '--output', dest='output_path', help="JSON file; defaults to stdout")
    stat_parser.add_argument('--alpha', type=float, default=DEFAULT_ALPHA)
    stat_parser.add_argument('--num-permutations', type=_positive_int, default=199)

    return parser


def _run_config(arguments):
    settings = {name: value for name, value in vars(arguments).items()
                if name in RunConfig.__dataclass_fields__ and value is not None}

    for name in ('models', 'algorithms'):
        if name in settings:
            settings[name] = tuple(settings[name])

    return RunConfig(**settings)


#
# Output.
#

def _json_ready(value):
    """ Converts numpy scalars, tuples and non-finite floats into plain JSON values. """

    if isinstance(value, dict):
        return {str(key): _json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def _dumps(payload, **options):
    return json.dumps(_json_ready(payload), sort_keys=True, allow_nan=False, **options)


def _write_json(payload, path):
    text = _dumps(payload, indent=2) + "\n"

    if path is None:
        sys.stdout.write(text)
        return

    with open(path, "w", encoding="utf-8") as file:
        file.write(text)


def _with_envelope(payload, config):
    return {
        **payload,
        'config_echo':  config.echo(),
        'generated_at': datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


#
# Commands.
#

def run_detect(config):
    dataset = read_dataset(config.input_path)

    with WorkPool(config.threads) as pool:
        result = detect(dataset, config.detector_config(), pool=pool)

    payload = result.as_dict(dataset.regressor_names, dataset.response_names)
    payload['trace'] = result.trace
    _write_json(_with_envelope(payload, config), config.output_path)

    if config.series_output:
        frame = pd.DataFrame(result.series, columns=['index', 'statistic', 'window'])
        frame[['window', 'index', 'statistic']].to_csv(config.series_output, index=False, lineterminator="\n")

    if config.trace_output:
        with open(config.trace_output, "w", encoding="utf-8") as file:
            for record in result.trace:
                file.write(_dumps(record) + "\n")

    return EXIT_OK


def _truth_path(path):
    root, _ = os.path.splitext(path)
    return root + ".truth.json"


def run_simulate(config):
    spec    = ModelSpec.from_table(config.model, multivariate=config.multivariate)
    dataset = generate(spec, config.seed)

    write_dataset(dataset, config.output_path)
    _write_json(_with_envelope({'truth': spec.truth(), 'seed': config.seed}, config), _truth_path(config.output_path))

    logger.info("wrote model %s (%d x %d) to %s", spec.name, dataset.T, dataset.q + dataset.p, config.output_path)
    return EXIT_OK


def run_benchmark_command(config):
    models     = [ModelSpec.from_table(model, multivariate=config.multivariate) for model in config.models]
    algorithms = [config.detector_config(algorithm) for algorithm in config.algorithms]
    baselines  = read_baselines(config.baseline_csv) if config.baseline_csv else ()

    with WorkPool(config.threads) as pool:
        report = run_benchmark(models, algorithms, config.replicates, config.seed, baselines=baselines, pool=pool)

    report.write_csv(config.output_path)

    json_path = config.json_output or os.path.splitext(config.output_path)[0] + ".json"
    _write_json(_with_envelope(report.as_dict(), config), json_path)

    return EXIT_OK


def run_stat(config):
    try:
        frame = pd.read_csv(config.input_path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as error:
        raise DatasetFormatError(f"could not read {config.input_path}: {error}") from error

    if 'group' not in frame.columns:
        raise DatasetFormatError(f"{config.input_path} has no group column")

    coordinates = [column for column in frame.columns if column not in ('group', 't')]
    if not coordinates:
        raise DatasetFormatError(f"{config.input_path} has no sample columns besides the group")

    try:
        clusters = [ResidualCluster.of(group[coordinates].to_numpy(dtype=np.float64), index)
                    for index, (_, group) in enumerate(frame.groupby('group', sort=True))]
    except ValueError as error:
        raise DatasetFormatError(f"{config.input_path}: {error}") from error

    if len(clusters) < 2:
        raise InfeasibleConfigError(f"comparing samples needs at least two groups, not {len(clusters)}")

    report = dispersion_decomposition(clusters, config.alpha)
    if sum(len(cluster) for cluster in clusters) >= 4:
        with WorkPool(config.threads) as pool:
            test = permutation_test(clusters, config.alpha, config.num_permutations, rng_seed=config.seed, pool=pool)
        report = report.with_p_value(test.p_value)

    _write_json(_with_envelope(report.as_dict(), config), config.output_path)
    return EXIT_OK


_RUNNERS = {
    'detect':    run_detect,
    'simulate':  run_simulate,
    'benchmark': run_benchmark_command,
    'stat':      run_stat,
}


def main(argv=None):
    """ Runs the command line; returns the process exit code. """

    parser = build_parser()
    try:
        arguments = parser.parse_args(argv)
    except SystemExit as stop:
        return stop.code

    logging.basicConfig(
        level  = (logging.WARNING, logging.INFO, logging.DEBUG)[min(arguments.verbose, 2)],
        format = "%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = _run_config(arguments)
        return _RUNNERS[config.command](config)
    except DatasetFormatError as error:
        logger.error("%s", error)
        return EXIT_USAGE
    except InfeasibleConfigError as error:
        logger.error("infeasible configuration: %s", error)
        return EXIT_INFEASIBLE
    except TimeBudgetExceeded as error:
        logger.error("%s", error)
        return EXIT_FAILURE
    except Exception:
        logger.exception("%s failed", arguments.command)
        return EXIT_FAILURE



class CommandLineTest(unittest.TestCase):

    def setUp(self):
        self._directory = tempfile.TemporaryDirectory()
        self.directory  = self._directory.name

    def tearDown(self):
        self._directory.cleanup()

    def path(self, name):
        return os.path.join(self.directory, name)

    def run_quietly(self, *argv):
        with contextlib.redirect_stdout(io.StringIO()) as output, contextlib.redirect_stderr(io.StringIO()):
            code = main(list(argv))
        return code, output.getvalue()

    def _payload_without_timestamp(self, path):
        with open(path) as file:
            payload = json.load(file)
        payload.pop('generated_at')
        return payload


    def test_simulate_writes_data_and_truth(self):
        code, _ = self.run_quietly('--seed', '4', 'simulate', '--model', '1', '-o', self.path("one.csv"))
        self.assertEqual(code, EXIT_OK)

        frame = pd.read_csv(self.path("one.csv"))
        self.assertEqual(frame.shape, (600, 1 + 1 + 5))
        self.assertEqual(list(frame.columns[:2]), ['t', 'y_1'])

        with open(self.path("one.truth.json")) as file:
            truth = json.load(file)['truth']
        self.assertEqual(truth['change_points'], [60, 300, 480])

        self.run_quietly('--seed', '4', 'simulate', '--model', '1', '-o', self.path("again.csv"))
        with open(self.path("one.csv"), "rb") as first, open(self.path("again.csv"), "rb") as second:
            self.assertEqual(first.read(), second.read())

    def test_simulate_multivariate_sparse_model(self):
        code, _ = self.run_quietly('simulate', '--model', '9', '--multivariate', '-o', self.path("nine.csv"))
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(pd.read_csv(self.path("nine.csv")).shape, (600, 1 + 3 + 100))

    def test_detect_round_trip(self):
        self.run_quietly('--seed', '2', 'simulate', '--model', '5', '-o', self.path("data.csv"))

        arguments = ['detect', self.path("data.csv"), '--algorithm', 'nsa', '--num-permutations', '99',
                     '--gamma-grid-size', '10', '--series-output', self.path("series.csv"),
                     '--trace-output', self.path("trace.jsonl")]

        code, _ = self.run_quietly(*arguments, '-o', self.path("first.json"))
        self.assertEqual(code, EXIT_OK)

        code, _ = self.run_quietly('--threads', '4', *arguments, '-o', self.path("second.json"))
        self.assertEqual(code, EXIT_OK)

        first = self._payload_without_timestamp(self.path("first.json"))
        second = self._payload_without_timestamp(self.path("second.json"))
        self.assertEqual(first.pop('config_echo')['algorithm'], 'nsa')
        second.pop('config_echo')
        self.assertEqual(first, second)

        self.assertEqual(len(first['change_points']), 3)
        for found, truth in zip(first['change_points'], [60, 300, 480]):
            self.assertLessEqual(abs(found - truth), 10)

        self.assertEqual(len(first['regimes']), 4)
        self.assertIn('var', first['regimes'][0]['nonzero_coefficients'][0])

        series = pd.read_csv(self.path("series.csv"))
        self.assertEqual(list(series.columns), ['window', 'index', 'statistic'])
        with open(self.path("trace.jsonl")) as file:
            self.assertTrue(all(json.loads(line) for line in file))

    def test_detect_exit_codes(self):
        with open(self.path("broken.csv"), "w") as file:
            file.write("y_1,x_1\n1.0,oops\n")
        self.assertEqual(self.run_quietly('detect', self.path("broken.csv"))[0], EXIT_USAGE)

        self.run_quietly('simulate', '--model', '1', '-o', self.path("data.csv"))
        self.assertEqual(self.run_quietly('detect', self.path("data.csv"), '--tau', '400', '--l', '400')[0],
                         EXIT_INFEASIBLE)
        self.assertEqual(self.run_quietly('detect', self.path("data.csv"), '--alpha', '2.5')[0], EXIT_INFEASIBLE)
        self.assertEqual(self.run_quietly('detect', self.path("missing.csv"))[0], EXIT_USAGE)
        self.assertEqual(self.run_quietly('frobnicate')[0], EXIT_USAGE)

    def test_benchmark(self):
        code, _ = self.run_quietly('benchmark', '--models', '1', '--replicates', '1', '--num-permutations', '49',
                                   '--gamma-grid-size', '5', '-o', self.path("report.csv"))
        self.assertEqual(code, EXIT_OK)

        frame = pd.read_csv(self.path("report.csv"))
        self.assertEqual(list(frame.columns), ['model', 'algorithm', 'bin_le_m3', 'bin_m2', 'bin_m1', 'bin_0',
                                               'bin_1', 'bin_2', 'bin_ge_3', 'mean_R', 'replicates'])
        self.assertTrue(os.path.exists(self.path("report.json")))

        self.assertEqual(self.run_quietly('benchmark', '--replicates', '0', '-o', self.path("x.csv"))[0], EXIT_USAGE)

    def test_stat(self):
        rng = np.random.default_rng(0)
        frame = pd.DataFrame({
            'group': ['a'] * 50 + ['b'] * 50,
            'r_1':   np.concatenate([rng.normal(0, 1, 50), rng.normal(5, 1, 50)]),
        })
        frame.to_csv(self.path("groups.csv"), index=False)

        code, output = self.run_quietly('stat', self.path("groups.csv"))
        self.assertEqual(code, EXIT_OK)
        report = json.loads(output)
        self.assertLessEqual(report['p_value'], 0.05)
        self.assertGreater(report['s_alpha'], 0)

        same = pd.DataFrame({'group': ['a'] * 5 + ['b'] * 5, 'r_1': list(range(5)) * 2})
        same.to_csv(self.path("same.csv"), index=False)
        self.assertAlmostEqual(json.loads(self.run_quietly('stat', self.path("same.csv"))[1])['s_alpha'], 0.0)

        frame.assign(group='a').to_csv(self.path("single.csv"), index=False)
        self.assertEqual(self.run_quietly('stat', self.path("single.csv"))[0], EXIT_INFEASIBLE)


if __name__ == "__main__":
    unittest.main()
