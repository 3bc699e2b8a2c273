#
# This file is part of energybreaks.
#
# Copyright (c) 2026 energybreaks contributors
# SPDX-License-Identifier: BSD-3-Clause
""" Aligned response / regressor time series, and views onto their segments.

On disk, a dataset is a comma-separated file with a header row: an optional ``t`` index
column, response columns prefixed ``y_`` and regressor columns prefixed ``x_``. Floats
are written in their shortest round-trip representation, so a dataset survives a
write/read cycle bit-for-bit.
"""

import os
import logging
import tempfile
import unittest

from dataclasses import dataclass
from typing      import Tuple

import numpy as np
import pandas as pd

__all__ = ['DatasetFormatError', 'TimeSeriesDataset', 'SegmentView', 'read_dataset', 'write_dataset']

logger = logging.getLogger(__name__)


class DatasetFormatError(ValueError):
    """ Raised when a dataset file or array cannot be interpreted. """


def _frozen_matrix(values, name):
    matrix = np.array(values, dtype=np.float64, copy=True)

    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    if matrix.ndim != 2:
        raise DatasetFormatError(f"{name} must be a 2D matrix, not a {matrix.ndim}D array")
    if not np.all(np.isfinite(matrix)):
        raise DatasetFormatError(f"{name} contains non-finite values")

    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """ A response matrix (T x q) and a regressor matrix (T x p), aligned by row.

    Both matrices are stored read-only, so one dataset can be shared freely between
    worker threads.
    """

    responses:       np.ndarray
    regressors:      np.ndarray
    response_names:  Tuple[str, ...] = ()
    regressor_names: Tuple[str, ...] = ()

    def __post_init__(self):
        responses  = _frozen_matrix(self.responses,  "the response matrix")
        regressors = _frozen_matrix(self.regressors, "the regressor matrix")

        if responses.shape[0] != regressors.shape[0]:
            raise DatasetFormatError(
                f"responses have {responses.shape[0]} rows, but regressors have {regressors.shape[0]}")
        if responses.shape[0] < 2:
            raise DatasetFormatError("a dataset needs at least two observations")

        response_names  = tuple(self.response_names)  or tuple(f"y_{i + 1}" for i in range(responses.shape[1]))
        regressor_names = tuple(self.regressor_names) or tuple(f"x_{i + 1}" for i in range(regressors.shape[1]))

        if len(response_names) != responses.shape[1] or len(regressor_names) != regressors.shape[1]:
            raise DatasetFormatError("column names do not match the matrix shapes")

        object.__setattr__(self, 'responses',       responses)
        object.__setattr__(self, 'regressors',      regressors)
        object.__setattr__(self, 'response_names',  response_names)
        object.__setattr__(self, 'regressor_names', regressor_names)


    @property
    def T(self):
        return self.responses.shape[0]

    @property
    def q(self):
        return self.responses.shape[1]

    @property
    def p(self):
        return self.regressors.shape[1]


    def segment(self, start, end):
        """ Returns a view onto rows ``start`` through ``end``, both inclusive. """
        return SegmentView(self, start, end)

    def span(self, start, stop):
        """ Returns a view onto the half-open row range ``[start, stop)``. """
        return SegmentView(self, start, stop - 1)


@dataclass(frozen=True)
class SegmentView:
    """ The rows ``start`` through ``end`` (inclusive) of a dataset. """

    dataset: TimeSeriesDataset
    start:   int
    end:     int

    def __post_init__(self):
        if not 0 <= self.start <= self.end < self.dataset.T:
            raise ValueError(f"segment [{self.start}, {self.end}] does not lie within [0, {self.dataset.T})")


    @property
    def length(self):
        return self.end - self.start + 1

    @property
    def responses(self):
        return self.dataset.responses[self.start:self.end + 1]

    @property
    def regressors(self):
        return self.dataset.regressors[self.start:self.end + 1]

    @property
    def key(self):
        """ The (start, end) pair that identifies this segment within its dataset. """
        return (self.start, self.end)


    def __repr__(self):
        return f"SegmentView({self.start}, {self.end})"


#
# CSV input / output.
#

def read_dataset(path):
    """ Reads a dataset from a CSV file with ``y_*`` response and ``x_*`` regressor columns. """

    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as error:
        raise DatasetFormatError(f"could not read {path}: {error}") from error

    response_columns  = [column for column in frame.columns if str(column).startswith("y_")]
    regressor_columns = [column for column in frame.columns if str(column).startswith("x_")]
    unknown_columns   = [column for column in frame.columns
                         if column != "t" and column not in response_columns and column not in regressor_columns]

    if not response_columns:
        raise DatasetFormatError(f"{path} has no response (y_*) columns")
    if not regressor_columns:
        raise DatasetFormatError(f"{path} has no regressor (x_*) columns")
    if unknown_columns:
        raise DatasetFormatError(f"{path} has unrecognized columns: {', '.join(map(str, unknown_columns))}")

    try:
        responses  = frame[response_columns].to_numpy(dtype=np.float64)
        regressors = frame[regressor_columns].to_numpy(dtype=np.float64)
    except ValueError as error:
        raise DatasetFormatError(f"{path} contains non-numeric values: {error}") from error

    dataset = TimeSeriesDataset(responses, regressors, tuple(response_columns), tuple(regressor_columns))
    logger.info("read %d observations of %d responses and %d regressors from %s",
                dataset.T, dataset.q, dataset.p, path)
    return dataset


def write_dataset(dataset, path, include_index=True):
    """ Writes a dataset as CSV; columns are ``t``, then the responses, then the regressors. """

    frame = pd.DataFrame(np.hstack([dataset.responses, dataset.regressors]),
                         columns=list(dataset.response_names) + list(dataset.regressor_names))
    if include_index:
        frame.insert(0, "t", np.arange(dataset.T))

    # Without a float format, pandas writes each float's shortest round-trip repr.
    frame.to_csv(path, index=False, lineterminator="\n")



class DatasetTest(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(0)
        self.dataset = TimeSeriesDataset(rng.standard_normal((20, 2)), rng.standard_normal((20, 3)))

    def test_shapes_and_names(self):
        self.assertEqual((self.dataset.T, self.dataset.q, self.dataset.p), (20, 2, 3))
        self.assertEqual(self.dataset.response_names, ("y_1", "y_2"))
        self.assertEqual(self.dataset.regressor_names, ("x_1", "x_2", "x_3"))

    def test_storage_is_read_only(self):
        with self.assertRaises(ValueError):
            self.dataset.responses[0, 0] = 1.0

    def test_segments(self):
        segment = self.dataset.segment(5, 9)
        self.assertEqual(segment.length, 5)
        np.testing.assert_array_equal(segment.regressors, self.dataset.regressors[5:10])
        self.assertEqual(self.dataset.span(5, 10), segment)

        with self.assertRaises(ValueError):
            self.dataset.segment(10, 20)
        with self.assertRaises(ValueError):
            self.dataset.segment(6, 5)

    def test_rejects_misaligned_or_non_finite_input(self):
        with self.assertRaises(DatasetFormatError):
            TimeSeriesDataset(np.zeros((5, 1)), np.zeros((6, 2)))
        with self.assertRaises(DatasetFormatError):
            TimeSeriesDataset(np.array([0.0, np.nan, 1.0]), np.zeros((3, 1)))

    def test_round_trip_is_exact(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "data.csv")
            write_dataset(self.dataset, path)
            restored = read_dataset(path)

        np.testing.assert_array_equal(restored.responses, self.dataset.responses)
        np.testing.assert_array_equal(restored.regressors, self.dataset.regressors)
        self.assertEqual(restored.response_names, self.dataset.response_names)

    def test_malformed_files(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "bad.csv")

            with open(path, "w") as file:
                file.write("y_1,z_1\n1.0,2.0\n3.0,4.0\n")
            with self.assertRaises(DatasetFormatError):
                read_dataset(path)

            with open(path, "w") as file:
                file.write("y_1,x_1\n1.0,oops\n3.0,4.0\n")
            with self.assertRaises(DatasetFormatError):
                read_dataset(path)


if __name__ == "__main__":
    unittest.main()
