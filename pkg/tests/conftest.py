"""Shared fixtures and frozen oracle values for the test suite.

The bundled ten-point fixture match (toy-0001) is small enough to check
by hand. Its indicator matrix below was enumerated point by point from
the CSV, and the potential values were produced by an independent
single-purpose script (plain loops over the standardization and
recurrence definitions) before the package existed, then frozen here.
"""

from __future__ import annotations

import numpy as np
import pytest

from turnpoint.ingest import (
    FormatDescriptor,
    bundled_match_path,
    extract_indicators,
    parse_match_file,
    standardize,
)
from turnpoint.potential import midpoint_boundary
from turnpoint.weights import preset_stage_weights

# Hand-enumerated indicator rows for toy-0001, X1..X14 per unit:
# [dist_a, score_streak_a, error_streak_a, aces_a, winners_a, net_wins_a,
#  breaks_a, dist_b, score_streak_b, error_streak_b, aces_b, winners_b,
#  net_wins_b, breaks_b]. Columns X7 and X14 are constant zero on
# purpose so constant-column handling is always exercised.
TOY_RAW = np.array(
    [
        [5.0, 1, 0, 1, 0, 0, 0, 8.0, 0, 0, 0, 0, 0, 0],
        [10.5, 2, 0, 0, 1, 0, 0, 12.0, 0, 0, 0, 0, 0, 0],
        [14.0, 0, 0, 0, 0, 0, 0, 6.5, 1, 0, 0, 1, 1, 0],
        [0.0, 0, 1, 0, 0, 0, 0, 0.0, 2, 0, 0, 0, 0, 0],
        [6.0, 1, 0, 0, 1, 1, 0, 12.0, 0, 0, 0, 0, 0, 0],
        [4.0, 2, 0, 1, 0, 0, 0, 9.0, 0, 0, 0, 0, 0, 0],
        [8.0, 3, 0, 0, 0, 0, 0, 11.0, 0, 1, 0, 0, 0, 0],
        [7.0, 4, 0, 0, 1, 0, 0, 10.0, 0, 0, 0, 0, 0, 0],
        [12.0, 0, 0, 0, 0, 0, 0, 4.0, 1, 0, 1, 0, 0, 0],
        [15.0, 0, 1, 0, 0, 0, 0, 5.0, 2, 0, 0, 0, 1, 0],
    ],
    dtype=float,
)

# Frozen potential series for the preset stage weights with the
# midpoint boundary (unit 5 of 10), starting from zero.
TOY_P_A = np.array(
    [
        0.24757035478391895,
        0.47722720697923265,
        0.01800932802199956,
        -0.45294653082449365,
        -0.030892027881831818,
        0.35258449164625671,
        0.71920796001629872,
        1.0808762016825431,
        0.61117466232282536,
        -0.12119022619804509,
    ]
)
TOY_P_B = np.array(
    [
        -0.23863161441660638,
        -0.46776748679047686,
        0.067243414065877305,
        0.47912078727781454,
        0.10810183984960908,
        -0.21596981204075738,
        -0.74956384154133626,
        -1.0713694536990719,
        -0.55890868897334367,
        0.081027685488768708,
    ]
)
TOY_LABELS = np.array([0, 0, 1, 0, 0, 1, 0, 0, 0, 1], dtype=np.int8)


@pytest.fixture(scope="session")
def toy_records():
    result = parse_match_file(bundled_match_path(), FormatDescriptor.canonical())
    assert not result.row_issues
    return result.records()


@pytest.fixture(scope="session")
def toy_matrix(toy_records):
    return extract_indicators(toy_records)


@pytest.fixture(scope="session")
def toy_standardized(toy_matrix):
    return standardize(toy_matrix)


@pytest.fixture(scope="session")
def toy_weights():
    return preset_stage_weights(
        "wimbledon-2023-1301", midpoint_boundary(len(TOY_RAW))
    )


def random_binary_dataset(rng, n, d, informative=False):
    """Feature array plus labels; optionally make feature 0 predictive."""
    rows = rng.normal(size=(n, d))
    if informative:
        labels = (rows[:, 0] + 0.3 * rng.normal(size=n) > 0).astype(int)
    else:
        labels = rng.integers(0, 2, size=n)
    if labels.sum() == 0:
        labels[0] = 1
    elif labels.sum() == n:
        labels[0] = 0
    return rows, labels.astype(int)
