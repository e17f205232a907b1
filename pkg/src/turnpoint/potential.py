"""Competitive potential energy over time and situation turning points.

Each player's potential is a running sum over time units: the unit's
standardized indicators are combined with stage weights under fixed
gain/cost signs and added to the previous unit's value. A turning point
is a time unit where the two players' curves cross.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ingest import INDICATOR_NAMES, INDICATOR_POLARITY, IndicatorMatrix
from .weights import StageWeightSet

# The indicator axis splits into factor blocks: the player's own state,
# the opponent's state, and a reserved (currently empty) block for
# environment indicators so new columns can slot in without API change.
FACTOR_BLOCKS = {
    "self": slice(0, 7),
    "opponent": slice(7, 14),
    "environment": slice(14, 14),
}


def midpoint_boundary(n_units: int) -> int:
    """Last time unit of the early stage: the (rounded-up) midpoint."""
    if n_units < 1:
        raise ValueError("n_units must be positive")
    return math.ceil(n_units / 2)


def stage_increment(z_row: np.ndarray, weight_values: np.ndarray) -> float:
    """One unit's potential change: signed, weighted indicator sum.

    Shared verbatim by the batch path and the live session service so
    the two agree bit for bit on identical inputs.
    """
    return float(np.dot(INDICATOR_POLARITY * weight_values, z_row))


@dataclass
class PotentialSeries:
    """One player's cumulative potential, one value per time unit."""

    match_id: str
    player: str
    point_index: np.ndarray
    values: np.ndarray
    p0: float
    weights_used: StageWeightSet

    @property
    def n_units(self) -> int:
        return len(self.values)

    def to_list(self) -> list[float]:
        return [float(v) for v in self.values]


@dataclass
class TurnLabels:
    """Per-unit 0/1 flags: did the situation turn at this unit?"""

    match_id: str
    point_index: np.ndarray
    labels: np.ndarray
    diff: np.ndarray  # P_A - P_B, kept for exports and inspection

    @property
    def count_turns(self) -> int:
        return int(self.labels.sum())


def quantify_potential(
    matrix: IndicatorMatrix, stage_weights: StageWeightSet, p0: float = 0.0
) -> PotentialSeries:
    """Accumulate one player's potential over the match.

    Unit t's increment uses the early-stage weights while t (1-based
    position) is at or below the stage boundary and the late-stage
    weights after. The first unit adds to ``p0``.
    """
    z = matrix.standardized
    if z is None:
        raise ValueError("indicator matrix is not standardized")
    if len(stage_weights.early) != z.shape[1]:
        raise ValueError(
            f"weight dimension {len(stage_weights.early)} != {z.shape[1]} indicators"
        )
    values = np.empty(z.shape[0], dtype=float)
    p = float(p0)
    for t in range(z.shape[0]):
        w = stage_weights.for_unit(t + 1)
        p = p + stage_increment(z[t], w.values)
        values[t] = p
    return PotentialSeries(
        match_id=matrix.match_id,
        player="A",
        point_index=matrix.point_index.copy(),
        values=values,
        p0=float(p0),
        weights_used=stage_weights,
    )


def quantify_both(
    matrix: IndicatorMatrix,
    stage_weights: StageWeightSet,
    p0_a: float = 0.0,
    p0_b: float = 0.0,
) -> tuple[PotentialSeries, PotentialSeries]:
    """Both players' series on a shared time axis.

    The opponent's series comes from the same matrix with the self and
    opponent blocks exchanged; the weight vectors are reused as-is.
    """
    series_a = quantify_potential(matrix, stage_weights, p0_a)
    series_b = quantify_potential(matrix.swapped(), stage_weights, p0_b)
    series_b.player = "B"
    return series_a, series_b


def mark_turning_points(series_a: PotentialSeries, series_b: PotentialSeries) -> TurnLabels:
    """Flag units where the potential difference strictly changes sign.

    A unit where the difference is exactly zero inherits the previous
    sign, so touching without crossing never counts. The first unit is
    never a turn (nothing precedes it).
    """
    if series_a.n_units != series_b.n_units:
        raise ValueError("series lengths differ")
    if series_a.n_units < 2:
        raise ValueError("need at least two units to detect turns")
    diff = series_a.values - series_b.values
    labels = np.zeros(len(diff), dtype=np.int8)
    carried = 0
    for t, d in enumerate(diff):
        s = 0 if d == 0 else (1 if d > 0 else -1)
        if s == 0:
            s = carried
        if t > 0 and carried != 0 and s != 0 and s != carried:
            labels[t] = 1
        carried = s
    return TurnLabels(
        match_id=series_a.match_id,
        point_index=series_a.point_index.copy(),
        labels=labels,
        diff=diff,
    )


@dataclass
class LabeledDataset:
    """Feature table for turn prediction: indicator rows plus 0/1 response.

    Rows keep match identity and unit order so chronological splits and
    per-match bookkeeping stay possible after concatenation.
    """

    features: np.ndarray
    labels: np.ndarray
    point_index: np.ndarray
    match_ids: tuple[str, ...]
    feature_names: tuple[str, ...] = INDICATOR_NAMES

    def __post_init__(self) -> None:
        n = self.features.shape[0]
        if not (len(self.labels) == len(self.point_index) == len(self.match_ids) == n):
            raise ValueError("dataset fields have mismatched lengths")
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise ValueError("feature width does not match feature names")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ValueError("labels must be 0 or 1")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return self.n_rows - self.n_positive

    @property
    def trainable(self) -> bool:
        """Whether turn prediction can be learned: both classes present."""
        return self.n_positive > 0 and self.n_negative > 0

    def imbalance_pct(self) -> float:
        return imbalance_ratio_pct(self.n_positive, self.n_negative)

    def subset(self, indices: Sequence[int] | np.ndarray) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=int)
        return LabeledDataset(
            features=self.features[idx].copy(),
            labels=self.labels[idx].copy(),
            point_index=self.point_index[idx].copy(),
            match_ids=tuple(self.match_ids[i] for i in idx),
            feature_names=self.feature_names,
        )

    @classmethod
    def concat(cls, parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        if not parts:
            raise ValueError("nothing to concatenate")
        names = parts[0].feature_names
        for p in parts:
            if p.feature_names != names:
                raise ValueError("feature name mismatch between parts")
        return cls(
            features=np.concatenate([p.features for p in parts], axis=0),
            labels=np.concatenate([p.labels for p in parts]),
            point_index=np.concatenate([p.point_index for p in parts]),
            match_ids=tuple(m for p in parts for m in p.match_ids),
            feature_names=names,
        )

    def to_doc(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "features": [[float(x) for x in row] for row in self.features],
            "labels": [int(v) for v in self.labels],
            "point_index": [int(v) for v in self.point_index],
            "match_ids": list(self.match_ids),
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "LabeledDataset":
        return cls(
            features=np.asarray(doc["features"], dtype=float),
            labels=np.asarray(doc["labels"], dtype=np.int8),
            point_index=np.asarray(doc["point_index"], dtype=int),
            match_ids=tuple(doc["match_ids"]),
            feature_names=tuple(doc["feature_names"]),
        )


def build_dataset(matrix: IndicatorMatrix, turns: TurnLabels) -> LabeledDataset:
    """Join standardized indicators with turn labels, row per time unit."""
    if matrix.standardized is None:
        raise ValueError("indicator matrix is not standardized")
    if matrix.match_id != turns.match_id or not np.array_equal(
        matrix.point_index, turns.point_index
    ):
        raise ValueError("matrix and labels are misaligned")
    return LabeledDataset(
        features=matrix.standardized.copy(),
        labels=turns.labels.astype(np.int8).copy(),
        point_index=matrix.point_index.copy(),
        match_ids=(matrix.match_id,) * matrix.n_units,
    )


def imbalance_ratio_pct(positives: int, negatives: int) -> float:
    """Positive-to-negative ratio as a percentage, truncated to 2 decimals.

    Truncation (not half-up rounding) is deliberate: reported ratios in
    the reference results drop the third decimal, e.g. 532/5295 shows as
    10.04 although the exact value is 10.047...
    """
    if negatives <= 0:
        raise ValueError("need at least one negative sample")
    pct = positives / negatives * 100.0
    return math.floor(pct * 100 + 1e-9) / 100


def potential_plot_rows(
    series_a: PotentialSeries,
    series_b: PotentialSeries,
    turns: TurnLabels | None = None,
) -> list[dict]:
    """Tidy per-unit rows (unit, p_a, p_b, turn) for charting tools."""
    if series_a.n_units != series_b.n_units:
        raise ValueError("series lengths differ")
    labels = turns.labels if turns is not None else np.zeros(series_a.n_units, dtype=np.int8)
    rows = []
    for t in range(series_a.n_units):
        rows.append(
            {
                "unit": int(series_a.point_index[t]),
                "p_a": float(series_a.values[t]),
                "p_b": float(series_b.values[t]),
                "turn": int(labels[t]),
            }
        )
    return rows
