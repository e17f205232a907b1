"""Indicator weighting: expert judgment, data entropy, and their blend.

Weights come from two independent routes. The judgment route turns a
pairwise comparison matrix into a priority vector (principal eigenvector,
consistency-checked). The data route scores each indicator by how much
its normalized values vary across the match (entropy method). The final
weight is the renormalized mean of both, one vector per match stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ingest import N_INDICATORS

# Random-index values for the consistency ratio, by matrix order.
RANDOM_INDEX = {
    1: 0.0,
    2: 0.0,
    3: 0.58,
    4: 0.90,
    5: 1.12,
    6: 1.24,
    7: 1.32,
    8: 1.41,
    9: 1.45,
    10: 1.49,
    11: 1.51,
    12: 1.54,
    13: 1.56,
    14: 1.57,
    15: 1.59,
}

_SCALE_MIN, _SCALE_MAX = 1.0 / 9.0, 9.0
_RECIPROCAL_TOL = 1e-9
_POWER_TOL = 1e-12
_POWER_MAX_ITER = 10_000

CONSISTENCY_LIMIT = 0.1


class ConsistencyError(ValueError):
    """The judgment matrix is too self-contradictory to use."""


@dataclass(frozen=True)
class WeightVector:
    """Non-negative weights over the 14 indicators, summing to one."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ValueError("weights must be a flat vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("weights must be finite and non-negative")
        if abs(float(v.sum()) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {v.sum()!r}")

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None):
        return np.asarray(self.values, dtype=dtype)

    @classmethod
    def normalized(cls, raw: Sequence[float]) -> "WeightVector":
        """Rescale a raw non-negative vector so it sums to exactly one."""
        v = np.asarray(raw, dtype=float)
        total = float(v.sum())
        if total <= 0:
            raise ValueError("cannot normalize an all-zero vector")
        return cls(v / total)

    def to_list(self) -> list[float]:
        return [float(x) for x in self.values]


@dataclass(frozen=True)
class JudgmentMatrix:
    """Pairwise importance comparisons on the 1/9..9 scale.

    Entry (i, j) says how much more important indicator i is than j;
    the matrix must be positive-reciprocal with a unit diagonal.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("judgment matrix must be square")
        n = a.shape[0]
        if n < 2:
            raise ValueError("judgment matrix needs at least two items")
        if not np.all(np.isfinite(a)):
            raise ValueError("judgment matrix entries must be finite")
        if np.any(a < _SCALE_MIN - _RECIPROCAL_TOL) or np.any(a > _SCALE_MAX + _RECIPROCAL_TOL):
            raise ValueError("judgment entries must lie in [1/9, 9]")
        if not np.allclose(np.diag(a), 1.0, atol=_RECIPROCAL_TOL):
            raise ValueError("judgment diagonal must be all ones")
        if not np.allclose(a * a.T, 1.0, atol=_RECIPROCAL_TOL):
            raise ValueError("judgment matrix must be reciprocal (a_ij * a_ji = 1)")

    @property
    def order(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "JudgmentMatrix":
        """Build the perfectly consistent matrix of ratios w_i / w_j."""
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        ratio = w[:, None] / w[None, :]
        if ratio.max() > _SCALE_MAX + _RECIPROCAL_TOL:
            raise ValueError("weight ratios exceed the 1/9..9 comparison scale")
        return cls(ratio)

    def to_dict(self) -> dict:
        return {"values": [[float(x) for x in row] for row in self.values]}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "JudgmentMatrix":
        return cls(np.asarray(doc["values"], dtype=float))


def ahp_weights(
    matrix: JudgmentMatrix,
    require_consistent: bool = True,
    start: Sequence[float] | None = None,
) -> tuple[WeightVector, dict]:
    """Priority vector of a judgment matrix via power iteration.

    Returns the weights plus diagnostics (lambda_max, ci, cr, iterations).
    Raises :class:`ConsistencyError` when the consistency index reaches
    0.1 unless ``require_consistent`` is off. The optional ``start``
    vector sets the iteration origin; it is normalized immediately, so
    its scale cannot influence the result.
    """
    a = matrix.values
    n = matrix.order
    if start is None:
        v = np.full(n, 1.0 / n)
    else:
        v = np.asarray(start, dtype=float)
        if v.shape != (n,) or not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("start vector must be strictly positive with matching length")
        v = v / v.sum()
    iterations = 0
    for iterations in range(1, _POWER_MAX_ITER + 1):
        u = a @ v
        v_next = u / u.sum()
        if np.max(np.abs(v_next - v)) / np.max(v) < _POWER_TOL:
            v = v_next
            break
        v = v_next
    lambda_max = float(np.mean((a @ v) / v))
    ci = (lambda_max - n) / (n - 1)
    ri = RANDOM_INDEX.get(n)
    if ri is None:
        raise ValueError(f"no random-index value for order {n}")
    cr = 0.0 if ri == 0 else ci / ri
    diagnostics = {
        "lambda_max": lambda_max,
        "ci": float(ci),
        "cr": float(cr),
        "iterations": iterations,
    }
    if require_consistent and ci >= CONSISTENCY_LIMIT:
        raise ConsistencyError(
            f"judgment matrix inconsistent (ci={ci:.4f} >= {CONSISTENCY_LIMIT})"
        )
    return WeightVector(v), diagnostics


def entropy_weights(normalized: np.ndarray) -> WeightVector:
    """Objective weights from column information content.

    ``normalized`` holds strictly positive values rescaled into (0, 1]
    (see ``ingest.min_max_normalize``). Columns whose shares are nearly
    uniform across units carry little information and get small weights.
    """
    z = np.asarray(normalized, dtype=float)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError("need a 2-d matrix with at least two rows")
    if np.any(z <= 0) or not np.all(np.isfinite(z)):
        raise ValueError("normalized values must be strictly positive and finite")
    m = z.shape[0]
    shares = z / z.sum(axis=0, keepdims=True)
    k = 1.0 / math.log(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(shares > 0, shares * np.log(shares), 0.0)
    entropy = -k * plogp.sum(axis=0)
    # Clamp tiny negative overshoot of 1.0 from float rounding.
    entropy = np.minimum(entropy, 1.0)
    divergence = 1.0 - entropy
    total = divergence.sum()
    if total <= 0:
        raise ValueError("all columns are constant; entropy weights undefined")
    return WeightVector(divergence / total)


def combine_weights_additive(alpha: WeightVector, beta: WeightVector) -> WeightVector:
    """Blend two weight vectors by renormalized sum.

    Since both inputs sum to one this is simply their average, but the
    renormalized form stays correct for inputs that do not.
    """
    s = alpha.values + beta.values
    return WeightVector(s / s.sum())


def combine_weights_multiplicative(alpha: WeightVector, beta: WeightVector) -> WeightVector:
    """Blend two weight vectors by renormalized product.

    Kept for comparison only: the product collapses a weight to zero
    whenever either route assigns zero, which is too aggressive when the
    entropy route zeroes a constant column. The additive rule is what the
    rest of the package uses.
    """
    p = alpha.values * beta.values
    total = p.sum()
    if total <= 0:
        raise ValueError("weight product is all zero; multiplicative blend undefined")
    return WeightVector(p / total)


@dataclass(frozen=True)
class StageWeightSet:
    """Weights for the two halves of a match.

    Units up to and including ``boundary`` (1-based) use the early-stage
    vector, later units the late-stage vector.
    """

    early: WeightVector
    late: WeightVector
    boundary: int

    def __post_init__(self) -> None:
        if len(self.early) != len(self.late):
            raise ValueError("stage vectors must have equal length")
        if not isinstance(self.boundary, int) or self.boundary < 1:
            raise ValueError("boundary must be a positive integer")

    def for_unit(self, unit_no: int) -> WeightVector:
        return self.early if unit_no <= self.boundary else self.late

    def to_dict(self) -> dict:
        return {
            "early": self.early.to_list(),
            "late": self.late.to_list(),
            "boundary": self.boundary,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "StageWeightSet":
        return cls(
            early=WeightVector(np.asarray(doc["early"], float)),
            late=WeightVector(np.asarray(doc["late"], float)),
            boundary=int(doc["boundary"]),
        )


# Weight study fitted on the 2023 Wimbledon men's singles final
# (match 1301): judgment-route and entropy-route vectors per stage, and
# their additive blends. Published to four decimals, so each column is
# renormalized on load.
REFERENCE_WEIGHTS: dict[str, tuple[float, ...]] = {
    "judgment_early": (
        0.0496, 0.1675, 0.1675, 0.0837, 0.0837, 0.0573, 0.0573,
        0.0248, 0.0838, 0.0838, 0.0419, 0.0419, 0.0286, 0.0286,
    ),
    "judgment_late": (
        0.2403, 0.1254, 0.1254, 0.0594, 0.0594, 0.0284, 0.0284,
        0.1201, 0.0627, 0.0627, 0.0297, 0.0297, 0.0142, 0.0142,
    ),
    "entropy": (
        0.0113, 0.0264, 0.0757, 0.1041, 0.0644, 0.0893, 0.1325,
        0.0112, 0.0297, 0.0616, 0.0969, 0.0593, 0.0756, 0.1621,
    ),
    "combined_early": (
        0.0305, 0.0970, 0.1216, 0.0939, 0.0741, 0.0733, 0.0949,
        0.0180, 0.0567, 0.0727, 0.0694, 0.0506, 0.0521, 0.0954,
    ),
    "combined_late": (
        0.1258, 0.0759, 0.1006, 0.0818, 0.0619, 0.0588, 0.0804,
        0.0657, 0.0462, 0.0621, 0.0633, 0.0445, 0.0449, 0.0882,
    ),
}


def reference_weight_vector(name: str) -> WeightVector:
    if name not in REFERENCE_WEIGHTS:
        raise KeyError(f"unknown reference weight table {name!r}")
    return WeightVector.normalized(REFERENCE_WEIGHTS[name])


STAGE_WEIGHT_PRESETS = ("wimbledon-2023-1301",)


def preset_stage_weights(name: str, boundary: int) -> StageWeightSet:
    """A ready-made stage weight set; the boundary depends on the match."""
    if name != "wimbledon-2023-1301":
        raise KeyError(f"unknown stage weight preset {name!r}")
    return StageWeightSet(
        early=reference_weight_vector("combined_early"),
        late=reference_weight_vector("combined_late"),
        boundary=boundary,
    )


def build_stage_weights(
    judgment_early: JudgmentMatrix,
    judgment_late: JudgmentMatrix,
    normalized: np.ndarray,
    boundary: int,
) -> tuple[StageWeightSet, dict]:
    """Full weighting pass: two judgment solves, one entropy solve, blend.

    The entropy vector is computed once from the whole match and blended
    with each stage's judgment vector.
    """
    if judgment_early.order != N_INDICATORS or judgment_late.order != N_INDICATORS:
        raise ValueError(f"judgment matrices must have order {N_INDICATORS}")
    early_j, diag_early = ahp_weights(judgment_early)
    late_j, diag_late = ahp_weights(judgment_late)
    ent = entropy_weights(normalized)
    stage_set = StageWeightSet(
        early=combine_weights_additive(early_j, ent),
        late=combine_weights_additive(late_j, ent),
        boundary=boundary,
    )
    diagnostics = {
        "early": diag_early,
        "late": diag_late,
        "entropy": ent.to_list(),
        "judgment_early": early_j.to_list(),
        "judgment_late": late_j.to_list(),
    }
    return stage_set, diagnostics
