"""Live session state: an append-only event log plus series derived from it.

The log is the single source of truth. Every mutation (append, undo)
recomputes the indicator matrix, potential series, turn labels and risk
scores from scratch through the same functions the batch pipeline uses,
so a live replay of a recorded match reproduces the batch numbers
exactly. Matches are short enough that the quadratic replay cost never
matters.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..ingest import (
    NetApproach,
    PointRecord,
    extract_indicators,
    record_to_dict,
    standardize_with_stats,
)
from ..potential import mark_turning_points, midpoint_boundary
from ..weights import (
    JudgmentMatrix,
    STAGE_WEIGHT_PRESETS,
    StageWeightSet,
    ahp_weights,
    combine_weights_additive,
    preset_stage_weights,
)
from ..potential import quantify_both
from .registry import ModelBundle


class OutOfOrderError(Exception):
    """The posted point_index is not the next contiguous unit."""


class EmptyLogError(Exception):
    """Undo requested on a session with no events."""


class WeightSetupError(Exception):
    """The session's weight request is invalid."""


def resolve_session_weights(
    bundle: ModelBundle,
    boundary: int,
    weight_preset: str | None,
    judgment_early: list[list[float]] | None,
    judgment_late: list[list[float]] | None,
) -> tuple[StageWeightSet, str]:
    """Stage weights for a new session, plus a label describing their origin.

    The judgment route blends each stage's judgment-derived vector with
    the bundle's frozen entropy vector, mirroring the batch formula with
    the entropy input frozen (live data cannot supply one).
    """
    if (judgment_early is None) != (judgment_late is None):
        raise WeightSetupError("judgment_early and judgment_late must come together")
    if judgment_early is not None:
        try:
            early_j, _ = ahp_weights(JudgmentMatrix(np.asarray(judgment_early, dtype=float)))
            late_j, _ = ahp_weights(JudgmentMatrix(np.asarray(judgment_late, dtype=float)))
            weights = StageWeightSet(
                early=combine_weights_additive(early_j, bundle.entropy),
                late=combine_weights_additive(late_j, bundle.entropy),
                boundary=boundary,
            )
        except ValueError as exc:
            raise WeightSetupError(str(exc)) from exc
        return weights, "judgment+frozen-entropy"
    preset = weight_preset or STAGE_WEIGHT_PRESETS[0]
    if preset not in STAGE_WEIGHT_PRESETS:
        raise WeightSetupError(f"unknown weight preset {preset!r}")
    return preset_stage_weights(preset, boundary), f"preset:{preset}"


@dataclass
class _Derived:
    point_index: list[int] = field(default_factory=list)
    p_a: list[float] = field(default_factory=list)
    p_b: list[float] = field(default_factory=list)
    diff: list[float] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)
    risk: list[float] = field(default_factory=list)


class LiveSession:
    """One match in progress; all mutations serialize on the session lock."""

    def __init__(
        self,
        session_id: str,
        player_a: str,
        player_b: str,
        bundle: ModelBundle,
        weights: StageWeightSet,
        weight_source: str,
        length_hint: int,
    ):
        self.session_id = session_id
        self.player_a = player_a
        self.player_b = player_b
        self.bundle = bundle
        self.weights = weights
        self.weight_source = weight_source
        self.length_hint = length_hint
        self.lock = threading.Lock()
        self.log: list[PointRecord] = []
        self._derived = _Derived()

    @property
    def n_points(self) -> int:
        return len(self.log)

    def meta(self) -> dict:
        return {
            "session_id": self.session_id,
            "player_a": self.player_a,
            "player_b": self.player_b,
            "model_id": self.bundle.model_id,
            "weight_source": self.weight_source,
            "stage_boundary": self.weights.boundary,
            "length_hint": self.length_hint,
            "n_points": self.n_points,
        }

    def _recompute(self) -> None:
        if not self.log:
            self._derived = _Derived()
            return
        matrix = standardize_with_stats(extract_indicators(self.log), self.bundle.column_stats)
        series_a, series_b = quantify_both(matrix, self.weights)
        if len(self.log) >= 2:
            turns = mark_turning_points(series_a, series_b)
            labels = [int(v) for v in turns.labels]
            diff = [float(v) for v in turns.diff]
        else:
            labels = [0]
            diff = [float(series_a.values[0] - series_b.values[0])]
        risk = self.bundle.model.scores(matrix.standardized)
        self._derived = _Derived(
            point_index=[int(v) for v in matrix.point_index],
            p_a=series_a.to_list(),
            p_b=series_b.to_list(),
            diff=diff,
            labels=labels,
            risk=[float(v) for v in risk],
        )

    def _snapshot(self) -> dict:
        d = self._derived
        if not d.point_index:
            return {
                "unit": 0,
                "p_a": None,
                "p_b": None,
                "delta": None,
                "turn_risk": None,
                "turned": False,
            }
        return {
            "unit": d.point_index[-1],
            "p_a": d.p_a[-1],
            "p_b": d.p_b[-1],
            "delta": d.diff[-1],
            "turn_risk": d.risk[-1],
            "turned": bool(d.labels[-1]),
        }

    def append(self, record: PointRecord) -> dict:
        with self.lock:
            expected = self.n_points + 1
            if record.point_index != expected:
                raise OutOfOrderError(
                    f"expected point_index {expected}, got {record.point_index}"
                )
            self.log.append(record)
            try:
                self._recompute()
            except Exception:
                self.log.pop()
                self._recompute()
                raise
            return self._snapshot()

    def undo(self) -> dict:
        with self.lock:
            if not self.log:
                raise EmptyLogError("no points to undo")
            self.log.pop()
            self._recompute()
            return self._snapshot()

    def state(self) -> dict:
        with self.lock:
            d = self._derived
            return {
                "session": self.meta(),
                "series": {
                    "point_index": list(d.point_index),
                    "p_a": list(d.p_a),
                    "p_b": list(d.p_b),
                    "diff": list(d.diff),
                    "labels": list(d.labels),
                    "risk": list(d.risk),
                },
            }

    def log_export(self) -> list[dict]:
        with self.lock:
            return [record_to_dict(r) for r in self.log]


def event_to_record(session_id: str, body) -> PointRecord:
    """Build the canonical point record for a posted event.

    Raises ValueError when the event fields are semantically impossible
    (e.g. an ace by the receiver); those map to a validation failure.
    """
    net = body.net_approach
    return PointRecord(
        match_id=f"live-{session_id}",
        set_no=body.set_no,
        game_no=body.game_no,
        point_index=body.point_index,
        server=body.server,
        point_winner=body.point_winner,
        distance_run_a=body.distance_run_a,
        distance_run_b=body.distance_run_b,
        score_state=body.score_state,
        ace=body.ace,
        double_fault=body.double_fault,
        unforced_error=body.unforced_error,
        winner_shot=body.winner_shot,
        net_approach=None if net is None else NetApproach(net.player, net.won),
        break_point_won=body.break_point_won,
    )


class SessionStore:
    """Threadsafe id-to-session map."""

    def __init__(self) -> None:
        self._sessions: dict[str, LiveSession] = {}
        self._lock = threading.Lock()

    def create(
        self,
        player_a: str,
        player_b: str,
        bundle: ModelBundle,
        length_hint: int,
        weight_preset: str | None,
        judgment_early: list[list[float]] | None,
        judgment_late: list[list[float]] | None,
    ) -> LiveSession:
        boundary = midpoint_boundary(length_hint)
        weights, source = resolve_session_weights(
            bundle, boundary, weight_preset, judgment_early, judgment_late
        )
        session_id = uuid.uuid4().hex[:12]
        session = LiveSession(
            session_id=session_id,
            player_a=player_a,
            player_b=player_b,
            bundle=bundle,
            weights=weights,
            weight_source=source,
            length_hint=length_hint,
        )
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> LiveSession | None:
        with self._lock:
            return self._sessions.get(session_id)
