"""Request and response bodies for the live session API.

Every state-bearing response carries ``schema_version`` so clients can
detect incompatible servers. Documents are plain JSON; numbers are sent
at full float precision.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, field_validator

SCHEMA_VERSION = 1


class NetApproachBody(BaseModel):
    player: str = Field(pattern="^[AB]$")
    won: bool


class CreateSessionRequest(BaseModel):
    player_a: str = Field(min_length=1, max_length=80)
    player_b: str = Field(min_length=1, max_length=80)
    model_id: str = "toy-forest"
    weight_preset: str | None = "wimbledon-2023-1301"
    judgment_early: list[list[float]] | None = None
    judgment_late: list[list[float]] | None = None
    length_hint: int = Field(default=100, ge=2, le=10000)


class SessionMeta(BaseModel):
    session_id: str
    player_a: str
    player_b: str
    model_id: str
    weight_source: str
    stage_boundary: int
    length_hint: int
    n_points: int


class CreateSessionResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    session: SessionMeta


class PointEventBody(BaseModel):
    """One completed point, as entered courtside.

    Field meanings mirror the batch ingest schema; ``point_index`` must
    be the next contiguous unit number.
    """

    set_no: int = Field(ge=1)
    game_no: int = Field(ge=1)
    point_index: int = Field(ge=1)
    server: str = Field(pattern="^[AB]$")
    point_winner: str = Field(pattern="^[AB]$")
    distance_run_a: float = Field(ge=0)
    distance_run_b: float = Field(ge=0)
    score_state: str = ""
    ace: str | None = None
    double_fault: str | None = None
    unforced_error: str | None = None
    winner_shot: str | None = None
    net_approach: NetApproachBody | None = None
    break_point_won: str | None = None

    @field_validator("ace", "double_fault", "unforced_error", "winner_shot", "break_point_won")
    @classmethod
    def _player_or_none(cls, v: str | None) -> str | None:
        if v is not None and v not in ("A", "B"):
            raise ValueError("must be 'A', 'B' or null")
        return v


class PointSnapshot(BaseModel):
    """State right after the latest point (or after an undo)."""

    schema_version: int = SCHEMA_VERSION
    unit: int
    p_a: float | None
    p_b: float | None
    delta: float | None
    turn_risk: float | None
    turned: bool


class SeriesBlock(BaseModel):
    point_index: list[int]
    p_a: list[float]
    p_b: list[float]
    diff: list[float]
    labels: list[int]
    risk: list[float]


class SessionState(BaseModel):
    schema_version: int = SCHEMA_VERSION
    session: SessionMeta
    series: SeriesBlock


class SessionLog(BaseModel):
    schema_version: int = SCHEMA_VERSION
    session_id: str
    events: list[dict]


class ModelInfo(BaseModel):
    model_id: str
    description: str
    kind: str
    n_features: int


class ModelList(BaseModel):
    schema_version: int = SCHEMA_VERSION
    models: list[ModelInfo]
