"""HTTP front end for live match sessions.

Endpoints (all JSON, no auth, intended for local-first deployment):

- ``POST /sessions`` creates a session bound to a served model.
- ``POST /sessions/{id}/points`` appends the next point event.
- ``GET /sessions/{id}/state`` returns the full series for charting.
- ``DELETE /sessions/{id}/points/last`` undoes the latest event.
- ``GET /sessions/{id}/log`` exports the raw event log.
- ``GET /models`` lists the models available for new sessions.

When a console build directory is supplied (or found via the
TURNPOINT_CONSOLE environment variable) it is served at ``/console``.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import RedirectResponse
from fastapi.staticfiles import StaticFiles

from .. import __version__
from .registry import ModelRegistry
from .schemas import (
    SCHEMA_VERSION,
    CreateSessionRequest,
    CreateSessionResponse,
    ModelInfo,
    ModelList,
    PointEventBody,
    PointSnapshot,
    SessionLog,
    SessionMeta,
    SessionState,
)
from .sessions import (
    EmptyLogError,
    OutOfOrderError,
    SessionStore,
    WeightSetupError,
    event_to_record,
)

__all__ = ["create_app", "SCHEMA_VERSION"]


def _resolve_console_dir(console_dir: str | Path | None) -> Path | None:
    candidate = console_dir or os.environ.get("TURNPOINT_CONSOLE")
    if not candidate:
        return None
    path = Path(candidate)
    return path if path.is_dir() else None


def create_app(
    model_dir: str | Path | None = None,
    console_dir: str | Path | None = None,
) -> FastAPI:
    """Build the service with its model registry and session store."""
    registry = ModelRegistry.with_defaults(model_dir)
    store = SessionStore()
    app = FastAPI(title="turnpoint live service", version=__version__)
    static_dir = _resolve_console_dir(console_dir)

    def _session_or_404(session_id: str):
        session = store.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return session

    @app.get("/")
    def root():
        if static_dir is not None:
            return RedirectResponse(url="/console/", status_code=307)
        return {
            "service": "turnpoint",
            "schema_version": SCHEMA_VERSION,
            "endpoints": [
                "POST /sessions",
                "POST /sessions/{id}/points",
                "GET /sessions/{id}/state",
                "DELETE /sessions/{id}/points/last",
                "GET /sessions/{id}/log",
                "GET /models",
            ],
        }

    @app.get("/models", response_model=ModelList)
    def list_models():
        return ModelList(
            models=[
                ModelInfo(
                    model_id=b.model_id,
                    description=b.description,
                    kind=b.kind,
                    n_features=b.n_features,
                )
                for b in registry.list()
            ]
        )

    @app.post("/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session(body: CreateSessionRequest):
        bundle = registry.get(body.model_id)
        if bundle is None:
            raise HTTPException(status_code=404, detail=f"no model {body.model_id!r}")
        try:
            session = store.create(
                player_a=body.player_a,
                player_b=body.player_b,
                bundle=bundle,
                length_hint=body.length_hint,
                weight_preset=body.weight_preset,
                judgment_early=body.judgment_early,
                judgment_late=body.judgment_late,
            )
        except WeightSetupError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return CreateSessionResponse(session=SessionMeta(**session.meta()))

    @app.post("/sessions/{session_id}/points", response_model=PointSnapshot)
    def post_point(session_id: str, body: PointEventBody):
        session = _session_or_404(session_id)
        try:
            record = event_to_record(session_id, body)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            snapshot = session.append(record)
        except OutOfOrderError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return PointSnapshot(**snapshot)

    @app.get("/sessions/{session_id}/state", response_model=SessionState)
    def get_state(session_id: str):
        session = _session_or_404(session_id)
        doc = session.state()
        return SessionState(session=SessionMeta(**doc["session"]), series=doc["series"])

    @app.delete("/sessions/{session_id}/points/last", response_model=PointSnapshot)
    def undo_point(session_id: str):
        session = _session_or_404(session_id)
        try:
            snapshot = session.undo()
        except EmptyLogError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return PointSnapshot(**snapshot)

    @app.get("/sessions/{session_id}/log", response_model=SessionLog)
    def export_log(session_id: str):
        session = _session_or_404(session_id)
        return SessionLog(session_id=session_id, events=session.log_export())

    if static_dir is not None:
        app.mount("/console", StaticFiles(directory=static_dir, html=True), name="console")

    return app
