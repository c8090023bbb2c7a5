"""HTTP service: session CRUD, round submission, stats, and a live event stream.

All bodies are JSON. Detection payloads use the detection-stream record
schema (image coordinates); results and stats are returned in the same shape
the batch report uses. `/sessions/{id}/events` is a server-sent-event stream
of round results for live dashboards.
"""

from __future__ import annotations

import json
import queue
from pathlib import Path
from typing import Any, Iterator

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles

from .config import ConfigError, engine_config_from_dict
from .detect import DetectionStreamError, record_from_obj
from .geometry import CalibrationError
from .rotation import RoundKey, RoundKeyError, Team
from .session import (
    DuplicateSessionError,
    RoundOrderError,
    SessionManager,
    UnknownSessionError,
)

SSE_KEEPALIVE_SECONDS = 15.0


def create_app(
    manager: SessionManager | None = None, static_dir: str | Path | None = None
) -> FastAPI:
    """Build the service around a session manager (in-memory if none given)."""
    manager = manager if manager is not None else SessionManager()
    app = FastAPI(title="setsense", version="0.1.0")
    app.state.manager = manager
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        try:
            config = engine_config_from_dict(payload)
        except (ConfigError, CalibrationError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        session_id = payload.get("session_id")
        try:
            session = manager.create_session(config, session_id=session_id)
        except DuplicateSessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"session_id": session.session_id, "config": config.to_dict()}

    @app.post("/sessions/{session_id}/rounds")
    def submit_round(session_id: str, payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        try:
            key = RoundKey(
                score=int(payload["score"]),
                round=int(payload["round"]),
                team=Team(str(payload["team"]).lower()),
            )
        except (KeyError, TypeError, ValueError, RoundKeyError) as exc:
            raise HTTPException(
                status_code=400, detail=f"invalid round key fields: {exc}"
            ) from exc
        raw_detections = payload.get("detections")
        if not isinstance(raw_detections, list):
            raise HTTPException(status_code=400, detail="detections must be an array")
        try:
            frame_height = manager.get_config(session_id).calibration.frame_height
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from exc
        try:
            records = [
                record_from_obj(obj, frame_height, context=f"detections[{i}]")
                for i, obj in enumerate(raw_detections)
            ]
            result = manager.submit_round(session_id, key, records)
        except DetectionStreamError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except RoundOrderError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from exc
        return result.to_dict()

    @app.get("/sessions/{session_id}/stats")
    def get_stats(session_id: str) -> dict[str, Any]:
        try:
            return manager.get_stats(session_id).to_dict()
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from exc

    @app.get("/sessions/{session_id}/rounds")
    def get_rounds(session_id: str) -> dict[str, Any]:
        try:
            rounds = manager.get_rounds(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from exc
        return {"rounds": [r.to_dict() for r in rounds]}

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str) -> StreamingResponse:
        try:
            manager.get_config(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from exc
        return StreamingResponse(
            _event_stream(manager, session_id),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app


def _event_stream(manager: SessionManager, session_id: str) -> Iterator[str]:
    subscription = manager.subscribe(session_id)
    try:
        yield ": connected\n\n"
        while True:
            try:
                result = subscription.get(timeout=SSE_KEEPALIVE_SECONDS)
            except queue.Empty:
                yield ": keepalive\n\n"
                continue
            yield f"event: round_result\ndata: {json.dumps(result.to_dict())}\n\n"
    finally:
        manager.unsubscribe(session_id, subscription)
