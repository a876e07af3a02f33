"""HTTP surface for live operation: frame ingestion, alarm review, model care.

Thin translation layer over :class:`vigil.engine.Engine`; all behavior
(including idempotency by request id) lives in the engine so the CLI and
the service stay trace-identical.

Endpoints (JSON in, JSON out):

    GET  /health                          liveness probe
    GET  /stats                           model + alarm store summary
    POST /streams/{stream_id}/frames      {"request_id"?, "frames": [frame records]}
    GET  /alarms?status=...               alarm queue, peak statistic descending
    GET  /alarms/{alarm_id}               record + trace window + segment size
    POST /alarms/{alarm_id}/label         {"request_id"?, "verdict", "sample_fraction"?, "labeler"?}
    POST /recalibrate                     {"request_id"?, "alpha"?, "vectors": [[...], ...]}

Frame records use the same schema as the wire-format lines (without the
header); the stream's class count must match the model. If the service was
started with an auth token, every request must carry it in ``X-Auth-Token``.
"""

from __future__ import annotations

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import Engine
from .errors import AlarmStateError, InvalidInputError, StreamFormatError, UnknownAlarmError


class FramesPayload(BaseModel):
    request_id: str | None = None
    frames: list[dict] = Field(default_factory=list)


class LabelPayload(BaseModel):
    verdict: str
    request_id: str | None = None
    sample_fraction: float | None = None
    labeler: str = ""


class RecalibratePayload(BaseModel):
    vectors: list[list[float]]
    alpha: float | None = None
    request_id: str | None = None


def create_app(engine: Engine, auth_token: str | None = None) -> FastAPI:
    app = FastAPI(title="vigil", version="0.1.0")

    def check_auth(x_auth_token: str | None = Header(default=None)):
        if auth_token is not None and x_auth_token != auth_token:
            raise HTTPException(status_code=401, detail="missing or invalid auth token")

    auth = Depends(check_auth)

    @app.exception_handler(UnknownAlarmError)
    async def _unknown_alarm(request: Request, exc: UnknownAlarmError):
        return JSONResponse(status_code=404, content={"error": f"unknown alarm: {exc.args[0]}"})

    @app.exception_handler(AlarmStateError)
    async def _alarm_state(request: Request, exc: AlarmStateError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(InvalidInputError)
    async def _bad_input(request: Request, exc: InvalidInputError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(StreamFormatError)
    async def _bad_record(request: Request, exc: StreamFormatError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/stats", dependencies=[auth])
    def stats():
        return {**engine.stats(), "state_digest": engine.model.state_digest()}

    @app.post("/streams/{stream_id}/frames", dependencies=[auth])
    def submit_frames(stream_id: str, payload: FramesPayload):
        return engine.process_records(payload.frames, stream_id=stream_id, request_id=payload.request_id)

    @app.post("/streams/{stream_id}/finalize", dependencies=[auth])
    def finalize(stream_id: str):
        record = engine.finalize_stream(stream_id)
        return {"alarm": record.to_dict() if record is not None else None}

    @app.get("/alarms", dependencies=[auth])
    def alarms(status: str | None = None):
        return {"alarms": [r.to_dict() for r in engine.alarm_list(status=status)]}

    @app.get("/alarms/{alarm_id}", dependencies=[auth])
    def alarm_detail(alarm_id: str):
        return engine.alarm_detail(alarm_id)

    @app.post("/alarms/{alarm_id}/label", dependencies=[auth])
    def label(alarm_id: str, payload: LabelPayload):
        return engine.label_alarm(
            alarm_id,
            payload.verdict,
            sample_fraction=payload.sample_fraction,
            labeler=payload.labeler,
            request_id=payload.request_id,
        )

    @app.post("/recalibrate", dependencies=[auth])
    def recalibrate(payload: RecalibratePayload):
        return engine.recalibrate(payload.vectors, alpha=payload.alpha, request_id=payload.request_id)

    return app
