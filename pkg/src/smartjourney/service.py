"""Read-only HTTP JSON prediction service.

Serves districts, artifact metadata, hourly history, and forecasts over
frozen artifacts loaded at startup. Every error body is JSON of the form
{"error": code, "message": text}. Artifacts never change while serving, so
identical queries produce identical bodies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .artifact import ModelArtifact, load_artifact
from .districts import DEFAULT_DISTRICTS, District
from .pipeline import HourlyDistrictRow, read_prepared_csv, rows_for_district
from .training import (
    DEFAULT_HORIZON,
    MAX_HORIZON,
    MODEL_TYPES,
    InsufficientHistoryError,
    forecast as run_forecast,
)

TS_FORMAT = "%Y-%m-%dT%H:00:00"
DEFAULT_MODEL = "gbdt"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class ServiceConfig:
    models_dir: str | Path
    prepared_path: str | Path
    port: int = 8000
    default_model: str = DEFAULT_MODEL
    cors_origins: tuple[str, ...] = ("*",)
    registry: tuple[District, ...] = DEFAULT_DISTRICTS


@dataclass
class ServiceState:
    artifacts: dict[tuple[str, str], ModelArtifact] = field(default_factory=dict)
    history: dict[str, list[HourlyDistrictRow]] = field(default_factory=dict)


def load_state(config: ServiceConfig) -> ServiceState:
    """Load and validate every artifact and the prepared history up front.

    Any unreadable artifact raises, so a misconfigured service refuses to
    start instead of serving a degraded model set.
    """
    state = ServiceState()
    models_dir = Path(config.models_dir)
    if models_dir.exists():
        for path in sorted(models_dir.glob("*.json")):
            artifact = load_artifact(path)
            state.artifacts[(artifact.district, artifact.model_type)] = artifact
    rows = read_prepared_csv(config.prepared_path)
    for district in {r.district for r in rows}:
        state.history[district] = rows_for_district(rows, district)
    return state


def _parse_ts(value: str, code: str) -> datetime:
    try:
        return datetime.fromisoformat(value).replace(minute=0, second=0, microsecond=0)
    except ValueError:
        raise ApiError(400, code, f"cannot parse timestamp {value!r}") from None


def create_app(config: ServiceConfig) -> FastAPI:
    state = load_state(config)
    app = FastAPI(title="smartjourney", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["GET"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def handle_api_error(_req: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation(_req: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": "invalid_request", "message": str(exc)}
        )

    registry_names = {d.name for d in config.registry}

    def _require_district(name: str) -> None:
        if name not in registry_names:
            raise ApiError(404, "unknown_district", f"district {name!r} is not served")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/v1/districts")
    def districts() -> list[dict]:
        return [
            {
                "name": d.name,
                "latitude": d.latitude,
                "longitude": d.longitude,
                "models_available": sorted(
                    model for (district, model) in state.artifacts if district == d.name
                ),
            }
            for d in config.registry
        ]

    @app.get("/v1/models")
    def models() -> list[dict]:
        return [
            {
                "model_type": a.model_type,
                "district": a.district,
                "created_at": a.created_at,
                "test_metrics": a.test_metrics.to_dict(),
            }
            for _key, a in sorted(state.artifacts.items())
        ]

    @app.get("/v1/history")
    def history(
        district: str,
        from_ts: str = Query(..., alias="from"),
        to_ts: str = Query(..., alias="to"),
    ) -> list[dict]:
        _require_district(district)
        lo = _parse_ts(from_ts, "invalid_timestamp")
        hi = _parse_ts(to_ts, "invalid_timestamp")
        if lo > hi:
            raise ApiError(400, "invalid_range", "'from' must not be after 'to'")
        rows = state.history.get(district, [])
        return [
            {"ts": r.timestamp.strftime(TS_FORMAT), "vehicles": r.num_vehicles}
            for r in rows
            if lo <= r.timestamp <= hi
        ]

    @app.get("/v1/forecast")
    def forecast_endpoint(
        district: str,
        start: str | None = None,
        horizon: str = str(DEFAULT_HORIZON),
        model: str = config.default_model,
    ) -> dict:
        _require_district(district)
        if model not in MODEL_TYPES:
            raise ApiError(400, "invalid_model", f"model must be one of {MODEL_TYPES}")
        artifact = state.artifacts.get((district, model))
        if artifact is None:
            raise ApiError(
                404, "artifact_not_found", f"no trained {model} artifact for {district}"
            )
        try:
            horizon_n = int(horizon)
        except ValueError:
            raise ApiError(400, "invalid_horizon", f"horizon must be an integer, got {horizon!r}") from None
        if not 1 <= horizon_n <= MAX_HORIZON:
            raise ApiError(400, "invalid_horizon", f"horizon must be in [1, {MAX_HORIZON}]")

        rows = state.history.get(district, [])
        if start is not None:
            start_ts = _parse_ts(start, "invalid_timestamp")
            rows = [r for r in rows if r.timestamp <= start_ts]
        if not rows:
            raise ApiError(409, "insufficient_history", "no history before the requested start")

        try:
            result = run_forecast(
                artifact,
                rows,
                horizon=horizon_n,
                generated_at=rows[-1].timestamp.strftime(TS_FORMAT),
            )
        except InsufficientHistoryError as exc:
            raise ApiError(409, "insufficient_history", str(exc)) from None

        return {
            "district": result.district,
            "model": result.model_type,
            "generated_at": result.generated_at,
            "points": [
                {
                    "ts": p.timestamp.strftime(TS_FORMAT),
                    "vehicles": p.vehicles,
                    "level": p.level,
                }
                for p in result.points
            ],
        }

    return app


def run_service(config: ServiceConfig) -> None:
    """Blocking uvicorn server; raises on startup problems (bound port, bad artifacts)."""
    import signal
    import socket
    import threading

    import uvicorn

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind(("0.0.0.0", config.port))

    app = create_app(config)
    server = uvicorn.Server(
        uvicorn.Config(app, host="0.0.0.0", port=config.port, log_level="warning")
    )
    if threading.current_thread() is threading.main_thread():
        # uvicorn re-raises a captured SIGTERM after shutdown; absorb it so
        # terminating the service exits 0
        def _graceful(_signum, _frame):
            server.should_exit = True

        signal.signal(signal.SIGTERM, _graceful)
        signal.signal(signal.SIGINT, _graceful)
    server.run()
