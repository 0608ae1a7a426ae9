"""FastAPI application exposing the toolkit for remote batch use."""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

import structlog
from fastapi import Depends, FastAPI, Header, HTTPException, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, ValidationError

from . import __version__
from .cli import HANDLERS, RunConfig, status_label
from .config import Settings, get_settings
from .errors import ModspaceError
from .ledger import RunEntry, RunLedger
from .logs import configure_logging

settings = get_settings()
configure_logging(settings)

logger = structlog.get_logger(__name__)

app = FastAPI(title="Modspace Lab API", version=__version__)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.allowed_origins or ["*"],
    allow_methods=["*"],
    allow_headers=["*"],
    allow_credentials=True,
)

ledger = RunLedger()


class WeightRequest(BaseModel):
    weight: str = Field(default="gevrey:s=2", min_length=1, max_length=200)
    probe_max: float = Field(default=1e6, ge=1e4, le=1e12)


class SequenceRequest(BaseModel):
    weight: str = Field(default="gevrey:s=2", min_length=1, max_length=200)
    p_max: int = Field(default=20, ge=0, le=200)


class SubadditivityRequest(BaseModel):
    weight: str = Field(default="gevrey:s=2", min_length=1, max_length=200)
    X: float = Field(default=200.0, gt=0, le=2000.0)
    h: float = Field(default=0.25, gt=0, le=0.5)
    probe_max: float = Field(default=1e6, ge=1e4, le=1e12)


class GridFields(BaseModel):
    grid_n: Optional[int] = Field(default=None, ge=1, le=2)
    grid_L: Optional[float] = Field(default=None, gt=0)
    grid_N: Optional[int] = Field(default=None, ge=16, le=1 << 16)


class NormRequest(GridFields):
    function: str = Field(default="gaussian:sigma=1", min_length=1, max_length=200)
    weight: str = Field(default="gevrey:s=2", min_length=1, max_length=200)
    p: Optional[float] = Field(default=None, ge=1)
    q: Optional[float] = Field(default=None, ge=1)
    k_max: Optional[int] = Field(default=None, ge=2)
    tail_tol: Optional[float] = Field(default=None, gt=0)


class ConstantsRequest(BaseModel):
    variant: Literal["RV_a", "RV_b", "SV"] = "RV_a"
    n: int = Field(default=1, ge=1, le=2)
    q: float = Field(default=2.0, ge=1)
    alpha: float = Field(default=0.5, gt=0, lt=1)
    s: float = Field(default=1.0, gt=0)
    c: float = Field(default=1.0, gt=0)
    delta: float = Field(default=0.0, ge=0)
    N: int = Field(default=3, ge=0)
    radii: List[float] = Field(default_factory=lambda: [2.0, 4.0, 8.0, 16.0], min_length=1, max_length=100)


class DecayRequest(GridFields):
    function: str = Field(default="gevrey:mu=-1", min_length=1, max_length=200)


class ComputationResponse(BaseModel):
    command: str
    status: str
    report: Dict[str, Any]


def _extract_api_key(authorization: str | None, explicit_key: str | None) -> Optional[str]:
    if explicit_key:
        return explicit_key.strip()
    if authorization and authorization.lower().startswith("bearer "):
        return authorization.split(" ", 1)[1].strip()
    return None


async def require_api_key(
    authorization: str | None = Header(default=None),
    x_api_key: str | None = Header(default=None, alias="X-API-Key"),
    settings: Settings = Depends(get_settings),
) -> None:
    if not settings.api_keys:
        return

    candidate = _extract_api_key(authorization, x_api_key)
    if candidate and candidate in settings.api_keys:
        return

    raise HTTPException(status_code=status.HTTP_401_UNAUTHORIZED, detail="Invalid or missing API key")


def _drop_none(values: Dict[str, Any]) -> Dict[str, Any]:
    return {key: value for key, value in values.items() if value is not None}


def _execute(command: str, fields: Dict[str, Any], settings: Settings) -> ComputationResponse:
    defaults = {
        "p": settings.p,
        "q": settings.q,
        "grid_n": settings.grid_n,
        "grid_L": settings.grid_L,
        "grid_N": settings.grid_N,
        "k_max": settings.k_max,
        "tail_tol": settings.tail_tol,
        "theta": settings.theta,
    }
    try:
        config = RunConfig(command=command, **{**defaults, **_drop_none(fields)})
    except ValidationError as exc:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail="; ".join(error["msg"] for error in exc.errors()),
        ) from exc
    outcome = HANDLERS[command](config, settings)
    if settings.record_runs:
        ledger.save(f"api:{command}", status_label(outcome.exit_code), outcome.exit_code, outcome.summary)
    logger.info("api_computation", command=command, exit_code=outcome.exit_code)
    return ComputationResponse(
        command=command, status=status_label(outcome.exit_code), report=outcome.report.to_payload()
    )


@app.exception_handler(ModspaceError)
async def handle_toolkit_error(request: Request, exc: ModspaceError) -> JSONResponse:
    logger.warning("request_rejected", path=str(request.url), error=str(exc), error_type=type(exc).__name__)
    return JSONResponse(status_code=status.HTTP_400_BAD_REQUEST, content={"detail": str(exc)})


@app.exception_handler(Exception)
async def handle_unexpected_error(request: Request, exc: Exception) -> JSONResponse:
    logger.exception("unhandled_exception", path=str(request.url), error=str(exc))
    return JSONResponse(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, content={"detail": "Internal server error"})


@app.get("/health")
async def health() -> dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.post("/weights/validate", response_model=ComputationResponse)
def validate_weight(
    request: WeightRequest, _: None = Depends(require_api_key), settings: Settings = Depends(get_settings)
) -> ComputationResponse:
    return _execute("validate-weight", {"weight_spec": request.weight, "probe_max": request.probe_max}, settings)


@app.post("/weights/sequence", response_model=ComputationResponse)
def weight_sequence(
    request: SequenceRequest, _: None = Depends(require_api_key), settings: Settings = Depends(get_settings)
) -> ComputationResponse:
    return _execute("assoc-seq", {"weight_spec": request.weight, "p_max": request.p_max}, settings)


@app.post("/weights/subadditivity", response_model=ComputationResponse)
def weight_subadditivity(
    request: SubadditivityRequest, _: None = Depends(require_api_key), settings: Settings = Depends(get_settings)
) -> ComputationResponse:
    fields = {"weight_spec": request.weight, "X": request.X, "h": request.h, "probe_max": request.probe_max}
    return _execute("find-s", fields, settings)


@app.post("/norm", response_model=ComputationResponse)
def norm(
    request: NormRequest, _: None = Depends(require_api_key), settings: Settings = Depends(get_settings)
) -> ComputationResponse:
    fields = request.model_dump(exclude={"function", "weight"})
    fields.update(weight_spec=request.weight, function_ids=[request.function])
    return _execute("norm", fields, settings)


@app.post("/constants", response_model=ComputationResponse)
def constants(
    request: ConstantsRequest, _: None = Depends(require_api_key), settings: Settings = Depends(get_settings)
) -> ComputationResponse:
    fields = request.model_dump(exclude={"n"})
    fields["grid_n"] = request.n
    return _execute("constants", fields, settings)


@app.post("/decay", response_model=ComputationResponse)
def decay(
    request: DecayRequest, _: None = Depends(require_api_key), settings: Settings = Depends(get_settings)
) -> ComputationResponse:
    fields = request.model_dump(exclude={"function"})
    fields["function_ids"] = [request.function]
    return _execute("decay", fields, settings)


@app.get("/runs", response_model=List[RunEntry])
async def list_runs(limit: int = 20, _: None = Depends(require_api_key)) -> List[RunEntry]:
    return ledger.load(limit=max(1, min(limit, 500)))


@app.post("/runs/reset")
async def reset_runs(_: None = Depends(require_api_key)) -> dict[str, str]:
    ledger.reset()
    return {"status": "Run ledger cleared"}
