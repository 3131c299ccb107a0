"""HTTP demo backend: perturbation-as-a-service plus nearby virtual objects.

POST /PrivAR takes a fix, applies the selected mechanism (session-aware for
the thresholded mechanism), spawns an object field around the released point,
and reports catchability and per-stage timings. Versioned JSON ("v": 1)
throughout. POST /PrivAR/topup and /PrivAR/end manage session budgets;
GET /healthz is liveness.

The demo client transmits the true location and the server perturbs it,
keeping the browser thin; for a real deployment the library runs client-side
and only released coordinates leave the device.
"""
from __future__ import annotations

import json
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .geo import GeoPoint, PlanarPoint, Projection
from .ingest import _parse_timestamp
from .mechanisms import StaircaseParams, plm_sample, psm_sample
from .objects import ObjectFieldConfig, catchable_fraction, generate_field
from .session import BudgetExhaustedError, BudgetTooSmallError, TrPsmConfig, TrPsmSession

_OBJECT_STREAM_KEY = 0x0B1EC7  # decorrelates object placement from mechanism noise


@dataclass(frozen=True)
class ServiceSettings:
    """Server-side knobs; the wire schema is independent of these."""

    default_density: str = "sparse"
    field_radius: float = 150.0
    visibility_radius: float = 100.0
    session_ttl: float = 600.0
    snapshot_path: Optional[str] = None


class WireLocation(BaseModel):
    model_config = ConfigDict(extra="forbid")
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)


class PrivArRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    v: int = 1
    session_id: str = Field(min_length=1)
    mechanism: Literal["plm", "psm", "trpsm"]
    epsilon: float = Field(gt=0.0)
    epsilon_total: Optional[float] = None
    delta: Optional[float] = None
    density: Optional[Literal["sparse", "dense"]] = None
    true_location: WireLocation
    timestamp: str
    seed: Optional[int] = None

    @field_validator("timestamp")
    @classmethod
    def _iso8601(cls, value: str) -> str:
        _parse_timestamp(value)
        return value

    @model_validator(mode="after")
    def _trpsm_fields(self) -> "PrivArRequest":
        if self.mechanism == "trpsm":
            if self.epsilon_total is None:
                raise ValueError("trpsm requires epsilon_total")
            if self.delta is not None and self.delta <= 0.0:
                raise ValueError("delta must be positive")
        elif self.epsilon_total is not None or self.delta is not None:
            raise ValueError("epsilon_total and delta apply to trpsm only")
        return self


class WireObject(BaseModel):
    model_config = ConfigDict(extra="forbid")
    id: str
    lat: float
    lon: float


class WireTimings(BaseModel):
    model_config = ConfigDict(extra="forbid")
    perturb_ms: float
    objects_ms: float
    serialize_ms: float
    total_ms: float


class PrivArResponse(BaseModel):
    model_config = ConfigDict(extra="forbid")
    v: int = 1
    released_location: WireLocation
    decision: Literal["initial", "released", "reused"]
    budget_spent: Optional[float]
    budget_left: Optional[float]
    objects: list[WireObject]
    catchable_pct: Optional[float]
    timings: WireTimings


class TopupRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    v: int = 1
    session_id: str = Field(min_length=1)
    additional: float = Field(ge=0.0)


class EndRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    v: int = 1
    session_id: str = Field(min_length=1)


@dataclass
class _StoredSession:
    session: TrPsmSession
    rng: np.random.Generator
    object_rng: np.random.Generator
    projection: Projection
    origin: GeoPoint
    mechanism: str
    epsilon: float
    density: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_seen: float = field(default_factory=time.monotonic)


class SessionStore:
    """In-memory session map with idle expiry; single-writer per session."""

    def __init__(self, ttl: float):
        self.ttl = ttl
        self._items: dict[str, _StoredSession] = {}
        self._lock = threading.Lock()

    def sweep(self) -> None:
        now = time.monotonic()
        with self._lock:
            stale = [sid for sid, s in self._items.items() if now - s.last_seen > self.ttl]
            for sid in stale:
                del self._items[sid]

    def get(self, session_id: str) -> Optional[_StoredSession]:
        # Expiry is enforced here too, so idle sessions vanish on first
        # touch even when no sweep ran in between.
        now = time.monotonic()
        with self._lock:
            stored = self._items.get(session_id)
            if stored is None:
                return None
            if now - stored.last_seen > self.ttl:
                del self._items[session_id]
                return None
            stored.last_seen = now
            return stored

    def put(self, session_id: str, stored: _StoredSession) -> None:
        with self._lock:
            self._items[session_id] = stored

    def pop(self, session_id: str) -> Optional[_StoredSession]:
        with self._lock:
            stored = self._items.pop(session_id, None)
            if stored is not None and time.monotonic() - stored.last_seen > self.ttl:
                return None
            return stored

    def snapshot_all(self) -> dict:
        with self._lock:
            out = {}
            for sid, s in self._items.items():
                out[sid] = {
                    "session": s.session.snapshot(),
                    "epsilon": s.epsilon,
                    "delta": s.session.cfg.delta,
                    "mechanism": s.mechanism,
                    "density": s.density,
                    "origin": {"lat": s.origin.lat, "lon": s.origin.lon},
                    "rng_state": s.rng.bit_generator.state,
                    "object_rng_state": s.object_rng.bit_generator.state,
                }
            return out

    def save(self, path: str) -> None:
        Path(path).write_text(json.dumps(self.snapshot_all()))

    def load(self, path: str) -> int:
        raw = json.loads(Path(path).read_text())
        n = 0
        for sid, rec in raw.items():
            cfg = TrPsmConfig(
                epsilon=rec["epsilon"],
                epsilon_total=rec["session"]["epsilon_total"],
                delta=rec["delta"],
            )
            rng = np.random.default_rng()
            rng.bit_generator.state = rec["rng_state"]
            object_rng = np.random.default_rng()
            object_rng.bit_generator.state = rec["object_rng_state"]
            origin = GeoPoint(rec["origin"]["lat"], rec["origin"]["lon"])
            self.put(
                sid,
                _StoredSession(
                    session=TrPsmSession.restore(cfg, rec["session"], rng),
                    rng=rng,
                    object_rng=object_rng,
                    projection=Projection(origin),
                    origin=origin,
                    mechanism=rec["mechanism"],
                    epsilon=rec["epsilon"],
                    density=rec["density"],
                ),
            )
            n += 1
        return n


def _error(status: int, payload: dict) -> JSONResponse:
    return JSONResponse(status_code=status, content=payload)


def _object_rng(seed: Optional[int]) -> np.random.Generator:
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng([seed, _OBJECT_STREAM_KEY])


def create_app(settings: ServiceSettings = ServiceSettings()) -> FastAPI:
    store = SessionStore(settings.session_ttl)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if settings.snapshot_path:
            store.save(settings.snapshot_path)

    app = FastAPI(title="location privacy demo service", lifespan=lifespan)
    # the browser demo client runs on a different origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    app.state.store = store
    app.state.settings = settings

    if settings.snapshot_path and Path(settings.snapshot_path).exists():
        store.load(settings.snapshot_path)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/PrivAR")
    def privar(req: PrivArRequest):
        t_start = time.perf_counter()
        try:
            return _handle_privar(req, t_start)
        except BudgetTooSmallError as exc:
            return _error(400, {"error": "BudgetTooSmall", "detail": str(exc)})
        except ValueError as exc:
            return _error(400, {"error": "InvalidRequest", "detail": str(exc)})

    def _handle_privar(req: PrivArRequest, t_start: float):
        store.sweep()
        geo = GeoPoint(req.true_location.lat, req.true_location.lon)
        field_cfg = ObjectFieldConfig.for_density(
            req.density or settings.default_density,
            settings.field_radius,
            settings.visibility_radius,
        )

        if req.mechanism == "trpsm":
            stored = store.get(req.session_id)
            if stored is None:
                rng = np.random.default_rng(req.seed)
                projection = Projection(geo)
                cfg = TrPsmConfig(
                    epsilon=req.epsilon,
                    epsilon_total=req.epsilon_total,
                    delta=req.delta if req.delta is not None else 5.0,
                )
                t0 = time.perf_counter()
                session, decision = TrPsmSession.start(projection.project(geo), cfg, rng)
                perturb_ms = (time.perf_counter() - t0) * 1e3
                stored = _StoredSession(
                    session=session,
                    rng=rng,
                    object_rng=_object_rng(req.seed),
                    projection=projection,
                    origin=geo,
                    mechanism="trpsm",
                    epsilon=req.epsilon,
                    density=req.density or settings.default_density,
                )
                store.put(req.session_id, stored)
            else:
                if stored.mechanism != req.mechanism:
                    return _error(409, {"error": "SessionMismatch", "session_id": req.session_id})
                with stored.lock:
                    x = stored.projection.project(geo)
                    t0 = time.perf_counter()
                    try:
                        decision = stored.session.step(x)
                    except BudgetExhaustedError as exc:
                        return _error(
                            409,
                            {
                                "error": "BudgetExhausted",
                                "spend": exc.spend,
                                "epsilon_total": exc.epsilon_total,
                            },
                        )
                    perturb_ms = (time.perf_counter() - t0) * 1e3
            session = stored.session
            projection = stored.projection
            object_rng = stored.object_rng
            x_true = stored.projection.project(geo)
            released = decision.output
            decision_name = decision.kind.value
            # budget_spent is this step's cost (2*eps, eps, or 0), so the
            # field sums to the session spend across responses; budget_left
            # is the running remainder.
            budget_spent = decision.budget_spent_this_step
            budget_left = session.epsilon_left
        else:
            if store.get(req.session_id) is not None:
                return _error(409, {"error": "SessionMismatch", "session_id": req.session_id})
            rng = np.random.default_rng(req.seed)
            object_rng = _object_rng(req.seed)
            projection = Projection(geo)
            x_true = projection.project(geo)
            t0 = time.perf_counter()
            if req.mechanism == "plm":
                released = plm_sample(x_true, req.epsilon, rng)
            else:
                released = psm_sample(x_true, StaircaseParams(req.epsilon), rng)
            perturb_ms = (time.perf_counter() - t0) * 1e3
            decision_name = "released"
            budget_spent = req.epsilon
            budget_left = None

        t0 = time.perf_counter()
        objs = generate_field(released, field_cfg, object_rng)
        pct = catchable_fraction(x_true, released, objs, field_cfg)
        objects_ms = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        rel = projection.unproject(released)
        wire_objects = []
        for o in objs:
            geo_o = projection.unproject(o.point)
            wire_objects.append({"id": o.id, "lat": geo_o.lat, "lon": geo_o.lon})
        payload = {
            "v": 1,
            "released_location": {"lat": rel.lat, "lon": rel.lon},
            "decision": decision_name,
            "budget_spent": budget_spent,
            "budget_left": budget_left,
            "objects": wire_objects,
            "catchable_pct": pct,
            "timings": {"perturb_ms": 0.0, "objects_ms": 0.0, "serialize_ms": 0.0, "total_ms": 0.0},
        }
        json.dumps(payload)
        serialize_ms = (time.perf_counter() - t0) * 1e3
        payload["timings"] = {
            "perturb_ms": perturb_ms,
            "objects_ms": objects_ms,
            "serialize_ms": serialize_ms,
            "total_ms": (time.perf_counter() - t_start) * 1e3,
        }
        return JSONResponse(content=payload)

    @app.post("/PrivAR/topup")
    def topup(req: TopupRequest):
        stored = store.get(req.session_id)
        if stored is None:
            return _error(404, {"error": "UnknownSession", "session_id": req.session_id})
        with stored.lock:
            stored.session.top_up(req.additional)
            return {
                "v": 1,
                "session_id": req.session_id,
                "budget_left": stored.session.epsilon_left,
                "epsilon_total": stored.session.epsilon_total,
            }

    @app.post("/PrivAR/end")
    def end(req: EndRequest):
        stored = store.pop(req.session_id)
        if stored is None:
            return _error(404, {"error": "UnknownSession", "session_id": req.session_id})
        with stored.lock:
            return {
                "v": 1,
                "session_id": req.session_id,
                "releases": stored.session.releases,
                "spend": stored.session.spend(),
                "epsilon": stored.epsilon,
                "epsilon_total": stored.session.epsilon_total,
            }

    return app
