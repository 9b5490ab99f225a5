"""HTTP facade over the correction loop for interactive clients.

Each session wraps one ``LoopState`` built by the same job constructor the
batch runner uses, so a client that answers queries with the simulated
expert's feedback reproduces the corresponding batch run exactly. Every
mutating request is appended to a per-session JSONL event log; replaying a
log rebuilds the session state.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from . import attribution as attr
from .attribution import AttributionError
from .augmentation import AugmentationError, Correction
from .config import ConfigError, load_config, single_job
from .data import DataError, Task
from .engine import (
    DuplicateCorrectionError,
    EngineError,
    LoopState,
    PoolExhaustedError,
    QueryItem,
    RetrainBlockedError,
    StrategyKind,
    UnknownSampleError,
    feedback_from_correction,
)
from .models import ModelError

_SHAP_DISPLAY = frozenset({StrategyKind.INTERACTIVE_SHAP, StrategyKind.INTERACTIVE_SINGLE_SHAP})


@dataclass(frozen=True)
class ServiceSettings:
    default_config: Optional[Path] = None
    log_dir: Optional[Path] = None


class _Session:
    def __init__(self, session_id: str, state: LoopState, log_path: Optional[Path]):
        self.id = session_id
        self.state = state
        self.log_path = log_path
        self.lock = threading.Lock()
        self.complete = False
        self._display: dict[int, attr.Attribution] = {}
        self.draw()

    def draw(self) -> None:
        try:
            self.state.draw_query()
            self._display = {}
        except PoolExhaustedError:
            self.complete = True

    def log(self, event: dict) -> None:
        if self.log_path is None:
            return
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def display_attribution(self, item: QueryItem) -> attr.Attribution:
        """What the current model says about the queried sample, for the client to correct."""
        if item.sample_id not in self._display:
            state = self.state
            if state.config.strategy in _SHAP_DISPLAY:
                if state.m <= attr.MAX_EXACT_FEATURES:
                    result = attr.shap_exact(state.model, item.x, state.background)
                else:
                    n_perms = state.config.expert.n_perms or attr.default_n_perms(state.m)
                    result = attr.shap_permutation(state.model, item.x, state.background, n_perms, state.display_rng)
            else:
                result = attr.occlusion(state.model, item.x, state.background)
            self._display[item.sample_id] = result
        return self._display[item.sample_id]


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values).ravel()]


def _error_status(exc: Exception) -> int:
    if isinstance(exc, UnknownSampleError):
        return 404
    if isinstance(exc, (DuplicateCorrectionError, RetrainBlockedError)):
        return 409
    if isinstance(exc, (EngineError, ConfigError, AugmentationError, AttributionError, DataError, ModelError, ValueError, KeyError, TypeError)):
        return 400
    raise exc


def _parse_correction(payload: dict, fallback_label: float) -> Correction:
    # A correction without a label confirms the label the sample came with.
    label = payload.get("label")
    if label is None:
        label = fallback_label
    raw_attr = payload.get("attributions") or {}
    if not isinstance(raw_attr, dict):
        raise EngineError("attributions must map feature index to score")
    attributions = {}
    for key, value in raw_attr.items():
        try:
            attributions[int(key)] = float(value)
        except (TypeError, ValueError):
            raise EngineError(f"bad attribution entry {key!r}: {value!r}") from None
    raw_irr = payload.get("irrelevant") or []
    try:
        irrelevant = frozenset(int(i) for i in raw_irr)
    except (TypeError, ValueError):
        raise EngineError(f"bad irrelevant set: {raw_irr!r}") from None
    return Correction(label=float(label), attributions=attributions, irrelevant=irrelevant)


def create_app(settings: ServiceSettings = ServiceSettings()) -> FastAPI:
    app = FastAPI(title="attrloop", docs_url=None, redoc_url=None)
    # browser clients are served from their own origin (see frontend/)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, _Session] = {}
    store_lock = threading.Lock()

    def _get(session_id: str) -> _Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"no session {session_id}")
        return session

    def _fail(exc: Exception):
        raise HTTPException(_error_status(exc), str(exc))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body()) -> dict:
        try:
            config_path = payload.get("config_path") or settings.default_config
            if config_path is None:
                raise ConfigError("no config_path given and the server has no default config")
            cfg = load_config(config_path)
            strategy = StrategyKind(payload.get("strategy", ""))
            job = single_job(
                cfg,
                strategy,
                model_index=int(payload.get("model_index", 0)),
                shuffle_index=int(payload.get("shuffle_index", 0)),
                seed_override=None if payload.get("seed") is None else int(payload["seed"]),
            )
            state = LoopState(job.config, job.pool, job.test)
        except Exception as exc:
            _fail(exc)
        session_id = uuid.uuid4().hex[:12]
        log_path = None
        if settings.log_dir is not None:
            settings.log_dir.mkdir(parents=True, exist_ok=True)
            log_path = settings.log_dir / f"{session_id}.jsonl"
        with store_lock:
            session = _Session(session_id, state, log_path)
            sessions[session_id] = session
        session.log({"event": "created", "session_id": session_id, "request": payload, "config_path": str(config_path)})
        return {
            "session_id": session_id,
            "strategy": strategy.value,
            "task": state.task.value,
            "m": state.m,
            "feature_names": list(state.pool.feature_names),
            "background": _floats(state.background.values),
            "iteration": state.iteration,
            "metric": state.metrics[0],
        }

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            items = session.state.pending_items()
            pending = []
            for item in items:
                shown = session.display_attribution(item)
                pending.append(
                    {
                        "sample_id": item.sample_id,
                        "features": _floats(item.x),
                        "recorded_label": float(item.recorded),
                        "prediction": float(session.state.model.predict_one(item.x)),
                        "attribution": {"values": _floats(shown.values), "available": [bool(a) for a in shown.available]},
                    }
                )
            return {"iteration": session.state.iteration, "complete": session.complete, "pending": pending}

    @app.post("/sessions/{session_id}/corrections")
    def post_correction(session_id: str, payload: dict = Body()) -> dict:
        session = _get(session_id)
        with session.lock:
            try:
                sample_id = int(payload["sample_id"])
            except (KeyError, TypeError, ValueError):
                raise HTTPException(400, "a correction needs an integer sample_id") from None
            try:
                if payload.get("skip"):
                    session.state.skip(sample_id)
                    batch_size = 0
                else:
                    correction = _parse_correction(payload, session.state.recorded_label(sample_id))
                    correction.validate_for(session.state.task, session.state.m)
                    feedback = feedback_from_correction(session.state.config.strategy, correction, session.state.m)
                    batch = session.state.submit(sample_id, correction.label, feedback)
                    batch_size = batch.size
            except HTTPException:
                raise
            except Exception as exc:
                _fail(exc)
            session.log({"event": "corrected", "session_id": session_id, "request": payload})
            return {
                "sample_id": sample_id,
                "batch_size": batch_size,
                "remaining": len(session.state.pending_items()),
            }

    @app.post("/sessions/{session_id}/retrain")
    def retrain(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            try:
                metric = session.state.retrain()
            except Exception as exc:
                _fail(exc)
            session.draw()
            body = {
                "iteration": session.state.iteration,
                "metric": metric,
                "cumulative_samples": session.state.cumulative[-1],
                "complete": session.complete,
            }
            session.log({"event": "retrained", "session_id": session_id, "response": body})
            return body

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            return {
                "strategy": session.state.config.strategy.value,
                "iteration": session.state.iteration,
                "metric": list(session.state.metrics),
                "cumulative_samples": list(session.state.cumulative),
                "complete": session.complete,
            }

    return app


def replay(log_path: str | Path) -> dict:
    """Rebuild a session from its event log and return its metric history."""
    events = []
    with Path(log_path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    if not events or events[0]["event"] != "created":
        raise EngineError(f"log {log_path} does not start with a created event")
    request = events[0]["request"]
    cfg = load_config(events[0].get("config_path") or request["config_path"])
    job = single_job(
        cfg,
        StrategyKind(request["strategy"]),
        model_index=int(request.get("model_index", 0)),
        shuffle_index=int(request.get("shuffle_index", 0)),
        seed_override=None if request.get("seed") is None else int(request["seed"]),
    )
    state = LoopState(job.config, job.pool, job.test)
    try:
        state.draw_query()
    except PoolExhaustedError:
        pass
    for event in events[1:]:
        if event["event"] == "corrected":
            payload = event["request"]
            sample_id = int(payload["sample_id"])
            if payload.get("skip"):
                state.skip(sample_id)
            else:
                correction = _parse_correction(payload, state.recorded_label(sample_id))
                correction.validate_for(state.task, state.m)
                state.submit(sample_id, correction.label, feedback_from_correction(state.config.strategy, correction, state.m))
        elif event["event"] == "retrained":
            state.retrain()
            try:
                state.draw_query()
            except PoolExhaustedError:
                pass
    return {"metric": list(state.metrics), "cumulative_samples": list(state.cumulative)}
