"""HTTP service: case management, pipeline runs, verification, traces, usage.

Endpoints return plain JSON mirroring the domain types. Cases and their
outcome history are durable (journal store); jobs for async runs are
in-memory. AuthN is a single static bearer token read from
HYGIEIA_API_TOKEN; when that variable is unset the service runs open,
which is intended for local development and tests only.
"""

from __future__ import annotations

import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from enum import Enum

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import TOKEN_ENV, AppConfig, build_pipeline
from .errors import (
    BackendUnavailable,
    DuplicateId,
    EmptyCase,
    EmptyResponse,
    MalformedVerdict,
    PipelineError,
    VerdictParseError,
)
from .model import PatientCase, TaskKind, TaskRequest, validate_case
from .orchestrator import Pipeline
from .store import JournalStore


class GeneIn(BaseModel):
    symbol: str
    note: str | None = None


class CaseIn(BaseModel):
    id: str | None = None
    phenotypes: list[str] = Field(default_factory=list)
    genes: list[GeneIn] = Field(default_factory=list)
    record_text: str | None = None
    source_tag: str | None = None


class VerifyIn(BaseModel):
    proposed_diagnosis: str


class JobState(str, Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"


class JobManager:
    """In-memory job registry with Queued -> Running -> Done/Failed transitions."""

    def __init__(self, workers: int = 4):
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=workers)

    def submit(self, fn) -> str:
        job_id = uuid.uuid4().hex
        with self._lock:
            self._jobs[job_id] = {"job_id": job_id, "state": JobState.QUEUED.value, "result_ref": None}

        def _run():
            self._set(job_id, state=JobState.RUNNING.value)
            try:
                result_ref = fn()
                self._set(job_id, state=JobState.DONE.value, result_ref=result_ref)
            except Exception as exc:  # noqa: BLE001 - job boundary
                self._set(job_id, state=JobState.FAILED.value, error=str(exc))

        self._pool.submit(_run)
        return job_id

    def _set(self, job_id: str, **updates) -> None:
        with self._lock:
            self._jobs[job_id].update(updates)

    def get(self, job_id: str) -> dict | None:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job else None


def _case_from_body(body: CaseIn) -> PatientCase:
    return PatientCase.from_dict(body.model_dump())


def openapi_schema() -> dict:
    """API description independent of any runtime config; shipped in docs/."""
    import tempfile

    from .gateway import Script, scripted_gateway
    from .model import load_templates

    with tempfile.TemporaryDirectory() as tmp:
        pipeline = Pipeline(scripted_gateway(Script([])), load_templates())
        app = create_app(AppConfig(store_dir=tmp), pipeline=pipeline)
        return app.openapi()


def create_app(config: AppConfig, pipeline: Pipeline | None = None) -> FastAPI:
    pipeline = pipeline or build_pipeline(config)
    store = JournalStore(config.resolve(config.store_dir) or config.store_dir)
    jobs = JobManager()
    app = FastAPI(title="hygieia", version="0.1.0")
    app.state.pipeline = pipeline
    app.state.store = store

    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def require_auth(request: Request) -> None:
        token = os.environ.get(TOKEN_ENV)
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    auth = Depends(require_auth)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/cases", status_code=201, dependencies=[auth])
    def create_case(body: CaseIn) -> dict:
        case = _case_from_body(body)
        try:
            case = validate_case(case)
        except EmptyCase as exc:
            raise HTTPException(status_code=400, detail={"phenotypes": str(exc)}) from exc
        case_id = case.id or uuid.uuid4().hex
        try:
            store.create_case(case_id, {**case.to_dict(), "id": case_id})
        except DuplicateId as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"id": case_id}

    def _load_case(case_id: str) -> PatientCase:
        entry = store.get_case(case_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown case {case_id!r}")
        return PatientCase.from_dict(entry["case"])

    @app.get("/cases/{case_id}", dependencies=[auth])
    def get_case(case_id: str) -> dict:
        entry = store.get_case(case_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown case {case_id!r}")
        history = [
            {"index": o["index"], "task": o["task"], "completed_at": o["completed_at"],
             "summary": _outcome_summary(o["payload"])}
            for o in store.outcomes(case_id)
        ]
        return {**entry, "outcomes": history}

    def _outcome_summary(payload: dict) -> dict:
        if "answers" in payload:
            top = payload["answers"][0]["label"] if payload["answers"] else None
            return {
                "top_answer": top,
                "final_confidence": payload.get("final_confidence"),
                "route": payload.get("route"),
                "converged": payload.get("converged"),
            }
        if "assessment" in payload:
            return {"assessment": payload.get("assessment"), "final_diagnosis": payload.get("final_diagnosis")}
        return {"error": payload.get("error")}

    def _run_task(case_id: str, kind: TaskKind) -> dict:
        case = _load_case(case_id)
        try:
            outcome = pipeline.run(TaskRequest(kind=kind, case=case, config=config.pipeline))
        except PipelineError as exc:
            partial = {"error": str(exc.cause), "trace": exc.trace.to_dict() if exc.trace else None}
            store.append_outcome(case_id, kind.value, partial)
            if isinstance(exc.cause, (BackendUnavailable, EmptyResponse)):
                raise HTTPException(status_code=503, detail=str(exc.cause)) from exc
            raise HTTPException(status_code=500, detail=str(exc.cause)) from exc
        payload = outcome.to_dict()
        index = store.append_outcome(case_id, kind.value, payload)
        return {"outcome_index": index, **payload}

    def _task_endpoint(case_id: str, kind: TaskKind, run_async: bool):
        _load_case(case_id)  # 404 before queuing
        if run_async:
            job_id = jobs.submit(lambda: _run_task(case_id, kind)["outcome_index"])
            return 202, {"job_id": job_id, "state": JobState.QUEUED.value}
        return 200, _run_task(case_id, kind)

    @app.post("/cases/{case_id}/diagnose", dependencies=[auth])
    def diagnose_case(case_id: str, run_async: bool = Query(False, alias="async")):
        status, body = _task_endpoint(case_id, TaskKind.DIAGNOSE, run_async)
        return JSONResponse(status_code=status, content=body)

    @app.post("/cases/{case_id}/prioritize-genes", dependencies=[auth])
    def prioritize_genes_case(case_id: str, run_async: bool = Query(False, alias="async")):
        status, body = _task_endpoint(case_id, TaskKind.PRIORITIZE_GENES, run_async)
        return JSONResponse(status_code=status, content=body)

    @app.post("/cases/{case_id}/verify", dependencies=[auth])
    def verify_case(case_id: str, body: VerifyIn) -> dict:
        if not body.proposed_diagnosis.strip():
            raise HTTPException(status_code=400, detail={"proposed_diagnosis": "must be non-empty"})
        case = _load_case(case_id)
        try:
            verdict = pipeline.verify_and_correct(case, body.proposed_diagnosis)
        except PipelineError as exc:
            if isinstance(exc.cause, (MalformedVerdict, VerdictParseError)):
                raise HTTPException(
                    status_code=502,
                    detail={"error": str(exc.cause), "raw_text": getattr(exc.cause, "raw_text", "")},
                ) from exc
            raise HTTPException(status_code=503, detail=str(exc.cause)) from exc
        payload = verdict.to_dict()
        index = store.append_outcome(case_id, TaskKind.VERIFY_DIAGNOSIS.value, payload)
        return {"outcome_index": index, **payload}

    @app.get("/cases/{case_id}/trace/{outcome_index}", dependencies=[auth])
    def get_trace(case_id: str, outcome_index: int) -> dict:
        entry = store.get_outcome(case_id, outcome_index)
        if entry is None:
            raise HTTPException(status_code=404, detail="no such outcome")
        trace = entry["payload"].get("trace")
        if trace is None:
            raise HTTPException(status_code=404, detail="outcome has no trace")
        return trace

    @app.get("/jobs/{job_id}", dependencies=[auth])
    def get_job(job_id: str) -> dict:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return job

    @app.get("/usage", dependencies=[auth])
    def usage() -> dict:
        return pipeline.gateway.usage_dict()

    @app.post("/usage/reset", dependencies=[auth])
    def usage_reset() -> dict:
        pipeline.gateway.reset_usage()
        return {"status": "reset"}

    return app
