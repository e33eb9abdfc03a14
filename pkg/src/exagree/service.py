"""JSON-over-HTTP service exposing run directories and mask searches.

Reads are served straight from disk; searches run on a bounded worker pool
(default one worker) with an advisory lock file per target so a second
search on the same target gets 409 while one is in flight. Completed
artifacts are never mutated; a search writes only its target's entries.
"""

from __future__ import annotations

import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .pipeline import (
    ValidationError,
    attribution_ranges,
    create_target,
    load_target,
    stage_search,
)
from .runs import RunError, RunManifest, StageOrderError, list_runs

__all__ = ["create_app"]

SCHEMA_DIR = Path(__file__).parent / "schemas"


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message})


class JobRegistry:
    """In-memory job table backed by per-target lock files."""

    def __init__(self, workers: int = 1):
        self.jobs: dict[str, dict] = {}
        self.lock = threading.Lock()
        self.pool = ThreadPoolExecutor(max_workers=workers)

    def submit(self, run_id: str, target_id: str, lock_path: Path, fn) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self.lock:
            self.jobs[job_id] = {
                "job_id": job_id, "run_id": run_id, "target_id": target_id,
                "status": "queued", "progress": 0.0, "error": None,
            }

        def run() -> None:
            with self.lock:
                self.jobs[job_id]["status"] = "running"
                self.jobs[job_id]["progress"] = 0.1
            try:
                fn()
                with self.lock:
                    self.jobs[job_id]["status"] = "done"
                    self.jobs[job_id]["progress"] = 1.0
            except Exception as exc:  # noqa: BLE001 - reported via job status
                with self.lock:
                    self.jobs[job_id]["status"] = "failed"
                    self.jobs[job_id]["error"] = "".join(
                        traceback.format_exception_only(type(exc), exc)).strip()
            finally:
                lock_path.unlink(missing_ok=True)

        self.pool.submit(run)
        return job_id

    def get(self, job_id: str) -> dict | None:
        with self.lock:
            job = self.jobs.get(job_id)
            return dict(job) if job else None


def create_app(runs_root: str | Path, workers: int = 1,
               static_dir: str | Path | None = None) -> FastAPI:
    runs_root = Path(runs_root)
    app = FastAPI(title="exagree", version="1.0")
    registry = JobRegistry(workers=workers)
    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/app", StaticFiles(directory=str(static_dir), html=True),
                  name="webui")

    def load_run(run_id: str) -> RunManifest:
        for m in list_runs(runs_root):
            if m.run_id == run_id:
                return RunManifest.load(m.run_dir)
        raise KeyError(run_id)

    @app.exception_handler(Exception)
    async def on_internal(request: Request, exc: Exception):
        return _error(500, "internal", str(exc))

    @app.get("/v1/runs")
    def get_runs():
        return {"runs": [
            {"run_id": m.run_id, "dataset": m.dataset, "stages": m.stages,
             "targets": m.list_targets()}
            for m in list_runs(runs_root)
        ]}

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str):
        try:
            m = load_run(run_id)
        except KeyError:
            return _error(404, "unknown_run", f"unknown run {run_id!r}")
        except RunError as exc:
            return _error(500, "corrupt_run", str(exc))
        return {"run_id": m.run_id, "dataset": m.dataset, "stages": m.stages,
                "seeds": m.seeds, "config": m.config,
                "targets": m.list_targets()}

    @app.get("/v1/runs/{run_id}/features")
    def get_features(run_id: str):
        try:
            m = load_run(run_id)
        except KeyError:
            return _error(404, "unknown_run", f"unknown run {run_id!r}")
        names = m.dataset.get("feature_names", [])
        return {"features": [{"index": i, "name": n}
                             for i, n in enumerate(names)]}

    @app.get("/v1/runs/{run_id}/attribution-ranges")
    def get_ranges(run_id: str):
        try:
            m = load_run(run_id)
            return {"ranges": attribution_ranges(m)}
        except KeyError:
            return _error(404, "unknown_run", f"unknown run {run_id!r}")
        except (StageOrderError, ValidationError) as exc:
            return _error(409, "stage_missing", str(exc))

    @app.post("/v1/runs/{run_id}/targets")
    async def post_target(run_id: str, request: Request):
        try:
            m = load_run(run_id)
        except KeyError:
            return _error(404, "unknown_run", f"unknown run {run_id!r}")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "bad_json", "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "bad_body", "expected a JSON object")
        target_id = body.get("target_id") or uuid.uuid4().hex[:8]
        try:
            if "text" in body:
                target = create_target(m, target_id, text=body["text"],
                                       use_llm=bool(body.get("llm", False)),
                                       stakeholder_id=body.get(
                                           "stakeholder_id", "default"))
            elif "ranking" in body:
                target = create_target(m, target_id,
                                       ranking=body["ranking"],
                                       signs=body.get("signs"),
                                       stakeholder_id=body.get(
                                           "stakeholder_id", "default"))
            else:
                return _error(400, "bad_body",
                              "body must contain 'text' or 'ranking'")
        except (ValidationError, StageOrderError) as exc:
            return _error(400, "invalid_target", str(exc))
        return {
            "target_id": target_id,
            "compiled_target": {
                "ranking": target.target_ranking.ranks.tolist(),
                "signs": (target.target_signs.astype(int).tolist()
                          if target.target_signs is not None else None),
                "source": target.source,
            },
        }

    @app.post("/v1/runs/{run_id}/targets/{target_id}/search")
    async def post_search(run_id: str, target_id: str, request: Request):
        try:
            m = load_run(run_id)
        except KeyError:
            return _error(404, "unknown_run", f"unknown run {run_id!r}")
        try:
            load_target(m, target_id)
        except ValidationError as exc:
            return _error(404, "unknown_target", str(exc))
        try:
            body = await request.json()
        except Exception:
            body = {}
        if not isinstance(body, dict):
            return _error(400, "bad_body", "expected a JSON object")
        overrides = {}
        for key in ("heads", "epochs", "seed"):
            if key in body:
                if not isinstance(body[key], int) or body[key] < 0:
                    return _error(400, "bad_body",
                                  f"{key} must be a non-negative integer")
                overrides[key] = body[key]
        for key in ("lr", "beta"):
            if key in body:
                if not isinstance(body[key], (int, float)) or body[key] <= 0:
                    return _error(400, "bad_body", f"{key} must be positive")
                overrides[key] = float(body[key])

        lock_path = m.run_dir / "targets" / target_id / "search.lock"
        try:
            fd = lock_path.open("x")
        except FileExistsError:
            return _error(409, "search_busy",
                          f"a search is already running for target {target_id!r}")
        fd.close()

        def work() -> None:
            manifest = RunManifest.load(m.run_dir)
            stage_search(manifest, target_id, **overrides)

        job_id = registry.submit(run_id, target_id, lock_path, work)
        return {"job_id": job_id}

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str):
        job = registry.get(job_id)
        if job is None:
            return _error(404, "unknown_job", f"unknown job {job_id!r}")
        return job

    @app.get("/v1/runs/{run_id}/targets/{target_id}/result")
    def get_result(run_id: str, target_id: str):
        try:
            m = load_run(run_id)
        except KeyError:
            return _error(404, "unknown_run", f"unknown run {run_id!r}")
        path = m.run_dir / "targets" / target_id / "result.json"
        if not path.exists():
            return _error(404, "no_result",
                          f"no search result for target {target_id!r}")
        import json as _json
        return _json.loads(path.read_text())

    return app
