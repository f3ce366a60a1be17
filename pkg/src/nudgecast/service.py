"""HTTP facade: scenario prediction and report browsing for the explorer UI.

Scenario predictions always render the P4 template with the all-features
mask (the best-performing configuration); that choice is server config, not
a request parameter.  Responses are cached by (model, prompt digest,
temperature, n_runs) and cache hits are byte-identical.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, field_validator

from .corpus import CATEGORIES, YEAR_RANGE, Corpus, StudyRecord
from .effectstats import naive_baseline
from .errors import NudgecastError, BackendError
from .evalkit import parse_prediction
from .promptgen import FeatureMask, get_template, render_prompt
from .sweeps import list_reports, _reports_dir

MAX_RUNS = 50


class ScenarioRequest(BaseModel):
    intervention_text: str
    intervention_category: str
    location: str
    year: int
    population: str
    sample_size: int
    treatment_n: int
    control_n: int
    title: Optional[str] = None
    goal: Optional[str] = None
    model: Optional[str] = None
    n_runs: int = 10
    temperature: float = 1.0

    @field_validator("intervention_text", "location", "population")
    @classmethod
    def _nonempty(cls, v: str, info):
        if not v or not v.strip():
            raise ValueError(f"{info.field_name} must be nonempty")
        return v

    @field_validator("intervention_category")
    @classmethod
    def _category(cls, v: str):
        if v not in CATEGORIES:
            raise ValueError(
                f"intervention_category must be one of {', '.join(CATEGORIES)}"
            )
        return v

    @field_validator("year")
    @classmethod
    def _year(cls, v: int):
        if not YEAR_RANGE[0] <= v <= YEAR_RANGE[1]:
            raise ValueError(f"year must be between {YEAR_RANGE[0]} and {YEAR_RANGE[1]}")
        return v

    @field_validator("sample_size", "treatment_n", "control_n")
    @classmethod
    def _positive(cls, v: int, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be positive")
        return v

    @field_validator("n_runs")
    @classmethod
    def _runs(cls, v: int):
        if not 1 <= v <= MAX_RUNS:
            raise ValueError(f"n_runs must be between 1 and {MAX_RUNS}")
        return v

    @field_validator("temperature")
    @classmethod
    def _temperature(cls, v: float):
        if v < 0:
            raise ValueError("temperature must be nonnegative")
        return v

    def to_study(self) -> StudyRecord:
        return StudyRecord(
            study_id="scenario",
            paper_title=self.title or "(untitled scenario)",
            goal_summary=self.goal or "(not provided)",
            intervention_text=self.intervention_text,
            intervention_category=self.intervention_category,
            location=self.location,
            year=self.year,
            population=self.population,
            sample_size=self.sample_size,
            treatment_n=self.treatment_n,
            control_n=self.control_n,
        )


@dataclass
class ServiceConfig:
    state_dir: Path = Path(".nudgecast")
    default_model: str = ""
    template_variant: str = "P4"
    frontend_dist: Optional[Path] = None
    baseline_entries: Optional[list] = None  # training slice for /api/baseline


def _aggregate(per_run: list[dict]) -> dict:
    directions = [r["direction"] for r in per_run if r["direction"] is not None]
    majority = None
    vote_share = None
    if directions:
        n_neg = sum(1 for d in directions if d == "negative")
        n_pos = len(directions) - n_neg
        majority = "negative" if n_neg >= n_pos else "positive"
        vote_share = max(n_neg, n_pos) / len(directions)

    def stats(key: str) -> Optional[dict]:
        values = [r[key] for r in per_run if r[key] is not None]
        if not values:
            return None
        return {
            "mean": sum(values) / len(values),
            "min": min(values),
            "max": max(values),
        }

    return {
        "majority_direction": majority,
        "vote_share": vote_share,
        "direction_coverage": len(directions) / len(per_run),
        "r": stats("r_pred"),
        "d": stats("d_pred"),
    }


def create_app(backend, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="nudgecast", version="0.1.0")
    template = get_template(config.template_variant)
    mask = FeatureMask.all_features()
    cache: dict[tuple, bytes] = {}
    cache_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        errors = []
        for err in exc.errors():
            loc = [str(p) for p in err["loc"] if p != "body"]
            msg = err["msg"]
            if msg.startswith("Value error, "):
                msg = msg[len("Value error, "):]
            errors.append({"field": ".".join(loc) or "body", "message": msg})
        return JSONResponse(status_code=400, content={"errors": errors})

    @app.post("/api/predict")
    def predict(request: ScenarioRequest) -> Response:
        model_id = request.model or config.default_model
        if not model_id:
            raise HTTPException(status_code=404, detail="no model configured")
        study = request.to_study()
        prompt = render_prompt(template, study, mask)
        key = (model_id, prompt.digest(), request.temperature, request.n_runs)
        with cache_lock:
            cached = cache.get(key)
        if cached is not None:
            return Response(content=cached, media_type="application/json")

        per_run = []
        for run_idx in range(request.n_runs):
            try:
                text = backend.complete(
                    model_id, prompt,
                    temperature=request.temperature, run_seed=run_idx,
                )
            except BackendError as exc:
                if exc.status == 404:
                    raise HTTPException(
                        status_code=404, detail=f"unknown model {model_id!r}"
                    ) from exc
                raise HTTPException(
                    status_code=502, detail=f"backend exhausted: {exc}"
                ) from exc
            record = parse_prediction(text, study_id="scenario")
            per_run.append({
                "run": run_idx,
                "raw_text": record.raw_text,
                "direction": record.direction.value if record.direction else None,
                "r_pred": record.r_pred,
                "d_pred": record.d_pred,
            })
        body = {
            "model_id": model_id,
            "prompt_digest": prompt.digest(),
            "n_runs": request.n_runs,
            "temperature": request.temperature,
            "per_run": per_run,
            "aggregate": _aggregate(per_run),
        }
        payload = json.dumps(body, ensure_ascii=False).encode("utf-8")
        with cache_lock:
            cache[key] = payload
        return Response(content=payload, media_type="application/json")

    @app.get("/api/models")
    def models() -> list[dict]:
        refs = backend.list_models()
        return [
            {
                "model_id": ref.model_id,
                "provider": ref.provider,
                "default": ref.model_id == config.default_model,
            }
            for ref in refs
        ]

    @app.get("/api/reports")
    def reports() -> list[dict]:
        return list_reports(config.state_dir)

    @app.get("/api/reports/{report_id}")
    def report(report_id: str) -> dict:
        path = _reports_dir(Path(config.state_dir)) / f"{report_id}.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown report {report_id!r}")
        return json.loads(path.read_text("utf-8"))

    @app.get("/api/baseline")
    def baseline() -> dict:
        if not config.baseline_entries:
            raise HTTPException(status_code=404, detail="no baseline corpus configured")
        base = naive_baseline(config.baseline_entries)
        return {
            "modal_direction": base.modal_direction.value,
            "mean_abs_r": base.mean_abs_r,
            "mean_abs_d": base.mean_abs_d,
        }

    if config.frontend_dist and Path(config.frontend_dist).is_dir():
        app.mount(
            "/", StaticFiles(directory=str(config.frontend_dist), html=True), name="ui"
        )

    return app
