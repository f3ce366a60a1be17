"""Parse model completions and score them with the benchmark metrics.

Metric conventions:
- coverage = fraction of test items whose completion contains a parseable
  value of the given kind; r/d coverage requires both numerics.
- direction accuracy is conditioned on coverage (correct / covered).
- the magnitude error is signed: |predicted| - |actual|, positive means the
  model overestimates the magnitude.
- a model evaluation is n_runs independent passes; the report carries the
  per-run aggregates plus the mean and population variance (divide by n)
  of the per-run mean errors.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from statistics import fmean, pvariance
from typing import Optional, Sequence

from .corpus import Entry
from .effectstats import Direction
from .errors import AlignmentError, BackendError, NudgecastError, PartialEvaluationError
from .promptgen import ChatPrompt, FeatureMask, PromptTemplate, get_template, render_prompt

SCHEMA_VERSION = "nudgecast.evalreport.v1"

_DIRECTION_RE = re.compile(r"\b(positive|negative)\b", re.IGNORECASE)
_NUMBER = r"([-+]?(?:\d+\.?\d*|\.\d+))"
_CONNECT = r"\s*(?:value\s*)?(?:[:=]|\bis\b|\bof\b|\bwas\b)?\s*(?:about\s+|approximately\s+)?"
_R_RE = re.compile(
    r"(?:\bpearson(?:'s)?\s+r\b|\br[-\s]?coefficient\b|\br\b)" + _CONNECT + _NUMBER,
    re.IGNORECASE,
)
_D_RE = re.compile(
    r"(?:\bcohen'?s?\s+d\b|\beffect\s+size\s+d\b|\bd\b)" + _CONNECT + _NUMBER,
    re.IGNORECASE,
)


@dataclass(frozen=True)
class PredictionRecord:
    study_id: str
    raw_text: str
    direction: Optional[Direction] = None
    r_pred: Optional[float] = None
    d_pred: Optional[float] = None

    @property
    def has_direction(self) -> bool:
        return self.direction is not None

    @property
    def has_rd(self) -> bool:
        return self.r_pred is not None and self.d_pred is not None


def parse_prediction(raw_text: str, study_id: str = "") -> PredictionRecord:
    """Extract direction and labelled r/d numerics from free-form text.

    Total function: anything unparseable simply leaves the optionals empty.
    """
    direction = None
    match = _DIRECTION_RE.search(raw_text)
    if match:
        direction = Direction(match.group(1).lower())

    def first_number(pattern: re.Pattern) -> Optional[float]:
        m = pattern.search(raw_text)
        if not m:
            return None
        try:
            return float(m.group(1))
        except ValueError:
            return None

    return PredictionRecord(
        study_id=study_id,
        raw_text=raw_text,
        direction=direction,
        r_pred=first_number(_R_RE),
        d_pred=first_number(_D_RE),
    )


def signed_magnitude_error(pred: float, actual: float) -> float:
    """|pred| - |actual|; positive means the magnitude was overestimated."""
    if not (math.isfinite(pred) and math.isfinite(actual)):
        raise ValueError("error requires finite values")
    return abs(pred) - abs(actual)


@dataclass(frozen=True)
class RunAggregate:
    """Metrics for one inference pass over the test slice."""

    n_items: int
    direction_covered: int
    direction_correct: int
    rd_covered: int
    direction_coverage: float
    direction_accuracy: Optional[float]
    rd_coverage: float
    r_error_mean: Optional[float]
    d_error_mean: Optional[float]

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "direction_covered": self.direction_covered,
            "direction_correct": self.direction_correct,
            "rd_covered": self.rd_covered,
            "direction_coverage": self.direction_coverage,
            "direction_accuracy": self.direction_accuracy,
            "rd_coverage": self.rd_coverage,
            "r_error_mean": self.r_error_mean,
            "d_error_mean": self.d_error_mean,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunAggregate":
        return cls(**data)


def evaluate_run(records: Sequence[PredictionRecord], truths: Sequence[Entry]) -> RunAggregate:
    """Score one pass; records and truths must align by study_id."""
    if len(records) != len(truths):
        raise AlignmentError(
            f"{len(records)} prediction records vs {len(truths)} truth entries"
        )
    for record, (study, _) in zip(records, truths):
        if record.study_id != study.study_id:
            raise AlignmentError(
                f"prediction for {record.study_id!r} does not match truth {study.study_id!r}"
            )
    n = len(records)
    covered = [(rec, outcome) for rec, (_, outcome) in zip(records, truths) if rec.has_direction]
    correct = sum(1 for rec, outcome in covered if rec.direction == outcome.direction)
    with_rd = [(rec, outcome) for rec, (_, outcome) in zip(records, truths) if rec.has_rd]
    r_errors = [signed_magnitude_error(rec.r_pred, out.r) for rec, out in with_rd]
    d_errors = [signed_magnitude_error(rec.d_pred, out.d) for rec, out in with_rd]
    return RunAggregate(
        n_items=n,
        direction_covered=len(covered),
        direction_correct=correct,
        rd_covered=len(with_rd),
        direction_coverage=len(covered) / n,
        direction_accuracy=(correct / len(covered)) if covered else None,
        rd_coverage=len(with_rd) / n,
        r_error_mean=fmean(r_errors) if r_errors else None,
        d_error_mean=fmean(d_errors) if d_errors else None,
    )


def _mean_or_none(values: list[float]) -> Optional[float]:
    return fmean(values) if values else None


def _pvar_or_none(values: list[float]) -> Optional[float]:
    if not values:
        return None
    if len(values) == 1:
        return 0.0
    return pvariance(values)


@dataclass(frozen=True)
class EvalReport:
    n_test: int
    n_runs: int
    model_id: str
    temperature: float
    direction_coverage: float
    direction_accuracy: Optional[float]
    rd_coverage: float
    r_error_mean: Optional[float]
    r_error_var: Optional[float]
    d_error_mean: Optional[float]
    d_error_var: Optional[float]
    per_run: tuple[RunAggregate, ...]
    created_at: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.per_run) != self.n_runs:
            raise ValueError("per_run length must equal n_runs")
        for name in ("direction_coverage", "rd_coverage"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {value}")
        if self.direction_accuracy is not None and not 0.0 <= self.direction_accuracy <= 1.0:
            raise ValueError(f"direction_accuracy out of [0, 1]: {self.direction_accuracy}")
        for name in ("r_error_var", "d_error_var"):
            value = getattr(self, name)
            if value is not None and value < 0.0:
                raise ValueError(f"{name} must be nonnegative: {value}")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n_test": self.n_test,
            "n_runs": self.n_runs,
            "model_id": self.model_id,
            "temperature": self.temperature,
            "direction_coverage": self.direction_coverage,
            "direction_accuracy": self.direction_accuracy,
            "rd_coverage": self.rd_coverage,
            "r_error_mean": self.r_error_mean,
            "r_error_var": self.r_error_var,
            "d_error_mean": self.d_error_mean,
            "d_error_var": self.d_error_var,
            "per_run": [run.to_dict() for run in self.per_run],
            "created_at": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "EvalReport":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise NudgecastError(
                f"unsupported report schema: {data.get('schema_version')!r}"
            )
        return cls(
            n_test=data["n_test"],
            n_runs=data["n_runs"],
            model_id=data["model_id"],
            temperature=data["temperature"],
            direction_coverage=data["direction_coverage"],
            direction_accuracy=data["direction_accuracy"],
            rd_coverage=data["rd_coverage"],
            r_error_mean=data["r_error_mean"],
            r_error_var=data["r_error_var"],
            d_error_mean=data["d_error_mean"],
            d_error_var=data["d_error_var"],
            per_run=tuple(RunAggregate.from_dict(r) for r in data["per_run"]),
            created_at=data.get("created_at", ""),
        )

    SUMMARY_FIELDS = (
        "model_id", "n_test", "n_runs", "temperature",
        "direction_coverage", "direction_accuracy", "rd_coverage",
        "r_error_mean", "r_error_var", "d_error_mean", "d_error_var",
    )

    def summary_csv(self) -> str:
        """Header plus one delimited row for spreadsheet import."""
        def cell(value) -> str:
            return "" if value is None else str(value)

        header = ",".join(self.SUMMARY_FIELDS)
        row = ",".join(cell(getattr(self, f)) for f in self.SUMMARY_FIELDS)
        return f"{header}\n{row}\n"


def aggregate_runs(
    runs: Sequence[RunAggregate],
    model_id: str = "",
    temperature: float = 0.0,
) -> EvalReport:
    """Fold per-run aggregates into the two-layer report."""
    if not runs:
        raise NudgecastError("cannot aggregate zero runs")
    accuracies = [r.direction_accuracy for r in runs if r.direction_accuracy is not None]
    r_means = [r.r_error_mean for r in runs if r.r_error_mean is not None]
    d_means = [r.d_error_mean for r in runs if r.d_error_mean is not None]
    return EvalReport(
        n_test=runs[0].n_items,
        n_runs=len(runs),
        model_id=model_id,
        temperature=temperature,
        direction_coverage=fmean(r.direction_coverage for r in runs),
        direction_accuracy=_mean_or_none(accuracies),
        rd_coverage=fmean(r.rd_coverage for r in runs),
        r_error_mean=_mean_or_none(r_means),
        r_error_var=_pvar_or_none(r_means),
        d_error_mean=_mean_or_none(d_means),
        d_error_var=_pvar_or_none(d_means),
        per_run=tuple(runs),
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def evaluate_model(
    backend,
    model,
    test_entries: Sequence[Entry],
    template: PromptTemplate | None = None,
    mask: FeatureMask | None = None,
    n_runs: int = 10,
    temperature: float = 1.0,
    run_seed_base: int = 0,
) -> EvalReport:
    """Run n_runs independent inference passes and aggregate them.

    On a backend failure the completed runs are attached to the raised
    PartialEvaluationError so a caller can resume.
    """
    if not test_entries:
        raise NudgecastError("test slice is empty")
    template = template or get_template("P4")
    mask = mask or FeatureMask.all_features()
    model_id = getattr(model, "model_id", str(model))
    prompts: list[ChatPrompt] = [
        render_prompt(template, study, mask) for study, _ in test_entries
    ]
    runs: list[RunAggregate] = []
    for run_idx in range(n_runs):
        records = []
        for (study, _), prompt in zip(test_entries, prompts):
            try:
                text = backend.complete(
                    model, prompt, temperature=temperature,
                    run_seed=run_seed_base + run_idx,
                )
            except BackendError as exc:
                raise PartialEvaluationError(
                    f"run {run_idx} failed on study {study.study_id!r}: {exc}",
                    completed_runs=runs,
                ) from exc
            records.append(parse_prediction(text, study_id=study.study_id))
        runs.append(evaluate_run(records, test_entries))
    return aggregate_runs(runs, model_id=model_id, temperature=temperature)
