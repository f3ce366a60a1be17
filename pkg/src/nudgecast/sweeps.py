"""Campaign orchestration for the four experiment designs.

A campaign is a set of cells (one fine-tune plus one evaluation each) under
a single plan.  Cell failures are isolated: the campaign records the error
and moves on, and a resumed campaign re-executes only failed or missing
cells.  Upload/submission deduplication lives in the backend registry, so
resumes never re-upload completed training files or double-submit jobs.

State directory layout::

    <state>/training/<digest>.jsonl        exported training files
    <state>/campaigns/<plan>/plan.json     the plan as submitted
    <state>/campaigns/<plan>/cells/<key>.json
    <state>/reports/<id>.json              EvalReports and campaign summaries
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .backend import ModelRef, PROVIDER_MIN_TRAINING_RECORDS
from .corpus import Corpus, Entry, Split, SplitSpec, merge_validation_into_train, split_corpus
from .effectstats import naive_baseline
from .errors import NudgecastError, PlanError
from .evalkit import (
    EvalReport,
    PredictionRecord,
    aggregate_runs,
    evaluate_model,
    evaluate_run,
)
from .promptgen import (
    MASK_NAMES,
    VARIANTS,
    FeatureMask,
    build_training_dataset,
    export_training_file,
    get_template,
)
from .reference import PROMPT_VARIANT_REFERENCE, REFERENCE_LABEL

PLAN_KINDS = ("prompt_variants", "size_sweep", "ablation", "unseen_validation")

CAMPAIGN_SCHEMA_VERSION = "nudgecast.campaign.v1"


@dataclass(frozen=True)
class ExperimentPlan:
    kind: str
    seed: int = 7
    counts: tuple[int, int, int] = (144, 23, 41)
    variants: tuple[str, ...] = ()
    masks: tuple[str, ...] = ()
    sizes: tuple[int, ...] = ()
    base_model: str = "mock:replay"
    backend: str = "mock"
    n_runs: int = 10
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise PlanError(f"unknown plan kind {self.kind!r}; expected one of {PLAN_KINDS}")
        if self.n_runs < 1:
            raise PlanError("n_runs must be at least 1")
        if self.temperature < 0:
            raise PlanError("temperature must be nonnegative")
        for v in self.variants:
            if v not in VARIANTS:
                raise PlanError(f"unknown template variant {v!r}")
        for m in self.masks:
            if m not in MASK_NAMES:
                raise PlanError(f"unknown mask preset {m!r}")
        if self.kind == "size_sweep":
            if not self.sizes:
                raise PlanError("size_sweep plan needs a sizes list")
            if list(self.sizes) != sorted(self.sizes):
                raise PlanError("sizes must be sorted ascending")
            if self.sizes[0] < PROVIDER_MIN_TRAINING_RECORDS:
                raise PlanError(
                    f"size {self.sizes[0]} is below the provider minimum "
                    f"of {PROVIDER_MIN_TRAINING_RECORDS}"
                )
            max_size = self.counts[0] + self.counts[1]
            if self.sizes[-1] > max_size:
                raise PlanError(
                    f"size {self.sizes[-1]} exceeds train+validation = {max_size}"
                )

    def effective_variants(self) -> tuple[str, ...]:
        if self.variants:
            return self.variants
        return VARIANTS if self.kind == "prompt_variants" else ("P4",)

    def effective_masks(self) -> tuple[str, ...]:
        if self.masks:
            return self.masks
        return MASK_NAMES if self.kind == "ablation" else ("baseline",)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "counts": list(self.counts),
            "variants": list(self.variants),
            "masks": list(self.masks),
            "sizes": list(self.sizes),
            "base_model": self.base_model,
            "backend": self.backend,
            "n_runs": self.n_runs,
            "temperature": self.temperature,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        return cls(
            kind=data["kind"],
            seed=data.get("seed", 7),
            counts=tuple(data.get("counts", (144, 23, 41))),
            variants=tuple(data.get("variants", ())),
            masks=tuple(data.get("masks", ())),
            sizes=tuple(data.get("sizes", ())),
            base_model=data.get("base_model", "mock:replay"),
            backend=data.get("backend", "mock"),
            n_runs=data.get("n_runs", 10),
            temperature=data.get("temperature", 1.0),
        )

    def digest(self, corpus: Corpus) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True) + corpus.provenance
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class CellSpec:
    key: str
    variant: str
    mask: str
    size: Optional[int] = None


@dataclass
class CellState:
    key: str
    status: str = "pending"  # pending | succeeded | failed
    training_digest: str = ""
    n_records: int = 0
    job_id: str = ""
    model_id: str = ""
    report_id: str = ""
    error: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "CellState":
        return cls(**data)


@dataclass(frozen=True)
class CampaignResult:
    plan_digest: str
    kind: str
    cells: dict[str, CellState]
    state_dir: Path

    def failed_cells(self) -> list[str]:
        return [k for k, c in self.cells.items() if c.status == "failed"]

    def report_for(self, key: str) -> Optional[EvalReport]:
        cell = self.cells[key]
        if not cell.report_id:
            return None
        return load_report(self.state_dir, cell.report_id)


def enumerate_cells(plan: ExperimentPlan) -> list[CellSpec]:
    if plan.kind == "prompt_variants":
        return [CellSpec(key=f"M{v}", variant=v, mask="baseline")
                for v in plan.effective_variants()]
    if plan.kind == "size_sweep":
        variant = plan.effective_variants()[0]
        return [CellSpec(key=f"N{size:04d}", variant=variant, mask="baseline", size=size)
                for size in plan.sizes]
    if plan.kind == "ablation":
        variant = plan.effective_variants()[0]
        return [CellSpec(key=mask, variant=variant, mask=mask)
                for mask in plan.effective_masks()]
    raise PlanError(f"plan kind {plan.kind!r} does not enumerate cells")


def training_entries_for_size(corpus: Corpus, split: Split, size: int) -> list[Entry]:
    """Nested training subsets: the first `size` entries of the permuted
    train order, spilling into the validation order past the train count."""
    if size <= len(split.train):
        order = split.train[:size]
    else:
        merged = merge_validation_into_train(split)
        if size > len(merged.train):
            raise PlanError(
                f"size {size} exceeds train+validation = {len(merged.train)}"
            )
        order = merged.train[:size]
    return corpus.subset(order)


def _training_entries(plan: ExperimentPlan, cell: CellSpec, corpus: Corpus,
                      split: Split) -> tuple[list[Entry], list[Entry]]:
    """Returns (training entries, validation entries) for a cell."""
    if cell.size is not None:
        train = training_entries_for_size(corpus, split, cell.size)
        validation = (
            corpus.subset(split.validation) if cell.size <= len(split.train) else []
        )
        return train, validation
    return corpus.subset(split.train), corpus.subset(split.validation)


def _reports_dir(state_dir: Path) -> Path:
    path = state_dir / "reports"
    path.mkdir(parents=True, exist_ok=True)
    return path


def save_report(state_dir: str | Path, report_id: str, payload: dict) -> Path:
    path = _reports_dir(Path(state_dir)) / f"{report_id}.json"
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, indent=1), "utf-8")
    os.replace(tmp, path)
    return path


def load_report(state_dir: str | Path, report_id: str) -> EvalReport:
    path = _reports_dir(Path(state_dir)) / f"{report_id}.json"
    if not path.exists():
        raise NudgecastError(f"unknown report {report_id!r}")
    return EvalReport.from_json_dict(json.loads(path.read_text("utf-8")))


def list_reports(state_dir: str | Path) -> list[dict]:
    out = []
    reports = _reports_dir(Path(state_dir))
    for path in sorted(reports.glob("*.json")):
        data = json.loads(path.read_text("utf-8"))
        out.append({
            "id": path.stem,
            "schema_version": data.get("schema_version", ""),
            "kind": "campaign" if data.get("schema_version") == CAMPAIGN_SCHEMA_VERSION
                    else "evaluation",
            "created_at": data.get("created_at", ""),
        })
    return out


def _export_training(records, training_dir: Path) -> tuple[str, Path]:
    training_dir.mkdir(parents=True, exist_ok=True)
    tmp = training_dir / f".tmp-{os.getpid()}.jsonl"
    digest = export_training_file(records, tmp)
    final = training_dir / f"{digest[:16]}.jsonl"
    os.replace(tmp, final)
    return digest, final


class CampaignRunner:
    def __init__(self, plan: ExperimentPlan, corpus: Corpus, backend,
                 state_dir: str | Path, poll_interval: float = 0.0):
        self.plan = plan
        self.corpus = corpus
        self.backend = backend
        self.state_dir = Path(state_dir)
        self.poll_interval = poll_interval
        self.plan_digest = plan.digest(corpus)
        self.campaign_dir = self.state_dir / "campaigns" / self.plan_digest
        self.cells_dir = self.campaign_dir / "cells"
        self.split = split_corpus(corpus, SplitSpec(plan.seed, plan.counts))

    def _cell_path(self, key: str) -> Path:
        return self.cells_dir / f"{key}.json"

    def _load_cell(self, key: str) -> Optional[CellState]:
        path = self._cell_path(key)
        if not path.exists():
            return None
        return CellState.from_dict(json.loads(path.read_text("utf-8")))

    def _save_cell(self, cell: CellState) -> None:
        self.cells_dir.mkdir(parents=True, exist_ok=True)
        self._cell_path(cell.key).write_text(json.dumps(cell.to_dict(), indent=1), "utf-8")

    def run(self, resume: bool = False) -> CampaignResult:
        self.campaign_dir.mkdir(parents=True, exist_ok=True)
        (self.campaign_dir / "plan.json").write_text(
            json.dumps(self.plan.to_dict(), indent=1), "utf-8"
        )
        cells: dict[str, CellState] = {}
        for spec in enumerate_cells(self.plan):
            existing = self._load_cell(spec.key)
            if resume and existing is not None and existing.status == "succeeded":
                cells[spec.key] = existing
                continue
            cells[spec.key] = self._run_cell(spec)
        summary = {
            "schema_version": CAMPAIGN_SCHEMA_VERSION,
            "id": f"campaign-{self.plan_digest}",
            "kind": self.plan.kind,
            "plan": self.plan.to_dict(),
            "corpus_digest": self.corpus.provenance,
            "cells": {k: c.to_dict() for k, c in cells.items()},
        }
        save_report(self.state_dir, f"campaign-{self.plan_digest}", summary)
        return CampaignResult(
            plan_digest=self.plan_digest,
            kind=self.plan.kind,
            cells=cells,
            state_dir=self.state_dir,
        )

    def _run_cell(self, spec: CellSpec) -> CellState:
        cell = CellState(key=spec.key)
        try:
            template = get_template(spec.variant)
            mask = FeatureMask.preset(spec.mask)
            train_entries, val_entries = _training_entries(
                self.plan, spec, self.corpus, self.split
            )
            records = build_training_dataset(train_entries, template, mask)
            digest, path = _export_training(records, self.state_dir / "training")
            cell.training_digest = digest
            cell.n_records = len(records)
            validation_path = None
            if val_entries:
                val_records = build_training_dataset(val_entries, template, mask)
                _, validation_path = _export_training(
                    val_records, self.state_dir / "training"
                )
            job = self.backend.create_finetune(
                path, validation_file=validation_path, base_model=self.plan.base_model
            )
            cell.job_id = job.job_id
            job = self.backend.wait_for_job(job, poll_interval=self.poll_interval)
            if job.status != "succeeded":
                raise NudgecastError(f"fine-tune job {job.job_id} ended as {job.status}")
            cell.model_id = job.model_id
            model = ModelRef(provider=self.backend.provider, model_id=job.model_id)
            if hasattr(self.backend, "seed_answer_book"):
                # mock campaigns double as pipeline identity checks
                self.backend.seed_answer_book(build_training_dataset(
                    self.corpus.subset(self.split.test), template, mask
                ))
            report = evaluate_model(
                self.backend, model, self.corpus.subset(self.split.test),
                template=template, mask=mask,
                n_runs=self.plan.n_runs, temperature=self.plan.temperature,
            )
            cell.report_id = f"{self.plan_digest}-{spec.key}"
            save_report(self.state_dir, cell.report_id, report.to_json_dict())
            cell.status = "succeeded"
        except NudgecastError as exc:
            cell.status = "failed"
            cell.error = str(exc)
        self._save_cell(cell)
        return cell


def _require_kind(plan: ExperimentPlan, kind: str) -> None:
    if plan.kind != kind:
        raise PlanError(f"plan kind must be {kind!r}, got {plan.kind!r}")


def run_prompt_variant_experiment(plan: ExperimentPlan, corpus: Corpus, backend,
                                  state_dir: str | Path, resume: bool = False,
                                  poll_interval: float = 0.0) -> CampaignResult:
    _require_kind(plan, "prompt_variants")
    return CampaignRunner(plan, corpus, backend, state_dir, poll_interval).run(resume)


def run_size_sweep(plan: ExperimentPlan, corpus: Corpus, backend,
                   state_dir: str | Path, resume: bool = False,
                   poll_interval: float = 0.0) -> CampaignResult:
    _require_kind(plan, "size_sweep")
    return CampaignRunner(plan, corpus, backend, state_dir, poll_interval).run(resume)


def run_ablation(plan: ExperimentPlan, corpus: Corpus, backend,
                 state_dir: str | Path, resume: bool = False,
                 poll_interval: float = 0.0) -> CampaignResult:
    _require_kind(plan, "ablation")
    return CampaignRunner(plan, corpus, backend, state_dir, poll_interval).run(resume)


@dataclass(frozen=True)
class UnseenValidationResult:
    full: EvalReport
    filtered: EvalReport
    naive_full: EvalReport
    naive_filtered: EvalReport
    excluded_ids: tuple[str, ...]
    excluded_category: str

    def to_json_dict(self) -> dict:
        return {
            "schema_version": "nudgecast.unseen.v1",
            "excluded_category": self.excluded_category,
            "excluded_ids": list(self.excluded_ids),
            "full": self.full.to_json_dict(),
            "filtered": self.filtered.to_json_dict(),
            "naive_full": self.naive_full.to_json_dict(),
            "naive_filtered": self.naive_filtered.to_json_dict(),
        }


def _naive_report(train_entries: Sequence[Entry], targets: Sequence[Entry]) -> EvalReport:
    baseline = naive_baseline(train_entries)
    sign = 1.0 if baseline.modal_direction.value == "positive" else -1.0
    records = [
        PredictionRecord(
            study_id=study.study_id,
            raw_text="(naive baseline)",
            direction=baseline.modal_direction,
            r_pred=sign * baseline.mean_abs_r,
            d_pred=sign * baseline.mean_abs_d,
        )
        for study, _ in targets
    ]
    run = evaluate_run(records, list(targets))
    return aggregate_runs([run], model_id="naive-baseline", temperature=0.0)


def run_unseen_validation(
    backend,
    model,
    unseen: Corpus,
    train_entries: Sequence[Entry],
    exclusion_category: str = "monetary",
    template=None,
    mask: FeatureMask | None = None,
    n_runs: int = 10,
    temperature: float = 1.0,
) -> UnseenValidationResult:
    """Evaluate on the unseen holdout, with and without the excluded category."""
    if not unseen.holdout:
        raise NudgecastError("unseen corpus must be holdout-flagged (use load_unseen)")
    full_entries = list(unseen)
    filtered_entries = unseen.without_category(exclusion_category)
    if not filtered_entries:
        raise NudgecastError(
            f"every unseen entry has category {exclusion_category!r}; nothing left to evaluate"
        )
    excluded = tuple(
        s.study_id for s, _ in full_entries
        if s.intervention_category == exclusion_category
    )
    common = dict(template=template, mask=mask, n_runs=n_runs, temperature=temperature)
    return UnseenValidationResult(
        full=evaluate_model(backend, model, full_entries, **common),
        filtered=evaluate_model(backend, model, filtered_entries, **common),
        naive_full=_naive_report(train_entries, full_entries),
        naive_filtered=_naive_report(train_entries, filtered_entries),
        excluded_ids=excluded,
        excluded_category=exclusion_category,
    )


def _pct(value: Optional[float]) -> str:
    return "-" if value is None else f"{100.0 * value:.1f}"


def _err(mean: Optional[float], var: Optional[float]) -> str:
    if mean is None:
        return "-"
    if var is None:
        return f"{mean:.3f}"
    return f"{mean:.3f} (var {var:.3f})"


def render_campaign_table(result: CampaignResult) -> str:
    """Text table over the campaign's cells, with dashes for uncovered
    metrics and the published reference rows attached for context."""
    lines = [
        f"campaign {result.plan_digest} ({result.kind})",
        "cell | status | dir coverage % | dir accuracy % | r/d coverage % | r err | d err",
    ]
    baseline_report = None
    if result.kind == "ablation" and "baseline" in result.cells:
        baseline_report = result.report_for("baseline")
    for key, cell in result.cells.items():
        if cell.status != "succeeded":
            lines.append(f"{key} | failed: {cell.error}")
            continue
        report = result.report_for(key)
        row = (
            f"{key} | ok | {_pct(report.direction_coverage)} | "
            f"{_pct(report.direction_accuracy)} | {_pct(report.rd_coverage)} | "
            f"{_err(report.r_error_mean, report.r_error_var)} | "
            f"{_err(report.d_error_mean, report.d_error_var)}"
        )
        if (
            baseline_report is not None and key != "baseline"
            and report.r_error_mean is not None and report.d_error_mean is not None
            and baseline_report.r_error_mean is not None
            and baseline_report.d_error_mean is not None
            and abs(report.r_error_mean) < abs(baseline_report.r_error_mean)
            and abs(report.d_error_mean) < abs(baseline_report.d_error_mean)
        ):
            row += "  ** beats baseline on both error means"
        lines.append(row)
    if result.kind == "prompt_variants":
        lines.append("")
        lines.append(f"[{REFERENCE_LABEL}] reported values for comparison:")
        for ref in PROMPT_VARIANT_REFERENCE:
            r_part = "-" if ref.r_error_mean is None else f"{ref.r_error_mean:g}"
            d_part = "-" if ref.d_error_mean is None else f"{ref.d_error_mean:g}"
            lines.append(
                f"{ref.model} | {ref.direction_coverage_pct:g} | "
                f"{ref.direction_accuracy_pct:g} | {ref.rd_coverage_pct:g} | "
                f"{r_part} | {d_part}"
            )
    return "\n".join(lines) + "\n"
