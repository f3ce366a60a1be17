"""Deterministic offline model provider for tests and dry runs.

Two modes:
- replay: answers a seen study (matched by rendered user text) with its own
  training completion, or a refusal string for unseen prompts.
- nearest: scores candidate studies by weighted feature similarity and
  answers with the best match's completion.  Weights are frozen for test
  stability: 1.0 category match, 0.5 location match, 0.25 decayed by year
  distance per decade, 0.25 decayed by |log sample-size ratio|:

      score = 1.0*[category ==] + 0.5*[location ==]
            + 0.25 / (1 + |dyear| / 10) + 0.25 / (1 + |ln(n_a / n_b)|)

  Missing features contribute zero; ties break toward the lowest study_id.

At temperature 0 outputs are exact and stable across processes.  At higher
temperatures the numeric fields are perturbed by noise that is a pure
function of (model, prompt, temperature, run_seed), so reruns vary but
remain reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .backend import FineTuneJob, ModelRef, require_query_prompt
from .corpus import StudyRecord
from .errors import BackendError, JobNotFoundError, NudgecastError
from .evalkit import parse_prediction
from .promptgen import ChatPrompt, format_3dp, training_file_digest
from .rng import XorShift64Star

REFUSAL_TEXT = "No prediction available for this experiment."

MOCK_MODES = ("replay", "nearest")

_CATEGORY_RE = re.compile(r"^Intervention category: (\w+)\.$", re.MULTILINE)
_LOCATION_RE = re.compile(r"^Location: (.*)\.$", re.MULTILINE)
_YEAR_RE = re.compile(r"^Year: (\d+)\.$", re.MULTILINE)
_SAMPLE_RE = re.compile(r"^Sample size: (\d+) participants", re.MULTILINE)


def extract_features(user_text: str) -> dict:
    """Recover the similarity features from a rendered prompt body."""
    features: dict = {}
    if m := _CATEGORY_RE.search(user_text):
        features["category"] = m.group(1)
    if m := _LOCATION_RE.search(user_text):
        features["location"] = m.group(1)
    if m := _YEAR_RE.search(user_text):
        features["year"] = int(m.group(1))
    if m := _SAMPLE_RE.search(user_text):
        features["sample_size"] = int(m.group(1))
    return features


def similarity(a: dict, b: dict) -> float:
    """Weighted feature similarity between two feature dicts."""
    score = 0.0
    if a.get("category") and a.get("category") == b.get("category"):
        score += 1.0
    loc_a, loc_b = a.get("location"), b.get("location")
    if loc_a and loc_b and loc_a.strip().casefold() == loc_b.strip().casefold():
        score += 0.5
    if a.get("year") is not None and b.get("year") is not None:
        score += 0.25 / (1.0 + abs(a["year"] - b["year"]) / 10.0)
    n_a, n_b = a.get("sample_size"), b.get("sample_size")
    if n_a and n_b:
        score += 0.25 / (1.0 + abs(math.log(n_a / n_b)))
    return score


@dataclass(frozen=True)
class MockEntry:
    study_id: str
    features: dict
    user_digest: str
    completion: str


def _study_features(study: StudyRecord) -> dict:
    return {
        "category": study.intervention_category,
        "location": study.location,
        "year": study.year,
        "sample_size": study.sample_size,
    }


def _user_digest(user_text: str) -> str:
    return hashlib.sha256(user_text.encode("utf-8")).hexdigest()


class MockModel:
    def __init__(self, mode: str, entries: Sequence[MockEntry],
                 answer_book: dict[str, str] | None = None):
        if mode not in MOCK_MODES:
            raise NudgecastError(f"unknown mock mode {mode!r}; expected one of {MOCK_MODES}")
        if not entries:
            raise NudgecastError("mock model needs at least one training record")
        self.mode = mode
        self.entries = list(entries)
        self._by_digest = {e.user_digest: e for e in self.entries}
        # Backend-level oracle answers for prompts outside the training set;
        # replay models consult it so offline campaigns can act as identity
        # checks over their evaluation slices.
        self._answer_book = answer_book if answer_book is not None else {}
        payload = json.dumps(
            sorted((e.user_digest, e.completion) for e in self.entries)
        ).encode("utf-8")
        self.training_digest = hashlib.sha256(payload).hexdigest()
        self.model_id = f"mock:{mode}:{self.training_digest[:12]}"

    def _base_completion(self, prompt: ChatPrompt) -> str:
        digest = _user_digest(prompt.user_text)
        hit = self._by_digest.get(digest)
        if hit is not None:
            return hit.completion
        if self.mode == "replay":
            return self._answer_book.get(digest, REFUSAL_TEXT)
        query = extract_features(prompt.user_text)
        best: Optional[MockEntry] = None
        best_score = -1.0
        for entry in sorted(self.entries, key=lambda e: e.study_id):
            score = similarity(query, entry.features)
            if score > best_score:
                best, best_score = entry, score
        return best.completion

    def answer(self, prompt: ChatPrompt, temperature: float, run_seed: int) -> str:
        text = self._base_completion(prompt)
        if temperature <= 0.0:
            return text
        return self._perturb(text, prompt, temperature, run_seed)

    def _perturb(self, text: str, prompt: ChatPrompt, temperature: float,
                 run_seed: int) -> str:
        parsed = parse_prediction(text)
        if parsed.r_pred is None or parsed.d_pred is None:
            return text
        seed_material = f"{self.model_id}|{prompt.digest()}|{temperature!r}|{run_seed}"
        seed = int.from_bytes(
            hashlib.sha256(seed_material.encode()).digest()[:8], "big"
        )
        rng = XorShift64Star(seed)
        scale = 0.05 * temperature
        r = parsed.r_pred + (2.0 * rng.random() - 1.0) * scale
        d = parsed.d_pred + (2.0 * rng.random() - 1.0) * scale * 2.0
        direction = parsed.direction.value if parsed.direction else "positive"
        return f"direction: {direction}; r: {format_3dp(r)}; d: {format_3dp(d)}"


class MockBackend:
    """Offline provider with the same surface as RemoteBackend."""

    provider = "mock"

    def __init__(self):
        self._models: dict[str, MockModel] = {}
        self._jobs: dict[str, FineTuneJob] = {}
        self._answer_book: dict[str, str] = {}

    def register(self, model: MockModel) -> ModelRef:
        model._answer_book = self._answer_book
        self._models[model.model_id] = model
        return ModelRef(provider="mock", model_id=model.model_id)

    def seed_answer_book(self, records: Sequence[ChatPrompt]) -> None:
        """Give replay models oracle answers for prompts they weren't
        trained on (offline identity checks over evaluation slices)."""
        for record in records:
            if not record.is_training:
                raise NudgecastError("answer book needs records with completions")
            self._answer_book[_user_digest(record.user_text)] = record.completion_text

    def build_mock_model(
        self,
        records: Sequence[ChatPrompt],
        mode: str = "replay",
        studies: Sequence[StudyRecord] | None = None,
    ) -> ModelRef:
        """Build a mock from training records.

        When aligned StudyRecords are passed the similarity features and ids
        are exact; otherwise they are recovered from the rendered text and
        ids fall back to record order.
        """
        if not records:
            raise NudgecastError("mock model needs at least one training record")
        if studies is not None and len(studies) != len(records):
            raise NudgecastError("studies must align one-to-one with records")
        entries = []
        for i, record in enumerate(records):
            if not record.is_training:
                raise NudgecastError(f"record {i} is not a training record")
            if studies is not None:
                study_id = studies[i].study_id
                features = _study_features(studies[i])
            else:
                study_id = f"r{i:04d}"
                features = extract_features(record.user_text)
            entries.append(MockEntry(
                study_id=study_id,
                features=features,
                user_digest=_user_digest(record.user_text),
                completion=record.completion_text,
            ))
        return self.register(MockModel(mode, entries))

    def create_finetune(
        self,
        training_file: str | Path,
        validation_file: str | Path | None = None,
        base_model: str = "mock:replay",
    ) -> FineTuneJob:
        """Instant 'fine-tune': builds a mock model from the JSONL file."""
        mode = base_model.split(":")[1] if ":" in base_model else "replay"
        records = []
        with open(training_file, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(ChatPrompt.from_wire(json.loads(line)))
        from .backend import PROVIDER_MIN_TRAINING_RECORDS
        if len(records) < PROVIDER_MIN_TRAINING_RECORDS:
            raise NudgecastError(
                f"training file has {len(records)} records; "
                f"provider minimum is {PROVIDER_MIN_TRAINING_RECORDS}"
            )
        ref = self.build_mock_model(records, mode=mode)
        now = datetime.now(timezone.utc).isoformat()
        job = FineTuneJob(
            job_id=f"mockjob-{training_file_digest(training_file)[:12]}",
            status="succeeded",
            training_file_digest=training_file_digest(training_file),
            created_at=now,
            finished_at=now,
            model_id=ref.model_id,
        )
        self._jobs[job.job_id] = job
        return job

    def poll_job(self, job: FineTuneJob | str) -> FineTuneJob:
        job_id = job.job_id if isinstance(job, FineTuneJob) else job
        try:
            return self._jobs[job_id]
        except KeyError:
            raise JobNotFoundError(f"unknown mock job {job_id!r}", status=404) from None

    def wait_for_job(self, job: FineTuneJob, poll_interval: float = 0.0,
                     timeout: float = 0.0) -> FineTuneJob:
        return self.poll_job(job)

    def get_model(self, model) -> MockModel:
        model_id = getattr(model, "model_id", str(model))
        try:
            return self._models[model_id]
        except KeyError:
            raise BackendError(f"unknown model {model_id!r}", status=404) from None

    def complete(self, model, prompt: ChatPrompt, temperature: float = 0.0,
                 run_seed: int = 0) -> str:
        require_query_prompt(prompt)
        return self.get_model(model).answer(prompt, temperature, run_seed)

    def list_models(self) -> list[ModelRef]:
        return [ModelRef(provider="mock", model_id=mid) for mid in sorted(self._models)]
