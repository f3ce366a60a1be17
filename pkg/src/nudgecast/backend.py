"""Model-provider clients: remote fine-tune/completion API over HTTP.

Remote wire protocol (JSON over HTTPS, close to the usual chat-completion
provider shape; the base URL comes from ``NUDGECAST_API_BASE`` so tests can
point it at a local stub):

- ``POST /v1/files``            {filename, purpose, content} -> {id}
- ``POST /v1/fine_tuning/jobs`` {training_file, validation_file?, model}
                                + ``Idempotency-Key`` header -> job object
- ``GET  /v1/fine_tuning/jobs/{id}`` -> job object
- ``POST /v1/chat/completions`` {model, messages, temperature, seed} ->
                                {choices: [{message: {content}}]}

Auth is a bearer token from ``NUDGECAST_API_KEY``.  All completions are
recorded to an on-disk transcript keyed by prompt digest, so paid runs can
be replayed from cache.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import httpx

from .errors import BackendError, JobNotFoundError, NudgecastError
from .promptgen import ChatPrompt, training_file_digest

log = logging.getLogger("nudgecast.backend")

JOB_STATUSES = ("queued", "running", "succeeded", "failed")
_STATUS_ORDER = {"queued": 0, "running": 1, "succeeded": 2, "failed": 2}

PROVIDER_MIN_TRAINING_RECORDS = 10

DEFAULT_BASE_MODEL = "base-chat-1"


@dataclass(frozen=True)
class ModelRef:
    provider: str  # "remote" | "mock"
    model_id: str
    base_model: str = ""

    def __str__(self) -> str:
        return self.model_id


@dataclass(frozen=True)
class FineTuneJob:
    job_id: str
    status: str
    training_file_digest: str
    created_at: str = ""
    finished_at: str = ""
    model_id: str = ""  # set once succeeded
    idempotency_key: str = ""

    def __post_init__(self):
        if self.status not in JOB_STATUSES:
            raise ValueError(f"unknown job status {self.status!r}")

    @property
    def is_terminal(self) -> bool:
        return self.status in ("succeeded", "failed")

    def advanced_to(self, new_status: str, **changes) -> "FineTuneJob":
        """Apply a provider refresh; transitions only move forward."""
        if _STATUS_ORDER[new_status] < _STATUS_ORDER[self.status]:
            raise BackendError(
                f"job {self.job_id} cannot move {self.status} -> {new_status}"
            )
        return replace(self, status=new_status, **changes)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "status": self.status,
            "training_file_digest": self.training_file_digest,
            "created_at": self.created_at,
            "finished_at": self.finished_at,
            "model_id": self.model_id,
            "idempotency_key": self.idempotency_key,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FineTuneJob":
        return cls(**data)


@dataclass
class RetryPolicy:
    """Bounded exponential backoff; the sleeper is injectable for tests."""

    max_attempts: int = 4
    base_delay: float = 0.5
    max_delay: float = 8.0
    sleep: Callable[[float], None] = time.sleep

    def delay(self, attempt: int) -> float:
        return min(self.base_delay * (2 ** attempt), self.max_delay)


class TokenBucket:
    """Thread-safe token bucket; acquire() blocks until a token is free."""

    def __init__(self, rate_per_sec: float, capacity: int = 1,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self._rate = rate_per_sec
        self._capacity = float(capacity)
        self._tokens = float(capacity)
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self._capacity, self._tokens + (now - self._last) * self._rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self._rate
            self._sleep(wait)


class TranscriptStore:
    """On-disk record of completions keyed by (model, prompt, temp, seed).

    Writes are atomic renames; concurrent writers on the same key settle on
    last-write-wins, which is safe because entries for a key are identical
    up to timestamps.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model_id: str, prompt_digest: str, temperature: float, run_seed: int) -> str:
        raw = f"{model_id}|{prompt_digest}|{temperature!r}|{run_seed}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text("utf-8"))

    def put(self, key: str, record: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp-{os.getpid()}-{threading.get_ident()}")
        tmp.write_text(json.dumps(record, ensure_ascii=False, indent=1), "utf-8")
        os.replace(tmp, path)


class SubmissionRegistry:
    """Local ledger of uploaded files and submitted fine-tune jobs.

    Keyed by content digest (files) and idempotency key (jobs); this is what
    makes resumed campaigns skip re-uploads and never double-submit.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if self.path.exists():
            self._data = json.loads(self.path.read_text("utf-8"))
        else:
            self._data = {"files": {}, "jobs": {}, "attempts": {}}
        self._lock = threading.Lock()

    def _save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._data, indent=1), "utf-8")
        os.replace(tmp, self.path)

    def file_id(self, digest: str) -> Optional[str]:
        return self._data["files"].get(digest)

    def record_file(self, digest: str, file_id: str) -> None:
        with self._lock:
            self._data["files"][digest] = file_id
            self._save()

    def job_for(self, idem_key: str) -> Optional[FineTuneJob]:
        stored = self._data["jobs"].get(idem_key)
        return FineTuneJob.from_dict(stored) if stored else None

    def record_job(self, idem_key: str, job: FineTuneJob) -> None:
        with self._lock:
            self._data["jobs"][idem_key] = job.to_dict()
            self._save()

    def drop_job(self, idem_key: str) -> None:
        with self._lock:
            self._data["jobs"].pop(idem_key, None)
            self._save()

    def bump_attempt(self, base_key: str) -> int:
        with self._lock:
            count = self._data["attempts"].get(base_key, 0) + 1
            self._data["attempts"][base_key] = count
            self._save()
            return count

    def jobs(self) -> list[FineTuneJob]:
        return [FineTuneJob.from_dict(j) for j in self._data["jobs"].values()]


def _count_jsonl_records(path: str | Path) -> int:
    with open(path, "r", encoding="utf-8") as fh:
        return sum(1 for line in fh if line.strip())


def require_query_prompt(prompt: ChatPrompt) -> None:
    if not prompt.is_query:
        raise NudgecastError(
            "completion requires a query prompt (no assistant message)"
        )


class RemoteBackend:
    """HTTP client with retry/backoff, rate limiting, and transcripts."""

    provider = "remote"

    _RETRY_STATUSES = (429, 500, 502, 503, 504)

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        state_dir: str | Path = ".nudgecast",
        retry: RetryPolicy | None = None,
        rate_limiter: TokenBucket | None = None,
        use_transcript_cache: bool = False,
        http_client: httpx.Client | None = None,
    ):
        self.base_url = (base_url or os.environ.get("NUDGECAST_API_BASE", "")).rstrip("/")
        if not self.base_url:
            raise BackendError(
                "no API base URL: pass base_url or set NUDGECAST_API_BASE"
            )
        self.api_key = api_key or os.environ.get("NUDGECAST_API_KEY", "")
        self.retry = retry or RetryPolicy()
        self.rate_limiter = rate_limiter
        self.use_transcript_cache = use_transcript_cache
        state = Path(state_dir)
        self.registry = SubmissionRegistry(state / "registry.json")
        self.transcripts = TranscriptStore(state / "transcripts")
        self._http = http_client or httpx.Client(timeout=30.0)

    # -- transport ---------------------------------------------------------

    def _request(self, method: str, path: str, payload: dict | None = None,
                 headers: dict | None = None) -> dict:
        url = f"{self.base_url}{path}"
        hdrs = {"Authorization": f"Bearer {self.api_key}"}
        if headers:
            hdrs.update(headers)
        last_error: Exception | None = None
        for attempt in range(self.retry.max_attempts):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                response = self._http.request(method, url, json=payload, headers=hdrs)
            except httpx.HTTPError as exc:
                last_error = exc
                log.warning("transport error on %s %s (attempt %d): %s",
                            method, path, attempt + 1, exc)
            else:
                if response.status_code < 400:
                    return response.json()
                if response.status_code == 404:
                    raise JobNotFoundError(
                        f"{method} {path}: not found", status=404
                    )
                if response.status_code not in self._RETRY_STATUSES:
                    raise BackendError(
                        f"{method} {path}: provider rejected request "
                        f"({response.status_code}): {response.text}",
                        status=response.status_code,
                    )
                last_error = BackendError(
                    f"{method} {path}: {response.status_code}: {response.text}",
                    status=response.status_code,
                )
                log.warning("retryable status %d on %s %s (attempt %d)",
                            response.status_code, method, path, attempt + 1)
            if attempt < self.retry.max_attempts - 1:
                self.retry.sleep(self.retry.delay(attempt))
        raise BackendError(
            f"{method} {path}: giving up after {self.retry.max_attempts} attempts: {last_error}"
        )

    # -- files and fine-tunes ----------------------------------------------

    def upload_file(self, path: str | Path, purpose: str = "fine-tune") -> str:
        """Upload once per content digest; re-uploads are served from the registry."""
        digest = training_file_digest(path)
        cached = self.registry.file_id(digest)
        if cached:
            log.info("file %s already uploaded as %s; skipping upload", digest[:12], cached)
            return cached
        body = {
            "filename": Path(path).name,
            "purpose": purpose,
            "content": Path(path).read_text("utf-8"),
        }
        result = self._request("POST", "/v1/files", body)
        self.registry.record_file(digest, result["id"])
        return result["id"]

    def create_finetune(
        self,
        training_file: str | Path,
        validation_file: str | Path | None = None,
        base_model: str = DEFAULT_BASE_MODEL,
    ) -> FineTuneJob:
        n_records = _count_jsonl_records(training_file)
        if n_records < PROVIDER_MIN_TRAINING_RECORDS:
            raise NudgecastError(
                f"training file has {n_records} records; "
                f"provider minimum is {PROVIDER_MIN_TRAINING_RECORDS}"
            )
        train_digest = training_file_digest(training_file)
        val_digest = training_file_digest(validation_file) if validation_file else ""
        base_key = hashlib.sha256(
            f"{train_digest}|{val_digest}|{base_model}".encode()
        ).hexdigest()[:32]

        cached = self.registry.job_for(base_key)
        if cached is not None:
            if cached.status == "failed":
                attempt = self.registry.bump_attempt(base_key)
                log.info("previous submission %s failed; resubmitting (attempt %d)",
                         cached.job_id, attempt)
                self.registry.drop_job(base_key)
                return self._submit(training_file, validation_file, base_model,
                                    base_key, f"{base_key}:{attempt}", train_digest)
            log.warning(
                "duplicate fine-tune submission suppressed: files already "
                "submitted as job %s (idempotency key %s)", cached.job_id, base_key,
            )
            return cached
        return self._submit(training_file, validation_file, base_model,
                            base_key, base_key, train_digest)

    def _submit(self, training_file, validation_file, base_model,
                base_key: str, wire_key: str, train_digest: str) -> FineTuneJob:
        training_id = self.upload_file(training_file)
        validation_id = self.upload_file(validation_file) if validation_file else None
        payload = {
            "training_file": training_id,
            "validation_file": validation_id,
            "model": base_model,
        }
        result = self._request("POST", "/v1/fine_tuning/jobs", payload,
                               headers={"Idempotency-Key": wire_key})
        job = FineTuneJob(
            job_id=result["id"],
            status=result.get("status", "queued"),
            training_file_digest=train_digest,
            created_at=result.get("created_at", ""),
            idempotency_key=wire_key,
        )
        self.registry.record_job(base_key, job)
        return job

    def poll_job(self, job: FineTuneJob | str) -> FineTuneJob:
        """Refresh a job's status; terminal results come from the local cache."""
        if isinstance(job, FineTuneJob):
            if job.is_terminal:
                return job
            job_id, current = job.job_id, job
        else:
            job_id, current = job, None
            for stored in self.registry.jobs():
                if stored.job_id == job_id:
                    if stored.is_terminal:
                        return stored
                    current = stored
                    break
        result = self._request("GET", f"/v1/fine_tuning/jobs/{job_id}")
        refreshed = FineTuneJob(
            job_id=result["id"],
            status=result.get("status", "queued"),
            training_file_digest=current.training_file_digest if current else "",
            created_at=result.get("created_at", ""),
            finished_at=result.get("finished_at", "") or "",
            model_id=result.get("fine_tuned_model", "") or "",
            idempotency_key=current.idempotency_key if current else "",
        )
        if current is not None:
            refreshed = current.advanced_to(
                refreshed.status,
                finished_at=refreshed.finished_at,
                model_id=refreshed.model_id,
            )
        if refreshed.is_terminal and refreshed.idempotency_key:
            self.registry.record_job(refreshed.idempotency_key.split(":")[0], refreshed)
        return refreshed

    def wait_for_job(self, job: FineTuneJob, poll_interval: float = 2.0,
                     timeout: float = 3600.0) -> FineTuneJob:
        deadline = time.monotonic() + timeout
        while not job.is_terminal:
            if time.monotonic() > deadline:
                raise BackendError(f"job {job.job_id} did not finish within {timeout}s")
            self.retry.sleep(poll_interval)
            job = self.poll_job(job)
        return job

    # -- completions ---------------------------------------------------------

    def complete(self, model, prompt: ChatPrompt, temperature: float = 1.0,
                 run_seed: int = 0) -> str:
        require_query_prompt(prompt)
        model_id = getattr(model, "model_id", str(model))
        key = TranscriptStore.key(model_id, prompt.digest(), temperature, run_seed)
        if self.use_transcript_cache:
            cached = self.transcripts.get(key)
            if cached is not None:
                return cached["response"]
        payload = {
            "model": model_id,
            "messages": prompt.to_wire()["messages"],
            "temperature": temperature,
            "seed": run_seed,
        }
        try:
            result = self._request("POST", "/v1/chat/completions", payload)
        except BackendError as exc:
            raise BackendError(
                f"completion failed for prompt {prompt.digest()[:12]}: {exc}",
                status=exc.status,
            ) from exc
        text = result["choices"][0]["message"]["content"]
        self.transcripts.put(key, {
            "model": model_id,
            "prompt_digest": prompt.digest(),
            "temperature": temperature,
            "run_seed": run_seed,
            "response": text,
            "recorded_at": datetime.now(timezone.utc).isoformat(),
        })
        return text

    def list_models(self) -> list[ModelRef]:
        return [
            ModelRef(provider="remote", model_id=j.model_id)
            for j in self.registry.jobs()
            if j.status == "succeeded" and j.model_id
        ]
