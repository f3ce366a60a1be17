"""Exception hierarchy shared across the package."""

from __future__ import annotations


class NudgecastError(Exception):
    """Base class; user-facing errors map to CLI exit code 1."""


class CorpusError(NudgecastError):
    """Corpus file or record is invalid.

    Carries the 1-based data row and offending field when known.
    """

    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        self.row = row
        self.field = field
        prefix = ""
        if row is not None:
            prefix += f"row {row}"
        if field is not None:
            prefix += f"{', ' if prefix else ''}field '{field}'"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class SplitError(NudgecastError):
    """Split specification doesn't fit the corpus."""


class ContaminationError(NudgecastError):
    """A holdout study was about to enter a training artifact."""


class PlanError(NudgecastError):
    """Experiment plan failed validation."""


class AlignmentError(NudgecastError):
    """Prediction records and truth entries don't line up by study_id."""


class BackendError(NudgecastError):
    """Provider-side or transport failure; maps to CLI exit code 2."""

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class JobNotFoundError(BackendError):
    """Polled a fine-tune job the provider doesn't know."""


class PartialEvaluationError(BackendError):
    """Evaluation aborted mid-way; completed runs are preserved for resume."""

    def __init__(self, message: str, completed_runs: list):
        self.completed_runs = completed_runs
        super().__init__(message)
