"""Dataset of behavioral-experiment records: ingestion, validation, splits.

File format (UTF-8 CSV, standard quoting): header
``study_id,paper_title,goal_summary,intervention_text,intervention_category,
location,year,population,sample_size,treatment_n,control_n,direction,r,d``.
An empty cell is an absent optional value; at least one of r/d is required
per row and the other is derived through the effectstats conversions.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

from .effectstats import Direction, RawStats, d_from_r, r_from_d
from .errors import CorpusError, SplitError
from .rng import XorShift64Star

HEADER = [
    "study_id", "paper_title", "goal_summary", "intervention_text",
    "intervention_category", "location", "year", "population",
    "sample_size", "treatment_n", "control_n", "direction", "r", "d",
]

CATEGORIES = ("monetary", "information", "nudge", "other")
YEAR_RANGE = (1950, 2100)

# Tolerance for externally supplied (r, d) pairs.  Matches the 3-decimal wire
# precision of rendered completions; auto-derived pairs are exact to float
# precision and pass trivially.
RD_CONSISTENCY_TOL = 5e-4


@dataclass(frozen=True)
class StudyRecord:
    """Feature side of one experiment."""

    study_id: str
    paper_title: str
    goal_summary: str
    intervention_text: str
    intervention_category: str
    location: str
    year: int
    population: str
    sample_size: int
    treatment_n: int
    control_n: int
    holdout: bool = False

    def __post_init__(self):
        if not self.study_id:
            raise ValueError("study_id must be nonempty")
        if self.intervention_category not in CATEGORIES:
            raise ValueError(
                f"intervention_category must be one of {CATEGORIES}, "
                f"got {self.intervention_category!r}"
            )
        if not YEAR_RANGE[0] <= self.year <= YEAR_RANGE[1]:
            raise ValueError(f"year must lie in {YEAR_RANGE}, got {self.year}")
        if self.sample_size < 1:
            raise ValueError("sample_size must be positive")
        if self.treatment_n < 1 or self.control_n < 1:
            raise ValueError("treatment_n and control_n must be at least 1")


@dataclass(frozen=True)
class EffectOutcome:
    """Outcome side: signed direction plus both standardized magnitudes."""

    direction: Direction
    r: float
    d: float
    source: RawStats | None = field(default=None, compare=False)

    def __post_init__(self):
        if abs(self.r) >= 1.0:
            raise ValueError(f"r must lie strictly inside (-1, 1), got {self.r}")
        if self.r == 0.0:
            raise ValueError("zero effects are not representable; r must be signed")
        derived_sign = Direction.POSITIVE if self.r > 0 else Direction.NEGATIVE
        if self.direction != derived_sign:
            raise ValueError(
                f"direction {self.direction.value!r} contradicts sign of r={self.r}"
            )
        if self.d != 0.0 and (self.d > 0) != (self.r > 0):
            raise ValueError(f"signs of r={self.r} and d={self.d} disagree")
        if abs(self.d - d_from_r(self.r)) > RD_CONSISTENCY_TOL:
            raise ValueError(
                f"r={self.r} and d={self.d} are inconsistent beyond "
                f"{RD_CONSISTENCY_TOL} under the standard conversion"
            )


Entry = tuple[StudyRecord, EffectOutcome]


@dataclass(frozen=True)
class Corpus:
    """Ordered, validated collection of (StudyRecord, EffectOutcome) pairs."""

    entries: tuple[Entry, ...]
    provenance: str = field(default="", compare=False)

    def __post_init__(self):
        seen: set[str] = set()
        for study, _ in self.entries:
            if study.study_id in seen:
                raise CorpusError(
                    f"duplicate study_id {study.study_id!r}", field="study_id"
                )
            seen.add(study.study_id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Entry]:
        return iter(self.entries)

    def __getitem__(self, index: int) -> Entry:
        return self.entries[index]

    def ids(self) -> list[str]:
        return [study.study_id for study, _ in self.entries]

    def subset(self, indices: Sequence[int]) -> list[Entry]:
        return [self.entries[i] for i in indices]

    def without_category(self, category: str) -> list[Entry]:
        return [e for e in self.entries if e[0].intervention_category != category]

    @property
    def holdout(self) -> bool:
        return bool(self.entries) and all(s.holdout for s, _ in self.entries)


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    counts: tuple[int, int, int]  # (train, validation, test)


@dataclass(frozen=True)
class Split:
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]

    def __post_init__(self):
        combined = self.train + self.validation + self.test
        if len(set(combined)) != len(combined):
            raise SplitError("split index lists overlap")

    def counts(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.validation), len(self.test))

    def to_dict(self) -> dict:
        return {
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Split":
        return cls(
            train=tuple(data["train"]),
            validation=tuple(data["validation"]),
            test=tuple(data["test"]),
        )


def _require(cell: str, row: int, name: str) -> str:
    value = cell.strip()
    if not value:
        raise CorpusError("required value is empty", row=row, field=name)
    return value


def _parse_int(cell: str, row: int, name: str) -> int:
    try:
        return int(cell.strip())
    except ValueError:
        raise CorpusError(f"not an integer: {cell!r}", row=row, field=name) from None


def _parse_float(cell: str, row: int, name: str) -> float:
    try:
        return float(cell.strip())
    except ValueError:
        raise CorpusError(f"not a number: {cell!r}", row=row, field=name) from None


def _parse_row(cells: dict[str, str], row: int, holdout: bool) -> Entry:
    try:
        study = StudyRecord(
            study_id=_require(cells["study_id"], row, "study_id"),
            paper_title=_require(cells["paper_title"], row, "paper_title"),
            goal_summary=_require(cells["goal_summary"], row, "goal_summary"),
            intervention_text=_require(cells["intervention_text"], row, "intervention_text"),
            intervention_category=_require(cells["intervention_category"], row, "intervention_category"),
            location=_require(cells["location"], row, "location"),
            year=_parse_int(cells["year"], row, "year"),
            population=_require(cells["population"], row, "population"),
            sample_size=_parse_int(cells["sample_size"], row, "sample_size"),
            treatment_n=_parse_int(cells["treatment_n"], row, "treatment_n"),
            control_n=_parse_int(cells["control_n"], row, "control_n"),
            holdout=holdout,
        )
    except ValueError as exc:
        raise CorpusError(str(exc), row=row) from None

    r_cell = cells["r"].strip()
    d_cell = cells["d"].strip()
    if not r_cell and not d_cell:
        raise CorpusError("at least one of r or d is required", row=row, field="r")
    r = _parse_float(r_cell, row, "r") if r_cell else None
    d = _parse_float(d_cell, row, "d") if d_cell else None
    if r is not None and (abs(r) >= 1.0):
        raise CorpusError(f"r must lie strictly inside (-1, 1), got {r}", row=row, field="r")
    if r is not None and r == 0.0:
        raise CorpusError("r must be nonzero (signed effects only)", row=row, field="r")
    if r is None:
        if d == 0.0:
            raise CorpusError("d must be nonzero (signed effects only)", row=row, field="d")
        r = r_from_d(d)
    elif d is None:
        d = d_from_r(r)

    direction_cell = cells["direction"].strip().lower()
    derived = Direction.POSITIVE if r > 0 else Direction.NEGATIVE
    if direction_cell:
        if direction_cell not in (Direction.POSITIVE.value, Direction.NEGATIVE.value):
            raise CorpusError(
                f"direction must be 'positive' or 'negative', got {direction_cell!r}",
                row=row, field="direction",
            )
        if direction_cell != derived.value:
            raise CorpusError(
                f"direction {direction_cell!r} contradicts sign of r={r}",
                row=row, field="direction",
            )
    try:
        outcome = EffectOutcome(direction=derived, r=r, d=d)
    except ValueError as exc:
        raise CorpusError(str(exc), row=row, field="d") from None
    return study, outcome


def _ingest(path: str | Path, holdout: bool) -> Corpus:
    path = Path(path)
    raw = path.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    reader = csv.reader(io.StringIO(raw.decode("utf-8")))
    try:
        header = next(reader)
    except StopIteration:
        raise CorpusError("empty corpus") from None
    if header != HEADER:
        raise CorpusError(
            f"bad header: expected {','.join(HEADER)!r}, got {','.join(header)!r}"
        )
    entries: list[Entry] = []
    for row_num, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(HEADER):
            raise CorpusError(
                f"expected {len(HEADER)} columns, got {len(cells)}", row=row_num
            )
        entries.append(_parse_row(dict(zip(HEADER, cells)), row_num, holdout))
    if not entries:
        raise CorpusError("empty corpus")
    return Corpus(entries=tuple(entries), provenance=digest)


def ingest_corpus(path: str | Path) -> Corpus:
    """Read and validate a corpus file."""
    return _ingest(path, holdout=False)


def load_unseen(path: str | Path) -> Corpus:
    """Read a holdout corpus; every entry is flagged ineligible for training."""
    return _ingest(path, holdout=True)


def export_corpus(corpus: Corpus, path: str | Path) -> str:
    """Write a corpus back to the file format; returns the content digest.

    Floats are written with repr precision so that export/ingest round-trips
    bit-exactly.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HEADER)
    for study, outcome in corpus:
        writer.writerow([
            study.study_id, study.paper_title, study.goal_summary,
            study.intervention_text, study.intervention_category,
            study.location, study.year, study.population,
            study.sample_size, study.treatment_n, study.control_n,
            outcome.direction.value, repr(outcome.r), repr(outcome.d),
        ])
    data = buffer.getvalue().encode("utf-8")
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def split_corpus(corpus: Corpus, spec: SplitSpec) -> Split:
    """Deterministic seeded split: xorshift64* permutation, then contiguous
    train/validation/test assignment in that order."""
    n_train, n_val, n_test = spec.counts
    if min(n_train, n_val, n_test) < 0:
        raise SplitError("split counts must be nonnegative")
    if n_train + n_val + n_test != len(corpus):
        raise SplitError(
            f"counts {spec.counts} sum to {n_train + n_val + n_test}, "
            f"corpus has {len(corpus)} entries"
        )
    order = list(range(len(corpus)))
    XorShift64Star(spec.seed).shuffle(order)
    return Split(
        train=tuple(order[:n_train]),
        validation=tuple(order[n_train:n_train + n_val]),
        test=tuple(order[n_train + n_val:]),
    )


def merge_validation_into_train(split: Split) -> Split:
    """Fold validation indices into train (train order first), emptying it."""
    return Split(
        train=split.train + split.validation,
        validation=(),
        test=split.test,
    )


def as_holdout(corpus: Corpus) -> Corpus:
    """Return a copy with every entry flagged as holdout."""
    return Corpus(
        entries=tuple(
            (replace(study, holdout=True), outcome) for study, outcome in corpus
        ),
        provenance=corpus.provenance,
    )
