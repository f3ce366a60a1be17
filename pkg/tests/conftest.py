"""Shared fixtures: synthetic corpora, stub provider, backend factories."""

from __future__ import annotations

import math

import pytest

from nudgecast.backend import RemoteBackend, RetryPolicy
from nudgecast.corpus import Corpus, EffectOutcome, StudyRecord
from nudgecast.effectstats import Direction
from nudgecast.mockbackend import MockBackend

from stub_server import StubProvider

_CATEGORIES = ("nudge", "information", "monetary", "other")
_LOCATIONS = ("United Kingdom", "Germany", "United States", "Denmark", "Japan")
_POPULATIONS = (
    "university students", "hospital staff", "primary school children",
    "supermarket shoppers", "office workers",
)


def exact3_r_values(n: int) -> list[float]:
    """Pearson r values whose (r, round3(d)) pair is exactly representable
    at the 3-decimal wire precision and passes the consistency check."""
    out: list[float] = []
    k = 11
    while len(out) < n:
        r = k / 1000
        d = round(2 * r / math.sqrt(1 - r * r), 3)
        if abs(d - 2 * r / math.sqrt(1 - r * r)) <= 4.9e-4:
            out.append(r)
        k += 1
        if k >= 990:
            raise AssertionError("ran out of exact 3-decimal fixtures")
    return out


def exact3_outcome(r: float, sign: int = 1) -> EffectOutcome:
    r = sign * r
    d = round(2 * r / math.sqrt(1 - r * r), 3)
    return EffectOutcome(
        direction=Direction.POSITIVE if r > 0 else Direction.NEGATIVE,
        r=r,
        d=d,
    )


def make_study(i: int, *, holdout: bool = False, **overrides) -> StudyRecord:
    fields = dict(
        study_id=f"s{i:03d}",
        paper_title=f"Canteen tray redesign trial {i}",
        goal_summary=f"Measure plate waste under serving layout {i}.",
        intervention_text=f"Rearranged the buffet line, variation {i}.",
        intervention_category=_CATEGORIES[i % len(_CATEGORIES)],
        location=_LOCATIONS[i % len(_LOCATIONS)],
        year=1995 + (i % 26),
        population=_POPULATIONS[i % len(_POPULATIONS)],
        sample_size=150 + 13 * i,
        treatment_n=60 + 5 * i,
        control_n=55 + 5 * i,
        holdout=holdout,
    )
    fields.update(overrides)
    return StudyRecord(**fields)


def make_corpus(n: int, *, holdout: bool = False, start: int = 0,
                provenance: str = "synthetic") -> Corpus:
    rs = exact3_r_values(n)
    entries = []
    for i in range(n):
        sign = 1 if i % 2 == 0 else -1
        entries.append((make_study(start + i, holdout=holdout),
                        exact3_outcome(rs[i], sign)))
    return Corpus(entries=tuple(entries), provenance=provenance)


@pytest.fixture
def corpus20() -> Corpus:
    return make_corpus(20)


@pytest.fixture
def stub():
    provider = StubProvider().start()
    yield provider
    provider.stop()


@pytest.fixture
def remote_backend(stub, tmp_path):
    return RemoteBackend(
        base_url=stub.url,
        api_key="test-key",
        state_dir=tmp_path / "state",
        retry=RetryPolicy(max_attempts=3, base_delay=0.0, sleep=lambda s: None),
    )


@pytest.fixture
def mock_backend():
    return MockBackend()
