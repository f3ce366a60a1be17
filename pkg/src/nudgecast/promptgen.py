"""Chat-prompt rendering: template variants, feature masks, training export.

Template texts live in ``assets/templates.json`` (versioned) so wording
changes stay diffable.  The four variants form a chain: P1 carries the
step-instruction block, P2 drops it, P3 appends the guided-completion
suffix, P4 keeps the suffix but switches the completion to the compact
numeric format.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import EffectOutcome, Entry, StudyRecord
from .errors import ContaminationError, NudgecastError

VARIANTS = ("P1", "P2", "P3", "P4")
MASK_NAMES = ("baseline", "MF1", "MF2", "MF3", "MF4", "MF5")

# Which mask flag owns each skeleton slot; unlisted slots are always rendered.
_SLOT_FEATURE = {
    "title": "include_title",
    "location": "include_geography",
    "year": "include_timeframe",
    "population": "include_audience",
    "sample_size": "include_sample_sizes",
    "treatment_n": "include_sample_sizes",
    "control_n": "include_sample_sizes",
}

_SLOT_RE = re.compile(r"\{(\w+)\}")


@dataclass(frozen=True)
class FeatureMask:
    include_title: bool = True
    include_geography: bool = True
    include_timeframe: bool = True
    include_audience: bool = True
    include_sample_sizes: bool = True

    @classmethod
    def all_features(cls) -> "FeatureMask":
        return cls()

    @classmethod
    def preset(cls, name: str) -> "FeatureMask":
        try:
            return MASK_PRESETS[name]
        except KeyError:
            raise NudgecastError(
                f"unknown mask preset {name!r}; expected one of {MASK_NAMES}"
            ) from None


# MF1..MF5 each remove exactly one feature; baseline keeps them all.
MASK_PRESETS = {
    "baseline": FeatureMask(),
    "MF1": FeatureMask(include_title=False),
    "MF2": FeatureMask(include_geography=False),
    "MF3": FeatureMask(include_timeframe=False),
    "MF4": FeatureMask(include_audience=False),
    "MF5": FeatureMask(include_sample_sizes=False),
}


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class ChatPrompt:
    messages: tuple[Message, ...]

    def __post_init__(self):
        roles = [m.role for m in self.messages]
        if roles not in (["system", "user"], ["system", "user", "assistant"]):
            raise ValueError(
                f"messages must be [system, user] or [system, user, assistant], got {roles}"
            )

    @property
    def is_query(self) -> bool:
        return len(self.messages) == 2

    @property
    def is_training(self) -> bool:
        return len(self.messages) == 3

    @property
    def system_text(self) -> str:
        return self.messages[0].content

    @property
    def user_text(self) -> str:
        return self.messages[1].content

    @property
    def completion_text(self) -> str:
        if self.is_query:
            raise ValueError("query prompt has no completion")
        return self.messages[2].content

    def as_query(self) -> "ChatPrompt":
        return ChatPrompt(self.messages[:2])

    def to_wire(self) -> dict:
        return {"messages": [{"role": m.role, "content": m.content} for m in self.messages]}

    def digest(self) -> str:
        canonical = json.dumps(self.to_wire(), ensure_ascii=False, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_wire(cls, data: dict) -> "ChatPrompt":
        return cls(tuple(Message(m["role"], m["content"]) for m in data["messages"]))


@dataclass(frozen=True)
class PromptTemplate:
    variant_id: str
    system_text: str
    user_skeleton: str
    includes_step_instructions: bool
    includes_guided_completion: bool
    completion_format: str  # "verbose" | "simplified"


@lru_cache(maxsize=1)
def _load_asset() -> dict:
    data = resources.files("nudgecast").joinpath("assets/templates.json").read_text("utf-8")
    return json.loads(data)


@lru_cache(maxsize=None)
def get_template(variant_id: str) -> PromptTemplate:
    asset = _load_asset()
    try:
        flags = asset["variants"][variant_id]
    except KeyError:
        raise NudgecastError(
            f"unknown template variant {variant_id!r}; expected one of {VARIANTS}"
        ) from None
    skeleton = "\n".join(asset["body_lines"])
    if flags["step_instructions"]:
        skeleton += "\n\n" + asset["step_block"]
    if flags["guided_completion"]:
        suffix_key = (
            "guided_suffix_simplified"
            if flags["completion_format"] == "simplified"
            else "guided_suffix_verbose"
        )
        skeleton += "\n\n" + asset[suffix_key]
    return PromptTemplate(
        variant_id=variant_id,
        system_text=asset["system_text"],
        user_skeleton=skeleton,
        includes_step_instructions=flags["step_instructions"],
        includes_guided_completion=flags["guided_completion"],
        completion_format=flags["completion_format"],
    )


def template_asset_version() -> int:
    return _load_asset()["version"]


def _escape(value: str) -> str:
    # Doubled braces keep slot values distinguishable from template syntax.
    return value.replace("{", "{{").replace("}", "}}")


def _slot_values(study: StudyRecord) -> dict[str, str]:
    return {
        "title": _escape(study.paper_title),
        "goal": _escape(study.goal_summary),
        "intervention": _escape(study.intervention_text),
        "category": _escape(study.intervention_category),
        "location": _escape(study.location),
        "year": str(study.year),
        "population": _escape(study.population),
        "sample_size": str(study.sample_size),
        "treatment_n": str(study.treatment_n),
        "control_n": str(study.control_n),
    }


def render_prompt(template: PromptTemplate, study: StudyRecord, mask: FeatureMask) -> ChatPrompt:
    """Render the query prompt; masked features leave no trace in the text."""
    kept_lines = []
    for line in template.user_skeleton.split("\n"):
        flags = {_SLOT_FEATURE[s] for s in _SLOT_RE.findall(line) if s in _SLOT_FEATURE}
        if all(getattr(mask, flag) for flag in flags):
            kept_lines.append(line)
    user_text = "\n".join(kept_lines).format(**_slot_values(study))
    return ChatPrompt((
        Message("system", template.system_text),
        Message("user", user_text),
    ))


def format_3dp(x: float) -> str:
    """Render to exactly 3 decimals, ties rounded half away from zero."""
    return str(Decimal(repr(x)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def render_completion(outcome: EffectOutcome, template: PromptTemplate) -> str:
    direction = outcome.direction.value
    r, d = format_3dp(outcome.r), format_3dp(outcome.d)
    if template.completion_format == "simplified":
        return f"direction: {direction}; r: {r}; d: {d}"
    return (
        f"The effect direction is {direction}. "
        f"The r-coefficient is {r} and Cohen's d is {d}."
    )


def build_training_record(
    study: StudyRecord,
    outcome: EffectOutcome,
    template: PromptTemplate,
    mask: FeatureMask,
) -> ChatPrompt:
    """Query prompt plus the labelled completion as the assistant message."""
    if study.holdout:
        raise ContaminationError(
            f"study {study.study_id!r} is holdout-flagged and cannot enter training data"
        )
    query = render_prompt(template, study, mask)
    completion = render_completion(outcome, template)
    return ChatPrompt(query.messages + (Message("assistant", completion),))


def build_training_dataset(
    entries: Iterable[Entry],
    template: PromptTemplate,
    mask: FeatureMask,
) -> list[ChatPrompt]:
    """Training records for a corpus slice, with a holdout id-set guard."""
    entries = list(entries)
    contaminated = sorted(s.study_id for s, _ in entries if s.holdout)
    if contaminated:
        raise ContaminationError(
            f"holdout studies cannot enter training data: {', '.join(contaminated)}"
        )
    return [build_training_record(s, o, template, mask) for s, o in entries]


def export_training_file(records: Sequence[ChatPrompt], path: str | Path) -> str:
    """Write records as chat-format JSONL; returns the content digest."""
    if not records:
        raise NudgecastError("empty training file")
    for i, record in enumerate(records):
        if not record.is_training:
            raise NudgecastError(f"record {i} is not a training record (no completion)")
    lines = [
        json.dumps(r.to_wire(), ensure_ascii=False, separators=(", ", ": "))
        for r in records
    ]
    data = ("\n".join(lines) + "\n").encode("utf-8")
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def training_file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
