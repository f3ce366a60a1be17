"""Standardized effect-size conversions and the naive training baseline.

Conversion pair (pinned from the standard meta-analysis formulae):
``d = 2r / sqrt(1 - r^2)`` and its exact inverse ``r = d / sqrt(d^2 + 4)``;
two-group Cohen's d uses the pooled standard deviation
``sqrt(((n1-1)s1^2 + (n2-1)s2^2) / (n1+n2-2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from statistics import fmean
from typing import Iterable, Union


class Direction(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    def __str__(self) -> str:  # noqa: D105 - render as the bare value
        return self.value


@dataclass(frozen=True)
class TwoGroupMeans:
    """Raw two-group summary statistics (treatment = group 1)."""

    m1: float
    m2: float
    s1: float
    s2: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.s1 <= 0 or self.s2 <= 0:
            raise ValueError("group standard deviations must be positive")
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("group sizes must be at least 2")


@dataclass(frozen=True)
class PrecomputedR:
    value: float


@dataclass(frozen=True)
class PrecomputedD:
    value: float


RawStats = Union[TwoGroupMeans, PrecomputedR, PrecomputedD]


@dataclass(frozen=True)
class NaiveBaseline:
    """Most-common-direction predictor with mean-|value| magnitudes."""

    modal_direction: Direction
    mean_abs_r: float
    mean_abs_d: float


def d_from_r(r: float) -> float:
    """Convert a Pearson r in (-1, 1) to Cohen's d. Sign-preserving."""
    if not math.isfinite(r) or abs(r) >= 1.0:
        raise ValueError(f"r must lie strictly inside (-1, 1), got {r!r}")
    return 2.0 * r / math.sqrt(1.0 - r * r)


def r_from_d(d: float) -> float:
    """Convert Cohen's d to Pearson r; total on finite d, output in (-1, 1).

    hypot avoids overflow for huge d; the result is nudged off +/-1 where
    float rounding would otherwise saturate, keeping the interval open.
    """
    if not math.isfinite(d):
        raise ValueError(f"d must be finite, got {d!r}")
    r = d / math.hypot(d, 2.0)
    if abs(r) >= 1.0:
        r = math.nextafter(r, 0.0)
    return r


def d_from_means(raw: TwoGroupMeans) -> float:
    """Pooled-SD Cohen's d from two-group summary statistics."""
    dof = raw.n1 + raw.n2 - 2
    pooled = math.sqrt(
        ((raw.n1 - 1) * raw.s1 ** 2 + (raw.n2 - 1) * raw.s2 ** 2) / dof
    )
    if pooled == 0.0:
        raise ValueError("pooled standard deviation is zero")
    return (raw.m1 - raw.m2) / pooled


def standardize(raw: RawStats) -> tuple[float, float]:
    """Reduce any RawStats variant to the (r, d) pair."""
    if isinstance(raw, TwoGroupMeans):
        d = d_from_means(raw)
        return r_from_d(d), d
    if isinstance(raw, PrecomputedR):
        return raw.value, d_from_r(raw.value)
    if isinstance(raw, PrecomputedD):
        return r_from_d(raw.value), raw.value
    raise TypeError(f"unsupported raw statistics: {raw!r}")


def naive_baseline(train) -> NaiveBaseline:
    """Build the naive estimator from a training slice.

    Accepts either EffectOutcome values or (StudyRecord, EffectOutcome)
    pairs.  Modal direction breaks ties toward negative; magnitudes are the
    training means of |r| and |d|.
    """
    outcomes = [e[1] if isinstance(e, tuple) else e for e in train]
    if not outcomes:
        raise ValueError("naive baseline needs a nonempty training slice")
    n_negative = sum(1 for o in outcomes if o.direction == Direction.NEGATIVE)
    n_positive = len(outcomes) - n_negative
    modal = Direction.NEGATIVE if n_negative >= n_positive else Direction.POSITIVE
    return NaiveBaseline(
        modal_direction=modal,
        mean_abs_r=fmean(abs(o.r) for o in outcomes),
        mean_abs_d=fmean(abs(o.d) for o in outcomes),
    )
