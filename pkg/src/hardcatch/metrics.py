"""Precision, reviewer-based pseudo precision, recall estimates and R@P.

No blended score (F1 and friends) is offered on purpose: precision and
recall are not interchangeable, so the goal metric is the best recall
reachable while precision stays at or above a floor ``p``.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from itertools import groupby
from typing import Any

from hardcatch.core_model import Verdict
from hardcatch.errors import DomainError, InputError, UndefinedMetricError

_EPS = 1e-12


class Reaction(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


@dataclass(frozen=True)
class SignalEvent:
    test: str
    revision: str
    verdict: Verdict
    score: float = 1.0
    reviewer_reaction: Reaction | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise DomainError(f"score {self.score} outside [0, 1]")

    @property
    def is_failure(self) -> bool:
        return self.verdict in (Verdict.TRUE_POSITIVE, Verdict.FALSE_POSITIVE)

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> SignalEvent:
        reaction = rec.get("reviewer_reaction")
        return cls(
            test=rec["test"],
            revision=rec["revision"],
            verdict=Verdict(rec["verdict"]),
            score=float(rec.get("score", 1.0)),
            reviewer_reaction=None if reaction is None else Reaction(reaction),
        )


def confusion(events: Iterable[SignalEvent]) -> Counter[str]:
    return Counter(e.verdict.value for e in events)


def precision(events: Iterable[SignalEvent]) -> float:
    counts = confusion(events)
    tp, fp = counts[Verdict.TRUE_POSITIVE.value], counts[Verdict.FALSE_POSITIVE.value]
    if tp + fp == 0:
        raise UndefinedMetricError("precision needs at least one failure signal")
    return tp / (tp + fp)


def pseudo_precision(events: Iterable[SignalEvent]) -> float:
    """Share of failure signals the engineer accepted.

    A rejected signal counts against precision even when the oracle says
    the failure was right.
    """
    failures = [e for e in events if e.is_failure]
    missing = [f"{e.test}@{e.revision}" for e in failures if e.reviewer_reaction is None]
    if missing:
        raise InputError("failure events without reviewer_reaction: " + ", ".join(missing))
    if not failures:
        raise UndefinedMetricError("pseudo precision needs at least one failure signal")
    accepted = sum(e.reviewer_reaction is Reaction.ACCEPTED for e in failures)
    return accepted / len(failures)


def mutation_recall(kill: Any) -> float:
    """Killed share of a :class:`~hardcatch.mutation.KillMatrix`'s mutants."""
    mutants = list(kill.mutant_ids)
    if not mutants:
        raise UndefinedMetricError("mutation recall needs at least one mutant")
    return len(kill.killed_mutants() & set(mutants)) / len(mutants)


def production_recall_bound(caught: int, leaked: int) -> float:
    if caught < 0 or leaked < 0:
        raise DomainError("counts must be non-negative")
    if caught + leaked == 0:
        raise UndefinedMetricError("no caught or leaked faults to estimate recall from")
    return caught / (caught + leaked)


def recall_estimates(kill: Any, leaked_bug_count: int, caught_count: int) -> tuple[float, float]:
    """(mutation estimate, production bound). Both are estimates, not recall."""
    return mutation_recall(kill), production_recall_bound(caught_count, leaked_bug_count)


def r_at_p(events: Sequence[SignalEvent], p: float, positives: int | None = None) -> float:
    """Best recall over score thresholds whose precision is at least ``p``.

    Failure signals are ranked by descending score; events sharing a score
    enter or leave together. ``positives`` defaults to TP + FN in ``events``.
    """
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    counts = confusion(events)
    if positives is None:
        positives = counts[Verdict.TRUE_POSITIVE.value] + counts[Verdict.FALSE_NEGATIVE.value]
    if positives <= 0:
        raise UndefinedMetricError("R@P needs at least one ground-truth positive")
    failures = sorted((e for e in events if e.is_failure), key=lambda e: -e.score)
    best = 0.0
    tp = n = 0
    for _, group in groupby(failures, key=lambda e: e.score):
        for e in group:
            n += 1
            tp += e.verdict is Verdict.TRUE_POSITIVE
        if tp / n >= p - _EPS:
            best = max(best, tp / positives)
    return best


@dataclass
class MetricsReport:
    precision: float | None
    pseudo_precision: float | None
    recall_lower_bound: float | None
    recall_mutation_estimate: float | None
    r_at_p: dict[float, float | None] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    unknown_events: int = 0

    def to_record(self) -> dict[str, Any]:
        return {
            "precision": self.precision,
            "pseudo_precision": self.pseudo_precision,
            "recall_lower_bound": self.recall_lower_bound,
            "recall_mutation_estimate": self.recall_mutation_estimate,
            "r_at_p": {f"{p:g}": v for p, v in sorted(self.r_at_p.items())},
            "counts": dict(sorted(self.counts.items())),
            "unknown_events": self.unknown_events,
        }


def _maybe(fn, *args) -> float | None:
    try:
        return fn(*args)
    except (UndefinedMetricError, InputError):
        return None


def build_report(
    events: Sequence[SignalEvent],
    thresholds: Iterable[float] = (0.8,),
    kill: Any = None,
    caught: int | None = None,
    leaked: int | None = None,
    positives: int | None = None,
) -> MetricsReport:
    """Aggregate everything computable; undefined rates come back as None."""
    known = [e for e in events if e.verdict is not Verdict.UNKNOWN]
    counts = confusion(known)
    return MetricsReport(
        precision=_maybe(precision, known),
        pseudo_precision=_maybe(pseudo_precision, known),
        recall_lower_bound=(
            None if caught is None or leaked is None
            else _maybe(production_recall_bound, caught, leaked)
        ),
        recall_mutation_estimate=None if kill is None else _maybe(mutation_recall, kill),
        r_at_p={p: _maybe(r_at_p, known, p, positives) for p in thresholds},
        counts={v.value: counts[v.value] for v in Verdict if v is not Verdict.UNKNOWN},
        unknown_events=len(events) - len(known),
    )
