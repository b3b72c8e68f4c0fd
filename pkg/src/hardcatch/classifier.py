"""Hardening and catching predicates over a finite universe of candidates.

A test hardens a revision when it passes there and fails, correctly, on at
least one possible next revision. "Possible next revision" is made concrete
by a :class:`Universe`: real children from the revision graph plus any
hypothesized children such as mutants. Every existential or universal claim
below ranges over that universe and nothing else.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from hardcatch.core_model import (
    Expected,
    OracleLedger,
    Outcome,
    OutcomeMatrix,
    RevisionGraph,
    TestCase,
    World,
)
from hardcatch.errors import DomainError, InvariantViolation, UnknownIdError


class Timeliness(str, Enum):
    NOT_TIMELY = "NotTimely"
    TIMELY_ONLY = "TimelyOnly"
    JITTEST = "JiTTest"


class HardeningStatus(str, Enum):
    NOT_HARDENING = "NotHardening"
    WEAK_ONLY = "WeakOnly"
    STRONG = "Strong"
    WEAK_UNKNOWN_STRENGTH = "WeakUnknownStrength"


class CatchingStatus(str, Enum):
    NOT_CATCHING = "NotCatching"
    WEAK_ONLY = "WeakOnly"
    STRONG = "Strong"
    WEAK_UNKNOWN_STRENGTH = "WeakUnknownStrength"


class VennRegion(str, Enum):
    FAKE_HARDENING = "FakeHardening"
    STRONG_HARDENING_ONLY = "StrongHardeningOnly"
    FAKE_CATCH = "FakeCatch"
    STRONG_FUNCTIONALITY_CATCH = "StrongFunctionalityCatch"
    WEAK_H_WEAK_C = "WeakHWeakC"
    WEAK_H_STRONG_C = "WeakHStrongC"
    STRONG_H_WEAK_C = "StrongHWeakC"
    STRONG_REGRESSION_CATCH = "StrongRegressionCatch"
    NEITHER = "Neither"


@dataclass
class Universe:
    """Parent links for every revision or candidate the predicates may visit.

    ``allowed`` optionally narrows which children count as candidates for the
    existential and universal quantifiers; parent lookups are unaffected.
    """

    parents: Mapping[str, str | None]
    outcomes: OutcomeMatrix
    ledger: OracleLedger
    allowed: frozenset[str] | None = None
    _children: dict[str, list[str]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        children: dict[str, list[str]] = {}
        for child, parent in self.parents.items():
            if parent is not None:
                children.setdefault(parent, []).append(child)
        self._children = {k: sorted(v) for k, v in children.items()}

    @classmethod
    def from_graph(
        cls,
        graph: RevisionGraph,
        outcomes: OutcomeMatrix,
        ledger: OracleLedger,
        extra_parents: Mapping[str, str] | None = None,
        allowed: Iterable[str] | None = None,
    ) -> Universe:
        parents: dict[str, str | None] = {r.id: r.parent_id for r in graph}
        parents.update(extra_parents or {})
        return cls(parents, outcomes, ledger, None if allowed is None else frozenset(allowed))

    @classmethod
    def from_world(cls, world: World, allowed: Iterable[str] | None = None) -> Universe:
        return cls.from_graph(world.graph, world.outcomes, world.oracle, world.extra_parents, allowed)

    def with_candidates(
        self,
        links: Mapping[str, str],
        outcomes: OutcomeMatrix | None = None,
        ledger: OracleLedger | None = None,
    ) -> Universe:
        parents = dict(self.parents)
        parents.update(links)
        allowed = None if self.allowed is None else self.allowed | set(links)
        return Universe(parents, outcomes or self.outcomes, ledger or self.ledger, allowed)

    def with_ledger(self, ledger: OracleLedger) -> Universe:
        return Universe(self.parents, self.outcomes, ledger, self.allowed)

    def parent(self, rev_id: str) -> str | None:
        try:
            return self.parents[rev_id]
        except KeyError:
            raise UnknownIdError(f"unknown revision {rev_id!r}") from None

    def candidates(self, rev_id: str) -> list[str]:
        kids = self._children.get(rev_id, [])
        if self.allowed is None:
            return list(kids)
        return [k for k in kids if k in self.allowed]


def timeliness(t: TestCase, rev_id: str, graph: RevisionGraph) -> Timeliness:
    rev = graph.get(rev_id)
    if t.created_at > rev.submitted_at:
        return Timeliness.NOT_TIMELY
    if rev.parent_id is None:
        return Timeliness.TIMELY_ONLY
    if t.created_at > graph.get(rev.parent_id).submitted_at:
        return Timeliness.JITTEST
    return Timeliness.TIMELY_ONLY


def _subject_outcome(u: Universe, rev_id: str, test_id: str) -> Outcome:
    u.parent(rev_id)
    outcome = u.outcomes.entry(rev_id, test_id).outcome
    if outcome is Outcome.FLAKY:
        raise DomainError(f"({rev_id}, {test_id}) is flaky; flaky outcomes are not classified")
    return outcome


def _has_witness(
    u: Universe,
    rev_id: str,
    test_id: str,
    diagnostics: list[str] | None,
    include: Iterable[str] = (),
) -> bool:
    """Is there a candidate child on which the test fails and should fail?"""
    candidates = u.candidates(rev_id)
    candidates += [c for c in include if c not in candidates]
    found = False
    for child in candidates:
        outcome = u.outcomes.get(child, test_id)
        if outcome is None:
            if diagnostics is not None:
                diagnostics.append(f"candidate {child} has no outcome for {test_id}; skipped")
            continue
        if outcome is Outcome.FAIL and u.ledger.get(child, test_id) is Expected.FAIL:
            found = True
    return found


def hardening_status(
    u: Universe,
    rev_id: str,
    test_id: str,
    diagnostics: list[str] | None = None,
    include: Iterable[str] = (),
) -> HardeningStatus:
    if _subject_outcome(u, rev_id, test_id) is not Outcome.PASS:
        return HardeningStatus.NOT_HARDENING
    if not _has_witness(u, rev_id, test_id, diagnostics, include):
        return HardeningStatus.NOT_HARDENING
    expected = u.ledger.get(rev_id, test_id)
    if expected is Expected.PASS:
        return HardeningStatus.STRONG
    if expected is Expected.FAIL:
        return HardeningStatus.WEAK_ONLY
    return HardeningStatus.WEAK_UNKNOWN_STRENGTH


def perfect_hardening_flags(
    u: Universe, rev_id: str, test_id: str, diagnostics: list[str] | None = None
) -> tuple[bool, bool]:
    """(perfect precision, perfect recall), both relative to ``u`` only."""
    if hardening_status(u, rev_id, test_id, diagnostics) is HardeningStatus.NOT_HARDENING:
        raise DomainError(f"{test_id} is not hardening for {rev_id}")
    precision = recall = True
    for child in u.candidates(rev_id):
        outcome = u.outcomes.get(child, test_id)
        if outcome is None:
            continue
        expected = u.ledger.get(child, test_id)
        if outcome is Outcome.FAIL and expected is not Expected.FAIL:
            precision = False
        if expected is Expected.FAIL and outcome is not Outcome.FAIL:
            recall = False
    return precision, recall


def _strength(expected: Expected | None) -> CatchingStatus:
    if expected is Expected.FAIL:
        return CatchingStatus.STRONG
    if expected is Expected.PASS:
        return CatchingStatus.WEAK_ONLY
    return CatchingStatus.WEAK_UNKNOWN_STRENGTH


def catching_status(u: Universe, rev_id: str, test_id: str) -> CatchingStatus:
    if _subject_outcome(u, rev_id, test_id) is not Outcome.FAIL:
        return CatchingStatus.NOT_CATCHING
    return _strength(u.ledger.get(rev_id, test_id))


def _parent_of_nonroot(u: Universe, rev_id: str) -> str:
    parent = u.parent(rev_id)
    if parent is None:
        raise DomainError(f"{rev_id} is a root revision and has no parent")
    return parent


def _split_catch(
    u: Universe, rev_id: str, test_id: str, diagnostics: list[str] | None
) -> tuple[str, HardeningStatus, CatchingStatus]:
    parent = _parent_of_nonroot(u, rev_id)
    # the revision under test is itself a child of its parent, so it always
    # belongs to the existential for the parent
    h_parent = hardening_status(u, parent, test_id, diagnostics, include=(rev_id,))
    return parent, h_parent, catching_status(u, rev_id, test_id)


def regression_catching_status(
    u: Universe, rev_id: str, test_id: str, diagnostics: list[str] | None = None
) -> CatchingStatus:
    parent, h_parent, catch = _split_catch(u, rev_id, test_id, diagnostics)
    if h_parent is HardeningStatus.NOT_HARDENING:
        result = CatchingStatus.NOT_CATCHING
    else:
        result = catch
    short_form = (
        u.outcomes[(parent, test_id)] is Outcome.PASS
        and u.outcomes[(rev_id, test_id)] is Outcome.FAIL
        and u.ledger.get(rev_id, test_id) is Expected.FAIL
    )
    if (result is CatchingStatus.STRONG) != short_form:
        raise InvariantViolation(
            f"strong regression catch for ({rev_id}, {test_id}) disagrees with its short form"
        )
    return result


def functionality_catching_status(
    u: Universe, rev_id: str, test_id: str, diagnostics: list[str] | None = None
) -> CatchingStatus:
    parent, h_parent, catch = _split_catch(u, rev_id, test_id, diagnostics)
    if h_parent is HardeningStatus.NOT_HARDENING:
        result = catch
    else:
        result = CatchingStatus.NOT_CATCHING
    short_form = (
        u.outcomes[(parent, test_id)] in (Outcome.NO_BUILD, Outcome.FAIL)
        and u.outcomes[(rev_id, test_id)] is Outcome.FAIL
        and u.ledger.get(rev_id, test_id) is Expected.FAIL
    )
    if (result is CatchingStatus.STRONG) != short_form:
        raise InvariantViolation(
            f"strong functionality catch for ({rev_id}, {test_id}) disagrees with its expansion"
        )
    return result


_WEAK_H = (HardeningStatus.WEAK_ONLY, HardeningStatus.WEAK_UNKNOWN_STRENGTH)
_WEAK_C = (CatchingStatus.WEAK_ONLY, CatchingStatus.WEAK_UNKNOWN_STRENGTH)

_REGIONS: dict[tuple[str, str], VennRegion] = {
    ("weak", "not"): VennRegion.FAKE_HARDENING,
    ("strong", "not"): VennRegion.STRONG_HARDENING_ONLY,
    ("not", "weak"): VennRegion.FAKE_CATCH,
    ("not", "strong"): VennRegion.STRONG_FUNCTIONALITY_CATCH,
    ("weak", "weak"): VennRegion.WEAK_H_WEAK_C,
    ("weak", "strong"): VennRegion.WEAK_H_STRONG_C,
    ("strong", "weak"): VennRegion.STRONG_H_WEAK_C,
    ("strong", "strong"): VennRegion.STRONG_REGRESSION_CATCH,
    ("not", "not"): VennRegion.NEITHER,
}


def region_for(hardening: HardeningStatus, catching: CatchingStatus) -> tuple[VennRegion, bool]:
    """Map a (parent hardening, child catching) pair to a region.

    Returns the region and whether it rests on an incomplete oracle.
    """
    h = "not" if hardening is HardeningStatus.NOT_HARDENING else (
        "weak" if hardening in _WEAK_H else "strong")
    c = "not" if catching is CatchingStatus.NOT_CATCHING else (
        "weak" if catching in _WEAK_C else "strong")
    incomplete = (
        hardening is HardeningStatus.WEAK_UNKNOWN_STRENGTH
        or catching is CatchingStatus.WEAK_UNKNOWN_STRENGTH
    )
    return _REGIONS[(h, c)], incomplete


def classify_region(
    u: Universe, rev_id: str, test_id: str, diagnostics: list[str] | None = None
) -> tuple[VennRegion, bool]:
    _, h_parent, catch = _split_catch(u, rev_id, test_id, diagnostics)
    return region_for(h_parent, catch)


@dataclass
class Classification:
    revision: str
    test: str
    parent: str
    parent_hardening: HardeningStatus
    catching: CatchingStatus
    regression_catching: CatchingStatus
    functionality_catching: CatchingStatus
    region: VennRegion
    oracle_incomplete: bool
    diagnostics: list[str] = field(default_factory=list)

    def to_record(self) -> dict[str, Any]:
        return {
            "revision": self.revision,
            "test": self.test,
            "parent": self.parent,
            "parent_hardening": self.parent_hardening.value,
            "catching": self.catching.value,
            "regression_catching": self.regression_catching.value,
            "functionality_catching": self.functionality_catching.value,
            "region": self.region.value,
            "oracle_incomplete": self.oracle_incomplete,
            "diagnostics": list(self.diagnostics),
        }


def classify(u: Universe, rev_id: str, test_id: str) -> Classification:
    diags: list[str] = []
    parent, h_parent, catch = _split_catch(u, rev_id, test_id, diags)
    region, incomplete = region_for(h_parent, catch)
    return Classification(
        revision=rev_id,
        test=test_id,
        parent=parent,
        parent_hardening=h_parent,
        catching=catch,
        regression_catching=regression_catching_status(u, rev_id, test_id),
        functionality_catching=functionality_catching_status(u, rev_id, test_id),
        region=region,
        oracle_incomplete=incomplete,
        diagnostics=sorted(set(diags)),
    )
