"""Deployment decisions and consequence annotations for generated tests.

Three lookup tables drive this module:

* ``DECISION_TABLE`` - what to do with a just-in-time test given only its
  outcomes on the parent and on the revision (no oracle available).
* ``TIMELY_ROWS`` - consequences of trusting a landed hardening test when it
  runs on some later child.
* ``JITTEST_ROWS`` - consequences of landing or reporting a just-in-time
  test, split into five categories by the observed outcome pair.

The annotation tables need oracle values for both revisions; ``None`` in a
row's oracle column means the row ignores that value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Protocol

from hardcatch.classifier import HardeningStatus, Universe, hardening_status
from hardcatch.core_model import (
    Expected,
    LedgerEntry,
    OracleLedger,
    OracleSource,
    Outcome,
    Revision,
    TestCase,
)
from hardcatch.errors import ConflictError, DomainError

P, F, NB, FL = Outcome.PASS, Outcome.FAIL, Outcome.NO_BUILD, Outcome.FLAKY
EP, EF = Expected.PASS, Expected.FAIL


class DecisionKind(str, Enum):
    LAND_TEST = "LandTest"
    REPORT_FAIL = "ReportFail"
    GIVE_SIGNAL = "GiveSignal"
    DISCARD_TEST = "DiscardTest"


class Severity(str, Enum):
    GREEN = "GREEN"
    AMBER = "AMBER"
    RED = "RED"


class VerdictType(str, Enum):
    TRUE_POSITIVE = "TruePositive"
    FALSE_POSITIVE = "FalsePositive"
    TRUE_NEGATIVE = "TrueNegative"
    FALSE_NEGATIVE = "FalseNegative"
    NOT_APPLICABLE = "NotApplicable"


class ConsequenceTable(str, Enum):
    TIMELY_HARDENING = "TimelyHardening"
    JITTEST = "JiTTest"


class ReviewVerdict(str, Enum):
    ACCEPT_PASS = "accept-pass"
    REJECT = "reject"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    category: int
    rationale: str


@dataclass(frozen=True)
class ConsequenceLabel:
    table: ConsequenceTable
    row_text: str
    verdict_type: VerdictType
    severity: Severity
    category: int | None = None
    tags: tuple[str, ...] = ()
    extension: bool = False

    def to_record(self) -> dict[str, Any]:
        return {
            "table": self.table.value,
            "category": self.category,
            "row_text": self.row_text,
            "verdict_type": self.verdict_type.value,
            "severity": self.severity.value,
            "tags": list(self.tags),
            "extension": self.extension,
        }


@dataclass(frozen=True)
class ConsequenceRow:
    parent: Outcome
    child: Outcome
    oracle_parent: Expected | None
    oracle_child: Expected | None
    verdict_type: VerdictType
    severity: Severity
    text: str
    category: int | None = None
    tags: tuple[str, ...] = ()

    def label(self, table: ConsequenceTable) -> ConsequenceLabel:
        return ConsequenceLabel(table, self.text, self.verdict_type, self.severity,
                                self.category, self.tags)


TP, FP, TN, FN, NA = (VerdictType.TRUE_POSITIVE, VerdictType.FALSE_POSITIVE,
                      VerdictType.TRUE_NEGATIVE, VerdictType.FALSE_NEGATIVE,
                      VerdictType.NOT_APPLICABLE)
GREEN, AMBER, RED = Severity.GREEN, Severity.AMBER, Severity.RED

FAILED_ERROR_PROPAGATION = "failed error propagation candidate"

# (parent, child) -> (decision, category, worst case, best case)
DECISION_TABLE: dict[tuple[Outcome, Outcome], tuple[DecisionKind, int, str, str]] = {
    (P, P): (DecisionKind.LAND_TEST, 1,
             "Bakes in long standing issue", "Catches future regressions"),
    (P, F): (DecisionKind.REPORT_FAIL, 1,
             "False positive; but other tests may pass", "Catches a current regression"),
    (F, P): (DecisionKind.LAND_TEST, 2,
             "Bakes in newly created issue", "Catches future regressions in new functionality"),
    (NB, P): (DecisionKind.LAND_TEST, 3,
              "Bakes in newly created issue", "Catches future regressions in new functionality"),
    (NB, F): (DecisionKind.REPORT_FAIL, 3,
              "False positive; but other tests may pass", "Catches bug in new functionality"),
    (P, NB): (DecisionKind.GIVE_SIGNAL, 4,
              "Wrongly claims that parent was correct", "Confirms that behaviour was removed"),
    (F, NB): (DecisionKind.GIVE_SIGNAL, 4,
              "Wrongly claims that parent was incorrect", "Partially documents a fix"),
    (F, F): (DecisionKind.DISCARD_TEST, 5,
             "Loses a bug catch on current revision", "Loses a potentially misleading test"),
}

# not covered by the published decision table: the test builds nowhere
DECISION_EXTENSION = {
    (NB, NB): (DecisionKind.DISCARD_TEST, 5,
               "Nothing lost: the test builds on neither revision",
               "Removes an unusable test"),
}

FLAKY_RATIONALE = "non-flaky assurance violated"


def decide_jittest(parent_outcome: Outcome, child_outcome: Outcome) -> Decision:
    if FL in (parent_outcome, child_outcome):
        return Decision(DecisionKind.DISCARD_TEST, 5, FLAKY_RATIONALE)
    key = (parent_outcome, child_outcome)
    row = DECISION_TABLE.get(key) or DECISION_EXTENSION[key]
    kind, category, worst, best = row
    return Decision(kind, category, f"worst case: {worst}; best case: {best}")


TIMELY_ROWS: tuple[ConsequenceRow, ...] = (
    ConsequenceRow(P, P, EP, EP, TN, GREEN,
                   "Strong Hardening test passes: All is well; move fast"),
    ConsequenceRow(P, P, EF, EP, TN, GREEN,
                   "Strictly Weak Hardening test passes: the child fixes an uncaught bug"),
    ConsequenceRow(P, F, EP, EF, TP, GREEN,
                   "Strong Hardening -> regression catching: Catches the child's regression"),
    ConsequenceRow(P, F, EF, EF, TP, GREEN,
                   "Strictly Weak Hardening -> regression catching: Failed error propagation"),
    ConsequenceRow(P, P, EF, EF, FN, AMBER,
                   "Strictly Weak Hardening test continues to miss a bug"),
    ConsequenceRow(P, P, EP, EF, FN, AMBER,
                   "Strong Hardening test misses a bug introduced by the child"),
    ConsequenceRow(P, F, EP, EP, FP, RED,
                   "Strong Hardening test wrongly blocks the child"),
    ConsequenceRow(P, F, EF, EP, FP, RED,
                   "Strictly Weak Hardening test wrongly flagged a fix as a new failure"),
    # obsolete tests: the child no longer builds the test
    ConsequenceRow(P, NB, None, EP, NA, GREEN,
                   "Strong Hardening test retired: the child removes the tested functionality"),
    ConsequenceRow(P, NB, None, EF, NA, GREEN,
                   "Strictly Weak Hardening test retired: Test was weak anyway"),
)

JITTEST_ROWS: tuple[ConsequenceRow, ...] = (
    # Category 1: passes on the parent
    ConsequenceRow(P, P, EP, EP, TN, GREEN, "Strong Hardening JiTTest hardens R", 1),
    ConsequenceRow(P, P, EF, EP, TN, GREEN,
                   "Strictly Weak Hardening JiTTest missed a bug now likely fixed", 1),
    ConsequenceRow(P, F, EP, EF, TP, GREEN,
                   "Strong Regression catching JiTTest catches R's regression", 1),
    ConsequenceRow(P, F, EF, EF, TP, GREEN,
                   "Regression catching JiTTest reveals long-standing bug", 1,
                   (FAILED_ERROR_PROPAGATION,)),
    ConsequenceRow(P, P, EF, EF, FN, AMBER,
                   "Strictly Weak Hardening JiTTest misses a long-standing issue", 1),
    ConsequenceRow(P, P, EP, EF, FN, AMBER,
                   "Strong Hardening JiTTest missed a bug introduced by R", 1),
    ConsequenceRow(P, F, EP, EP, FP, RED,
                   "Strong Hardening JiTTest wrongly blocks a change", 1),
    ConsequenceRow(P, F, EF, EP, FP, RED,
                   "Strictly Weak Hardening JiTTest wrongly blocks a fix", 1),
    # Category 2: fails on the parent, passes on R
    ConsequenceRow(F, P, EP, EP, TN, GREEN,
                   "Strong Hardening JiTTest: R fixes a broken test", 2),
    ConsequenceRow(F, P, EF, EP, TN, GREEN,
                   "Strong Hardening JiTTest correctly identifies a fix", 2),
    ConsequenceRow(F, P, EP, EF, FN, AMBER,
                   "Strictly Weak Hardening JiTTest lets through new bug", 2),
    ConsequenceRow(F, P, EF, EF, FN, AMBER,
                   "Strictly Weak Hardening JiTTest lets an existing bug remain", 2),
    # Category 3: does not build on the parent
    ConsequenceRow(NB, P, None, EP, TN, GREEN,
                   "Strong Hardening JiTTest for new functionality introduced by R", 3),
    ConsequenceRow(NB, F, None, EF, TP, GREEN,
                   "Strong Hardening/Catching JiTTest catches R's new functionality bug", 3),
    ConsequenceRow(NB, P, None, EF, FN, AMBER,
                   "Strictly Weak Hardening JiTTest bakes in incorrect new functionality", 3),
    ConsequenceRow(NB, F, None, EP, FP, RED,
                   "Strictly Weak Catching JiTTest blocks a perfectly good change", 3),
    # Category 4: does not build on R; signal only
    ConsequenceRow(P, NB, EP, None, NA, GREEN,
                   "Strong Hardening JiTTest Tested functionality is removed by R", 4),
    ConsequenceRow(F, NB, EF, None, NA, GREEN,
                   "Strong Catching JiTTest may be flagging the bug removed by R", 4),
    ConsequenceRow(F, NB, EP, None, NA, AMBER,
                   "Strictly Weak Catching JiTTest is a false positive, but it is removed", 4),
    ConsequenceRow(P, NB, EF, None, NA, AMBER,
                   "Strictly Weak Hardening JiTTest is weak so gives little valuable signal", 4),
    # Category 5: fails on both; colours describe the cost of discarding
    ConsequenceRow(F, F, EP, EP, FP, GREEN,
                   "Strictly Weak Catching JiTTest should be discarded", 5),
    ConsequenceRow(F, F, EF, EP, FP, GREEN,
                   "Strictly Weak Catching JiTTest would have rejecting a correct fix", 5),
    ConsequenceRow(F, F, EP, EF, TP, AMBER,
                   "Discarding Strong Catching JiTTest meant missing a new bug", 5),
    ConsequenceRow(F, F, EF, EF, TP, AMBER,
                   "Discarding Strong Catching JiTTest meant missing a long-standing bug", 5),
)

JITTEST_EXTENSION = ConsequenceLabel(
    ConsequenceTable.JITTEST,
    "Extension: JiTTest builds on neither revision; discarding it loses nothing",
    NA, GREEN, 5, (), extension=True,
)

ORACLE_INCOMPLETE = "oracle incomplete"

_OBSERVABLE = (P, F, NB)


def _matches(row: ConsequenceRow, parent: Outcome, child: Outcome,
             oracle_parent: Expected | None, oracle_child: Expected | None) -> bool:
    return (
        row.parent is parent
        and row.child is child
        and (row.oracle_parent is None or row.oracle_parent is oracle_parent)
        and (row.oracle_child is None or row.oracle_child is oracle_child)
    )


def _needs_oracle(rows: tuple[ConsequenceRow, ...], parent: Outcome, child: Outcome
                  ) -> tuple[bool, bool]:
    """Which oracle columns matter for rows with this outcome pair."""
    same = [r for r in rows if r.parent is parent and r.child is child]
    return (any(r.oracle_parent is not None for r in same),
            any(r.oracle_child is not None for r in same))


def _lookup(
    table: ConsequenceTable,
    rows: tuple[ConsequenceRow, ...],
    parent: Outcome,
    child: Outcome,
    oracle_parent: Expected | None,
    oracle_child: Expected | None,
) -> ConsequenceLabel | None:
    need_p, need_c = _needs_oracle(rows, parent, child)
    if (need_p and oracle_parent is None) or (need_c and oracle_child is None):
        category = next((r.category for r in rows if r.parent is parent and r.child is child), None)
        return ConsequenceLabel(table, ORACLE_INCOMPLETE, NA, AMBER, category)
    hits = [r for r in rows if _matches(r, parent, child, oracle_parent, oracle_child)]
    if len(hits) > 1:
        raise AssertionError(f"ambiguous consequence rows for {parent}, {child}")
    return hits[0].label(table) if hits else None


def _as_expected(value: Expected | str | None) -> Expected | None:
    if value is None or isinstance(value, Expected):
        return value
    if value in ("unknown", ""):
        return None
    return Expected(value)


def annotate_timely_outcome(
    parent_outcome: Outcome,
    child_outcome: Outcome,
    oracle_parent: Expected | str | None,
    oracle_child: Expected | str | None,
) -> ConsequenceLabel:
    """Consequence of trusting a landed hardening test on a later child."""
    if parent_outcome is not P:
        raise DomainError("timely hardening rows assume the test passed on the parent")
    if child_outcome not in _OBSERVABLE:
        raise DomainError(f"child outcome must be pass, fail or no-build, got {child_outcome.value}")
    label = _lookup(ConsequenceTable.TIMELY_HARDENING, TIMELY_ROWS, parent_outcome,
                    child_outcome, _as_expected(oracle_parent), _as_expected(oracle_child))
    assert label is not None  # the ten rows cover every pass-on-parent input
    return label


def annotate_jittest_outcome(
    parent_outcome: Outcome,
    child_outcome: Outcome,
    oracle_parent: Expected | str | None,
    oracle_child: Expected | str | None,
) -> ConsequenceLabel:
    if parent_outcome not in _OBSERVABLE or child_outcome not in _OBSERVABLE:
        raise DomainError("JiTTest annotation needs pass, fail or no-build outcomes")
    label = _lookup(ConsequenceTable.JITTEST, JITTEST_ROWS, parent_outcome, child_outcome,
                    _as_expected(oracle_parent), _as_expected(oracle_child))
    return label if label is not None else JITTEST_EXTENSION


@dataclass(frozen=True)
class BudgetConfig:
    review_budget_seconds: int = 8 * 3600
    # median first response across projects; informational only
    median_first_response_seconds: int = 6300

    def __post_init__(self) -> None:
        if self.review_budget_seconds <= 0:
            raise DomainError("review budget must be positive")
        if self.median_first_response_seconds <= 0:
            raise DomainError("median first response must be positive")


def within_budget(generated_at: int, submitted_at: int, cfg: BudgetConfig = BudgetConfig()) -> bool:
    latency = generated_at - submitted_at
    if latency < 0:
        raise DomainError(f"test generated {-latency}s before its revision was submitted")
    return latency <= cfg.review_budget_seconds


class PullRequestGenerator(Protocol):
    """Source of candidate tests for a submitted revision."""

    def generate(self, parent: Revision, child: Revision, budget: BudgetConfig) -> list[TestCase]:
        ...


@dataclass
class StaticGenerator:
    """Hands out a fixed list of tests, stamped at the child's submission time."""

    tests: list[TestCase]

    def generate(self, parent: Revision, child: Revision, budget: BudgetConfig) -> list[TestCase]:
        return [
            TestCase(t.id, child.submitted_at, t.provenance, t.spec) for t in self.tests
        ]


def check_generated(tests: list[TestCase], child: Revision, budget: BudgetConfig) -> None:
    for t in tests:
        if not within_budget(t.created_at, child.submitted_at, budget):
            raise DomainError(f"{t.id} created outside the review window of {child.id}")


@dataclass
class ReviewOutcome:
    ledger: OracleLedger
    status: HardeningStatus
    landed: bool
    notes: list[str] = field(default_factory=list)


_REVIEWABLE = (HardeningStatus.WEAK_UNKNOWN_STRENGTH, HardeningStatus.WEAK_ONLY)


def review_gate(u: Universe, rev_id: str, test_id: str,
                review_verdict: ReviewVerdict | str) -> ReviewOutcome:
    """Ask the engineer whether the test is right to pass on ``rev_id``.

    The answer becomes a ledger entry; the universe's own ledger is left
    untouched and the updated copy is returned.
    """
    review_verdict = ReviewVerdict(review_verdict)
    existing = u.ledger.entry(rev_id, test_id)
    if existing is not None:
        raise ConflictError(
            f"ledger already holds {existing.expected.value} for ({rev_id}, {test_id})"
        )
    status = hardening_status(u, rev_id, test_id)
    if status not in _REVIEWABLE:
        raise DomainError(f"review gate needs a weak hardening test, got {status.value}")
    if u.outcomes[(rev_id, test_id)] is not P:
        raise DomainError("review gate needs a passing test")
    ledger = u.ledger.copy()
    expected = EP if review_verdict is ReviewVerdict.ACCEPT_PASS else EF
    ledger.add(rev_id, test_id, LedgerEntry(expected, OracleSource.HUMAN_REVIEW))
    new_status = hardening_status(u.with_ledger(ledger), rev_id, test_id)
    return ReviewOutcome(ledger, new_status, landed=expected is EP)
