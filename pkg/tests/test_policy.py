from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import golden
from hardcatch.classifier import HardeningStatus
from hardcatch.core_model import Expected, OracleSource, Outcome, Provenance, Revision, SyntheticSpec, TestCase
from hardcatch.errors import ConflictError, DomainError
from hardcatch.policy import (
    DECISION_TABLE,
    FAILED_ERROR_PROPAGATION,
    FLAKY_RATIONALE,
    JITTEST_ROWS,
    ORACLE_INCOMPLETE,
    TIMELY_ROWS,
    BudgetConfig,
    DecisionKind,
    ReviewVerdict,
    Severity,
    StaticGenerator,
    VerdictType,
    annotate_jittest_outcome,
    annotate_timely_outcome,
    check_generated,
    decide_jittest,
    review_gate,
    within_budget,
)
from worlds import T, to_universe

OBSERVABLE = (Outcome.PASS, Outcome.FAIL, Outcome.NO_BUILD)
ORACLE = (Expected.PASS, Expected.FAIL)


def test_decision_table_matches_golden():
    g = golden("decisions.json")
    assert len(DECISION_TABLE) == len(g["rows"]) == 8
    for row in g["rows"]:
        d = decide_jittest(Outcome(row["parent"]), Outcome(row["child"]))
        assert d.kind.value == row["decision"]
        assert d.category == row["category"]
        assert row["worst"] in d.rationale and row["best"] in d.rationale


def test_decision_extension_row():
    d = decide_jittest(Outcome.NO_BUILD, Outcome.NO_BUILD)
    assert (d.kind, d.category) == (DecisionKind.DISCARD_TEST, 5)


@pytest.mark.parametrize("pair", [(Outcome.FLAKY, Outcome.PASS), (Outcome.PASS, Outcome.FLAKY),
                                  (Outcome.FLAKY, Outcome.FLAKY)])
def test_flaky_is_discarded(pair):
    d = decide_jittest(*pair)
    assert (d.kind, d.category, d.rationale) == (DecisionKind.DISCARD_TEST, 5, FLAKY_RATIONALE)


@given(st.sampled_from(list(Outcome)), st.sampled_from(list(Outcome)))
def test_decide_is_total(p, c):
    assert decide_jittest(p, c).category in range(1, 6)


def _golden_rows(name):
    for row in golden(name)["rows"]:
        yield row, (
            Outcome(row["parent"]), Outcome(row["child"]),
            None if row["oracle_parent"] is None else Expected(row["oracle_parent"]),
            None if row["oracle_child"] is None else Expected(row["oracle_child"]),
        )


def test_timely_rows_match_golden():
    rows = list(_golden_rows("timely_consequences.json"))
    assert len(rows) == len(TIMELY_ROWS) == 10
    for row, (p, c, op, oc) in rows:
        for op_ in ORACLE if op is None else (op,):
            label = annotate_timely_outcome(p, c, op_, oc)
            assert (label.row_text, label.verdict_type.value, label.severity.value) == (
                row["text"], row["verdict_type"], row["severity"])


def test_jittest_rows_match_golden():
    rows = list(_golden_rows("jittest_consequences.json"))
    assert len(rows) == len(JITTEST_ROWS) == 24
    for row, (p, c, op, oc) in rows:
        for op_, oc_ in itertools.product(ORACLE if op is None else (op,),
                                          ORACLE if oc is None else (oc,)):
            label = annotate_jittest_outcome(p, c, op_, oc_)
            assert (label.row_text, label.verdict_type.value, label.severity.value,
                    label.category) == (row["text"], row["verdict_type"], row["severity"],
                                        row["category"])


def test_every_full_oracle_input_hits_exactly_one_row():
    golden_rows = [r for r, _ in _golden_rows("jittest_consequences.json")]
    for p, c, op, oc in itertools.product(OBSERVABLE, OBSERVABLE, ORACLE, ORACLE):
        hits = [
            r for r in golden_rows
            if r["parent"] == p.value and r["child"] == c.value
            and r["oracle_parent"] in (None, op.value) and r["oracle_child"] in (None, oc.value)
        ]
        label = annotate_jittest_outcome(p, c, op, oc)
        if (p, c) == (Outcome.NO_BUILD, Outcome.NO_BUILD):
            assert hits == [] and label.extension
        else:
            assert len(hits) == 1
            assert label.row_text == hits[0]["text"]


def test_oracle_incomplete_label():
    label = annotate_jittest_outcome(Outcome.PASS, Outcome.FAIL, Expected.PASS, None)
    assert label.row_text == ORACLE_INCOMPLETE
    assert label.verdict_type is VerdictType.NOT_APPLICABLE
    assert label.severity is Severity.AMBER
    # the parent oracle does not matter for category 3
    label = annotate_jittest_outcome(Outcome.NO_BUILD, Outcome.FAIL, "unknown", "fail")
    assert label.row_text.startswith("Strong Hardening/Catching")


def test_timely_needs_passing_parent():
    with pytest.raises(DomainError):
        annotate_timely_outcome(Outcome.FAIL, Outcome.PASS, "pass", "pass")


def test_failed_error_propagation_tag():
    label = annotate_jittest_outcome(Outcome.PASS, Outcome.FAIL, Expected.FAIL, Expected.FAIL)
    assert FAILED_ERROR_PROPAGATION in label.tags


def test_severity_coherence_where_it_holds():
    # green for correct verdicts, amber for misses, red for false alarms.
    # Category 5 is excluded: its colours rate the cost of discarding.
    colour = {VerdictType.TRUE_NEGATIVE: Severity.GREEN, VerdictType.TRUE_POSITIVE: Severity.GREEN,
              VerdictType.FALSE_NEGATIVE: Severity.AMBER, VerdictType.FALSE_POSITIVE: Severity.RED}
    rows = list(TIMELY_ROWS) + [r for r in JITTEST_ROWS if r.category in (1, 2, 3)]
    for r in rows:
        if r.verdict_type in colour:
            assert r.severity is colour[r.verdict_type], r.text


def test_category_five_colours_are_inverted():
    for r in JITTEST_ROWS:
        if r.category == 5:
            want = Severity.GREEN if r.verdict_type is VerdictType.FALSE_POSITIVE else Severity.AMBER
            assert r.severity is want


# -- budget and generators ------------------------------------------------------


def test_budget_boundary_inclusive():
    cfg = BudgetConfig()
    assert cfg.review_budget_seconds == 8 * 3600
    assert within_budget(28800, 0, cfg)
    assert not within_budget(28801, 0, cfg)
    with pytest.raises(DomainError):
        within_budget(0, 1, cfg)


def test_static_generator_and_window_check():
    t = TestCase("g", 0, Provenance.GENERATED, SyntheticSpec("g"))
    child = Revision("c", "p", 500)
    out = StaticGenerator([t]).generate(Revision("p", None, 0), child, BudgetConfig())
    assert out[0].created_at == 500
    check_generated(out, child, BudgetConfig())
    late = TestCase("g", 500 + 28801, Provenance.GENERATED, SyntheticSpec("g"))
    with pytest.raises(DomainError):
        check_generated([late], child, BudgetConfig())


# -- review gate -------------------------------------------------------------


def gate_universe(led=None):
    parents = {"R": None, "M": "R"}
    out = {("R", T): "pass", ("M", T): "fail"}
    return to_universe(parents, out, {("M", T): "fail", **(led or {})})


def test_review_accept_makes_strong_and_lands():
    u = gate_universe()
    res = review_gate(u, "R", T, ReviewVerdict.ACCEPT_PASS)
    assert res.status is HardeningStatus.STRONG and res.landed
    assert res.ledger.entry("R", T).source is OracleSource.HUMAN_REVIEW
    assert ("R", T) not in u.ledger  # caller's ledger untouched


def test_review_reject_keeps_weak_and_blocks():
    res = review_gate(gate_universe(), "R", T, "reject")
    assert res.status is HardeningStatus.WEAK_ONLY and not res.landed


def test_review_conflicting_entry():
    with pytest.raises(ConflictError):
        review_gate(gate_universe({("R", T): "fail"}), "R", T, "accept-pass")


def test_review_needs_weak_hardening():
    u = to_universe({"R": None}, {("R", T): "pass"}, {})
    with pytest.raises(DomainError):
        review_gate(u, "R", T, "accept-pass")
