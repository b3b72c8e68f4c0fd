from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hardcatch.classifier import (
    CatchingStatus,
    HardeningStatus,
    Timeliness,
    Universe,
    VennRegion,
    catching_status,
    classify,
    classify_region,
    functionality_catching_status,
    hardening_status,
    perfect_hardening_flags,
    region_for,
    regression_catching_status,
    timeliness,
)
from hardcatch.core_model import (
    Expected,
    OracleLedger,
    Outcome,
    OutcomeEntry,
    OutcomeMatrix,
    Provenance,
    Revision,
    RevisionGraph,
    SyntheticSpec,
    TestCase,
)
from hardcatch.errors import DomainError, UnknownIdError
from hardcatch.mutation import KillMatrix, KillResult, Mutant, MutationOperator, mutant_universe_data
from worlds import T, enumerate_parent_child, random_world, to_universe


def tc(created_at):
    return TestCase("t", created_at, Provenance.HUMAN, SyntheticSpec("t"))


@pytest.mark.parametrize("created,expected", [
    (5, Timeliness.JITTEST), (2, Timeliness.TIMELY_ONLY), (11, Timeliness.NOT_TIMELY),
    (10, Timeliness.JITTEST), (3, Timeliness.TIMELY_ONLY),
])
def test_timeliness(created, expected):
    g = RevisionGraph([Revision("p", None, 3), Revision("r", "p", 10)])
    assert timeliness(tc(created), "r", g) is expected


def test_timeliness_root_is_never_jittest():
    g = RevisionGraph([Revision("p", None, 3)])
    assert timeliness(tc(1), "p", g) is Timeliness.TIMELY_ONLY


def test_timeliness_unknown_revision():
    g = RevisionGraph([Revision("p", None, 3)])
    with pytest.raises(UnknownIdError):
        timeliness(tc(1), "ghost", g)


# -- product examples ------------------------------------------------------


def product_universe(world, allowed=None, with_none_mutant=False):
    u = Universe.from_world(world, allowed)
    if not with_none_mutant:
        return u
    m = Mutant("r1~none", "r1", MutationOperator.NULLIFY_INITIALIZER, "product.py", 0, 0, b"")
    kill = KillMatrix(["weak", "strong"], [m.id], {
        ("weak", m.id): KillResult.SURVIVED, ("strong", m.id): KillResult.KILLED})
    links, outs, led = mutant_universe_data("r1", [m], kill)
    outcomes, ledger = world.outcomes.copy(), world.oracle.copy()
    for (r, t), e in outs.items():
        if (r, t) not in outcomes:
            outcomes.add(r, t, e)
    for (r, t), e in led.items():
        ledger.add(r, t, e)
    return u.with_candidates(links, outcomes, ledger)


def test_strong_example_is_strong_hardening_via_mutant(product_world):
    u = product_universe(product_world, allowed=["r1-doc", "r3"], with_none_mutant=True)
    assert hardening_status(u, "r1", "strong") is HardeningStatus.STRONG
    # the weak check survives the mutant, so it has no witness here
    assert hardening_status(u, "r1", "weak") is HardeningStatus.NOT_HARDENING


def test_weak_example_on_buggy_revision_is_weak_only(product_world):
    u = Universe.from_world(product_world)
    assert hardening_status(u, "r0", "weak") is HardeningStatus.WEAK_ONLY


def test_failing_test_is_not_hardening(product_world):
    u = Universe.from_world(product_world)
    assert hardening_status(u, "r0", "strong") is HardeningStatus.NOT_HARDENING


def test_strong_catching_on_none_pull_request(product_world):
    u = Universe.from_world(product_world)
    assert catching_status(u, "r2", "strong") is CatchingStatus.STRONG
    assert regression_catching_status(u, "r2", "strong") is CatchingStatus.STRONG
    assert classify_region(u, "r2", "strong") == (VennRegion.STRONG_REGRESSION_CATCH, False)


def test_region_before_and_after_buggy_child(product_world):
    before = product_universe(product_world, allowed=["r1-doc", "r3"], with_none_mutant=True)
    assert classify(before, "r1-doc", "strong").region is VennRegion.STRONG_HARDENING_ONLY
    after = Universe.from_world(product_world)
    assert classify(after, "r2", "strong").region is VennRegion.STRONG_REGRESSION_CATCH


def test_distance_is_strong_functionality_catch(product_world):
    u = Universe.from_world(product_world)
    assert functionality_catching_status(u, "r3", "distance") is CatchingStatus.STRONG
    assert regression_catching_status(u, "r3", "distance") is CatchingStatus.NOT_CATCHING
    assert classify(u, "r3", "distance").region is VennRegion.STRONG_FUNCTIONALITY_CATCH


def test_weak_hardening_with_strong_catch_region(product_world):
    # weak passes on buggy r0 and fails on r0-nonempty: looks like a
    # regression catch, but the parent hardening is only weak
    u = Universe.from_world(product_world)
    assert classify(u, "r0-nonempty", "weak").region is VennRegion.WEAK_H_STRONG_C


def test_root_revision_is_domain_error(product_world):
    u = Universe.from_world(product_world)
    with pytest.raises(DomainError):
        regression_catching_status(u, "r0", "weak")


def test_missing_subject_outcome_is_lookup_error(product_world):
    u = Universe.from_world(product_world)
    with pytest.raises(UnknownIdError):
        hardening_status(u, "r1", "nope")


def test_candidate_without_outcome_is_skipped_with_diagnostic():
    u = to_universe({"R": None, "C0": "R", "C1": "R"},
                    {("R", T): "pass", ("C1", T): "fail"}, {("C1", T): "fail"})
    diags: list[str] = []
    assert hardening_status(u, "R", T, diags) is HardeningStatus.WEAK_UNKNOWN_STRENGTH
    assert any("C0" in d for d in diags)


def test_flaky_subject_raises_and_flaky_candidate_gives_no_evidence():
    outcomes = OutcomeMatrix({("R", T): OutcomeEntry(Outcome.PASS),
                              ("C", T): OutcomeEntry(Outcome.FLAKY, runs=5)})
    ledger = OracleLedger({("C", T): Expected.FAIL})
    u = Universe({"R": None, "C": "R"}, outcomes, ledger)
    assert hardening_status(u, "R", T) is HardeningStatus.NOT_HARDENING
    with pytest.raises(DomainError):
        catching_status(u, "C", T)


def test_no_oracle_entries_sets_incomplete_flag():
    u = to_universe({"P": None, "R": "P"}, {("P", T): "pass", ("R", T): "fail"}, {})
    c = classify(u, "R", T)
    assert c.oracle_incomplete
    # without an expected-fail entry on R the parent has no witness
    assert c.region is VennRegion.FAKE_CATCH
    assert c.catching is CatchingStatus.WEAK_UNKNOWN_STRENGTH


def test_universe_restriction_changes_existential():
    parents = {"R": None, "A": "R", "B": "R"}
    u = to_universe(parents, {("R", T): "pass", ("A", T): "pass", ("B", T): "fail"},
                    {("B", T): "fail", ("R", T): "pass"})
    assert hardening_status(u, "R", T) is HardeningStatus.STRONG
    narrowed = Universe(u.parents, u.outcomes, u.ledger, frozenset({"A"}))
    assert hardening_status(narrowed, "R", T) is HardeningStatus.NOT_HARDENING


# -- perfect precision / recall ------------------------------------------------


def test_perfect_flags_hand_worked_two_candidates():
    # C0 fails and should: fine. C1 should fail but passes: recall broken.
    parents = {"R": None, "C0": "R", "C1": "R"}
    out = {("R", T): "pass", ("C0", T): "fail", ("C1", T): "pass"}
    led = {("C0", T): "fail", ("C1", T): "fail"}
    assert perfect_hardening_flags(to_universe(parents, out, led), "R", T) == (True, False)
    assert oracles.perfect_flags(parents, out, led, "R", T) == (True, False)


def test_graceful_null_pull_request_breaks_precision():
    # a later change handles None gracefully: the strong check fails there
    # even though the change is correct
    parents = {"R": None, "bug": "R", "graceful": "R"}
    out = {("R", T): "pass", ("bug", T): "fail", ("graceful", T): "fail"}
    led = {("R", T): "pass", ("bug", T): "fail", ("graceful", T): "pass"}
    assert perfect_hardening_flags(to_universe(parents, out, led), "R", T) == (False, True)


def test_perfect_flags_need_hardening():
    u = to_universe({"R": None}, {("R", T): "fail"}, {})
    with pytest.raises(DomainError):
        perfect_hardening_flags(u, "R", T)


# -- exhaustive agreement with the direct evaluator on a single shape ---------


def test_regression_and_functionality_enumeration_one_sibling():
    for parents, out, led in enumerate_parent_child(1):
        u = to_universe(parents, out, led)
        assert regression_catching_status(u, "R", T).value == oracles.regression_kind(
            parents, out, led, "R", T)
        assert functionality_catching_status(u, "R", T).value == oracles.functionality_kind(
            parents, out, led, "R", T)


# -- region grid ------------------------------------------------------------


def test_region_grid_is_total():
    seen = set()
    for h in HardeningStatus:
        for c in CatchingStatus:
            region, incomplete = region_for(h, c)
            want, want_incomplete = oracles.region(h.value, c.value)
            assert (region.value, incomplete) == (want, want_incomplete)
            seen.add(region)
    assert seen == set(VennRegion)


def test_neither_iff_both_not():
    for h in HardeningStatus:
        for c in CatchingStatus:
            neither = region_for(h, c)[0] is VennRegion.NEITHER
            assert neither == (h is HardeningStatus.NOT_HARDENING and c is CatchingStatus.NOT_CATCHING)


# -- invariants on random worlds ----------------------------------------------


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_invariants_hold_on_random_worlds(seed):
    parents, out, led = random_world(random.Random(seed))
    u = to_universe(parents, out, led)
    for r in parents:
        if (r, T) not in out:
            continue
        h = hardening_status(u, r, T)
        c = catching_status(u, r, T)
        assert h.value == oracles.hardening_kind(parents, out, led, r, T)
        # one revision cannot be both hardening and catching
        assert h is HardeningStatus.NOT_HARDENING or c is CatchingStatus.NOT_CATCHING
        if h is HardeningStatus.STRONG:
            assert led[(r, T)] == "pass"
        if c is not CatchingStatus.NOT_CATCHING:
            assert out[(r, T)] == "fail"
        if parents[r] is None or (parents[r], T) not in out:
            continue
        reg = regression_catching_status(u, r, T)
        fun = functionality_catching_status(u, r, T)
        if c is not CatchingStatus.NOT_CATCHING:
            assert (reg is CatchingStatus.NOT_CATCHING) != (fun is CatchingStatus.NOT_CATCHING)
        else:
            assert reg is fun is CatchingStatus.NOT_CATCHING


def test_evaluation_order_does_not_matter():
    rng = random.Random(7)
    parents, out, led = random_world(rng, max_revs=10, missing_rate=0.0)
    u = to_universe(parents, out, led)
    revs = [r for r in parents if parents[r] is not None]
    forward = [classify(u, r, T).to_record() for r in revs]
    backward = [classify(u, r, T).to_record() for r in reversed(revs)]
    assert forward == list(reversed(backward))
