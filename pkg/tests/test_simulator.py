from __future__ import annotations

import pytest

from conftest import FIXTURES
from hardcatch.core_model import (
    Expected,
    LedgerEntry,
    OracleLedger,
    OracleSource,
    Outcome,
    OutcomeMatrix,
    Provenance,
    Revision,
    RevisionGraph,
    SyntheticSpec,
    TestCase,
    Verdict,
    World,
    iter_records,
    load_tests,
)
from hardcatch.errors import DomainError, InvariantViolation
from hardcatch.executor import CommandExecutor, TreeStore
from hardcatch.policy import JITTEST_ROWS, DecisionKind, Severity
from hardcatch.simulator import (
    Candidate,
    Disposition,
    ScenarioConfig,
    SimWorld,
    Unit,
    gen_world,
    latent_walk,
    run_policy_experiment,
    simulate,
)

WALK = FIXTURES / "walk"


def test_clean_world_only_lands_or_signals():
    trace = simulate(ScenarioConfig(revision_count=60, bug_injection_rate=0.0,
                                    false_alarm_rate=0.0, seed=4))
    assert {d.decision for d in trace.decisions} <= {DecisionKind.LAND_TEST, DecisionKind.GIVE_SIGNAL}
    assert all(d.consequence.severity is not Severity.RED for d in trace.decisions)


def test_perfect_detection_reports_every_bug():
    trace = simulate(ScenarioConfig(revision_count=60, bug_injection_rate=1.0,
                                    test_detection_rate=1.0, false_alarm_rate=0.0, seed=2))
    assert trace.events and all(e.verdict is Verdict.TRUE_POSITIVE for e in trace.events)
    assert trace.metrics.precision == 1.0


def test_ground_truth_is_total():
    sim = gen_world(ScenarioConfig(revision_count=80, seed=9, latent_bug_rate=0.2))
    for (r, t), _ in sim.world.outcomes.items():
        assert sim.world.oracle.get(r, t) is not None
    for c in sim.candidates:
        assert sim.world.tests[c.test].created_at == sim.world.graph.get(c.revision).submitted_at


def test_samples_do_not_depend_on_world_size():
    small = gen_world(ScenarioConfig(revision_count=30, seed=5))
    large = gen_world(ScenarioConfig(revision_count=90, seed=5))
    assert all(large.bugs[r] == b for r, b in small.bugs.items())
    assert set(small.candidates) <= set(large.candidates)


def test_every_decision_has_a_consequence_row():
    texts = {r.text for r in JITTEST_ROWS}
    trace = simulate(ScenarioConfig(revision_count=120, seed=3, latent_bug_rate=0.3,
                                    no_build_rate=0.1))
    for d in trace.decisions:
        assert d.consequence.row_text in texts or d.consequence.extension


def test_consequence_sweep_reaches_every_row():
    hit: set[str] = set()
    for seed in range(3):
        cfg = ScenarioConfig(revision_count=300, seed=seed, bug_injection_rate=0.5,
                             test_detection_rate=0.5, false_alarm_rate=0.4,
                             latent_bug_rate=0.5, no_build_rate=0.2)
        hit |= {d.consequence.row_text for d in simulate(cfg).decisions}
    assert {r.text for r in JITTEST_ROWS} <= hit


def test_late_candidates_are_dropped():
    cfg = ScenarioConfig(revision_count=20, latency_lo=30000, latency_hi=40000)
    sim = gen_world(cfg)
    assert not sim.candidates and len(sim.late) == 19


def test_config_from_record():
    cfg = ScenarioConfig.from_record({"revision_count": 5,
                                      "generator_latency_distribution": {"lo": 1, "hi": 2}})
    assert (cfg.revision_count, cfg.latency_lo, cfg.latency_hi) == (5, 1, 2)
    with pytest.raises(DomainError):
        ScenarioConfig.from_record({"bogus": 1}, strict=True)
    with pytest.raises(DomainError):
        ScenarioConfig(bug_injection_rate=1.5)


def hand_world():
    """r0 with two children. r1 is clean; r2 has a bug the test misses."""
    graph = RevisionGraph([Revision("r0", None, 0), Revision("r1", "r0", 3600),
                           Revision("r2", "r0", 7200)])
    tests, outcomes, ledger = {}, OutcomeMatrix(), OracleLedger()
    for rev, buggy in (("r1", False), ("r2", True)):
        tid = f"t-{rev}"
        tests[tid] = TestCase(tid, graph.get(rev).submitted_at, Provenance.GENERATED, SyntheticSpec(tid))
        outcomes.add("r0", tid, Outcome.PASS)
        outcomes.add(rev, tid, Outcome.PASS)
        ledger.add("r0", tid, LedgerEntry(Expected.PASS, OracleSource.GROUND_TRUTH))
        ledger.add(rev, tid, LedgerEntry(Expected.FAIL if buggy else Expected.PASS,
                                         OracleSource.GROUND_TRUTH))
    cands = [Candidate("t-r1", "r1", "r0", 60.0, 0.4), Candidate("t-r2", "r2", "r0", 60.0, 0.4)]
    return SimWorld(ScenarioConfig(revision_count=3), World(graph, tests, outcomes, ledger),
                    {"r0": False, "r1": False, "r2": True}, cands)


def test_review_gate_changes_landed_set():
    sim = hand_world()
    gated = run_policy_experiment(sim, enable_review_gate=True)
    open_ = run_policy_experiment(sim, enable_review_gate=False)
    assert [d.test for d in gated.landed()] == ["t-r1"]
    assert [d.test for d in open_.landed()] == ["t-r1", "t-r2"]
    assert gated.summary()["landed_expected_fail"] == 0
    assert open_.summary()["landed_expected_fail"] == 1
    assert gated.landed()[0].landed_region == "StrongHardeningOnly"


def test_careless_reviewer_lands_the_wrong_test():
    sim = hand_world()
    sim.config = ScenarioConfig(revision_count=3, reviewer_error_rate=1.0)
    assert [d.test for d in run_policy_experiment(sim).landed()] == ["t-r2"]


# -- latent walk ---------------------------------------------------------------


@pytest.fixture
def walk_setup():
    store = TreeStore.from_directory(WALK / "trees")
    tests = load_tests(WALK / "world" / "tests.jsonl")
    units = [Unit.from_record(r) for _, r in iter_records(WALK / "world" / "units.jsonl")]
    return store, tests, units, CommandExecutor(store, FIXTURES, k=2, timeout=30)


def test_walk_finds_only_the_seeded_bug(walk_setup):
    store, tests, units, ex = walk_setup
    findings = latent_walk(store, "base", units, ex, tests)
    got = {f.unit: f.disposition for f in findings}
    assert got == {"mathutil.window_sum": Disposition.LATENT_BUG_CANDIDATE,
                   "mathutil.clamp": Disposition.NO_SIGNAL,
                   "mathutil.mean": Disposition.NO_SIGNAL}
    assert "no candidate tests" in {f.unit: f for f in findings}["mathutil.mean"].diagnostics


def test_walk_without_oracle_is_only_suspect(walk_setup):
    store, tests, units, ex = walk_setup
    bare = Unit(units[0].unit, units[0].file, units[0].span_start, units[0].span_end,
                units[0].tests)
    [finding] = latent_walk(store, "base", [bare], ex, tests)
    assert finding.disposition is Disposition.FALSE_POSITIVE_SUSPECT


def test_walk_skips_bad_span(walk_setup):
    store, tests, _, ex = walk_setup
    [finding] = latent_walk(store, "base", [Unit("ghost", "mathutil.py", 10, 10**6)], ex, tests)
    assert finding.disposition is Disposition.NO_SIGNAL
    assert finding.diagnostics[0].startswith("skipped")


class TamperingStore(TreeStore):
    def files(self, rev_id):
        files = super().files(rev_id)
        if "~ins-" in rev_id:
            files = {k: v + b"\n" for k, v in files.items()}
        return files


def test_walk_rejects_non_neutral_reinsertion(walk_setup):
    _, tests, units, ex = walk_setup
    store = TamperingStore.from_directory(WALK / "trees")
    with pytest.raises(InvariantViolation):
        latent_walk(store, "base", units[:1], ex, tests)


def test_walk_needs_tests_or_generator(walk_setup):
    store, _, units, ex = walk_setup
    with pytest.raises(DomainError):
        latent_walk(store, "base", units, ex)
