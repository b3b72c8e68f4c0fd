"""Synthetic revision worlds with ground truth, and the latent-bug walk.

``gen_world`` samples a revision tree, bug flags and one candidate JiTTest per
non-root revision. ``run_policy_experiment`` pushes every candidate through
the decision table, the consequence table and (optionally) the review gate,
then measures what landed. Everything is a pure function of the config.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from hardcatch.classifier import (
    CatchingStatus,
    Universe,
    classify,
    functionality_catching_status,
    hardening_status,
    region_for,
)
from hardcatch.core_model import (
    Expected,
    LedgerEntry,
    OracleLedger,
    OracleSource,
    Outcome,
    OutcomeEntry,
    OutcomeMatrix,
    Provenance,
    Revision,
    RevisionGraph,
    SyntheticSpec,
    TestCase,
    World,
    oracle_record,
    outcome_record,
    revision_record,
    test_record,
    verdict_of,
    write_records,
)
from hardcatch.errors import DomainError, InvariantViolation, MaterializationError
from hardcatch.executor import Executor, Rewrite, TreeStore, stable_seed
from hardcatch.metrics import MetricsReport, Reaction, SignalEvent, build_report
from hardcatch.policy import (
    BudgetConfig,
    ConsequenceLabel,
    DecisionKind,
    PullRequestGenerator,
    ReviewVerdict,
    annotate_jittest_outcome,
    decide_jittest,
    review_gate,
    within_budget,
)

log = logging.getLogger(__name__)

SECONDS_PER_REVISION = 3600


@dataclass(frozen=True)
class ScenarioConfig:
    revision_count: int = 200
    branching_factor: int = 2
    bug_injection_rate: float = 0.3
    test_detection_rate: float = 0.7
    false_alarm_rate: float = 0.05
    latency_lo: float = 60.0
    latency_hi: float = 3600.0
    seed: int = 0
    # beyond the basic knobs: a bug already present in the parent, a
    # test that does not build, and an engineer who sometimes answers wrong
    latent_bug_rate: float = 0.0
    no_build_rate: float = 0.0
    reviewer_error_rate: float = 0.0
    candidates_per_revision: int = 1
    review_budget_seconds: int = BudgetConfig().review_budget_seconds

    def __post_init__(self) -> None:
        if self.revision_count < 1:
            raise DomainError("revision_count must be positive")
        if self.branching_factor < 1:
            raise DomainError("branching_factor must be positive")
        if self.candidates_per_revision < 1:
            raise DomainError("candidates_per_revision must be positive")
        for name in ("bug_injection_rate", "test_detection_rate", "false_alarm_rate",
                     "latent_bug_rate", "no_build_rate", "reviewer_error_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 <= self.latency_lo <= self.latency_hi:
            raise DomainError("latency bounds must satisfy 0 <= lo <= hi")

    @classmethod
    def from_record(cls, rec: Mapping[str, Any], strict: bool = False) -> ScenarioConfig:
        rec = dict(rec)
        latency = rec.pop("generator_latency_distribution", None)
        if latency is not None:
            rec["latency_lo"], rec["latency_hi"] = latency["lo"], latency["hi"]
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(rec) - known)
        if unknown:
            if strict:
                raise DomainError(f"unknown config fields: {', '.join(unknown)}")
            log.warning("ignoring unknown config fields: %s", ", ".join(unknown))
        return cls(**{k: v for k, v in rec.items() if k in known})

    def to_record(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Candidate:
    test: str
    revision: str
    parent: str
    latency: float
    score: float


@dataclass
class SimWorld:
    config: ScenarioConfig
    world: World
    bugs: dict[str, bool]
    candidates: list[Candidate]
    late: list[str] = field(default_factory=list)


def _rev_id(i: int) -> str:
    return f"r{i:05d}"


def _sample_outcome(rng: random.Random, cfg: ScenarioConfig, expected: Expected) -> Outcome:
    if rng.random() < cfg.no_build_rate:
        return Outcome.NO_BUILD
    fail_p = cfg.test_detection_rate if expected is Expected.FAIL else cfg.false_alarm_rate
    return Outcome.FAIL if rng.random() < fail_p else Outcome.PASS


def gen_world(cfg: ScenarioConfig) -> SimWorld:
    graph = RevisionGraph()
    for i in range(cfg.revision_count):
        parent = None if i == 0 else _rev_id((i - 1) // cfg.branching_factor)
        graph.add(Revision(_rev_id(i), parent, i * SECONDS_PER_REVISION))
    budget = BudgetConfig(cfg.review_budget_seconds)
    bugs: dict[str, bool] = {}
    tests: dict[str, TestCase] = {}
    outcomes = OutcomeMatrix()
    ledger = OracleLedger()
    candidates: list[Candidate] = []
    late: list[str] = []
    for rev in graph:
        # one generator per revision keeps samples independent of visit order
        rng = random.Random(stable_seed(cfg.seed, rev.id))
        bugs[rev.id] = rng.random() < cfg.bug_injection_rate
        if rev.parent_id is None:
            continue
        for c in range(cfg.candidates_per_revision):
            tid = f"t-{rev.id}" if cfg.candidates_per_revision == 1 else f"t-{rev.id}-{c}"
            latency = rng.uniform(cfg.latency_lo, cfg.latency_hi)
            e_child = Expected.FAIL if bugs[rev.id] else Expected.PASS
            e_parent = Expected.FAIL if rng.random() < cfg.latent_bug_rate else Expected.PASS
            o_parent = _sample_outcome(rng, cfg, e_parent)
            o_child = _sample_outcome(rng, cfg, e_child)
            mean = 0.7 if e_child is Expected.FAIL else 0.4
            score = round(min(1.0, max(0.0, rng.gauss(mean, 0.2))), 6)
            if not within_budget(int(rev.submitted_at + latency), rev.submitted_at, budget):
                late.append(tid)
                continue
            tests[tid] = TestCase(tid, rev.submitted_at, Provenance.GENERATED, SyntheticSpec(tid))
            outcomes.add(rev.parent_id, tid, o_parent)
            outcomes.add(rev.id, tid, o_child)
            ledger.add(rev.parent_id, tid, LedgerEntry(e_parent, OracleSource.GROUND_TRUTH))
            ledger.add(rev.id, tid, LedgerEntry(e_child, OracleSource.GROUND_TRUTH))
            candidates.append(Candidate(tid, rev.id, rev.parent_id, round(latency, 3), score))
    world = World(graph, tests, outcomes, ledger)
    return SimWorld(cfg, world, bugs, candidates, late)


@dataclass
class DecisionRecord:
    test: str
    revision: str
    parent: str
    parent_outcome: Outcome
    child_outcome: Outcome
    decision: DecisionKind
    category: int
    rationale: str
    consequence: ConsequenceLabel
    review: ReviewVerdict | None = None
    landed: bool = False
    landed_region: str | None = None

    def to_record(self) -> dict[str, Any]:
        return {
            "test": self.test,
            "revision": self.revision,
            "parent": self.parent,
            "parent_outcome": self.parent_outcome.value,
            "child_outcome": self.child_outcome.value,
            "decision": self.decision.value,
            "category": self.category,
            "rationale": self.rationale,
            "review": None if self.review is None else self.review.value,
            "landed": self.landed,
            "landed_region": self.landed_region,
        }


@dataclass
class WorldTrace:
    sim: SimWorld
    review_gate_enabled: bool
    decisions: list[DecisionRecord]
    metrics: MetricsReport
    events: list[SignalEvent]
    region_counts: dict[str, int]
    landed_composition: dict[str, int]

    @property
    def world(self) -> World:
        return self.sim.world

    def landed(self) -> list[DecisionRecord]:
        return [d for d in self.decisions if d.landed]

    def summary(self) -> dict[str, Any]:
        decisions = Counter(d.decision.value for d in self.decisions)
        severities = Counter(d.consequence.severity.value for d in self.decisions)
        landed = self.landed()
        bad = sum(
            self.world.oracle.get(d.revision, d.test) is Expected.FAIL for d in landed
        )
        return {
            "config": self.sim.config.to_record(),
            "review_gate": self.review_gate_enabled,
            "revisions": len(self.world.graph),
            "buggy_revisions": sum(self.sim.bugs.values()),
            "candidates": len(self.sim.candidates),
            "late_candidates": len(self.sim.late),
            "decisions": dict(sorted(decisions.items())),
            "severities": dict(sorted(severities.items())),
            "landed": len(landed),
            "landed_expected_fail": bad,
            "landed_composition": dict(sorted(self.landed_composition.items())),
            "regions": dict(sorted(self.region_counts.items())),
        }


def _review_universe(world: World, c: Candidate) -> tuple[Universe, str]:
    """What the engineer sees at review: a passing test, one failing mutant
    child, and no recorded verdict for the revision itself."""
    mutant = f"{c.revision}~m"
    outcomes = OutcomeMatrix({
        (c.revision, c.test): world.outcomes.entry(c.revision, c.test),
        (mutant, c.test): OutcomeEntry(Outcome.FAIL),
    })
    ledger = OracleLedger({(mutant, c.test): LedgerEntry(Expected.FAIL, OracleSource.GROUND_TRUTH)})
    u = Universe({c.parent: None, c.revision: c.parent, mutant: c.revision}, outcomes, ledger)
    return u, mutant


def _engineer(world: World, c: Candidate, rng: random.Random, error_rate: float) -> ReviewVerdict:
    right = world.oracle.get(c.revision, c.test) is Expected.PASS
    if rng.random() < error_rate:
        right = not right
    return ReviewVerdict.ACCEPT_PASS if right else ReviewVerdict.REJECT


def _landed_region(world: World, c: Candidate) -> str:
    """Region of a landed test relative to its ground truth, with a buggy
    child standing in for the future."""
    u, _ = _review_universe(world, c)
    u = u.with_ledger(u.ledger.copy())
    u.ledger.add(c.revision, c.test, world.oracle.entry(c.revision, c.test))
    status = hardening_status(u, c.revision, c.test)
    return region_for(status, CatchingStatus.NOT_CATCHING)[0].value


def run_policy_experiment(sim: SimWorld, enable_review_gate: bool = True,
                          thresholds: Sequence[float] = (0.5, 0.8, 0.9)) -> WorldTrace:
    world = sim.world
    cfg = sim.config
    truth = Universe.from_world(world)
    decisions: list[DecisionRecord] = []
    events: list[SignalEvent] = []
    regions: Counter[str] = Counter()
    composition: Counter[str] = Counter()
    for c in sorted(sim.candidates, key=lambda c: (c.revision, c.test)):
        rng = random.Random(stable_seed(cfg.seed, "review", c.test))
        o_parent = world.outcomes[(c.parent, c.test)]
        o_child = world.outcomes[(c.revision, c.test)]
        e_parent = world.oracle.get(c.parent, c.test)
        e_child = world.oracle.get(c.revision, c.test)
        decision = decide_jittest(o_parent, o_child)
        label = annotate_jittest_outcome(o_parent, o_child, e_parent, e_child)
        rec = DecisionRecord(c.test, c.revision, c.parent, o_parent, o_child, decision.kind,
                             decision.category, decision.rationale, label)
        if decision.kind is DecisionKind.LAND_TEST:
            if enable_review_gate:
                u, _ = _review_universe(world, c)
                rec.review = _engineer(world, c, rng, cfg.reviewer_error_rate)
                rec.landed = review_gate(u, c.revision, c.test, rec.review).landed
            else:
                rec.landed = True
            if rec.landed:
                rec.landed_region = _landed_region(world, c)
                composition[rec.landed_region] += 1
        regions[classify(truth, c.revision, c.test).region.value] += 1

        reaction = None
        if o_child is Outcome.FAIL:
            accepted = e_child is Expected.FAIL
            if rng.random() < cfg.reviewer_error_rate:
                accepted = not accepted
            reaction = Reaction.ACCEPTED if accepted else Reaction.REJECTED
        score = c.score if o_child is Outcome.FAIL else 0.0
        events.append(SignalEvent(c.test, c.revision, verdict_of(o_child, e_child), score, reaction))
        decisions.append(rec)

    report_fail = [e for e, d in zip(events, decisions) if d.decision is DecisionKind.REPORT_FAIL]
    metrics = build_report(events, thresholds)
    # realized precision is over the signals actually reported
    metrics.precision = build_report(report_fail, ()).precision
    return WorldTrace(sim, enable_review_gate, decisions, metrics, events, dict(regions),
                      dict(composition))


def simulate(cfg: ScenarioConfig, enable_review_gate: bool = True) -> WorldTrace:
    return run_policy_experiment(gen_world(cfg), enable_review_gate)


def _json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_trace(trace: WorldTrace, out: str | Path) -> Path:
    """Write the trace as record files; identical traces give identical bytes."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    world = trace.world
    write_records(out / "revisions.jsonl", (revision_record(r) for r in world.graph))
    write_records(out / "tests.jsonl", (test_record(world.tests[t]) for t in sorted(world.tests)))
    write_records(out / "outcomes.jsonl", (
        outcome_record(r, t, e) for (r, t), e in sorted(world.outcomes.items())
    ))
    write_records(out / "oracle.jsonl", (
        oracle_record(r, t, e) for (r, t), e in sorted(world.oracle.items())
    ))
    write_records(out / "bugs.jsonl", (
        {"revision": r, "buggy": b} for r, b in sorted(trace.sim.bugs.items())
    ))
    write_records(out / "decisions.jsonl", (d.to_record() for d in trace.decisions))
    write_records(out / "consequences.jsonl", (
        {"test": d.test, "revision": d.revision, **d.consequence.to_record()}
        for d in trace.decisions
    ))
    (out / "metrics.json").write_text(_json(trace.metrics.to_record()), encoding="utf-8")
    (out / "summary.json").write_text(_json(trace.summary()), encoding="utf-8")
    return out


# -- latent-bug walk ---------------------------------------------------------


class Disposition(str, Enum):
    LATENT_BUG_CANDIDATE = "latent-bug-candidate"
    NO_SIGNAL = "no-signal"
    FALSE_POSITIVE_SUSPECT = "false-positive-suspect"


@dataclass(frozen=True)
class Unit:
    unit: str
    file: str
    span_start: int
    span_end: int
    tests: tuple[str, ...] = ()
    # expected outcome of each test on the reinsert revision
    expected: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> Unit:
        return cls(rec["unit"], rec["file"], int(rec["span_start"]), int(rec["span_end"]),
                   tuple(rec.get("tests", ())), dict(rec.get("expected", {})))


@dataclass
class TestFinding:
    test: str
    delete_outcome: Outcome | None
    reinsert_outcome: Outcome | None
    status: CatchingStatus | None
    note: str = ""

    __test__ = False

    def to_record(self) -> dict[str, Any]:
        return {
            "test": self.test,
            "delete_outcome": None if self.delete_outcome is None else self.delete_outcome.value,
            "reinsert_outcome": (
                None if self.reinsert_outcome is None else self.reinsert_outcome.value
            ),
            "status": None if self.status is None else self.status.value,
            "note": self.note,
        }


@dataclass
class LatentWalkFinding:
    unit: str
    delete_revision: str
    reinsert_revision: str
    tests: list[TestFinding]
    disposition: Disposition
    diagnostics: list[str] = field(default_factory=list)

    def to_record(self) -> dict[str, Any]:
        return {
            "unit": self.unit,
            "delete_revision": self.delete_revision,
            "reinsert_revision": self.reinsert_revision,
            "tests": [t.to_record() for t in self.tests],
            "disposition": self.disposition.value,
            "diagnostics": list(self.diagnostics),
        }


def _disposition(statuses: Iterable[CatchingStatus | None]) -> Disposition:
    statuses = list(statuses)
    if CatchingStatus.STRONG in statuses:
        return Disposition.LATENT_BUG_CANDIDATE
    if any(s in (CatchingStatus.WEAK_ONLY, CatchingStatus.WEAK_UNKNOWN_STRENGTH) for s in statuses):
        return Disposition.FALSE_POSITIVE_SUSPECT
    return Disposition.NO_SIGNAL


def latent_walk(
    store: TreeStore,
    base: str,
    units: Sequence[Unit],
    executor: Executor,
    tests: Mapping[str, TestCase] | None = None,
    generator: PullRequestGenerator | None = None,
    budget: BudgetConfig = BudgetConfig(),
    k: int | None = None,
) -> list[LatentWalkFinding]:
    """Delete each unit, reinsert it as a new change, and look for tests that
    catch a bug in the reinserted code.

    Candidate tests come from ``generator`` when given, else from the unit's
    listed ids looked up in ``tests``.
    """
    if generator is None and tests is None:
        raise DomainError("latent walk needs a test set or a generator")
    base_files = store.files(base)
    findings = []
    for n, unit in enumerate(units):
        d_id, i_id = f"{base}~del-{n}", f"{base}~ins-{n}"
        diags: list[str] = []
        try:
            if unit.file not in base_files or not (
                0 <= unit.span_start < unit.span_end <= len(base_files[unit.file])
            ):
                raise MaterializationError(f"span {unit.span_start}:{unit.span_end} not in {unit.file}")
            original = base_files[unit.file][unit.span_start:unit.span_end]
            store.derive(d_id, base, [Rewrite(unit.file, unit.span_start, unit.span_end, b"")])
            store.derive(i_id, d_id, [Rewrite(unit.file, unit.span_start, unit.span_start, original)])
            reinserted = store.files(i_id)
        except MaterializationError as exc:
            log.warning("skipping unit %s: %s", unit.unit, exc)
            findings.append(LatentWalkFinding(unit.unit, d_id, i_id, [], Disposition.NO_SIGNAL,
                                              [f"skipped: {exc}"]))
            continue
        if reinserted != base_files:
            raise InvariantViolation(f"reinserted tree for unit {unit.unit} differs from {base}")

        if generator is not None:
            parent_rev = Revision(d_id, base, 0)
            child_rev = Revision(i_id, d_id, 0)
            candidates = generator.generate(parent_rev, child_rev, budget)
        else:
            assert tests is not None
            candidates = [tests[t] for t in unit.tests]

        outcomes = OutcomeMatrix()
        ledger = OracleLedger()
        for t in candidates:
            for rev in (d_id, i_id):
                rec = executor.run(rev, t, k)
                outcomes.add(rev, t.id, OutcomeEntry(rec.collapsed, len(rec.runs)))
            if t.id in unit.expected:
                ledger.add(i_id, t.id, LedgerEntry(Expected(unit.expected[t.id]),
                                                   OracleSource.FIXTURE))
        u = Universe({base: None, d_id: base, i_id: d_id}, outcomes, ledger)
        results = []
        for t in candidates:
            note = ""
            try:
                status: CatchingStatus | None = functionality_catching_status(u, i_id, t.id, diags)
            except DomainError as exc:
                status, note = None, str(exc)
            results.append(TestFinding(t.id, outcomes.get(d_id, t.id), outcomes.get(i_id, t.id),
                                       status, note))
        if not candidates:
            diags.append("no candidate tests")
        findings.append(LatentWalkFinding(unit.unit, d_id, i_id, results,
                                          _disposition(r.status for r in results), sorted(set(diags))))
    return findings


def trace_bytes(out: str | Path) -> dict[str, bytes]:
    """All files of a trace directory, for byte-level comparison."""
    root = Path(out)
    return {p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.is_file()}

