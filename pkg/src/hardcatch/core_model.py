"""Revision graph, test cases, observed outcomes and the partial oracle.

Everything here is plain data plus the verdict function that combines an
observed outcome with an oracle expectation. Record-file loading lives at
the bottom of the module.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from hardcatch.errors import (
    ConflictError,
    CycleError,
    DomainError,
    InputError,
    RecordError,
    UnknownIdError,
)

log = logging.getLogger(__name__)

Pair = tuple[str, str]


class Outcome(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NO_BUILD = "no-build"
    FLAKY = "flaky"


class Expected(str, Enum):
    PASS = "pass"
    FAIL = "fail"


class OracleSource(str, Enum):
    FIXTURE = "fixture"
    HUMAN_REVIEW = "human-review"
    GROUND_TRUTH = "ground-truth-simulated"


class Provenance(str, Enum):
    HUMAN = "human"
    GENERATED = "generated"
    SYNTHETIC = "synthetic"


class Verdict(str, Enum):
    TRUE_POSITIVE = "TruePositive"
    FALSE_POSITIVE = "FalsePositive"
    TRUE_NEGATIVE = "TrueNegative"
    FALSE_NEGATIVE = "FalseNegative"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Revision:
    id: str
    parent_id: str | None
    submitted_at: int


@dataclass(frozen=True)
class ExecutableSpec:
    build_cmd: tuple[str, ...]
    run_cmd: tuple[str, ...]


@dataclass(frozen=True)
class SyntheticSpec:
    key: str


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting this class

    id: str
    created_at: int
    provenance: Provenance
    spec: ExecutableSpec | SyntheticSpec


@dataclass(frozen=True)
class OutcomeEntry:
    outcome: Outcome
    runs: int = 1
    note: str = ""

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise DomainError(f"run count must be >= 1, got {self.runs}")
        if self.outcome is Outcome.FLAKY and self.runs < 2:
            raise DomainError("a flaky outcome needs at least two runs")


@dataclass(frozen=True)
class LedgerEntry:
    expected: Expected
    source: OracleSource = OracleSource.FIXTURE


class RevisionGraph:
    """A tree (or forest) of revisions linked by ``parent_id``."""

    def __init__(self, revisions: Iterable[Revision] = ()) -> None:
        self._revisions: dict[str, Revision] = {}
        self._children: dict[str, set[str]] = {}
        for rev in revisions:
            self.add(rev)
        self.validate()

    def add(self, rev: Revision) -> None:
        if rev.id in self._revisions:
            raise ConflictError(f"duplicate revision id {rev.id!r}")
        self._revisions[rev.id] = rev
        self._children.setdefault(rev.id, set())
        if rev.parent_id is not None:
            self._children.setdefault(rev.parent_id, set()).add(rev.id)

    def validate(self) -> None:
        for rev in self._revisions.values():
            if rev.parent_id is not None and rev.parent_id not in self._revisions:
                raise UnknownIdError(
                    f"revision {rev.id!r} references unknown parent {rev.parent_id!r}"
                )
        # each node has at most one parent, so a cycle shows up as a revisit
        # while walking parent links
        done: set[str] = set()
        for start in self._revisions:
            path: list[str] = []
            seen: set[str] = set()
            node: str | None = start
            while node is not None and node not in done:
                if node in seen:
                    cycle = path[path.index(node):] + [node]
                    raise CycleError("cycle detected: " + " -> ".join(cycle))
                seen.add(node)
                path.append(node)
                node = self._revisions[node].parent_id
            done.update(seen)

    def __contains__(self, rev_id: object) -> bool:
        return rev_id in self._revisions

    def __iter__(self) -> Iterator[Revision]:
        return iter(self._revisions.values())

    def __len__(self) -> int:
        return len(self._revisions)

    def get(self, rev_id: str) -> Revision:
        try:
            return self._revisions[rev_id]
        except KeyError:
            raise UnknownIdError(f"unknown revision {rev_id!r}") from None

    def parent(self, rev_id: str) -> str | None:
        return self.get(rev_id).parent_id

    def ids(self) -> list[str]:
        return list(self._revisions)

    def roots(self) -> list[str]:
        return [r.id for r in self._revisions.values() if r.parent_id is None]


def children_of(graph: RevisionGraph, rev_id: str) -> set[str]:
    graph.get(rev_id)
    return set(graph._children.get(rev_id, ()))


class OutcomeMatrix:
    """Observed results per (revision, test); at most one entry per pair."""

    def __init__(self, entries: Mapping[Pair, OutcomeEntry] | None = None) -> None:
        self._entries: dict[Pair, OutcomeEntry] = {}
        for pair, entry in (entries or {}).items():
            self.add(pair[0], pair[1], entry)

    def add(self, rev_id: str, test_id: str, entry: OutcomeEntry | Outcome) -> None:
        if isinstance(entry, Outcome):
            entry = OutcomeEntry(entry, runs=2 if entry is Outcome.FLAKY else 1)
        if (rev_id, test_id) in self._entries:
            raise ConflictError(f"duplicate outcome for ({rev_id}, {test_id})")
        self._entries[(rev_id, test_id)] = entry

    def entry(self, rev_id: str, test_id: str) -> OutcomeEntry:
        try:
            return self._entries[(rev_id, test_id)]
        except KeyError:
            raise UnknownIdError(f"no outcome recorded for ({rev_id}, {test_id})") from None

    def get(self, rev_id: str, test_id: str) -> Outcome | None:
        e = self._entries.get((rev_id, test_id))
        return None if e is None else e.outcome

    def __getitem__(self, pair: Pair) -> Outcome:
        return self.entry(*pair).outcome

    def __contains__(self, pair: object) -> bool:
        return pair in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self) -> Iterator[tuple[Pair, OutcomeEntry]]:
        return iter(self._entries.items())

    def copy(self) -> OutcomeMatrix:
        m = OutcomeMatrix()
        m._entries = dict(self._entries)
        return m


class OracleLedger:
    """Partial map (revision, test) -> expected outcome.

    A second entry for a pair is always a conflict, even when it agrees with
    the first: adjudication happens before the ledger is loaded.
    """

    def __init__(self, entries: Mapping[Pair, LedgerEntry | Expected] | None = None) -> None:
        self._entries: dict[Pair, LedgerEntry] = {}
        for pair, entry in (entries or {}).items():
            self.add(pair[0], pair[1], entry)

    def add(
        self,
        rev_id: str,
        test_id: str,
        entry: LedgerEntry | Expected,
        source: OracleSource = OracleSource.FIXTURE,
    ) -> None:
        if isinstance(entry, Expected):
            entry = LedgerEntry(entry, source)
        if not isinstance(entry.expected, Expected):
            raise DomainError(f"ledger expectation must be pass or fail, got {entry.expected!r}")
        if (rev_id, test_id) in self._entries:
            raise ConflictError(f"conflicting ledger entry for ({rev_id}, {test_id})")
        self._entries[(rev_id, test_id)] = entry

    def get(self, rev_id: str, test_id: str) -> Expected | None:
        e = self._entries.get((rev_id, test_id))
        return None if e is None else e.expected

    def entry(self, rev_id: str, test_id: str) -> LedgerEntry | None:
        return self._entries.get((rev_id, test_id))

    def __contains__(self, pair: object) -> bool:
        return pair in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self) -> Iterator[tuple[Pair, LedgerEntry]]:
        return iter(self._entries.items())

    def copy(self) -> OracleLedger:
        led = OracleLedger()
        led._entries = dict(self._entries)
        return led


_VERDICTS = {
    (Outcome.FAIL, Expected.FAIL): Verdict.TRUE_POSITIVE,
    (Outcome.FAIL, Expected.PASS): Verdict.FALSE_POSITIVE,
    (Outcome.PASS, Expected.PASS): Verdict.TRUE_NEGATIVE,
    (Outcome.PASS, Expected.FAIL): Verdict.FALSE_NEGATIVE,
}


def verdict_of(outcome: Outcome, expected: Expected | None) -> Verdict:
    """Combine one observed outcome with one expectation."""
    if expected is None:
        return Verdict.UNKNOWN
    return _VERDICTS.get((outcome, expected), Verdict.UNKNOWN)


def verdict(outcomes: OutcomeMatrix, oracle: OracleLedger, rev_id: str, test_id: str) -> Verdict:
    observed = outcomes.entry(rev_id, test_id).outcome
    return verdict_of(observed, oracle.get(rev_id, test_id))


@dataclass
class World:
    graph: RevisionGraph
    tests: dict[str, TestCase]
    outcomes: OutcomeMatrix = field(default_factory=OutcomeMatrix)
    oracle: OracleLedger = field(default_factory=OracleLedger)
    # hypothesized children (mutants, walk revisions) that are not part of
    # the graph: id -> parent id
    extra_parents: dict[str, str] = field(default_factory=dict)

    def test(self, test_id: str) -> TestCase:
        try:
            return self.tests[test_id]
        except KeyError:
            raise UnknownIdError(f"unknown test {test_id!r}") from None

    def knows_revision(self, rev_id: str) -> bool:
        return rev_id in self.graph or rev_id in self.extra_parents

    def check_references(self) -> None:
        for label, items in (("outcome", self.outcomes.items()), ("oracle", self.oracle.items())):
            for (rev_id, test_id), _ in items:
                if not self.knows_revision(rev_id):
                    raise UnknownIdError(f"{label} entry references unknown revision {rev_id!r}")
                if test_id not in self.tests:
                    raise UnknownIdError(f"{label} entry references unknown test {test_id!r}")


# -- record files ----------------------------------------------------------

REVISION_FIELDS = {"id": True, "parent": False, "submitted_at": True}
TEST_FIELDS = {"id": True, "created_at": True, "provenance": True, "spec": True}
OUTCOME_FIELDS = {"revision": True, "test": True, "outcome": True, "runs": False}
ORACLE_FIELDS = {"revision": True, "test": True, "expected": True, "source": False}


def iter_records(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield ``(line_number, record)`` for every non-blank line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(str(path), lineno, f"malformed JSON: {exc.msg}") from None
        if not isinstance(record, dict):
            raise RecordError(str(path), lineno, "record must be a JSON object")
        yield lineno, record


def write_records(path: str | Path, records: Iterable[Mapping[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dump_record(rec) + "\n")


def dump_record(rec: Mapping[str, Any]) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def _check_fields(
    rec: dict[str, Any], schema: dict[str, bool], path: str, lineno: int, strict: bool
) -> None:
    missing = [k for k, required in schema.items() if required and k not in rec]
    if missing:
        raise RecordError(path, lineno, f"missing field(s): {', '.join(missing)}")
    unknown = sorted(set(rec) - set(schema))
    if unknown:
        if strict:
            raise RecordError(path, lineno, f"unknown field(s): {', '.join(unknown)}")
        log.warning("%s:%d: ignoring unknown field(s): %s", path, lineno, ", ".join(unknown))


def _int(value: Any, what: str, path: str, lineno: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise RecordError(path, lineno, f"{what} must be an integer")
    return value


def _enum(cls: type[Enum], value: Any, what: str, path: str, lineno: int) -> Any:
    try:
        return cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise RecordError(path, lineno, f"{what} {value!r} not one of: {allowed}") from None


def parse_spec(spec: Any, path: str = "<spec>", lineno: int = 0) -> ExecutableSpec | SyntheticSpec:
    if not isinstance(spec, dict):
        raise RecordError(path, lineno, "spec must be an object")
    has_exec = "build_cmd" in spec or "run_cmd" in spec
    has_synth = "synthetic" in spec
    if has_exec == has_synth:
        raise RecordError(path, lineno, "spec needs exactly one of build_cmd/run_cmd or synthetic")
    if has_synth:
        if not isinstance(spec["synthetic"], str):
            raise RecordError(path, lineno, "synthetic reference must be a string")
        return SyntheticSpec(spec["synthetic"])
    cmds = []
    for key in ("build_cmd", "run_cmd"):
        argv = spec.get(key)
        if not isinstance(argv, list) or not all(isinstance(a, str) for a in argv):
            raise RecordError(path, lineno, f"{key} must be a list of strings")
        cmds.append(tuple(argv))
    return ExecutableSpec(cmds[0], cmds[1])


def revision_record(rev: Revision) -> dict[str, Any]:
    return {"id": rev.id, "parent": rev.parent_id, "submitted_at": rev.submitted_at}


def test_record(t: TestCase) -> dict[str, Any]:
    if isinstance(t.spec, SyntheticSpec):
        spec: dict[str, Any] = {"synthetic": t.spec.key}
    else:
        spec = {"build_cmd": list(t.spec.build_cmd), "run_cmd": list(t.spec.run_cmd)}
    return {"id": t.id, "created_at": t.created_at, "provenance": t.provenance.value, "spec": spec}


test_record.__test__ = False  # type: ignore[attr-defined]


def outcome_record(rev_id: str, test_id: str, entry: OutcomeEntry) -> dict[str, Any]:
    return {"revision": rev_id, "test": test_id, "outcome": entry.outcome.value, "runs": entry.runs}


def oracle_record(rev_id: str, test_id: str, entry: LedgerEntry) -> dict[str, Any]:
    return {
        "revision": rev_id,
        "test": test_id,
        "expected": entry.expected.value,
        "source": entry.source.value,
    }


def load_revisions(path: str | Path, strict: bool = False) -> RevisionGraph:
    revs = []
    seen: dict[str, int] = {}
    for lineno, rec in iter_records(path):
        _check_fields(rec, REVISION_FIELDS, str(path), lineno, strict)
        rid = rec["id"]
        if not isinstance(rid, str):
            raise RecordError(str(path), lineno, "id must be a string")
        if rid in seen:
            raise RecordError(str(path), lineno, f"duplicate revision {rid!r} (first on line {seen[rid]})")
        seen[rid] = lineno
        parent = rec.get("parent")
        if parent is not None and not isinstance(parent, str):
            raise RecordError(str(path), lineno, "parent must be a string or null")
        revs.append(Revision(rid, parent, _int(rec["submitted_at"], "submitted_at", str(path), lineno)))
    return RevisionGraph(revs)


def load_tests(path: str | Path, strict: bool = False) -> dict[str, TestCase]:
    tests: dict[str, TestCase] = {}
    for lineno, rec in iter_records(path):
        _check_fields(rec, TEST_FIELDS, str(path), lineno, strict)
        tid = rec["id"]
        if not isinstance(tid, str):
            raise RecordError(str(path), lineno, "id must be a string")
        if tid in tests:
            raise RecordError(str(path), lineno, f"duplicate test {tid!r}")
        tests[tid] = TestCase(
            tid,
            _int(rec["created_at"], "created_at", str(path), lineno),
            _enum(Provenance, rec["provenance"], "provenance", str(path), lineno),
            parse_spec(rec["spec"], str(path), lineno),
        )
    return tests


def load_outcomes(path: str | Path, strict: bool = False) -> OutcomeMatrix:
    matrix = OutcomeMatrix()
    for lineno, rec in iter_records(path):
        _check_fields(rec, OUTCOME_FIELDS, str(path), lineno, strict)
        runs = _int(rec.get("runs", 1), "runs", str(path), lineno)
        raw = rec["outcome"]
        note = ""
        if raw == "timeout":
            # timeouts keep the two-outcome model: a failing run with a note
            raw, note = Outcome.FAIL.value, "timeout"
        outcome = _enum(Outcome, raw, "outcome", str(path), lineno)
        try:
            matrix.add(rec["revision"], rec["test"], OutcomeEntry(outcome, runs, note))
        except DomainError as exc:
            raise RecordError(str(path), lineno, str(exc)) from None
        except ConflictError as exc:
            raise ConflictError(f"{path}:{lineno}: {exc}") from None
    return matrix


def load_oracle(path: str | Path, strict: bool = False) -> OracleLedger:
    ledger = OracleLedger()
    for lineno, rec in iter_records(path):
        _check_fields(rec, ORACLE_FIELDS, str(path), lineno, strict)
        expected = _enum(Expected, rec["expected"], "expected", str(path), lineno)
        source = _enum(OracleSource, rec.get("source", "fixture"), "source", str(path), lineno)
        try:
            ledger.add(rec["revision"], rec["test"], LedgerEntry(expected, source))
        except ConflictError as exc:
            raise ConflictError(f"{path}:{lineno}: {exc}") from None
    return ledger


def load_world(
    revisions: str | Path,
    tests: str | Path,
    outcomes: str | Path | None = None,
    oracle: str | Path | None = None,
    *,
    strict: bool = False,
    extra_parents: Mapping[str, str] | None = None,
) -> World:
    """Load and cross-check the four record files."""
    world = World(
        graph=load_revisions(revisions, strict),
        tests=load_tests(tests, strict),
        outcomes=load_outcomes(outcomes, strict) if outcomes else OutcomeMatrix(),
        oracle=load_oracle(oracle, strict) if oracle else OracleLedger(),
        extra_parents=dict(extra_parents or {}),
    )
    for child, parent in world.extra_parents.items():
        if parent not in world.graph and parent not in world.extra_parents:
            raise UnknownIdError(f"candidate {child!r} references unknown parent {parent!r}")
    world.check_references()
    return world


def load_world_dir(directory: str | Path, *, strict: bool = False, **kw: Any) -> World:
    d = Path(directory)
    outcomes = d / "outcomes.jsonl"
    oracle = d / "oracle.jsonl"
    return load_world(
        d / "revisions.jsonl",
        d / "tests.jsonl",
        outcomes if outcomes.exists() else None,
        oracle if oracle.exists() else None,
        strict=strict,
        **kw,
    )


def save_world(world: World, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_records(d / "revisions.jsonl", (revision_record(r) for r in world.graph))
    write_records(d / "tests.jsonl", (test_record(t) for t in world.tests.values()))
    write_records(
        d / "outcomes.jsonl",
        (outcome_record(r, t, e) for (r, t), e in sorted(world.outcomes.items())),
    )
    write_records(
        d / "oracle.jsonl",
        (oracle_record(r, t, e) for (r, t), e in sorted(world.oracle.items())),
    )
