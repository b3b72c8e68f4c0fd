"""Mutant pools, kill matrices and hardening certification.

Mutants are byte-span rewrites of a base revision's source files. They stand
in for "some possible next revision": a test that passes on the base and
fails on a mutant kills it, and that kill is the evidence a hardening claim
needs.
"""

from __future__ import annotations

import hashlib
import logging
import random
import re
from collections.abc import Collection, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from hardcatch.core_model import (
    Expected,
    LedgerEntry,
    OracleLedger,
    OracleSource,
    Outcome,
    OutcomeEntry,
    OutcomeMatrix,
    TestCase,
)
from hardcatch.errors import DomainError, MaterializationError, RecordError, UnknownIdError
from hardcatch.executor import ExecutionRecord, Executor, Rewrite, RunResult

log = logging.getLogger(__name__)


class MutationOperator(str, Enum):
    RELATIONAL_SWAP = "RelationalSwap"
    ARITHMETIC_SWAP = "ArithmeticSwap"
    BOOLEAN_NEGATE = "BooleanNegate"
    CONSTANT_PERTURB = "ConstantPerturb"
    STATEMENT_DELETE = "StatementDelete"
    NULLIFY_INITIALIZER = "NullifyInitializer"

    @property
    def description(self) -> str:
        return _DESCRIPTIONS[self]


_DESCRIPTIONS = {
    MutationOperator.RELATIONAL_SWAP: "negate a comparison operator (< to >=, == to !=, ...)",
    MutationOperator.ARITHMETIC_SWAP: "swap a binary arithmetic operator (+ with -, * with /)",
    MutationOperator.BOOLEAN_NEGATE: "swap True/False and and/or",
    MutationOperator.CONSTANT_PERTURB: "add one to an integer literal",
    MutationOperator.STATEMENT_DELETE: "replace a simple statement with pass",
    MutationOperator.NULLIFY_INITIALIZER: "replace an empty-container initializer with None",
}

ALL_OPERATORS = tuple(MutationOperator)


@dataclass(frozen=True)
class Mutant:
    id: str
    base: str
    operator: MutationOperator
    file: str
    span_start: int
    span_end: int
    replacement: bytes

    def rewrite(self) -> Rewrite:
        return Rewrite(self.file, self.span_start, self.span_end, self.replacement)

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "base": self.base,
            "operator": self.operator.value,
            "file": self.file,
            "span_start": self.span_start,
            "span_end": self.span_end,
            "replacement": self.replacement.decode("utf-8"),
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> Mutant:
        return cls(
            id=rec["id"],
            base=rec["base"],
            operator=MutationOperator(rec["operator"]),
            file=rec["file"],
            span_start=int(rec["span_start"]),
            span_end=int(rec["span_end"]),
            replacement=rec["replacement"].encode("utf-8"),
        )


def load_mutants(records: Iterable[tuple[int, Mapping[str, Any]]], path: str = "<mutants>"
                 ) -> list[Mutant]:
    out = []
    for lineno, rec in records:
        try:
            out.append(Mutant.from_record(rec))
        except (KeyError, ValueError, AttributeError) as exc:
            raise RecordError(path, lineno, f"bad mutant record: {exc}") from None
    return out


def code_mask(src: bytes) -> bytearray:
    """1 for bytes that are code, 0 inside comments and string literals."""
    mask = bytearray(b"\x01" * len(src))
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c == ord("#"):
            j = src.find(b"\n", i)
            j = n if j < 0 else j
            mask[i:j] = bytes(j - i)
            i = j
        elif c in (ord("'"), ord('"')):
            quote = src[i : i + 3] if src[i : i + 3] in (b"'''", b'"""') else src[i : i + 1]
            j = i + len(quote)
            while j < n and src[j : j + len(quote)] != quote:
                if src[j] == ord("\\"):
                    j += 1
                elif len(quote) == 1 and src[j] == ord("\n"):
                    break
                j += 1
            j = min(n, j + len(quote))
            mask[i:j] = bytes(j - i)
            i = j
        else:
            i += 1
    return mask


_RELATIONAL = {b"<": b">=", b">": b"<=", b"<=": b">", b">=": b"<", b"==": b"!=", b"!=": b"=="}
_ARITHMETIC = {b"+": b"-", b"-": b"+", b"*": b"/", b"/": b"*"}
_BOOLEAN = {b"True": b"False", b"False": b"True", b"and": b"or", b"or": b"and"}

_PATTERNS: dict[MutationOperator, re.Pattern[bytes]] = {
    MutationOperator.RELATIONAL_SWAP: re.compile(rb"(?<![<>=!\-])(<=|>=|==|!=|<|>)(?![<>=])"),
    MutationOperator.ARITHMETIC_SWAP: re.compile(rb"(?<=[\w\)\]] )([+\-*/])(?= [\w\(\[])"),
    MutationOperator.BOOLEAN_NEGATE: re.compile(rb"\b(True|False|and|or)\b"),
    MutationOperator.CONSTANT_PERTURB: re.compile(rb"(?<![\w.])(\d+)(?![\w.])"),
    MutationOperator.NULLIFY_INITIALIZER: re.compile(
        rb"(?<![=!<>])=\s*(\[\]|\{\}|\(\)|\"\"|''|list\(\)|dict\(\)|set\(\))"
    ),
}

_NO_DELETE_PREFIXES = (b"def ", b"class ", b"@", b"elif", b"else", b"except", b"finally",
                       b"import ", b"from ", b"pass", b"global ", b"nonlocal ")


def _statement_sites(src: bytes, mask: bytearray) -> Iterable[tuple[int, int, bytes]]:
    offset = 0
    for line in src.splitlines(keepends=True):
        body = line.rstrip(b"\r\n")
        stripped = body.strip()
        indent = len(body) - len(body.lstrip())
        start = offset + indent
        offset += len(line)
        if indent == 0 or not stripped or not mask[start]:
            continue
        if stripped.startswith(_NO_DELETE_PREFIXES) or stripped.endswith((b":", b",", b"\\")):
            continue
        if any(stripped.count(o) != stripped.count(c) for o, c in (b"()", b"[]", b"{}")):
            continue
        yield start, start + len(stripped), b"pass"


def _sites(src: bytes, op: MutationOperator) -> list[tuple[int, int, bytes]]:
    mask = code_mask(src)
    if op is MutationOperator.STATEMENT_DELETE:
        return list(_statement_sites(src, mask))
    out = []
    for m in _PATTERNS[op].finditer(src):
        if not mask[m.start()]:
            continue
        start, end = m.span(1)
        token = m.group(1)
        if op is MutationOperator.RELATIONAL_SWAP:
            repl = _RELATIONAL[token]
        elif op is MutationOperator.ARITHMETIC_SWAP:
            repl = _ARITHMETIC[token]
        elif op is MutationOperator.BOOLEAN_NEGATE:
            repl = _BOOLEAN[token]
        elif op is MutationOperator.CONSTANT_PERTURB:
            repl = str(int(token) + 1).encode()
        else:
            repl = b"None"
        out.append((start, end, repl))
    return out


def _mutant_id(base: str, file: str, start: int, end: int, repl: bytes) -> str:
    h = hashlib.sha256(f"{base}|{file}|{start}|{end}|".encode() + repl).hexdigest()[:10]
    return f"{base}~m{h}"


def generate_mutants(
    base: str,
    sources: Mapping[str, bytes],
    operators: Collection[MutationOperator] = ALL_OPERATORS,
    budget: int = 20,
    seed: int = 0,
) -> list[Mutant]:
    """Sample up to ``budget`` distinct single-site mutants of ``sources``.

    The same inputs and seed always give the same list.
    """
    if budget < 1:
        raise DomainError("mutant budget must be >= 1")
    pool: list[Mutant] = []
    for file in sorted(sources):
        src = sources[file]
        for op in ALL_OPERATORS:
            if op not in operators:
                continue
            for start, end, repl in _sites(src, op):
                if src[start:end] == repl:
                    continue
                pool.append(Mutant(_mutant_id(base, file, start, end, repl), base, op, file,
                                   start, end, repl))
    if not pool:
        log.warning("no applicable mutation sites in %d source file(s)", len(sources))
        return []
    pool.sort(key=lambda m: (m.file, m.span_start, m.span_end, m.operator.value, m.replacement))
    if len(pool) > budget:
        picks = sorted(random.Random(seed).sample(range(len(pool)), budget))
        pool = [pool[i] for i in picks]
    return pool


class KillResult(str, Enum):
    KILLED = "Killed"
    SURVIVED = "Survived"
    NO_BUILD = "NoBuild"


@dataclass
class KillMatrix:
    test_ids: list[str]
    mutant_ids: list[str]
    entries: dict[tuple[str, str], KillResult] = field(default_factory=dict)
    excluded: dict[str, str] = field(default_factory=dict)

    def result(self, test_id: str, mutant_id: str) -> KillResult:
        try:
            return self.entries[(test_id, mutant_id)]
        except KeyError:
            raise UnknownIdError(f"no kill entry for ({test_id}, {mutant_id})") from None

    def killed_by(self, test_id: str) -> set[str]:
        return {m for (t, m), r in self.entries.items() if t == test_id and r is KillResult.KILLED}

    def killed_mutants(self) -> set[str]:
        return {m for (_, m), r in self.entries.items() if r is KillResult.KILLED}

    def to_records(self) -> list[dict[str, str]]:
        return [
            {"test": t, "mutant": m, "result": self.entries[(t, m)].value}
            for t in self.test_ids
            for m in self.mutant_ids
            if (t, m) in self.entries
        ]


def _to_kill(outcome: Outcome) -> KillResult | None:
    return {
        Outcome.FAIL: KillResult.KILLED,
        Outcome.PASS: KillResult.SURVIVED,
        Outcome.NO_BUILD: KillResult.NO_BUILD,
    }.get(outcome)


def _safe_run(executor: Executor, target: Any, test: TestCase, k: int | None) -> ExecutionRecord:
    try:
        return executor.run(target, test, k)
    except (MaterializationError, OSError) as exc:
        target_id = target if isinstance(target, str) else target.id
        return ExecutionRecord(target_id, test.id, [RunResult(False, False, 0.0, str(exc))])


def _parallel(executor: Executor, jobs: list[tuple[Any, TestCase]], k: int | None,
              workers: int | None) -> list[ExecutionRecord]:
    if not workers or workers <= 1 or len(jobs) <= 1:
        return [_safe_run(executor, t, test, k) for t, test in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda j: _safe_run(executor, j[0], j[1], k), jobs))


def kill_matrix(
    tests: Sequence[TestCase],
    mutants: Sequence[Mutant],
    executor: Executor,
    k: int = 1,
    base_k: int | None = None,
    workers: int | None = None,
) -> KillMatrix:
    """Run every test against every mutant.

    Tests that do not pass ``base_k`` out of ``base_k`` times on a mutant's
    base, or that behave nondeterministically on a mutant, are excluded and
    listed in ``excluded``.
    """
    matrix = KillMatrix([t.id for t in tests], [m.id for m in mutants])
    bases = sorted({m.base for m in mutants})
    base_jobs = [(b, t) for t in tests for b in bases]
    for (b, t), rec in zip(base_jobs, _parallel(executor, base_jobs, base_k, workers)):
        if rec.collapsed is not Outcome.PASS and t.id not in matrix.excluded:
            matrix.excluded[t.id] = f"does not pass consistently on base {b} ({rec.collapsed.value})"
    valid = [t for t in tests if t.id not in matrix.excluded]
    jobs = [(m, t) for t in valid for m in mutants]
    for (m, t), rec in zip(jobs, _parallel(executor, jobs, k, workers)):
        result = _to_kill(rec.collapsed)
        if result is None:
            matrix.excluded.setdefault(t.id, f"nondeterministic on mutant {m.id}")
            continue
        matrix.entries[(t.id, m.id)] = result
    for tid in matrix.excluded:
        for mid in matrix.mutant_ids:
            matrix.entries.pop((tid, mid), None)
    for tid, why in sorted(matrix.excluded.items()):
        log.info("excluded %s from kill matrix: %s", tid, why)
    return matrix


@dataclass
class AssuranceReport:
    candidate: str
    base: str
    buildable: bool
    valid_regression: bool
    hardening: bool
    coverage_delta: frozenset[str] = frozenset()
    unique_kills: list[str] = field(default_factory=list)
    base_outcome: Outcome | None = None
    kill: KillMatrix | None = None

    def __post_init__(self) -> None:
        if self.hardening and not (self.buildable and self.valid_regression):
            raise AssertionError("hardening certified without a valid, buildable test")

    def to_record(self) -> dict[str, Any]:
        return {
            "candidate": self.candidate,
            "base": self.base,
            "buildable": self.buildable,
            "valid_regression": self.valid_regression,
            "hardening": self.hardening,
            "coverage_delta": sorted(self.coverage_delta),
            "unique_kills": list(self.unique_kills),
            "base_outcome": None if self.base_outcome is None else self.base_outcome.value,
        }


def certify_hardening(
    tests: Mapping[str, TestCase],
    candidate: str,
    base: str,
    existing_suite: Iterable[str],
    mutants: Sequence[Mutant],
    executor: Executor,
    coverage: Mapping[str, Collection[str]] | None = None,
    k: int | None = None,
    workers: int | None = None,
) -> AssuranceReport:
    """Check the buildable, non-flaky and hardening assurances for a candidate.

    Hardening holds when the candidate kills a mutant that every (valid)
    existing-suite test leaves alive.
    """
    if not mutants:
        raise DomainError("certification needs at least one mutant")
    if candidate not in tests:
        raise UnknownIdError(f"unknown test {candidate!r}")
    suite_ids = list(dict.fromkeys(existing_suite))
    for tid in suite_ids:
        if tid not in tests:
            raise UnknownIdError(f"unknown test {tid!r}")
    k = executor.k if k is None else k
    base_rec = executor.run(base, tests[candidate], k)
    buildable = base_rec.collapsed is not Outcome.NO_BUILD
    valid = base_rec.collapsed is Outcome.PASS

    delta: frozenset[str] = frozenset()
    if coverage is not None:
        covered_by_suite = set().union(*(coverage.get(t, ()) for t in suite_ids))
        delta = frozenset(set(coverage.get(candidate, ())) - covered_by_suite)

    if not valid:
        return AssuranceReport(candidate, base, buildable, False, False, delta,
                               base_outcome=base_rec.collapsed)

    matrix_tests = [tests[candidate]] + [tests[t] for t in suite_ids if t != candidate]
    kill = kill_matrix(matrix_tests, mutants, executor, base_k=k, workers=workers)
    if candidate in kill.excluded:
        return AssuranceReport(candidate, base, buildable, False, False, delta,
                               base_outcome=base_rec.collapsed, kill=kill)
    caught_by_suite: set[str] = set()
    for tid in suite_ids:
        if tid not in kill.excluded:
            caught_by_suite |= kill.killed_by(tid)
    unique = sorted(kill.killed_by(candidate) - caught_by_suite)
    return AssuranceReport(candidate, base, buildable, valid, bool(unique), delta, unique,
                           base_rec.collapsed, kill)


def mutant_universe_data(
    base: str, mutants: Sequence[Mutant], kill: KillMatrix
) -> tuple[dict[str, str], OutcomeMatrix, OracleLedger]:
    """Parent links, outcomes and simulated ledger for classifying on a mutant pool.

    Valid tests pass on the base; killed (test, mutant) pairs are recorded as
    expected failures since mutants are buggy by construction. Survivors get
    no ledger entry.
    """
    links = {m.id: m.base for m in mutants if m.base == base}
    outcomes = OutcomeMatrix()
    ledger = OracleLedger()
    for tid in kill.test_ids:
        if tid in kill.excluded:
            continue
        outcomes.add(base, tid, OutcomeEntry(Outcome.PASS))
        for mid in links:
            res = kill.entries.get((tid, mid))
            if res is None:
                continue
            outcomes.add(mid, tid, {
                KillResult.KILLED: Outcome.FAIL,
                KillResult.SURVIVED: Outcome.PASS,
                KillResult.NO_BUILD: Outcome.NO_BUILD,
            }[res])
            if res is KillResult.KILLED:
                ledger.add(mid, tid, LedgerEntry(Expected.FAIL, OracleSource.GROUND_TRUTH))
    return links, outcomes, ledger
