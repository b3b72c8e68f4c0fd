"""Materialize revision trees and run tests against them.

Two backends share one interface:

``CommandExecutor``
    copies the revision's files into a fresh workspace, runs the test's build
    command once and its run command ``k`` times.
``SyntheticExecutor``
    looks outcomes up in a scripted table; flaky scripts are sampled from a
    random source seeded per (revision, test), so results never depend on
    call order.
"""

from __future__ import annotations

import hashlib
import os
import random
import subprocess
import sys
import tempfile
import time
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from hardcatch.core_model import ExecutableSpec, Outcome, SyntheticSpec, TestCase
from hardcatch.errors import ConfigurationError, MaterializationError, UnknownIdError

DEFAULT_K = 5
DEFAULT_TIMEOUT = 60.0
DEFAULT_ENV_DENYLIST = ("PYTHONPATH", "PYTHONSTARTUP", "PYTHONHOME", "VIRTUAL_ENV")


@dataclass(frozen=True)
class Rewrite:
    """Replace bytes ``[start, end)`` of ``file`` with ``replacement``."""

    file: str
    start: int
    end: int
    replacement: bytes


def apply_rewrites(files: Mapping[str, bytes], rewrites: Iterable[Rewrite]) -> dict[str, bytes]:
    out = dict(files)
    for rw in rewrites:
        if rw.file not in out:
            raise MaterializationError(f"rewrite targets missing file {rw.file!r}")
        data = out[rw.file]
        if not 0 <= rw.start <= rw.end <= len(data):
            raise MaterializationError(
                f"span [{rw.start}, {rw.end}) out of range for {rw.file} ({len(data)} bytes)"
            )
        out[rw.file] = data[: rw.start] + rw.replacement + data[rw.end :]
    return out


def read_tree(root: str | Path) -> dict[str, bytes]:
    root = Path(root)
    if not root.is_dir():
        raise MaterializationError(f"tree {root} is not a directory")
    files = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and "__pycache__" not in path.parts:
            files[path.relative_to(root).as_posix()] = path.read_bytes()
    return files


class TreeStore:
    """File trees per revision: either a directory on disk or a derivation
    (base revision plus byte-span rewrites)."""

    def __init__(self, dirs: Mapping[str, str | Path] | None = None) -> None:
        self._dirs: dict[str, Path] = {k: Path(v) for k, v in (dirs or {}).items()}
        self._derived: dict[str, tuple[str, tuple[Rewrite, ...]]] = {}

    @classmethod
    def from_directory(cls, root: str | Path) -> TreeStore:
        """One subdirectory per revision id."""
        root = Path(root)
        return cls({p.name: p for p in sorted(root.iterdir()) if p.is_dir()})

    def add_dir(self, rev_id: str, path: str | Path) -> None:
        self._dirs[rev_id] = Path(path)

    def derive(self, rev_id: str, base: str, rewrites: Sequence[Rewrite]) -> None:
        if base not in self:
            raise UnknownIdError(f"no tree for base revision {base!r}")
        self._derived[rev_id] = (base, tuple(rewrites))

    def add_mutant(self, mutant: Any) -> None:
        self.derive(mutant.id, mutant.base, [mutant.rewrite()])

    def __contains__(self, rev_id: object) -> bool:
        return rev_id in self._dirs or rev_id in self._derived

    def files(self, rev_id: str) -> dict[str, bytes]:
        if rev_id in self._dirs:
            return read_tree(self._dirs[rev_id])
        if rev_id in self._derived:
            base, rewrites = self._derived[rev_id]
            return apply_rewrites(self.files(base), rewrites)
        raise UnknownIdError(f"no tree for revision {rev_id!r}")


@dataclass(frozen=True)
class Workspace:
    root: Path
    revision: str


def write_tree(files: Mapping[str, bytes], dest: Path) -> None:
    for rel, data in files.items():
        target = dest / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)


def materialize(store: TreeStore, target: Any, dest: str | Path) -> Workspace:
    """Write the tree of a revision id or a mutant into ``dest``."""
    dest = Path(dest)
    if dest.exists() and any(dest.iterdir()):
        raise MaterializationError(f"workspace {dest} already exists and is not empty")
    if isinstance(target, str):
        rev_id, files = target, store.files(target)
    else:
        rev_id = target.id
        files = apply_rewrites(store.files(target.base), [target.rewrite()])
    dest.mkdir(parents=True, exist_ok=True)
    write_tree(files, dest)
    return Workspace(dest, rev_id)


@dataclass(frozen=True)
class RunResult:
    build_ok: bool
    passed: bool
    duration_seconds: float = 0.0
    diagnostic: str = ""

    def to_record(self) -> dict[str, Any]:
        return {
            "build_ok": self.build_ok,
            "run_result": "pass" if self.passed else "fail",
            "duration_seconds": round(self.duration_seconds, 6),
            "diagnostic": self.diagnostic,
        }


def collapse_runs(runs: Sequence[RunResult]) -> Outcome:
    if not runs:
        raise ValueError("no runs to collapse")
    if any(not r.build_ok for r in runs):
        return Outcome.NO_BUILD
    passes = sum(r.passed for r in runs)
    if passes == len(runs):
        return Outcome.PASS
    if passes == 0:
        return Outcome.FAIL
    return Outcome.FLAKY


@dataclass
class ExecutionRecord:
    revision: str
    test: str
    runs: list[RunResult]
    collapsed: Outcome = field(init=False)

    def __post_init__(self) -> None:
        self.collapsed = collapse_runs(self.runs)

    def to_record(self) -> dict[str, Any]:
        return {
            "revision": self.revision,
            "test": self.test,
            "collapsed": self.collapsed.value,
            "runs": [r.to_record() for r in self.runs],
        }


class Executor(Protocol):
    k: int

    def run(self, target: Any, test: TestCase, k: int | None = None) -> ExecutionRecord:
        ...


def _target_id(target: Any) -> str:
    return target if isinstance(target, str) else target.id


class CommandExecutor:
    """Runs executable test specs as subprocesses inside a workspace.

    Argument tokens may use ``{python}``, ``{test_dir}`` and ``{workspace}``
    placeholders; exit status 0 means pass.
    """

    def __init__(
        self,
        trees: TreeStore,
        test_dir: str | Path | None = None,
        k: int = DEFAULT_K,
        timeout: float = DEFAULT_TIMEOUT,
        env_denylist: Iterable[str] = DEFAULT_ENV_DENYLIST,
        scratch: str | Path | None = None,
    ) -> None:
        if k < 1:
            raise ConfigurationError("k must be >= 1")
        self.trees = trees
        self.test_dir = None if test_dir is None else Path(test_dir).resolve()
        self.k = k
        self.timeout = timeout
        self.env_denylist = frozenset(env_denylist)
        self.scratch = None if scratch is None else Path(scratch)

    def _argv(self, argv: Sequence[str], ws: Workspace) -> list[str]:
        subs = {"{python}": sys.executable, "{workspace}": str(ws.root)}
        if self.test_dir is not None:
            subs["{test_dir}"] = str(self.test_dir)
        out = []
        for token in argv:
            for key, value in subs.items():
                token = token.replace(key, value)
            if "{test_dir}" in token:
                raise ConfigurationError("test command uses {test_dir} but no test directory is set")
            out.append(token)
        return out

    def _env(self) -> dict[str, str]:
        return {k: v for k, v in os.environ.items() if k not in self.env_denylist}

    def _call(self, argv: list[str], ws: Workspace, timeout: float) -> tuple[int | None, float, str]:
        start = time.perf_counter()
        try:
            proc = subprocess.run(
                argv, cwd=ws.root, env=self._env(), capture_output=True, timeout=timeout,
                check=False,
            )
        except subprocess.TimeoutExpired:
            return None, time.perf_counter() - start, "timeout"
        elapsed = time.perf_counter() - start
        tail = proc.stderr.decode("utf-8", errors="replace").strip().splitlines()[-1:]
        return proc.returncode, elapsed, tail[0] if tail else ""

    def execute(self, ws: Workspace, test: TestCase, k: int | None = None,
                timeout: float | None = None) -> ExecutionRecord:
        k = self.k if k is None else k
        if k < 1:
            raise ConfigurationError("k must be >= 1")
        timeout = self.timeout if timeout is None else timeout
        spec = test.spec
        if not isinstance(spec, ExecutableSpec) or not spec.run_cmd:
            raise ConfigurationError(f"test {test.id} has no executable run command")
        try:
            if spec.build_cmd:
                code, elapsed, diag = self._call(self._argv(spec.build_cmd, ws), ws, timeout)
                if code != 0:
                    why = "build timeout" if code is None else f"build failed: {diag}".rstrip(": ")
                    return ExecutionRecord(ws.revision, test.id, [RunResult(False, False, elapsed, why)])
            runs = []
            argv = self._argv(spec.run_cmd, ws)
            for _ in range(k):
                code, elapsed, diag = self._call(argv, ws, timeout)
                runs.append(RunResult(True, code == 0, elapsed, "timeout" if code is None else diag))
        except OSError as exc:
            return ExecutionRecord(ws.revision, test.id,
                                   [RunResult(False, False, 0.0, f"spawn failed: {exc}")])
        return ExecutionRecord(ws.revision, test.id, runs)

    def run(self, target: Any, test: TestCase, k: int | None = None) -> ExecutionRecord:
        base = None if self.scratch is None else str(self.scratch)
        with tempfile.TemporaryDirectory(prefix="hardcatch-ws-", dir=base) as tmp:
            ws = materialize(self.trees, target, Path(tmp) / "tree")
            return self.execute(ws, test, k)


@dataclass(frozen=True)
class Script:
    """Scripted behaviour of one synthetic test on one revision.

    ``sequence`` (pass/fail per run, cycled) wins over ``pass_probability``.
    """

    builds: bool = True
    pass_probability: float = 1.0
    sequence: tuple[bool, ...] | None = None

    @classmethod
    def of(cls, outcome: Outcome) -> Script:
        if outcome is Outcome.NO_BUILD:
            return cls(builds=False)
        if outcome is Outcome.FLAKY:
            return cls(pass_probability=0.5, sequence=(True, False))
        return cls(pass_probability=1.0 if outcome is Outcome.PASS else 0.0)


def stable_seed(*parts: object) -> int:
    digest = hashlib.sha256("\x1f".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big")


class SyntheticExecutor:
    """Looks up ``(revision, synthetic key)`` in a script table."""

    def __init__(self, table: Mapping[tuple[str, str], Script], seed: int = 0,
                 k: int = DEFAULT_K) -> None:
        self.table = dict(table)
        self.seed = seed
        self.k = k

    def execute(self, ws: Workspace, test: TestCase, k: int | None = None,
                timeout: float | None = None) -> ExecutionRecord:
        return self.run(ws.revision, test, k)

    def run(self, target: Any, test: TestCase, k: int | None = None) -> ExecutionRecord:
        k = self.k if k is None else k
        if k < 1:
            raise ConfigurationError("k must be >= 1")
        rev_id = _target_id(target)
        if not isinstance(test.spec, SyntheticSpec):
            raise ConfigurationError(f"test {test.id} has no synthetic reference")
        try:
            script = self.table[(rev_id, test.spec.key)]
        except KeyError:
            raise ConfigurationError(
                f"no scripted outcome for ({rev_id}, {test.spec.key})"
            ) from None
        if not script.builds:
            return ExecutionRecord(rev_id, test.id, [RunResult(False, False, 0.0, "build failed")])
        if script.sequence:
            passes = [script.sequence[i % len(script.sequence)] for i in range(k)]
        else:
            rng = random.Random(stable_seed(self.seed, rev_id, test.id))
            passes = [rng.random() < script.pass_probability for _ in range(k)]
        return ExecutionRecord(rev_id, test.id, [RunResult(True, ok) for ok in passes])


def run_many(
    executor: Executor,
    jobs: Sequence[tuple[Any, TestCase]],
    k: int | None = None,
    workers: int | None = None,
) -> list[ExecutionRecord]:
    """Run independent (target, test) jobs, returning records in job order."""
    if workers is None:
        workers = min(8, os.cpu_count() or 1)
    if workers <= 1 or len(jobs) <= 1:
        return [executor.run(target, test, k) for target, test in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: executor.run(job[0], job[1], k), jobs))


def load_script_table(records: Iterable[Mapping[str, Any]]) -> dict[tuple[str, str], Script]:
    """Parse ``{revision, key, builds, pass_probability, sequence}`` records."""
    table: dict[tuple[str, str], Script] = {}
    for rec in records:
        seq = rec.get("sequence")
        table[(rec["revision"], rec["key"])] = Script(
            builds=bool(rec.get("builds", True)),
            pass_probability=float(rec.get("pass_probability", 1.0)),
            sequence=None if seq is None else tuple(s == "pass" or s is True for s in seq),
        )
    return table


def same_tree(store: TreeStore, a: str, b: str) -> bool:
    return store.files(a) == store.files(b)
