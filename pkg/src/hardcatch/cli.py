"""Command line entry point: ``hardcatch <subcommand> ...``.

Every subcommand prints newline-delimited JSON records on stdout, or an
aligned table with ``--human``. Exit codes: 0 success, 2 input error,
3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from hardcatch.classifier import Universe, classify, timeliness
from hardcatch.core_model import (
    Outcome,
    World,
    dump_record,
    iter_records,
    load_tests,
    load_world,
    load_world_dir,
    write_records,
)
from hardcatch.errors import (
    DomainError,
    InputError,
    InvariantViolation,
    UndefinedMetricError,
    UnknownIdError,
)
from hardcatch.executor import (
    DEFAULT_TIMEOUT,
    CommandExecutor,
    SyntheticExecutor,
    TreeStore,
    load_script_table,
)
from hardcatch.metrics import SignalEvent, build_report, mutation_recall, production_recall_bound
from hardcatch.mutation import (
    ALL_OPERATORS,
    KillMatrix,
    KillResult,
    MutationOperator,
    certify_hardening,
    generate_mutants,
    kill_matrix,
    load_mutants,
    mutant_universe_data,
)
from hardcatch.policy import (
    BudgetConfig,
    annotate_jittest_outcome,
    annotate_timely_outcome,
    decide_jittest,
)
from hardcatch.simulator import (
    ScenarioConfig,
    Unit,
    gen_world,
    latent_walk,
    run_policy_experiment,
    write_trace,
)

log = logging.getLogger("hardcatch")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


# -- output ----------------------------------------------------------------


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return str(value)


def emit(records: Iterable[dict[str, Any]], human: bool, out=None) -> None:
    out = out or sys.stdout
    records = list(records)
    if not human:
        for rec in records:
            out.write(dump_record(rec) + "\n")
        return
    if not records:
        return
    cols = list(records[0])
    for rec in records[1:]:
        cols += [c for c in rec if c not in cols]
    rows = [[_cell(r.get(c)) for c in cols] for r in records]
    widths = [max(len(c), *(len(row[i]) for row in rows)) for i, c in enumerate(cols)]
    out.write("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip() + "\n")
    for row in rows:
        out.write("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() + "\n")


# -- shared loaders ----------------------------------------------------------


def _add_world_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("world")
    g.add_argument("--world", type=Path, help="directory holding revisions/tests/outcomes/oracle.jsonl")
    g.add_argument("--revisions", type=Path)
    g.add_argument("--tests", type=Path)
    g.add_argument("--outcomes", type=Path)
    g.add_argument("--oracle", type=Path)


def _load_world(args: argparse.Namespace, **kw: Any) -> World:
    if args.world is not None:
        for name in ("revisions", "tests", "outcomes", "oracle"):
            if getattr(args, name) is not None:
                raise InputError(f"--{name} cannot be combined with --world")
        return load_world_dir(args.world, strict=args.strict, **kw)
    if args.revisions is None or args.tests is None:
        raise InputError("give --world DIR or at least --revisions and --tests")
    return load_world(args.revisions, args.tests, args.outcomes, args.oracle,
                      strict=args.strict, **kw)


def _records(path: Path) -> list[dict[str, Any]]:
    return [rec for _, rec in iter_records(path)]


def _load_kill(path: Path, mutant_ids: Sequence[str]) -> KillMatrix:
    entries = {}
    tests: list[str] = []
    for lineno, rec in iter_records(path):
        try:
            entries[(rec["test"], rec["mutant"])] = KillResult(rec["result"])
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}:{lineno}: bad kill record: {exc}") from None
        if rec["test"] not in tests:
            tests.append(rec["test"])
    return KillMatrix(tests, list(mutant_ids), entries)


def _executor(args: argparse.Namespace, trees: TreeStore):
    if getattr(args, "scripts", None) is not None:
        return SyntheticExecutor(load_script_table(_records(args.scripts)), args.seed, args.k)
    return CommandExecutor(trees, args.test_dir, args.k, args.timeout)


def _add_exec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trees", type=Path, help="directory with one subdirectory per revision")
    p.add_argument("--test-dir", type=Path, help="value of the {test_dir} placeholder")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--scripts", type=Path, help="synthetic script table instead of running commands")
    p.add_argument("--workers", type=int, default=1)


def _trees(args: argparse.Namespace) -> TreeStore:
    if args.trees is None:
        if args.scripts is None:
            raise InputError("--trees is required unless --scripts is given")
        return TreeStore()
    return TreeStore.from_directory(args.trees)


# -- subcommands -------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    world = _load_world(args)
    world.graph.validate()
    world.check_references()
    emit([{
        "status": "ok",
        "revisions": len(world.graph),
        "tests": len(world.tests),
        "outcomes": len(world.outcomes),
        "oracle_entries": len(world.oracle),
    }], args.human)
    return EXIT_OK


def _universe(args: argparse.Namespace, world: World) -> Universe:
    allowed = None if args.universe is None else [s for s in args.universe.split(",") if s]
    u = Universe.from_world(world, allowed)
    if args.mutants is None:
        return u
    if args.kill is None:
        raise InputError("--mutants needs --kill with the kill-matrix records")
    mutants = load_mutants(iter_records(args.mutants), str(args.mutants))
    kill = _load_kill(args.kill, [m.id for m in mutants])
    outcomes = world.outcomes.copy()
    ledger = world.oracle.copy()
    for base in sorted({m.base for m in mutants}):
        links, m_out, m_led = mutant_universe_data(base, mutants, kill)
        for (r, t), e in m_out.items():
            if (r, t) not in outcomes:
                outcomes.add(r, t, e)
        for (r, t), e in m_led.items():
            if (r, t) not in ledger:
                ledger.add(r, t, e)
        u = u.with_candidates(links, outcomes, ledger)
    return u


def cmd_classify(args: argparse.Namespace) -> int:
    world = _load_world(args)
    u = _universe(args, world)
    if args.all:
        pairs = sorted(
            (r, t) for (r, t), _ in world.outcomes.items()
            if r in world.graph and world.graph.parent(r) is not None
            and (world.graph.parent(r), t) in world.outcomes
        )
    else:
        if args.revision is None or args.test is None:
            raise InputError("give --revision and --test, or --all")
        world.test(args.test)
        pairs = [(args.revision, args.test)]
    records = []
    for r, t in pairs:
        try:
            rec = classify(u, r, t).to_record()
        except DomainError as exc:
            if not args.all:
                raise
            rec = {"revision": r, "test": t, "error": str(exc)}
        if r in world.graph:
            rec["timeliness"] = timeliness(world.test(t), r, world.graph).value
        records.append(rec)
    emit(records, args.human)
    return EXIT_OK


def _jittest_pairs(world: World) -> list[tuple[str, str, str]]:
    out = []
    for (r, t), _ in sorted(world.outcomes.items()):
        parent = world.graph.parent(r) if r in world.graph else None
        if parent is not None and (parent, t) in world.outcomes:
            out.append((parent, r, t))
    return out


def cmd_decide(args: argparse.Namespace) -> int:
    if args.parent_outcome is not None or args.child_outcome is not None:
        if args.parent_outcome is None or args.child_outcome is None:
            raise InputError("give both --parent-outcome and --child-outcome")
        rows = [(None, None, None, Outcome(args.parent_outcome), Outcome(args.child_outcome))]
    else:
        world = _load_world(args)
        rows = [(p, r, t, world.outcomes[(p, t)], world.outcomes[(r, t)])
                for p, r, t in _jittest_pairs(world)]
    records = []
    for p, r, t, op, oc in rows:
        d = decide_jittest(op, oc)
        rec = {"parent_outcome": op.value, "child_outcome": oc.value, "decision": d.kind.value,
               "category": d.category, "rationale": d.rationale}
        if r is not None:
            rec = {"parent": p, "revision": r, "test": t, **rec}
        records.append(rec)
    emit(records, args.human)
    return EXIT_OK


def cmd_annotate(args: argparse.Namespace) -> int:
    fn = annotate_timely_outcome if args.table == "timely" else annotate_jittest_outcome
    if args.parent_outcome is not None or args.child_outcome is not None:
        if args.parent_outcome is None or args.child_outcome is None:
            raise InputError("give both --parent-outcome and --child-outcome")
        label = fn(Outcome(args.parent_outcome), Outcome(args.child_outcome),
                   args.oracle_parent, args.oracle_child)
        emit([label.to_record()], args.human)
        return EXIT_OK
    world = _load_world(args)
    records = []
    for p, r, t in _jittest_pairs(world):
        op, oc = world.outcomes[(p, t)], world.outcomes[(r, t)]
        if Outcome.FLAKY in (op, oc) or (args.table == "timely" and op is not Outcome.PASS):
            continue
        label = fn(op, oc, world.oracle.get(p, t), world.oracle.get(r, t))
        records.append({"parent": p, "revision": r, "test": t, **label.to_record()})
    emit(records, args.human)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    thresholds = args.p or [0.8]
    for p in thresholds:
        if not 0.0 < p <= 1.0:
            raise DomainError(f"threshold {p} outside (0, 1]")
    events = []
    for lineno, rec in iter_records(args.events):
        try:
            events.append(SignalEvent.from_record(rec))
        except (KeyError, ValueError) as exc:
            raise InputError(f"{args.events}:{lineno}: bad event: {exc}") from None
    kill = None
    if args.kill is not None:
        ids = [m.id for m in load_mutants(iter_records(args.mutants))] if args.mutants else None
        if ids is None:
            ids = sorted({rec["mutant"] for rec in _records(args.kill)})
        kill = _load_kill(args.kill, ids)
        mutation_recall(kill)  # explicitly requested: undefined is an error
    if args.caught is not None or args.leaked is not None:
        if args.caught is None or args.leaked is None:
            raise InputError("give both --caught and --leaked")
        production_recall_bound(args.caught, args.leaked)
    report = build_report(events, thresholds, kill, args.caught, args.leaked, args.positives)
    emit([report.to_record()], args.human)
    return EXIT_OK


def cmd_mutate(args: argparse.Namespace) -> int:
    store = TreeStore.from_directory(args.trees)
    files = {f: b for f, b in store.files(args.base).items() if f.endswith(tuple(args.suffix))}
    ops = ALL_OPERATORS if not args.operator else [MutationOperator(o) for o in args.operator]
    mutants = generate_mutants(args.base, files, ops, args.budget, args.seed)
    records = [m.to_record() for m in mutants]
    if args.out is not None:
        write_records(args.out, records)
    emit(records, args.human)
    return EXIT_OK


def _mutants_and_store(args: argparse.Namespace):
    mutants = load_mutants(iter_records(args.mutants), str(args.mutants))
    store = _trees(args)
    if args.trees is not None:
        for m in mutants:
            store.add_mutant(m)
    return mutants, store


def cmd_kill(args: argparse.Namespace) -> int:
    world = _load_world(args)
    mutants, store = _mutants_and_store(args)
    tests = [world.test(t) for t in (args.test or sorted(world.tests))]
    km = kill_matrix(tests, mutants, _executor(args, store), workers=args.workers)
    records = km.to_records()
    if args.out is not None:
        write_records(args.out, records)
    for tid, why in sorted(km.excluded.items()):
        log.warning("excluded %s: %s", tid, why)
    emit(records, args.human)
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    world = _load_world(args)
    mutants, store = _mutants_and_store(args)
    coverage = None
    if args.coverage is not None:
        coverage = {rec["test"]: set(rec["covered"]) for rec in _records(args.coverage)}
    report = certify_hardening(world.tests, args.candidate, args.base, args.suite or [], mutants,
                               _executor(args, store), coverage, workers=args.workers)
    emit([report.to_record()], args.human)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        rec = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}:{exc.lineno}: {exc.msg}") from None
    if args.seed_given:
        rec["seed"] = args.seed
    cfg = ScenarioConfig.from_record(rec, strict=args.strict)
    trace = run_policy_experiment(gen_world(cfg), not args.no_review_gate)
    write_trace(trace, args.out)
    emit([trace.summary()], args.human)
    return EXIT_OK


def cmd_walk(args: argparse.Namespace) -> int:
    store = TreeStore({args.base_id: args.base_tree})
    tests = load_tests(args.tests, strict=args.strict)
    units = []
    for lineno, rec in iter_records(args.units):
        try:
            units.append(Unit.from_record(rec))
        except (KeyError, ValueError) as exc:
            raise InputError(f"{args.units}:{lineno}: bad unit: {exc}") from None
        for t in units[-1].tests:
            if t not in tests:
                raise UnknownIdError(f"{args.units}:{lineno}: unknown test {t!r}")
    executor = CommandExecutor(store, args.test_dir, args.k, args.timeout)
    findings = latent_walk(store, args.base_id, units, executor, tests=tests,
                           budget=BudgetConfig(args.budget_seconds))
    emit([f.to_record() for f in findings], args.human)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.seed_given = True


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands accept the global flags too; their defaults are suppressed
    # so they do not overwrite values given before the subcommand
    def d(value: Any) -> Any:
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=d(0), action=_SeedAction)
    common.add_argument("--strict", action="store_true", default=d(False),
                        help="reject unknown record fields")
    common.add_argument("--k", type=int, default=d(5), help="repetitions per test run")
    common.add_argument("--budget-seconds", type=int,
                        default=d(BudgetConfig().review_budget_seconds))
    common.add_argument("--human", action="store_true", default=d(False), help="tabular output")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="hardcatch", parents=[_global_flags(suppress=False)],
                                     description="Classify, gate and evaluate generated tests.")
    parser.set_defaults(seed_given=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, fn, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("validate", cmd_validate, "check world invariants")
    _add_world_args(p)

    p = add("classify", cmd_classify, "hardening/catching statuses and region")
    _add_world_args(p)
    p.add_argument("--revision")
    p.add_argument("--test")
    p.add_argument("--all", action="store_true")
    p.add_argument("--universe", help="comma-separated candidate revisions to quantify over")
    p.add_argument("--mutants", type=Path, help="mutant records added as candidate children")
    p.add_argument("--kill", type=Path, help="kill-matrix records for --mutants")

    p = add("decide", cmd_decide, "JiTTest decision for outcome pairs")
    _add_world_args(p)
    p.add_argument("--parent-outcome", choices=[o.value for o in Outcome])
    p.add_argument("--child-outcome", choices=[o.value for o in Outcome])

    p = add("annotate", cmd_annotate, "consequence labels")
    _add_world_args(p)
    p.add_argument("--table", choices=["timely", "jittest"], default="jittest")
    p.add_argument("--parent-outcome", choices=[o.value for o in Outcome])
    p.add_argument("--child-outcome", choices=[o.value for o in Outcome])
    p.add_argument("--oracle-parent", choices=["pass", "fail", "unknown"])
    p.add_argument("--oracle-child", choices=["pass", "fail", "unknown"])

    p = add("metrics", cmd_metrics, "precision, pseudo precision, recall estimates, R@P")
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--p", type=float, action="append", help="R@P threshold (repeatable)")
    p.add_argument("--kill", type=Path)
    p.add_argument("--mutants", type=Path)
    p.add_argument("--caught", type=int)
    p.add_argument("--leaked", type=int)
    p.add_argument("--positives", type=int)

    p = add("mutate", cmd_mutate, "generate a mutant pool for a revision")
    p.add_argument("--trees", type=Path, required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--operator", action="append", choices=[o.value for o in MutationOperator])
    p.add_argument("--suffix", action="append", default=None)
    p.add_argument("--out", type=Path)

    p = add("kill", cmd_kill, "run tests against mutants")
    _add_world_args(p)
    _add_exec_args(p)
    p.add_argument("--mutants", type=Path, required=True)
    p.add_argument("--test", action="append")
    p.add_argument("--out", type=Path)

    p = add("certify", cmd_certify, "certify a candidate as hardening")
    _add_world_args(p)
    _add_exec_args(p)
    p.add_argument("--mutants", type=Path, required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--suite", action="append", help="existing-suite test id (repeatable)")
    p.add_argument("--coverage", type=Path, help="records {test, covered: [...]}")

    p = add("simulate", cmd_simulate, "synthetic world and policy experiment")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-review-gate", action="store_true")

    p = add("walk", cmd_walk, "latent-bug walk over deleted and reinserted units")
    p.add_argument("--base-tree", type=Path, required=True)
    p.add_argument("--base-id", default="base")
    p.add_argument("--units", type=Path, required=True)
    p.add_argument("--tests", type=Path, required=True)
    p.add_argument("--test-dir", type=Path)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "suffix", 0) is None:
        args.suffix = [".py"]
    if args.k < 1:
        parser.error("--k must be >= 1")
    if args.budget_seconds <= 0:
        parser.error("--budget-seconds must be positive")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
