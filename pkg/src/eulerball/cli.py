"""Command-line entry point: ``eulerball solve | syllogism gen|run | family gen|run``.

Exit codes: 0 on success, 1 on bad input, 2 when ``solve`` ends with a
positive loss.  Tables go to stdout tab-delimited; reports, diagrams and
figures are written atomically.  ``ENN_SEED`` supplies the seed when
``--seed`` is not given.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from eulerball import dataio
from eulerball.family import (
    FamilyDataError,
    assign_assertions,
    evaluate_family_dataset,
    family_statistics,
    group_families,
    make_assertions,
    synthetic_family,
)
from eulerball.optimizer import RelationTable, SolverConfig, solve
from eulerball.syllogism import STRUCTURES, accuracy_by_group, generate_cases, run_cases

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; 2 is reserved for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ENN_SEED")
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"ENN_SEED must be an integer, got {env!r}") from None


def _read(path) -> str:
    try:
        return Path(path).read_bytes().decode("utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not UTF-8 ({exc.reason} at byte {exc.start})") from None


def _table_out(rows, header) -> None:
    print("\t".join(header))
    for row in rows:
        print("\t".join(str(x) for x in row))


def _fmt(x: float) -> str:
    return f"{x:.4f}"


# -- solve ---------------------------------------------------------------------

def cmd_solve(args) -> int:
    try:
        table = RelationTable.from_json(_read(args.table))
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad relation table {args.table}: {exc}") from None
    config = SolverConfig(
        n=args.dim, n_d=args.nd, n_o=args.no, n_p=args.np, m_rot=args.rot,
        max_iter=args.max_iter, lr=args.lr, seed=_seed(args),
    )
    report = solve(table, config)
    text = dataio.write_report(report)
    if args.out:
        dataio.write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    if args.svg:
        from eulerball.viz import render_svg

        dataio.write_atomic(args.svg, render_svg(report.balls))
    if not report.converged:
        print(f"not converged: loss {report.loss:.6g} after {report.rounds} rounds", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# -- syllogisms ----------------------------------------------------------------

def cmd_syllogism_gen(args) -> int:
    if args.structure not in STRUCTURES:
        raise InputError(f"unknown structure {args.structure!r}; valid names: {', '.join(STRUCTURES)}")
    try:
        taxonomy = dataio.parse_taxonomy(_read(args.taxonomy)) if args.taxonomy else dataio.sample_taxonomy()
        cases = generate_cases(taxonomy, args.structure, args.count, _seed(args))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    text = dataio.format_case_file(cases)
    if args.out:
        dataio.write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_syllogism_run(args) -> int:
    try:
        cases = dataio.parse_case_file(_read(args.cases)) if args.cases else dataio.sample_cases()
    except ValueError as exc:
        raise InputError(f"bad case file: {exc}") from None
    config = SolverConfig(max_iter=args.max_iter, seed=_seed(args))
    results = run_cases(cases, config, jobs=args.jobs)
    groups = accuracy_by_group(results)
    correct = sum(r.correct for r in results)
    accuracy = correct / len(results) if results else 1.0
    _table_out(
        ((g, v["cases"], v["converged"], v["correct"], _fmt(v["accuracy"])) for g, v in groups.items()),
        ("group", "cases", "converged", "correct", "accuracy"),
    )
    print(f"overall\t{len(results)}\t{sum(r.converged for r in results)}\t{correct}\t{_fmt(accuracy)}")
    if args.report:
        dataio.write_atomic(args.report, dataio.dumps({
            "seed": config.seed,
            "cases": len(results),
            "accuracy": accuracy,
            "groups": groups,
            "results": [r.to_dict() for r in results],
        }))
    if args.figure:
        from eulerball.viz import save_figure, syllogism_accuracy_figure

        save_figure(syllogism_accuracy_figure(groups), args.figure)
    return EXIT_OK


# -- families ------------------------------------------------------------------

def cmd_family_gen(args) -> int:
    if args.count < 0 or any(s < 2 for s in args.sizes):
        raise InputError("--count must be >= 0 and every size >= 2")
    if not 0 <= args.in_law_rate <= 1:
        raise InputError("--in-law-rate must lie in [0, 1]")
    rng = np.random.default_rng(_seed(args))
    triples = []
    for size in args.sizes:
        for i in range(args.count):
            triples += synthetic_family(size, rng, args.in_law_rate, prefix=f"f{size}_{i}_")
    groups = group_families(triples, min_groups=1)
    pairs = [p for i, g in enumerate(groups) for p in make_assertions(g, _seed(args) + i)]
    dataio.write_atomic(args.triples, dataio.format_triples(triples))
    dataio.write_atomic(args.assertions, dataio.format_assertions(pairs))
    return EXIT_OK


def cmd_family_run(args) -> int:
    try:
        triples = dataio.parse_triples(_read(args.triples)) if args.triples else dataio.sample_triples()
        pairs = dataio.parse_assertions(_read(args.assertions)) if args.assertions else dataio.sample_assertions()
    except ValueError as exc:
        raise InputError(f"bad family input: {exc}") from None
    groups = group_families(triples, args.min_groups)
    if args.exclude_sparse:
        keep = {m for g in groups if not g.sparse for m in g.members}
        groups = [g for g in groups if not g.sparse]
        pairs = [p for p in pairs if p[0].a in keep]
    try:
        per_group = assign_assertions(groups, pairs)
    except (ValueError, FamilyDataError) as exc:
        raise InputError(str(exc)) from None
    config = SolverConfig(max_iter=args.max_iter, seed=_seed(args))
    evaluation = evaluate_family_dataset(groups, per_group, config, jobs=args.jobs)
    by_size = evaluation.by_size()
    overall = evaluation.overall()
    _table_out(
        ((s, r["groups"], r["converged"], _fmt(r["precision"]), _fmt(r["recall"]), _fmt(r["accuracy"]))
         for s, r in by_size.items()),
        ("members", "groups", "converged", "precision", "recall", "accuracy"),
    )
    print(f"overall\t{overall['groups']}\t{overall['groups'] - overall['non_converged']}\t"
          f"{_fmt(overall['precision'])}\t{_fmt(overall['recall'])}\t{_fmt(overall['accuracy'])}")
    for o in evaluation.outcomes:
        if o.excluded:
            print(f"excluded group of {o.size}: {o.excluded}", file=sys.stderr)
    if args.report:
        stats = family_statistics(groups, per_group)
        dataio.write_atomic(args.report, dataio.dumps({
            "seed": config.seed,
            "overall": overall,
            "by_size": {str(k): v for k, v in by_size.items()},
            "statistics": {str(k): v for k, v in stats.items()},
            "groups": [
                {"members": list(o.members), "converged": o.converged, "loss": None if o.excluded else o.loss, "excluded": o.excluded,
                 "tp": o.tp, "fp": o.fp, "fn": o.fn, "tn": o.tn, "mismatches": o.mismatches}
                for o in evaluation.outcomes
            ],
        }))
    if args.figure:
        from eulerball.viz import family_size_figure, save_figure

        save_figure(family_size_figure(by_size), args.figure)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _positive(kind):
    def conv(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return conv


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eulerball", description="Learn ball configurations that realize qualitative relations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, jobs=False):
        p.add_argument("--seed", type=int, default=None, help="random seed (default: $ENN_SEED or 0)")
        p.add_argument("--max-iter", type=_positive(int), default=1000)
        if jobs:
            p.add_argument("--jobs", type=_positive(int), default=1, help="worker processes")

    p = sub.add_parser("solve", help="realize a relation table as balls")
    p.add_argument("--table", required=True, help="JSON relation table")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--nd", type=_positive(int), default=3)
    p.add_argument("--no", type=_positive(int), default=3)
    p.add_argument("--np", type=_positive(int), default=3)
    p.add_argument("--rot", type=_positive(int), default=72)
    p.add_argument("--lr", type=_positive(float), default=0.005)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--svg", help="write the diagram as SVG")
    common(p)
    p.set_defaults(func=cmd_solve)

    syl = sub.add_parser("syllogism", help="syllogism test cases").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    p = syl.add_parser("gen", help="generate cases from a taxonomy")
    p.add_argument("--taxonomy", help="child<TAB>parent pairs (default: bundled)")
    p.add_argument("--structure", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="case file (default: stdout)")
    p.set_defaults(func=cmd_syllogism_gen)
    p = syl.add_parser("run", help="solve cases and score conclusions")
    p.add_argument("--cases", help="case file (default: bundled sample)")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--figure", help="accuracy chart (.png, .svg or .pdf)")
    common(p, jobs=True)
    p.set_defaults(func=cmd_syllogism_run)

    fam = sub.add_parser("family", help="family-relation reasoning").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    p = fam.add_parser("gen", help="write synthetic families and assertions")
    p.add_argument("--sizes", type=int, nargs="+", default=[3, 4, 5, 6])
    p.add_argument("--count", type=int, default=10, help="families per size")
    p.add_argument("--in-law-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--triples", required=True)
    p.add_argument("--assertions", required=True)
    p.set_defaults(func=cmd_family_gen)
    p = fam.add_parser("run", help="solve family groups and score assertions")
    p.add_argument("--triples", help="relation<TAB>person<TAB>person (default: bundled)")
    p.add_argument("--assertions", help="assertion file (default: bundled)")
    p.add_argument("--min-groups", type=int, default=5)
    p.add_argument("--exclude-sparse", action="store_true", help="skip size classes with fewer than --min-groups groups")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--figure", help="precision/recall chart (.png, .svg or .pdf)")
    common(p, jobs=True)
    p.set_defaults(func=cmd_family_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:  # config validation
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
