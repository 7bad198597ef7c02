"""Syllogistic reasoning on learned Euler diagrams.

Premises become a relation table (All -> P, No -> D, Some and SomeNot -> O),
the table is solved, and conclusions are read back off the geometry:
All is P, Some is not-D, No is D and SomeNot is not-P.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import permutations
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from eulerball.geometry import Ball, Rel, holds
from eulerball.optimizer import RelationTable, SolverConfig, solve

if TYPE_CHECKING:
    from eulerball.dataio import Taxonomy


class Form(str, Enum):
    ALL = "all"
    SOME = "some"
    NO = "no"
    SOME_NOT = "some-not"

    @property
    def contradictory(self) -> "Form":
        return {Form.ALL: Form.SOME_NOT, Form.SOME_NOT: Form.ALL, Form.SOME: Form.NO, Form.NO: Form.SOME}[self]


ENCODING = {Form.ALL: Rel.P, Form.NO: Rel.D, Form.SOME: Rel.O, Form.SOME_NOT: Rel.O}


@dataclass(frozen=True)
class Statement:
    form: Form
    subject: str
    object: str

    def __post_init__(self):
        object.__setattr__(self, "form", Form(self.form))
        if self.subject == self.object:
            raise ValueError(f"statement needs two different terms, got {self.subject!r} twice")

    def negated(self) -> "Statement":
        return Statement(self.form.contradictory, self.subject, self.object)

    def __str__(self):
        return f"{self.form.value} {self.subject} {self.object}"


@dataclass(frozen=True)
class TestCase:
    premises: tuple[Statement, Statement]
    true_conclusion: Statement
    false_conclusion: Statement

    __test__ = False  # not a pytest class

    def __post_init__(self):
        object.__setattr__(self, "premises", tuple(self.premises))
        if len(self.premises) != 2:
            raise ValueError("a test case has exactly two premises")
        terms = {t for s in self.premises for t in (s.subject, s.object)}
        for c in (self.true_conclusion, self.false_conclusion):
            if c.subject not in terms or c.object not in terms:
                raise ValueError(f"conclusion {c} uses a term missing from the premises")

    def __str__(self):
        # one line of a case file
        a, b = self.premises
        return f"{a}, {b}: {self.true_conclusion}; {self.false_conclusion}"


@dataclass(frozen=True)
class Structure:
    number: int
    name: str
    premises: tuple[tuple[Form, str, str], tuple[Form, str, str]]
    conclusion: tuple[Form, str, str]

    def instantiate(self, s: str, m: str, p: str) -> TestCase:
        terms = {"s": s, "m": m, "p": p}
        prem = tuple(Statement(f, terms[x], terms[y]) for f, x, y in self.premises)
        f, x, y = self.conclusion
        true = Statement(f, terms[x], terms[y])
        return TestCase(prem, true, true.negated())


def _st(number, name, p1, p2, concl):
    def parse(text):
        form, x, y = text.split()
        return Form(form), x, y

    return Structure(number, name, (parse(p1), parse(p2)), parse(concl))


CATALOG: tuple[Structure, ...] = (
    _st(1, "Barbara", "all s m", "all m p", "all s p"),
    _st(2, "Barbari", "all s m", "all m p", "some s p"),
    _st(3, "Celarent", "all s m", "no m p", "no s p"),
    _st(4, "Cesare", "all s m", "no p m", "no s p"),
    _st(5, "Calemes", "no m s", "all p m", "no s p"),
    _st(6, "Camestres", "no s m", "all p m", "no s p"),
    _st(7, "Darii", "some s m", "all m p", "some s p"),
    _st(8, "Datisi", "some m s", "all m p", "some s p"),
    _st(9, "Darapti", "all m s", "all m p", "some s p"),
    _st(10, "Disamis", "all m s", "some m p", "some s p"),
    _st(11, "Dimatis", "all m s", "some p m", "some s p"),
    _st(12, "Baroco", "some-not s m", "all p m", "some-not s p"),
    _st(13, "Cesaro", "all s m", "no p m", "some-not s p"),
    _st(14, "Celaront", "all s m", "no m p", "some-not s p"),
    _st(15, "Camestros", "no s m", "all p m", "some-not s p"),
    _st(16, "Calemos", "no m s", "all p m", "some-not s p"),
    _st(17, "Bocardo", "all m s", "some-not m p", "some-not s p"),
    _st(18, "Bamalip", "all m s", "all p m", "some s p"),
    _st(19, "Ferio", "some s m", "no m p", "some-not s p"),
    _st(20, "Festino", "some s m", "no p m", "some-not s p"),
    _st(21, "Ferison", "some m s", "no m p", "some-not s p"),
    _st(22, "Fresison", "some m s", "no p m", "some-not s p"),
    _st(23, "Felapton", "all m s", "no m p", "some-not s p"),
    _st(24, "Fesapo", "all m s", "no p m", "some-not s p"),
)

STRUCTURES = {s.name: s for s in CATALOG}


def structure(name: str) -> Structure:
    try:
        return STRUCTURES[name]
    except KeyError:
        raise KeyError(f"unknown structure {name!r}; valid names: {', '.join(STRUCTURES)}") from None


def _canonical(premises, conclusion_form: Form) -> tuple:
    # D and O are symmetric, so their pairs are compared unordered
    items = []
    for form, x, y in premises:
        rel = ENCODING[form]
        pair = tuple(sorted((x, y))) if rel in (Rel.D, Rel.O) else (x, y)
        items.append((rel.value, pair))
    return tuple(sorted(items)), conclusion_form


def _build_groups() -> dict[str, tuple[Structure, ...]]:
    buckets: dict[tuple, list[Structure]] = {}
    for st in CATALOG:
        buckets.setdefault(_canonical(st.premises, st.conclusion[0]), []).append(st)
    return {"_".join(s.name for s in members): tuple(members) for members in buckets.values()}


#: structures that share an encoded premise table and conclusion form
GROUPS: dict[str, tuple[Structure, ...]] = _build_groups()


def group_of(name: str) -> str:
    for group, members in GROUPS.items():
        if any(s.name == name for s in members):
            return group
    raise KeyError(name)


def identify_group(case: TestCase) -> str | None:
    """Name of the group whose premise table and conclusion form match ``case``."""
    s, p = case.true_conclusion.subject, case.true_conclusion.object
    terms = {t for st in case.premises for t in (st.subject, st.object)}
    rest = terms - {s, p}
    if len(rest) != 1:
        return None
    roles = {s: "s", p: "p", rest.pop(): "m"}
    key = _canonical([(st.form, roles[st.subject], roles[st.object]) for st in case.premises], case.true_conclusion.form)
    for group, members in GROUPS.items():
        head = members[0]
        if _canonical(head.premises, head.conclusion[0]) == key:
            return group
    return None


def encode_premises(stmts: Iterable[Statement]) -> RelationTable:
    stmts = list(stmts)
    labels: list[str] = []
    for st in stmts:
        for t in (st.subject, st.object):
            if t not in labels:
                labels.append(t)
    table = RelationTable(labels)
    for st in stmts:
        table.add(st.subject, st.object, ENCODING[st.form])
    return table


def _lookup(diagram, term: str) -> Ball:
    if isinstance(diagram, Mapping):
        ball = diagram.get(term)
    else:
        ball = next((b for b in diagram if b.label == term), None)
    if ball is None:
        raise KeyError(f"term {term!r} is not in the diagram")
    return ball


def evaluate_statement(stmt: Statement, diagram) -> bool:
    """Truth of ``stmt`` on a diagram given as a list of balls or a label -> ball map."""
    x, y = _lookup(diagram, stmt.subject), _lookup(diagram, stmt.object)
    if stmt.form is Form.ALL:
        return holds(Rel.P, x, y)
    if stmt.form is Form.SOME:
        return not holds(Rel.D, x, y)
    if stmt.form is Form.NO:
        return holds(Rel.D, x, y)
    return not holds(Rel.P, x, y)


@dataclass
class CaseResult:
    case: TestCase
    converged: bool
    true_judged: bool
    false_judged: bool
    loss: float
    rounds: int
    group: str | None = None

    @property
    def correct(self) -> bool:
        return self.converged and self.true_judged and not self.false_judged

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "case": str(self.case),
            "converged": self.converged,
            "true_judged": self.true_judged,
            "false_judged": self.false_judged,
            "correct": self.correct,
            "loss": self.loss,
            "rounds": self.rounds,
        }


def run_case(case: TestCase, config: SolverConfig | None = None) -> CaseResult:
    config = config or SolverConfig()
    report = solve(encode_premises(case.premises), config)
    diagram = {b.label: b for b in report.balls}
    return CaseResult(
        case,
        report.converged,
        evaluate_statement(case.true_conclusion, diagram),
        evaluate_statement(case.false_conclusion, diagram),
        report.loss,
        report.rounds,
        identify_group(case),
    )


def _run_indexed(args):
    case, config = args
    return run_case(case, config)


def run_cases(cases: Sequence[TestCase], config: SolverConfig | None = None, jobs: int = 1) -> list[CaseResult]:
    """Solve every case; case ``i`` uses seed ``config.seed + i`` so results do not depend on ``jobs``."""
    config = config or SolverConfig()
    work = [(case, SolverConfig(**{**config.__dict__, "seed": config.seed + i})) for i, case in enumerate(cases)]
    if jobs > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_indexed, work, chunksize=max(1, len(work) // (4 * jobs))))
    return [_run_indexed(w) for w in work]


def accuracy_by_group(results: Sequence[CaseResult]) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for r in results:
        g = out.setdefault(r.group or "unclassified", {"cases": 0, "correct": 0, "converged": 0})
        g["cases"] += 1
        g["correct"] += r.correct
        g["converged"] += r.converged
    for g in out.values():
        g["accuracy"] = g["correct"] / g["cases"]
    return out


def generate_cases(taxonomy: "Taxonomy", st: Structure | str, count: int, seed: int = 0) -> list[TestCase]:
    """Draw ``count`` distinct term triples whose premises are true in ``taxonomy``.

    Term relations: ``all x y`` when y is a proper ancestor of x; ``no x y``
    when x and y share no descendant; ``some x y`` when they share one and
    differ; ``some-not x y`` when x is not y or below it.
    """
    if isinstance(st, str):
        st = structure(st)
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return []
    truth = taxonomy.truth
    terms = sorted(taxonomy.terms)
    triples = []
    for s, m, p in permutations(terms, 3):
        roles = {"s": s, "m": m, "p": p}
        if all(truth(f, roles[x], roles[y]) for f, x, y in st.premises):
            f, x, y = st.conclusion
            if truth(f, roles[x], roles[y]):
                triples.append((s, m, p))
    if len(triples) < count:
        raise ValueError(
            f"taxonomy supports only {len(triples)} {st.name} triples, {count} requested "
            f"(short by {count - len(triples)})"
        )
    rng = np.random.default_rng(seed)
    picked = sorted(rng.choice(len(triples), size=count, replace=False))
    return [st.instantiate(*triples[i]) for i in picked]
