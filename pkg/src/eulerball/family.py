"""Family relations as nested balls.

A child's ball sits inside each parent's ball, spouses overlap, and the
children of one parent are kept apart (siblings do not marry).  Compound
relations are then read off a solved diagram by expanding their definitions
over the group's members, with ``parent`` meaning "inside, and no other
member's ball in between".
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from eulerball.geometry import Ball, Rel, classify, holds
from eulerball.optimizer import RelationTable, SolverConfig, solve

log = logging.getLogger(__name__)

BASIC = ("spouse", "child", "parent")
COMPOUND = (
    "sibling",
    "grandparent",
    "grandchild",
    "auntOrUncle",
    "nibling",
    "cousin",
    "childInLaw",
    "siblingInLaw",
)


class FamilyDataError(ValueError):
    """Triples that cannot be encoded: cycles, or siblings who are also spouses."""


@dataclass(frozen=True, order=True)
class FamilyTriple:
    """``child(a; b)``: a is a child of b.  ``parent(a; b)``: a is a parent of b."""

    relation: str
    a: str
    b: str

    def __post_init__(self):
        if self.relation not in BASIC:
            raise ValueError(f"unknown family relation {self.relation!r}; expected one of {', '.join(BASIC)}")
        if self.a == self.b:
            raise ValueError(f"{self.relation} triple relates {self.a!r} to itself")

    def parent_child(self) -> tuple[str, str] | None:
        if self.relation == "child":
            return self.b, self.a
        if self.relation == "parent":
            return self.a, self.b
        return None


@dataclass(frozen=True)
class CompoundQuery:
    name: str
    a: str
    b: str

    def __post_init__(self):
        if self.name not in COMPOUND:
            raise ValueError(f"unknown compound relation {self.name!r}; expected one of {', '.join(COMPOUND)}")

    def __str__(self):
        return f"{self.name} {self.a} {self.b}"


@dataclass
class FamilyGroup:
    members: tuple[str, ...]
    triples: tuple[FamilyTriple, ...]
    sparse: bool = False  # its size class has too few groups

    @property
    def size(self) -> int:
        return len(self.members)


class _DisjointSet:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller label becomes the root, which keeps grouping order-independent
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def group_families(triples: Iterable[FamilyTriple], min_groups: int = 5) -> list[FamilyGroup]:
    """Connected components of the person graph, largest first.

    Groups whose size class has fewer than ``min_groups`` members are kept
    but marked ``sparse``.
    """
    triples = list(triples)
    ds = _DisjointSet()
    for t in triples:
        ds.union(t.a, t.b)
    members: dict[str, set[str]] = defaultdict(set)
    owned: dict[str, list[FamilyTriple]] = defaultdict(list)
    for t in triples:
        root = ds.find(t.a)
        members[root].update((t.a, t.b))
        owned[root].append(t)
    groups = [FamilyGroup(tuple(sorted(members[r])), tuple(owned[r])) for r in members]
    groups.sort(key=lambda g: (-g.size, g.members))
    per_size = defaultdict(int)
    for g in groups:
        per_size[g.size] += 1
    for g in groups:
        g.sparse = per_size[g.size] < min_groups
    return groups


def _parents_of(triples: Iterable[FamilyTriple]) -> dict[str, set[str]]:
    parents: dict[str, set[str]] = defaultdict(set)
    for t in triples:
        pc = t.parent_child()
        if pc:
            parents[pc[1]].add(pc[0])
    return parents


def find_cycle(triples: Iterable[FamilyTriple]) -> list[str] | None:
    """A parent/child cycle as a list of persons (first == last), or None."""
    parents = _parents_of(triples)
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(x):
        state[x] = 1
        stack.append(x)
        for p in sorted(parents.get(x, ())):
            if state.get(p) == 1:
                return stack[stack.index(p):] + [p]
            if p not in state:
                found = visit(p)
                if found:
                    return found
        stack.pop()
        state[x] = 2
        return None

    for x in sorted(parents):
        if x not in state:
            found = visit(x)
            if found:
                return found
    return None


def axiom_violations(triples: Iterable[FamilyTriple]) -> list[tuple[str, str]]:
    """Sibling pairs that are also recorded as spouses."""
    triples = list(triples)
    sib = symbolic_relations(triples)["sibling"]
    spouses = {(t.a, t.b) for t in triples if t.relation == "spouse"}
    return sorted({tuple(sorted(p)) for p in spouses if p in sib})


def encode_family(group: FamilyGroup | Sequence[FamilyTriple]) -> RelationTable:
    triples = list(group.triples if isinstance(group, FamilyGroup) else group)
    cycle = find_cycle(triples)
    if cycle:
        raise FamilyDataError("parent/child cycle: " + " -> ".join(cycle))
    bad = axiom_violations(triples)
    if bad:
        raise FamilyDataError("siblings recorded as spouses: " + ", ".join(f"{a}/{b}" for a, b in bad))
    members = sorted({x for t in triples for x in (t.a, t.b)})
    table = RelationTable(members)
    try:
        for t in triples:
            pc = t.parent_child()
            if pc:
                table.add(pc[1], pc[0], Rel.P)
            else:
                table.add(t.a, t.b, Rel.O)
        for p, children in sorted(_children_of(triples).items()):
            kids = sorted(children)
            for i, a in enumerate(kids):
                for b in kids[i + 1:]:
                    table.add(a, b, Rel.D)
    except ValueError as exc:
        raise FamilyDataError(str(exc)) from None
    return table


def _children_of(triples) -> dict[str, set[str]]:
    out: dict[str, set[str]] = defaultdict(set)
    for child, ps in _parents_of(triples).items():
        for p in ps:
            out[p].add(child)
    return out


# -- compound relations over arbitrary primitives ------------------------------

class _Model:
    """Compound relations expanded over ``members`` from two primitives."""

    def __init__(self, members: Sequence[str], parent: Callable[[str, str], bool], spouse: Callable[[str, str], bool]):
        self.members = list(members)
        self.parent = parent
        self.spouse = spouse

    def child(self, p, e):
        return self.parent(e, p)

    def sibling(self, p, e):
        return p != e and any(self.child(p, s) and self.child(e, s) for s in self.members)

    def grandparent(self, p, e):
        return any(self.parent(p, m) and self.parent(m, e) for m in self.members)

    def grandchild(self, p, e):
        return self.grandparent(e, p)

    def siblingInLaw(self, p, e):
        return any(self.sibling(b, e) and self.spouse(p, b) for b in self.members)

    def auntOrUncle(self, p, e):
        return any(self.parent(m, e) and (self.sibling(p, m) or self.siblingInLaw(p, m)) for m in self.members)

    def nibling(self, p, e):
        return any(self.sibling(s, e) and self.child(p, s) for s in self.members)

    def cousin(self, p, e):
        return p != e and any(self.auntOrUncle(a, e) and self.child(p, a) for a in self.members)

    def childInLaw(self, p, e):
        return any(self.child(d, e) and self.spouse(p, d) for d in self.members)

    def check(self, name: str, a: str, b: str) -> bool:
        if name not in COMPOUND:
            raise ValueError(f"unknown compound relation {name!r}")
        return getattr(self, name)(a, b)


class GeometricFamily(_Model):
    """Primitive relations read from a solved diagram."""

    def __init__(self, diagram: Mapping[str, Ball] | Sequence[Ball], members: Sequence[str] | None = None):
        balls = dict(diagram) if isinstance(diagram, Mapping) else {b.label: b for b in diagram}
        members = list(members) if members is not None else sorted(balls)
        missing = [x for x in members if x not in balls]
        if missing:
            raise KeyError(f"persons missing from the diagram: {missing}")
        self.balls = balls
        self._inside = {
            (x, y): holds(Rel.P, balls[x], balls[y]) and not holds(Rel.P, balls[y], balls[x])
            for x in members
            for y in members
            if x != y
        }
        self._parent: dict[tuple[str, str], bool] = {}
        super().__init__(members, self._geo_parent, self._geo_spouse)

    def _geo_parent(self, p, e):
        key = (p, e)
        if key not in self._parent:
            ok = self._inside.get((e, p), False) and not any(
                self._inside.get((e, m), False) and self._inside.get((m, p), False)
                for m in self.members
                if m not in (e, p)
            )
            self._parent[key] = ok
        return self._parent[key]

    def _geo_spouse(self, a, b):
        return a != b and classify(self.balls[a], self.balls[b]) is Rel.O


def check_relation(query: CompoundQuery, diagram, members: Sequence[str] | None = None) -> bool:
    balls = dict(diagram) if isinstance(diagram, Mapping) else {b.label: b for b in diagram}
    for x in (query.a, query.b):
        if x not in balls:
            raise KeyError(f"person {x!r} is not in the diagram")
    return GeometricFamily(balls, members).check(query.name, query.a, query.b)


def symbolic_relations(triples: Iterable[FamilyTriple]) -> dict[str, set[tuple[str, str]]]:
    """Every compound relation as a set of (a, b) pairs, by joins over the triples."""
    triples = list(triples)
    parent = set()
    spouse = set()
    for t in triples:
        pc = t.parent_child()
        if pc:
            parent.add(pc)
        else:
            spouse.update({(t.a, t.b), (t.b, t.a)})
    child = {(e, p) for p, e in parent}

    def join(r1, r2):
        # {(x, z) : (x, y) in r1 and (y, z) in r2}
        by_first = defaultdict(set)
        for y, z in r2:
            by_first[y].add(z)
        return {(x, z) for x, y in r1 for z in by_first.get(y, ())}

    def inverse(r):
        return {(b, a) for a, b in r}

    sibling = {(a, b) for a, b in join(child, parent) if a != b}
    rel = {
        "sibling": sibling,
        "grandparent": join(parent, parent),
    }
    rel["grandchild"] = inverse(rel["grandparent"])
    rel["siblingInLaw"] = join(spouse, sibling)
    rel["auntOrUncle"] = join(sibling | rel["siblingInLaw"], parent)
    rel["nibling"] = join(child, sibling)
    rel["cousin"] = {(a, b) for a, b in join(child, rel["auntOrUncle"]) if a != b}
    rel["childInLaw"] = join(spouse, child)
    return rel


def symbolic_check(query: CompoundQuery, triples: Iterable[FamilyTriple]) -> bool:
    return (query.a, query.b) in symbolic_relations(triples)[query.name]


# -- assertions, synthetic data and evaluation --------------------------------

def true_assertions(group: FamilyGroup) -> list[CompoundQuery]:
    rel = symbolic_relations(group.triples)
    return [CompoundQuery(name, a, b) for name in COMPOUND for a, b in sorted(rel[name])]


def corrupt(query: CompoundQuery, group: FamilyGroup, rng: np.random.Generator) -> CompoundQuery | None:
    """Swap one argument for another member so the assertion becomes false."""
    rel = symbolic_relations(group.triples)[query.name]
    options = []
    for pos in (0, 1):
        for x in group.members:
            a, b = (x, query.b) if pos == 0 else (query.a, x)
            if a != b and x not in (query.a, query.b) and (a, b) not in rel:
                options.append(CompoundQuery(query.name, a, b))
    if not options:
        return None
    return options[int(rng.integers(len(options)))]


def make_assertions(group: FamilyGroup, seed: int = 0) -> list[tuple[CompoundQuery, CompoundQuery | None]]:
    rng = np.random.default_rng(seed)
    return [(q, corrupt(q, group, rng)) for q in true_assertions(group)]


def synthetic_family(size: int, rng: np.random.Generator, in_law_rate: float = 0.0, prefix: str = "") -> list[FamilyTriple]:
    """Triples for one connected family of exactly ``size`` persons.

    Founders are a single person or a couple; later members are children of
    a blood member (listing the member's spouse too when there is one) or,
    with probability ``in_law_rate``, a spouse marrying into an unmarried
    blood member.
    """
    if size < 2:
        raise ValueError("a family needs at least two persons")
    names = [f"{prefix}p{i}" for i in range(size)]
    triples: list[FamilyTriple] = []
    spouse_of: dict[str, str] = {}
    blood = [names[0]]
    made = 1
    if size >= 3 and rng.random() < 0.5:
        spouse_of[names[0]], spouse_of[names[1]] = names[1], names[0]
        triples.append(FamilyTriple("spouse", names[0], names[1]))
        made = 2
    while made < size:
        new = names[made]
        single = [b for b in blood if b not in spouse_of]
        if in_law_rate > 0 and single and len(blood) > 1 and rng.random() < in_law_rate:
            mate = single[int(rng.integers(len(single)))]
            spouse_of[mate], spouse_of[new] = new, mate
            triples.append(FamilyTriple("spouse", mate, new))
        else:
            par = blood[int(rng.integers(len(blood)))]
            kind = "child" if rng.random() < 0.5 else "parent"
            for p in (par, spouse_of.get(par)):
                if p is None:
                    continue
                triples.append(FamilyTriple("child", new, p) if kind == "child" else FamilyTriple("parent", p, new))
            blood.append(new)
        made += 1
    return triples


@dataclass
class GroupOutcome:
    size: int
    members: tuple[str, ...]
    converged: bool
    loss: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    excluded: str | None = None
    mismatches: list[str] = field(default_factory=list)


def _pr(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return precision, recall, (tp + fp == 0 or tp + fn == 0)


def evaluate_group(group: FamilyGroup, assertions, config: SolverConfig) -> GroupOutcome:
    try:
        table = encode_family(group)
    except FamilyDataError as exc:
        return GroupOutcome(group.size, group.members, False, float("nan"), excluded=str(exc))
    report = solve(table, config)
    model = GeometricFamily(report.balls, group.members)
    out = GroupOutcome(group.size, group.members, report.converged, report.loss)
    for true_q, false_q in assertions:
        if model.check(true_q.name, true_q.a, true_q.b):
            out.tp += 1
        else:
            out.fn += 1
            out.mismatches.append(f"missed {true_q}")
        if false_q is not None:
            if model.check(false_q.name, false_q.a, false_q.b):
                out.fp += 1
                out.mismatches.append(f"accepted {false_q}")
            else:
                out.tn += 1
    return out


def _evaluate_indexed(args):
    return evaluate_group(*args)


def assign_assertions(groups: Sequence[FamilyGroup], pairs) -> list[list]:
    where = {m: i for i, g in enumerate(groups) for m in g.members}
    buckets: list[list] = [[] for _ in groups]
    for true_q, false_q in pairs:
        gi = where.get(true_q.a)
        qs = [true_q] + ([false_q] if false_q is not None else [])
        if gi is None or any(where.get(x) != gi for q in qs for x in (q.a, q.b)):
            raise ValueError(f"assertion {true_q} does not stay inside one family group")
        buckets[gi].append((true_q, false_q))
    return buckets


@dataclass
class FamilyEvaluation:
    outcomes: list[GroupOutcome]

    def by_size(self) -> dict[int, dict]:
        rows: dict[int, dict] = {}
        for o in self.outcomes:
            if o.excluded:
                continue
            r = rows.setdefault(o.size, {"groups": 0, "converged": 0, "tp": 0, "fp": 0, "fn": 0, "tn": 0})
            r["groups"] += 1
            r["converged"] += o.converged
            for k in ("tp", "fp", "fn", "tn"):
                r[k] += getattr(o, k)
        for r in rows.values():
            r["precision"], r["recall"], r["vacuous"] = _pr(r["tp"], r["fp"], r["fn"])
            judged = r["tp"] + r["fp"] + r["fn"] + r["tn"]
            r["accuracy"] = (r["tp"] + r["tn"]) / judged if judged else 1.0
        return dict(sorted(rows.items()))

    def overall(self) -> dict:
        kept = [o for o in self.outcomes if not o.excluded]
        tp, fp, fn, tn = (sum(getattr(o, k) for o in kept) for k in ("tp", "fp", "fn", "tn"))
        precision, recall, vacuous = _pr(tp, fp, fn)
        judged = tp + fp + fn + tn
        return {
            "accuracy": (tp + tn) / judged if judged else 1.0,
            "groups": len(kept),
            "excluded": len(self.outcomes) - len(kept),
            "non_converged": sum(not o.converged for o in kept),
            "precision": precision,
            "recall": recall,
            "vacuous": vacuous,
        }


def evaluate_family_dataset(
    groups: Sequence[FamilyGroup],
    assertions,
    config: SolverConfig | None = None,
    jobs: int = 1,
) -> FamilyEvaluation:
    """Solve each group and score its assertions; group ``i`` uses seed ``config.seed + i``.

    ``assertions`` is either one list of (true, false) pairs for all groups
    or a per-group list of such lists.
    """
    config = config or SolverConfig()
    groups = list(groups)
    assertions = list(assertions)
    if len(assertions) != len(groups) or (assertions and not isinstance(assertions[0], list)):
        assertions = assign_assertions(groups, assertions)
    work = [
        (g, a, SolverConfig(**{**config.__dict__, "seed": config.seed + i}))
        for i, (g, a) in enumerate(zip(groups, assertions))
    ]
    if jobs > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_indexed, work))
    else:
        outcomes = [_evaluate_indexed(w) for w in work]
    return FamilyEvaluation(outcomes)


def family_statistics(groups: Sequence[FamilyGroup], assertions_per_group) -> dict[int, dict]:
    """Per member-count row: number of families, triples, true and false assertions."""
    rows: dict[int, dict] = {}
    for g, pairs in zip(groups, assertions_per_group):
        r = rows.setdefault(g.size, {"families": 0, "triples": 0, "true_assertions": 0, "false_assertions": 0})
        r["families"] += 1
        r["triples"] += len(g.triples)
        r["true_assertions"] += len(pairs)
        r["false_assertions"] += sum(f is not None for _, f in pairs)
    return dict(sorted(rows.items()))
