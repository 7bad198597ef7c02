"""Readers and writers for case files, family triples, assertions, taxonomies and reports.

All text is UTF-8.  Lines starting with ``#`` are comments in every line
format.  Parsers raise :class:`ParseError` (a ``ValueError``) with the
offending line number and nothing else.
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from eulerball.family import COMPOUND, CompoundQuery, FamilyTriple
from eulerball.optimizer import SolveReport
from eulerball.syllogism import Form, Statement, TestCase


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _text(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        try:
            return bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8 ({exc.reason} at byte {exc.start})") from None
    return data


def _lines(data):
    for no, raw in enumerate(_text(data).splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield no, line


# -- syllogism cases -----------------------------------------------------------

_FORMS = {f.value: f for f in Form}


def _statement(text: str, no: int) -> Statement:
    parts = text.split()
    if len(parts) != 3:
        raise ParseError(f"expected '<quantifier> <term> <term>', got {text.strip()!r}", no)
    form = _FORMS.get(parts[0])
    if form is None:
        raise ParseError(f"unknown quantifier {parts[0]!r}; expected all, some, no or some-not", no)
    try:
        return Statement(form, parts[1], parts[2])
    except ValueError as exc:
        raise ParseError(str(exc), no) from None


def parse_case_line(line: str, no: int = 1) -> TestCase:
    if line.count(":") != 1 or line.count(";") != 1:
        raise ParseError("a case needs exactly one ':' and one ';'", no)
    premises, conclusions = line.split(":")
    if ";" in premises:
        raise ParseError("';' must come after ':'", no)
    parts = premises.split(",")
    if len(parts) != 2:
        raise ParseError(f"expected 2 premises separated by ',', got {len(parts)}", no)
    true_c, false_c = conclusions.split(";")
    try:
        return TestCase(
            (_statement(parts[0], no), _statement(parts[1], no)),
            _statement(true_c, no),
            _statement(false_c, no),
        )
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc), no) from None


def parse_case_file(data) -> list[TestCase]:
    return [parse_case_line(line, no) for no, line in _lines(data)]


def format_case(case: TestCase) -> str:
    return str(case)


def format_case_file(cases) -> str:
    return "".join(f"{c}\n" for c in cases)


# -- family triples and assertions ---------------------------------------------

def parse_triples(data) -> list[FamilyTriple]:
    """Tab-separated ``relation person person`` lines; duplicates are dropped with a warning."""
    out: list[FamilyTriple] = []
    seen = set()
    for no, line in _lines(data):
        parts = line.split("\t")
        if len(parts) != 3 or not all(p.strip() for p in parts):
            raise ParseError("expected 'relation<TAB>person<TAB>person'", no)
        try:
            t = FamilyTriple(*(p.strip() for p in parts))
        except ValueError as exc:
            raise ParseError(str(exc), no) from None
        if t in seen:
            warnings.warn(f"line {no}: duplicate triple {t.relation} {t.a} {t.b} dropped", stacklevel=2)
            continue
        seen.add(t)
        out.append(t)
    return out


def format_triples(triples) -> str:
    return "".join(f"{t.relation}\t{t.a}\t{t.b}\n" for t in triples)


def _query(text: str, no: int) -> CompoundQuery:
    parts = text.split()
    if len(parts) != 3:
        raise ParseError(f"expected '<relation> <person> <person>', got {text.strip()!r}", no)
    if parts[0] not in COMPOUND:
        raise ParseError(f"unknown relation {parts[0]!r}; expected one of {', '.join(COMPOUND)}", no)
    return CompoundQuery(*parts)


def parse_assertions(data) -> list[tuple[CompoundQuery, CompoundQuery | None]]:
    """Lines ``<true assertion>; <false assertion>``; the false half may be left out."""
    out = []
    for no, line in _lines(data):
        if line.count(";") > 1:
            raise ParseError("at most one ';' per line", no)
        true_part, _, false_part = line.partition(";")
        false_q = _query(false_part, no) if false_part.strip() else None
        out.append((_query(true_part, no), false_q))
    return out


def format_assertions(pairs) -> str:
    return "".join(f"{t}; {f}\n" if f is not None else f"{t}\n" for t, f in pairs)


# -- taxonomy ------------------------------------------------------------------

@dataclass
class Taxonomy:
    """Hypernym pairs ``(child, parent)``; must be acyclic."""

    pairs: list[tuple[str, str]]
    terms: set[str] = field(init=False)

    def __post_init__(self):
        self.terms = {t for p in self.pairs for t in p}
        direct: dict[str, set[str]] = {t: set() for t in self.terms}
        for c, p in self.pairs:
            if c == p:
                raise ValueError(f"term {c!r} is its own hypernym")
            direct[c].add(p)
        self._anc: dict[str, frozenset[str]] = {}
        visiting: set[str] = set()

        def up(t):
            if t in self._anc:
                return self._anc[t]
            if t in visiting:
                raise ValueError(f"hypernym cycle through {t!r}")
            visiting.add(t)
            acc = set()
            for p in direct[t]:
                acc.add(p)
                acc |= up(p)
            visiting.discard(t)
            self._anc[t] = frozenset(acc)
            return self._anc[t]

        for t in sorted(self.terms):
            up(t)
        self._below: dict[str, set[str]] = {t: {t} for t in self.terms}
        for t, anc in self._anc.items():
            for a in anc:
                self._below[a].add(t)

    def ancestors(self, term: str) -> frozenset[str]:
        return self._anc[term]

    def truth(self, form: Form, x: str, y: str) -> bool:
        """Truth of ``form x y`` reading each term as the set of terms at or below it."""
        if x == y:
            return False
        if form is Form.ALL:
            return y in self._anc[x]
        if form is Form.SOME_NOT:
            return y not in self._anc[x]
        shared = bool(self._below[x] & self._below[y])
        return shared if form is Form.SOME else not shared


def parse_taxonomy(data) -> Taxonomy:
    pairs = []
    for no, line in _lines(data):
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ParseError("expected 'child<TAB>parent'", no)
        pairs.append((parts[0].strip(), parts[1].strip()))
    try:
        return Taxonomy(pairs)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


# -- reports -------------------------------------------------------------------

def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_report(report: SolveReport) -> str:
    return dumps(report.to_dict())


def read_report(text: str) -> SolveReport:
    return SolveReport.from_dict(json.loads(text))


def write_atomic(path, text: str) -> None:
    """Write ``text`` next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_bytes_atomic(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- bundled samples -----------------------------------------------------------

def sample_text(name: str) -> str:
    return resources.files("eulerball.data").joinpath(name).read_text(encoding="utf-8")


def sample_taxonomy() -> Taxonomy:
    return parse_taxonomy(sample_text("taxonomy.tsv"))


def sample_triples() -> list[FamilyTriple]:
    return parse_triples(sample_text("families.tsv"))


def sample_assertions():
    return parse_assertions(sample_text("family_assertions.txt"))


def sample_cases() -> list[TestCase]:
    return parse_case_file(sample_text("syllogism_sample.txt"))
