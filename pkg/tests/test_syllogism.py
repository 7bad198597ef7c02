from itertools import combinations, product

import numpy as np
import pytest

from eulerball.dataio import Taxonomy
from eulerball.geometry import Ball, Rel
from eulerball.optimizer import SolverConfig
from eulerball.syllogism import (
    CATALOG,
    GROUPS,
    STRUCTURES,
    Form,
    Statement,
    TestCase as Case,
    accuracy_by_group,
    encode_premises,
    evaluate_statement,
    generate_cases,
    group_of,
    identify_group,
    run_case,
    run_cases,
    structure,
)

NAMES = (
    "Barbara Barbari Celarent Cesare Calemes Camestres Darii Datisi Darapti Disamis Dimatis Baroco "
    "Cesaro Celaront Camestros Calemos Bocardo Bamalip Ferio Festino Ferison Fresison Felapton Fesapo"
).split()

# inhabited Venn regions over (s, m, p); a region is the set of terms it belongs to
REGIONS = [frozenset(c) for r in (1, 2, 3) for c in combinations("smp", r)]


def sat(form, x, y, model):
    if form is Form.ALL:
        return not any(x in r and y not in r for r in model)
    if form is Form.SOME:
        return any(x in r and y in r for r in model)
    if form is Form.NO:
        return not any(x in r and y in r for r in model)
    return any(x in r and y not in r for r in model)


def entailed(premises, conclusion) -> bool:
    """Valid over every model with non-empty terms, by enumerating region subsets."""
    for bits in product((0, 1), repeat=len(REGIONS)):
        model = [r for r, b in zip(REGIONS, bits) if b]
        if not all(any(t in r for r in model) for t in "smp"):
            continue
        if all(sat(*p, model) for p in premises) and not sat(*conclusion, model):
            return False
    return True


def test_catalog_has_the_24_named_structures_in_order():
    assert [s.name for s in CATALOG] == NAMES
    assert [s.number for s in CATALOG] == list(range(1, 25))


@pytest.mark.parametrize("st", CATALOG, ids=lambda s: s.name)
def test_every_structure_is_valid_under_set_semantics(st):
    assert entailed(st.premises, st.conclusion)
    f, x, y = st.conclusion
    assert not entailed(st.premises, (f.contradictory, x, y))


def test_fourteen_groups_partition_the_catalog():
    assert len(GROUPS) == 14
    members = [s.name for ms in GROUPS.values() for s in ms]
    assert sorted(members) == sorted(NAMES)
    assert group_of("Cesare") == "Celarent_Cesare"
    assert group_of("Fresison") == "Ferio_Festino_Ferison_Fresison"
    assert set(GROUPS) >= {"Barbara", "Barbari", "Celarent_Cesare", "Calemes_Camestres"}


@pytest.mark.parametrize("st", CATALOG, ids=lambda s: s.name)
def test_instantiated_structures_are_identified(st):
    case = st.instantiate("cat", "mammal", "animal")
    assert identify_group(case) == group_of(st.name)
    assert case.false_conclusion == case.true_conclusion.negated()


def test_unknown_structure_lists_the_names():
    with pytest.raises(KeyError) as err:
        structure("Barbaro")
    assert "Fesapo" in str(err.value)


def test_encoding():
    st = STRUCTURES["Bocardo"].instantiate("s", "m", "p")
    table = encode_premises(st.premises)
    assert table.target("m", "s") is Rel.P and table.target("m", "p") is Rel.O


def test_statement_reading_on_a_fixed_diagram():
    d = {
        "in": Ball.from_center("in", [0, 0], 0.5),
        "out": Ball.from_center("out", [0, 0], 2),
        "far": Ball.from_center("far", [5, 0], 1),
        "cut": Ball.from_center("cut", [2.5, 0], 1),
    }
    assert evaluate_statement(Statement(Form.ALL, "in", "out"), d)
    assert not evaluate_statement(Statement(Form.SOME_NOT, "in", "out"), d)
    assert evaluate_statement(Statement(Form.SOME_NOT, "out", "in"), d)
    assert evaluate_statement(Statement(Form.NO, "far", "out"), d)
    assert evaluate_statement(Statement(Form.SOME, "cut", "out"), d)
    assert evaluate_statement(Statement(Form.SOME, "out", "cut"), list(d.values()))
    with pytest.raises(KeyError):
        evaluate_statement(Statement(Form.ALL, "in", "nowhere"), d)


def test_statement_needs_two_terms():
    with pytest.raises(ValueError):
        Statement(Form.ALL, "a", "a")
    with pytest.raises(ValueError):
        Case((Statement(Form.ALL, "a", "b"), Statement(Form.ALL, "b", "c")),
             Statement(Form.ALL, "a", "z"), Statement(Form.SOME_NOT, "a", "z"))


@pytest.mark.parametrize("st", CATALOG, ids=lambda s: s.name)
def test_each_structure_is_reasoned_correctly(st):
    result = run_case(st.instantiate("s", "m", "p"), SolverConfig(seed=st.number))
    assert result.converged and result.correct


TAXONOMY = Taxonomy([("cat", "mammal"), ("dog", "mammal"), ("mammal", "animal"),
                     ("trout", "fish"), ("fish", "animal"), ("oak", "plant"),
                     ("animal", "organism"), ("plant", "organism")])


def test_taxonomy_truth():
    t = TAXONOMY
    assert t.truth(Form.ALL, "cat", "animal") and not t.truth(Form.ALL, "animal", "cat")
    assert t.truth(Form.NO, "cat", "trout") and t.truth(Form.SOME, "animal", "mammal")
    assert t.truth(Form.SOME_NOT, "animal", "cat") and not t.truth(Form.SOME_NOT, "cat", "animal")


def test_generated_cases_have_true_premises_and_conclusions():
    cases = generate_cases(TAXONOMY, "Barbara", 5, seed=2)
    assert len(set(cases)) == 5
    for c in cases:
        for s in c.premises + (c.true_conclusion,):
            assert TAXONOMY.truth(s.form, s.subject, s.object)
    assert cases == generate_cases(TAXONOMY, "Barbara", 5, seed=2)


def test_generation_edge_cases():
    assert generate_cases(TAXONOMY, "Celarent", 0) == []
    with pytest.raises(ValueError, match="short by"):
        generate_cases(TAXONOMY, "Barbara", 10_000)
    with pytest.raises(KeyError):
        generate_cases(TAXONOMY, "Nope", 1)


def test_results_do_not_depend_on_jobs():
    cases = [st.instantiate("s", "m", "p") for st in CATALOG[:6]]
    cfg = SolverConfig(seed=9)
    a = [r.to_dict() for r in run_cases(cases, cfg, jobs=1)]
    b = [r.to_dict() for r in run_cases(cases, cfg, jobs=2)]
    assert a == b


def test_accuracy_by_group_counts():
    cases = [STRUCTURES[n].instantiate(*t) for n, t in
             [("Barbara", "abc"), ("Barbara", "xyz"), ("Cesare", "abc")]]
    groups = accuracy_by_group(run_cases(cases, SolverConfig(seed=0)))
    assert groups["Barbara"]["cases"] == 2 and groups["Celarent_Cesare"]["cases"] == 1
    assert all(g["accuracy"] == 1.0 for g in groups.values())


def test_geometric_reading_agrees_with_set_semantics_on_random_diagrams():
    # a diagram of three balls is a set model; the reading must be consistent with it
    rng = np.random.default_rng(0)
    for _ in range(300):
        balls = {t: Ball(t, np.append(rng.uniform(-1, 1, 2), rng.uniform(-0.6, 0.6))) for t in "smp"}
        for x, y in (("s", "m"), ("m", "p"), ("s", "p")):
            for f in Form:
                assert evaluate_statement(Statement(f, x, y), balls) != evaluate_statement(Statement(f.contradictory, x, y), balls)
