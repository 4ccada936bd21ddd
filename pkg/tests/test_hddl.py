import pytest

from htnlearn.benchmarks import NAMES, ROOT, load_benchmark
from htnlearn.hddl import (HDDLSemanticError, HDDLSyntaxError, load_domain, parse_domain, parse_problem,
                           print_domain, print_problem)

from conftest import DATA

GOLDEN = DATA / "golden" / "gripper_learned.hddl"


@pytest.mark.parametrize("name", NAMES)
def test_benchmark_round_trip(name):
    entry = load_benchmark(name)
    text = print_domain(entry.domain)
    assert parse_domain(text) == entry.domain
    assert print_domain(parse_domain(text)) == text
    for p in entry.problems:
        assert parse_problem(print_problem(p), entry.domain) == p


@pytest.mark.parametrize("name", NAMES)
def test_raw_files_parse_to_same_domain_as_printed(name):
    raw = (ROOT / name / "domain.hddl").read_text()
    assert parse_domain(print_domain(parse_domain(raw))) == parse_domain(raw)


def test_golden_learned_domain_round_trips_and_has_method_blocks():
    text = GOLDEN.read_text()
    d = parse_domain(text)
    assert print_domain(d) == text
    assert len(d.methods) == 4
    for part in (":method", ":task", ":precondition", ":ordered-subtasks"):
        assert part in text


def test_gripper_problem_network():
    entry = load_benchmark("gripper")
    p = entry.problems[0]
    assert p.initial_network and all(t.name == "move2balls" for t in p.initial_network)


BASE = """(define (domain d) (:requirements :typing :hierarchy)
  (:types thing - object)
  (:predicates (on ?x - thing))
  (:task t :parameters (?x - thing))
  (:action a :parameters (?x - thing) :precondition (and %s) :effect (and (on ?x))))"""


def test_undeclared_predicate_is_named():
    with pytest.raises(HDDLSemanticError) as err:
        parse_domain(BASE % "(under ?x)")
    assert err.value.item == "under"


def test_syntax_error_position():
    with pytest.raises(HDDLSyntaxError) as err:
        parse_domain("(define (domain d)\n  (:predicates (p)")
    assert err.value.line >= 1


def test_problem_errors():
    d = parse_domain(BASE % "")
    with pytest.raises(HDDLSemanticError):
        parse_problem("(define (problem p) (:domain d) (:objects x - widget) (:init))", d)
    p = parse_problem("(define (problem p) (:domain d) (:objects x - thing)"
                      " (:htn :parameters () :ordered-subtasks ()) (:init))", d)
    assert p.initial_network == ()


def test_printing_is_deterministic():
    d = load_domain(GOLDEN)
    assert print_domain(d) == print_domain(d)
