import functools
import random
from pathlib import Path

import pytest

from htnlearn.benchmarks import load_benchmark
from htnlearn.dfa import add_compound_transitions, rpni_learn
from htnlearn.hddl import load_domain, load_problem
from htnlearn.logic import Observation, Task
from htnlearn.oracle import Oracle
from htnlearn.sampling import AnnotatedTrace, SampleSet, domain_signature, generate

DATA = Path(__file__).parent / "data"


def toy():
    d = load_domain(DATA / "toy" / "domain.hddl")
    return d, load_problem(DATA / "toy" / "p01.hddl", d)


@functools.lru_cache(maxsize=None)
def bench_oracle(name: str) -> Oracle:
    entry = load_benchmark(name)
    return Oracle(entry.domain, entry.problems[0])


@functools.lru_cache(maxsize=None)
def bench_samples(name: str, size: int, seed: int) -> SampleSet:
    return generate(bench_oracle(name), size, random.Random(seed))


@functools.lru_cache(maxsize=None)
def bench_dfa(name: str, size: int, seed: int):
    ss = bench_samples(name, size, seed)
    return add_compound_transitions(rpni_learn(ss), ss)


def seq(text: str):
    """'ab' -> (a, b) as parameterless primitive tasks."""
    return tuple(Task(c, (), True) for c in text)


def sequence_samples(positive, negative) -> SampleSet:
    """Observation-free samples over the toy vocabulary."""
    d, p = toy()
    traces = [AnnotatedTrace(Observation(), [(t, Observation()) for t in seq(s)]) for s in positive]
    return SampleSet(traces, [seq(s) for s in negative], domain_signature(d), p.objects, frozenset(p.init))


@pytest.fixture
def toy_domain():
    return toy()


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            lines += [v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance" and rep.when == "call"]
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
