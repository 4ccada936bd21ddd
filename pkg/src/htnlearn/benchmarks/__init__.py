"""Shipped ground-truth domains and problem templates."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

from ..hddl import DomainFile, ProblemFile, load_domain, load_problem

ROOT = Path(__file__).resolve().parent

# (primitive tasks, compound tasks, methods, predicates)
EXPECTED_COUNTS = {
    "gripper": (3, 3, 4, 4),
    "blocksworld": (4, 4, 8, 5),
    "childsnack": (6, 1, 2, 12),
}
NAMES = tuple(sorted(EXPECTED_COUNTS))


class UnknownBenchmarkError(KeyError):
    pass


class CountMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkEntry:
    name: str
    domain: DomainFile
    problems: Tuple[ProblemFile, ...]
    expected_counts: Tuple[int, int, int, int]
    path: Path

    @property
    def counts(self) -> Tuple[int, int, int, int]:
        return domain_counts(self.domain)


def domain_counts(d: DomainFile) -> Tuple[int, int, int, int]:
    return len(d.operators), len(d.tasks), len(d.methods), len(d.predicates)


def load_benchmark(name: str) -> BenchmarkEntry:
    if name not in EXPECTED_COUNTS:
        raise UnknownBenchmarkError(f"unknown benchmark {name!r}; shipped: {', '.join(NAMES)}")
    folder = ROOT / name
    domain = load_domain(folder / "domain.hddl")
    problems = tuple(load_problem(p, domain) for p in sorted(folder.glob("p*.hddl")))
    counts = domain_counts(domain)
    if counts != EXPECTED_COUNTS[name]:
        raise CountMismatchError(f"{name}: counts {counts} != expected {EXPECTED_COUNTS[name]}")
    return BenchmarkEntry(name, domain, problems, EXPECTED_COUNTS[name], folder)
