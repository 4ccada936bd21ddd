"""Learning HTN methods and STRIPS operators from annotated, partially observed traces."""
from .benchmarks import BenchmarkEntry, load_benchmark
from .dfa import RPNI, TaskDFA, rpni_learn
from .estimator import HTNDomainLearner
from .hddl import DomainFile, ProblemFile, load_domain, load_problem, parse_domain, parse_problem, print_domain
from .planning import EvalReport, Plan, PlannerLimits, accuracy, plan, validate
from .oracle import Oracle
from .sampling import CorruptionConfig, SampleSet, corrupt_samples, generate

__version__ = "0.1.0"

__all__ = [
    "BenchmarkEntry", "CorruptionConfig", "DomainFile", "EvalReport", "HTNDomainLearner", "Oracle", "Plan", "PlannerLimits",
    "ProblemFile", "RPNI", "SampleSet", "TaskDFA", "accuracy", "corrupt_samples", "generate", "load_benchmark",
    "load_domain", "load_problem", "parse_domain", "parse_problem", "plan", "print_domain", "rpni_learn", "validate",
]
