"""Seeded end-to-end runs: sample, corrupt, learn, emit, evaluate, aggregate."""
from __future__ import annotations

import csv
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .benchmarks import NAMES, load_benchmark
from .estimator import MODES, HTNDomainLearner
from .hddl import DomainFile, ProblemFile, load_domain, load_problem, parse_domain, print_domain, print_problem
from .induction import learning_report
from .oracle import Oracle
from .planning import EvalReport, PlannerLimits, accuracy, generate_eval_problems
from .sampling import CorruptionConfig, SampleSet, corrupt_samples, generate
from .validation import check_fraction, check_positive_int

AGGREGATE_COLUMNS = ("domain", "mode", "size", "observability", "noise", "seed", "accuracy", "methods_learned",
                     "operators_learned", "runtime_ms")
EVAL_SEED_OFFSET = 10_000


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    domain: str = "gripper"  # benchmark name or path to a domain file
    problem: Optional[str] = None  # training template; defaults to the benchmark's first problem
    mode: str = "methods-only"
    sizes: Tuple[int, ...] = (600,)
    observability: float = 1.0
    noise: float = 0.0
    seeds: Tuple[int, ...] = ()
    repetitions: int = 5
    eval_problems: int = 20
    out: str = "runs"
    jobs: int = 1
    tabu_budget: int = 1000
    planner_seconds: float = 60.0
    planner_nodes: int = 1_000_000

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        self.seeds = tuple(int(s) for s in self.seeds)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        check_fraction(self.observability, "observability")
        check_fraction(self.noise, "noise")
        if not self.sizes:
            raise ValueError("at least one training size is needed")
        for s in self.sizes:
            check_positive_int(s, "size")
        for name in ("repetitions", "eval_problems", "jobs", "tabu_budget", "planner_nodes"):
            check_positive_int(getattr(self, name), name)
        if self.planner_seconds <= 0:
            raise ValueError("planner_seconds must be positive")
        return self

    @property
    def seed_list(self) -> Tuple[int, ...]:
        return self.seeds or tuple(range(self.repetitions))

    @property
    def limits(self) -> PlannerLimits:
        return PlannerLimits(max_nodes=self.planner_nodes, max_seconds=self.planner_seconds)

    @property
    def domain_name(self) -> str:
        return self.domain if self.domain in NAMES else Path(self.domain).stem

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]


def load_truth(cfg: RunConfig) -> Tuple[DomainFile, ProblemFile, List[ProblemFile]]:
    """(truth domain, training template, evaluation templates)."""
    if cfg.domain in NAMES:
        entry = load_benchmark(cfg.domain)
        domain, templates = entry.domain, list(entry.problems)
    else:
        domain = load_domain(cfg.domain)
        templates = [] if cfg.problem is None else [load_problem(cfg.problem, domain)]
    if cfg.problem is not None and cfg.domain in NAMES:
        train = load_problem(cfg.problem, domain)
    elif templates:
        train = templates[0]
    else:
        raise ValueError("a problem file is needed with a custom domain")
    return domain, train, templates


def make_samples(truth: DomainFile, template: ProblemFile, size: int, seed: int, observability: float,
                 noise: float) -> SampleSet:
    oracle = Oracle(truth, template)
    clean = generate(oracle, size, random.Random(seed))
    return corrupt_samples(clean, CorruptionConfig(observability, noise, seed + 1), oracle.universe)


def cell_name(cfg: RunConfig, size: int, seed: int) -> str:
    return f"{cfg.domain_name}-{cfg.mode}-n{size}-o{cfg.observability:g}-e{cfg.noise:g}-s{seed}"


@dataclass
class CellResult:
    row: Dict[str, object]
    directory: str
    report: Optional[EvalReport] = field(default=None, repr=False)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage named
        raise StageError(name, exc) from exc


def learn_cell(cfg: RunConfig, size: int, seed: int, truth=None, template=None) -> Tuple[HTNDomainLearner, Path]:
    """Sample, learn and write the learned domain, DFA and report for one cell."""
    if truth is None:
        truth, template, _ = _stage("load", load_truth, cfg)
    samples = _stage("sample", make_samples, truth, template, size, seed, cfg.observability, cfg.noise)
    learner = HTNDomainLearner(mode=cfg.mode, noise=cfg.noise, tabu_budget=cfg.tabu_budget, seed=seed)
    _stage("learn", learner.fit, samples, known_operators=truth.operators)
    folder = Path(cfg.out) / cell_name(cfg, size, seed)
    _stage("emit", _emit, learner, truth, folder)
    return learner, folder


def _emit(learner: HTNDomainLearner, truth: DomainFile, folder: Path) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    text = print_domain(learner.domain_)
    if parse_domain(text) != learner.domain_:
        raise ValueError("learned domain does not parse back to itself")
    (folder / "domain.hddl").write_text(text, encoding="utf-8")
    (folder / "dfa.txt").write_text(learner.dfa_.export(), encoding="utf-8")
    lines = [f"pta nodes: {learner.pta_size_}", f"dfa nodes: {len(learner.dfa_.nodes)}",
             f"methods: {learner.methods_.count()}", f"coverage tests: {learner.coverage_tests_}", ""]
    lines.append(learning_report(learner.operators_, truth).rstrip("\n"))
    (folder / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def evaluate_cell(cfg: RunConfig, learned: DomainFile, truth: DomainFile, templates: Sequence[ProblemFile],
                  seed: int, folder: Optional[Path] = None) -> EvalReport:
    """Fresh evaluation problems per seed, planned with ``learned`` and checked against ``truth``."""
    problems = generate_eval_problems(truth, templates, cfg.eval_problems, random.Random(EVAL_SEED_OFFSET + seed))
    report = accuracy(learned, problems, truth, cfg.limits)
    if folder is not None:
        pdir = folder / "problems"
        pdir.mkdir(parents=True, exist_ok=True)
        for p in problems:
            (pdir / f"{p.name}.hddl").write_text(print_problem(p), encoding="utf-8")
        report.write_csv(folder / "eval.csv")
    return report


def run_cell(cfg: RunConfig, size: int, seed: int) -> CellResult:
    t0 = time.monotonic()
    truth, template, templates = _stage("load", load_truth, cfg)
    learner, folder = learn_cell(cfg, size, seed, truth, template)
    report = _stage("eval", evaluate_cell, cfg, learner.domain_, truth, templates, seed, folder)
    row = {
        "domain": cfg.domain_name, "mode": cfg.mode, "size": size, "observability": cfg.observability,
        "noise": cfg.noise, "seed": seed, "accuracy": round(report.accuracy, 6),
        "methods_learned": learner.methods_.count(), "operators_learned": len(learner.operators_),
        "runtime_ms": int(1000 * (time.monotonic() - t0)),
    }
    (folder / "summary.txt").write_text(report.summary() + "\n", encoding="utf-8")
    return CellResult(row, str(folder), report)


def _run_cell_args(args) -> CellResult:
    return run_cell(*args)


def run_pipeline(cfg: RunConfig) -> List[Dict[str, object]]:
    """Every (size, seed) cell, then the aggregate CSV; rows come back in cell order."""
    cfg.validate()
    cells = [(cfg, size, seed) for size in cfg.sizes for seed in cfg.seed_list]
    if cfg.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_cell_args, cells))
    else:
        results = [run_cell(*c) for c in cells]
    rows = [r.row for r in results]
    write_aggregate(rows, Path(cfg.out) / "results.csv")
    return rows


def write_aggregate(rows: Sequence[Dict[str, object]], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        w.writeheader()
        w.writerows(rows)


def config_dict(cfg: RunConfig) -> Dict[str, object]:
    return asdict(cfg)
