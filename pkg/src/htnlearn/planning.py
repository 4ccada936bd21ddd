"""Total-order HTN planning, plan validation against the ground truth, and accuracy."""
from __future__ import annotations

import csv
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .derivation import DerivationChart
from .hddl import DomainFile, ProblemFile
from .logic import Task
from .oracle import Grounder, Oracle, applicable, step


class PlanningLimitExceeded(RuntimeError):
    pass


class GenerationExhaustedError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlannerLimits:
    max_nodes: int = 1_000_000
    max_seconds: float = 60.0
    max_network: int = 200


@dataclass(frozen=True)
class Plan:
    actions: Tuple[Task, ...]
    decomposition: Tuple[Tuple[Task, str], ...] = ()

    def __len__(self) -> int:
        return len(self.actions)


def plan(domain: DomainFile, problem: ProblemFile, limits: PlannerLimits = PlannerLimits()) -> Optional[Plan]:
    """Depth-first decomposition of the initial task network.

    Returns None when the search space (bounded by ``limits.max_network``) is
    exhausted; raises PlanningLimitExceeded when the node or time budget runs
    out first.
    """
    grounder = Grounder(domain, problem.objects)
    goal = frozenset(problem.goal)
    start = time.monotonic()
    # node: (state, network, step taken, parent)
    root = (frozenset(problem.init), tuple(Task(t.name, t.args, grounder.is_primitive(t.name))
                                           for t in problem.initial_network), None, None)
    stack = [root]
    seen = set()
    expanded = 0
    while stack:
        node = stack.pop()
        state, network, _, _ = node
        key = (state, network)
        if key in seen:
            continue
        seen.add(key)
        expanded += 1
        if expanded > limits.max_nodes:
            raise PlanningLimitExceeded(f"more than {limits.max_nodes} nodes")
        if expanded % 1000 == 0 and time.monotonic() - start > limits.max_seconds:
            raise PlanningLimitExceeded(f"more than {limits.max_seconds} s")
        if not network:
            if goal <= state:
                return _extract(node)
            continue
        first, rest = network[0], network[1:]
        children = []
        if grounder.is_primitive(first.name):
            action = grounder.ground_action(first)
            if action is not None and applicable(action, state):
                children.append((step(state, action), rest, ("action", action.task), node))
        else:
            for gm in grounder.ground_methods(first, state):
                new = gm.subtasks + rest
                if len(new) <= limits.max_network:
                    children.append((state, new, ("method", (gm.head, gm.name)), node))
        stack.extend(reversed(children))
    return None


def _extract(node) -> Plan:
    actions, methods = [], []
    while node is not None:
        _, _, taken, parent = node
        if taken is not None:
            (actions if taken[0] == "action" else methods).append(taken[1])
        node = parent
    return Plan(tuple(reversed(actions)), tuple(reversed(methods)))


def validate(p: Plan, truth: DomainFile, problem: ProblemFile, hierarchical: bool = True) -> bool:
    """Executable under the true model, reaches the goal, and (by default)
    derivable from the initial task network with the true methods."""
    oracle = Oracle(truth, problem)
    states = oracle.execute(p.actions)
    if states is None or not frozenset(problem.goal) <= states[-1]:
        return False
    if not hierarchical:
        return True
    network = [Task(t.name, t.args, truth.is_primitive(t.name)) for t in problem.initial_network]
    chart = DerivationChart(truth.methods, [op.name for op in truth.operators], oracle.objects, truth.hierarchy,
                            p.actions, states)
    return chart.network_derives(network)


@dataclass
class ProblemResult:
    problem: str
    solved: bool
    plan_length: int
    time_ms: int


@dataclass
class EvalReport:
    per_problem: List[ProblemResult] = field(default_factory=list)

    @property
    def solved(self) -> int:
        return sum(r.solved for r in self.per_problem)

    @property
    def accuracy(self) -> float:
        return self.solved / len(self.per_problem) if self.per_problem else 0.0

    def summary(self) -> str:
        return f"solved {self.solved}/{len(self.per_problem)} accuracy {self.accuracy:.3f}"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["problem", "solved", "plan_length", "time_ms"])
            for r in self.per_problem:
                w.writerow([r.problem, int(r.solved), r.plan_length, r.time_ms])


def evaluate_problem(learned: DomainFile, truth: DomainFile, problem: ProblemFile,
                     limits: PlannerLimits = PlannerLimits(), hierarchical: bool = True) -> ProblemResult:
    t0 = time.monotonic()
    try:
        p = plan(learned, problem, limits)
    except PlanningLimitExceeded:
        p = None
    ok = p is not None and validate(p, truth, problem, hierarchical)
    return ProblemResult(problem.name, ok, len(p) if p is not None else -1, int(1000 * (time.monotonic() - t0)))


def accuracy(learned: DomainFile, problems: Sequence[ProblemFile], truth: DomainFile,
             limits: PlannerLimits = PlannerLimits(), hierarchical: bool = True) -> EvalReport:
    """Share of problems whose plan under ``learned`` validates against ``truth``."""
    if not problems:
        raise ValueError("no evaluation problems")
    return EvalReport([evaluate_problem(learned, truth, p, limits, hierarchical) for p in problems])


def _random_state(oracle: Oracle, rng: random.Random, steps: int) -> frozenset:
    prims = [t for t in oracle.ground_tasks() if t.primitive]
    state = oracle.init
    for _ in range(steps):
        options = [t for t in prims if oracle.is_applicable(t, state)]
        if not options:
            break
        state = oracle.apply(state, options[rng.randrange(len(options))])
    return state


def generate_eval_problems(truth: DomainFile, templates: Sequence[ProblemFile], count: int, rng: random.Random,
                           max_tasks: int = 3, max_walk: int = 10, max_retries: int = 1000,
                           limits: PlannerLimits = PlannerLimits(max_seconds=10.0)) -> List[ProblemFile]:
    """Problems built from templates: a random primitive walk fixes the initial
    state, then one to ``max_tasks`` compound tasks are drawn in sequence,
    each decomposable after the previous ones. Kept only if the true domain
    yields a validated plan."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out: List[ProblemFile] = []
    retries = 0
    while len(out) < count:
        if retries >= max_retries:
            raise GenerationExhaustedError(f"only {len(out)} of {count} problems after {max_retries} retries")
        template = templates[rng.randrange(len(templates))]
        oracle = Oracle(truth, template)
        init = _random_state(oracle, rng, rng.randint(0, max_walk))
        compounds = [t for t in oracle.ground_tasks() if not t.primitive]
        state, network, length = init, [], 0
        for _ in range(rng.randint(1, max_tasks)):
            options = list(compounds)
            rng.shuffle(options)
            for task in options:
                dec = oracle.try_decompose(task, state, rng)
                if dec is not None:
                    network.append(task)
                    state, length = dec.state, length + len(dec.primitives)
                    break
        problem = ProblemFile(f"{truth.name}-eval-{len(out) + 1:02d}", truth.name, template.objects,
                              frozenset(init), frozenset(), tuple(network))
        retries += 1
        if not network or length == 0:
            continue
        try:
            p = plan(truth, problem, limits)
        except PlanningLimitExceeded:
            continue
        if p is not None and validate(p, truth, problem):
            out.append(problem)
    return out
