"""Random-walk training data: positive traces with compound-task annotations,
negative sequences, and observation corruption (partiality and noise)."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from itertools import product
from typing import List, Optional, Sequence, Tuple

from .hddl import DomainFile, Operator, ProblemFile
from .logic import Atom, ObjectDecl, Observation, Task, parse_task
from .oracle import Annotation, Oracle

DEFAULT_MAX_WALK = 50


class OracleDeadEndError(RuntimeError):
    pass


@dataclass
class AnnotatedTrace:
    start: Observation
    steps: List[Tuple[Task, Observation]] = field(default_factory=list)
    annotations: List[Annotation] = field(default_factory=list)

    @property
    def tasks(self) -> List[Task]:
        return [t for t, _ in self.steps]

    @property
    def observations(self) -> List[Observation]:
        """Observation before the first step, then after each step."""
        return [self.start] + [o for _, o in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class CorruptionConfig:
    observability: float = 1.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("observability", "noise"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass
class SampleSet:
    """I+ (annotated positive traces) and I- (sequences failing at their last task).

    ``signature`` is the known vocabulary: types, predicates, task and
    operator signatures, with no method bodies and no operator semantics.
    """

    positive: List[AnnotatedTrace]
    negative: List[Tuple[Task, ...]]
    signature: DomainFile
    objects: Tuple[ObjectDecl, ...]
    init: frozenset

    @property
    def n_tasks(self) -> int:
        return sum(len(t) for t in self.positive)


def domain_signature(domain: DomainFile) -> DomainFile:
    ops = tuple(Operator(op.name, op.parameters) for op in domain.operators)
    return DomainFile(domain.name, domain.types, domain.constants, domain.predicates, domain.tasks,
                      (), ops, domain.requirements)


def _full(state, universe) -> Observation:
    return Observation.from_state(state, universe)


def random_walk(oracle: Oracle, rng: random.Random, max_len: int = DEFAULT_MAX_WALK):
    """One walk from the initial state.

    Draws ground tasks uniformly (primitive and compound alike) until one is
    not decomposable or the walk holds at least ``max_len`` primitives. The
    last compound expansion may overshoot ``max_len``. Returns the positive
    trace and, when the failing task is primitive, the negative sequence.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    tasks = oracle.ground_tasks()
    state = oracle.init
    trace = AnnotatedTrace(_full(state, oracle.universe))
    while len(trace) < max_len:
        task = tasks[rng.randrange(len(tasks))]
        if task.primitive:
            if not oracle.is_applicable(task, state):
                return trace, tuple(trace.tasks) + (task,)
            state = oracle.apply(state, task)
            trace.steps.append((task, _full(state, oracle.universe)))
            continue
        dec = oracle.try_decompose(task, state, rng)
        if dec is None:
            return trace, None
        offset = len(trace)
        states = oracle.execute(dec.primitives, state)
        for t, s in zip(dec.primitives, states[1:]):
            trace.steps.append((t, _full(s, oracle.universe)))
        trace.annotations.extend(a.shifted(offset) for a in dec.annotations)
        state = dec.state
    return trace, None


def generate(oracle: Oracle, target_size: int, rng: random.Random, max_len: int = DEFAULT_MAX_WALK,
             max_walks: int = 100000) -> SampleSet:
    """Walk until I+ holds at least ``target_size`` primitive tasks."""
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    if not any(oracle.decomposable(t, oracle.init) for t in oracle.ground_tasks()):
        raise OracleDeadEndError("no task is decomposable in the initial state")
    positive: List[AnnotatedTrace] = []
    negative: List[Tuple[Task, ...]] = []
    total = 0
    for _ in range(max_walks):
        if total >= target_size:
            break
        trace, neg = random_walk(oracle, rng, max_len)
        if len(trace):
            positive.append(trace)
            total += len(trace)
        if neg is not None:
            negative.append(neg)
    return SampleSet(positive, negative, domain_signature(oracle.domain), oracle.objects, oracle.init)


def exhaustive_samples(oracle: Oracle, depth: int) -> SampleSet:
    """Every executable primitive sequence up to ``depth`` and its one-step failures.

    Only practical for tiny domains; used as a test oracle.
    """
    prims = [t for t in oracle.ground_tasks() if t.primitive]
    positive, negative = [], []
    frontier = [(oracle.init, ())]
    for _ in range(depth + 1):
        nxt = []
        for state, seq in frontier:
            if seq:
                states = oracle.execute(seq)
                trace = AnnotatedTrace(_full(oracle.init, oracle.universe),
                                       [(t, _full(s, oracle.universe)) for t, s in zip(seq, states[1:])])
                positive.append(trace)
            if len(seq) == depth:
                continue
            for t in prims:
                if oracle.is_applicable(t, state):
                    nxt.append((oracle.apply(state, t), seq + (t,)))
                else:
                    negative.append(seq + (t,))
        frontier = nxt
    return SampleSet(positive, negative, domain_signature(oracle.domain), oracle.objects, oracle.init)


def corrupt(trace: AnnotatedTrace, cfg: CorruptionConfig, universe, rng: Optional[random.Random] = None) -> AnnotatedTrace:
    """Hide and flip atoms in every observation except the initial one."""
    if rng is None:
        rng = random.Random(cfg.seed)
    if cfg.observability >= 1.0 and cfg.noise <= 0.0:
        return trace
    atoms = sorted(universe)
    steps = []
    for task, obs in trace.steps:
        present, absent = set(), set()
        for atom in atoms:
            if rng.random() >= cfg.observability:
                continue
            value = atom in obs.present
            if rng.random() < cfg.noise:
                value = not value
            (present if value else absent).add(atom)
        steps.append((task, Observation(frozenset(present), frozenset(absent))))
    return AnnotatedTrace(trace.start, steps, list(trace.annotations))


def corrupt_samples(samples: SampleSet, cfg: CorruptionConfig, universe) -> SampleSet:
    rng = random.Random(cfg.seed)
    return replace(samples, positive=[corrupt(t, cfg, universe, rng) for t in samples.positive])


# --------------------------------------------------------------------------- text format

def _atom_str(a: Atom) -> str:
    return str(a)


def parse_atom(text: str) -> Atom:
    name, _, rest = text.strip().partition("(")
    body = rest.rstrip(")").strip()
    return Atom(name, tuple(body.split()) if body else ())


def _obs_json(o: Observation) -> dict:
    return {"present": sorted(map(_atom_str, o.present)), "absent": sorted(map(_atom_str, o.absent))}


def _obs_from_json(d: dict) -> Observation:
    return Observation(frozenset(map(parse_atom, d["present"])), frozenset(map(parse_atom, d["absent"])))


def write_samples(samples: SampleSet, path) -> None:
    """Write ``path`` (task sequences) and ``path + '.obs.jsonl'`` (observations)."""
    prims = sorted(op.name for op in samples.signature.operators)
    lines = ["# htnlearn samples v1", "% primitive " + " ".join(prims)]
    for trace in samples.positive:
        lines.append("+ " + " ".join(str(t) for t in trace.tasks))
        for a in trace.annotations:
            subs = " ".join(str(s) for s in a.subtasks)
            lines.append(f"@ {a.start} {a.end} {a.task} | {subs}".rstrip())
    for seq in samples.negative:
        lines.append("- " + " ".join(str(t) for t in seq))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(str(path) + ".obs.jsonl", "w", encoding="utf-8") as fh:
        for trace in samples.positive:
            fh.write(json.dumps({"start": _obs_json(trace.start),
                                 "steps": [_obs_json(o) for _, o in trace.steps]}, sort_keys=True) + "\n")


def read_samples(path, domain: DomainFile, problem: ProblemFile) -> SampleSet:
    primitive = set()
    positive: List[AnnotatedTrace] = []
    negative: List[Tuple[Task, ...]] = []
    pending: List[Tuple[List[Task], List[Annotation]]] = []

    def task(text: str) -> Task:
        t = parse_task(text)
        return Task(t.name, t.args, t.name in primitive)

    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            kind, _, rest = line.partition(" ")
            if kind == "%":
                primitive.update(rest.split()[1:])
            elif kind == "+":
                pending.append(([task(x) for x in rest.split()], []))
            elif kind == "@":
                head, _, subs = rest.partition("|")
                start, end, name = head.split()
                pending[-1][1].append(Annotation(task(name), int(start), int(end),
                                                 tuple(task(x) for x in subs.split())))
            elif kind == "-":
                negative.append(tuple(task(x) for x in rest.split()))
            else:
                raise ValueError(f"unrecognised sample line: {line!r}")
    with open(str(path) + ".obs.jsonl", encoding="utf-8") as fh:
        obs_lines = [json.loads(x) for x in fh if x.strip()]
    if len(obs_lines) != len(pending):
        raise ValueError("observation sidecar does not match the sample file")
    for (tasks, annots), obs in zip(pending, obs_lines):
        steps = [(t, _obs_from_json(o)) for t, o in zip(tasks, obs["steps"])]
        positive.append(AnnotatedTrace(_obs_from_json(obs["start"]), steps, annots))
    oracle_objects = tuple(domain.constants) + tuple(problem.objects)
    return SampleSet(positive, negative, domain_signature(domain), oracle_objects, frozenset(problem.init))
