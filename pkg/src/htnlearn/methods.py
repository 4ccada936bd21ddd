"""HTN method synthesis from the task DFA.

Candidates for a compound task are read off the automaton along the trace
span of each observed instance; a greedy set cover picks a small covering
set, and the dependency heuristic re-runs the cover while allowing an
increasing number of distinct compound tasks inside method bodies.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .derivation import DerivationChart
from .dfa import TaskDFA
from .hddl import DomainFile, Method
from .logic import Substitution, Task, generalize_sequences, is_variable
from .sampling import SampleSet

DEFAULT_PATH_CAP = 500
DEFAULT_WITNESS_CAP = 8


class UncoverableInstanceError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    """One observed compound task: annotation ``index`` of trace ``trace``."""

    trace: int
    index: int
    task: Task
    start: int
    end: int


@dataclass
class CandidateDecomposition:
    head: str
    subtasks: Tuple[str, ...]
    witnesses: Dict[Instance, List[Tuple[Task, ...]]] = field(default_factory=dict)

    @property
    def covered(self) -> frozenset:
        return frozenset(self.witnesses)

    @property
    def dependency_count(self) -> int:
        return len({name for name, prim in self._kinds if not prim})

    @property
    def _kinds(self):
        body = next(iter(self.witnesses.values()))[0] if self.witnesses else ()
        return [(t.name, t.primitive) for t in body]


@dataclass
class LearnedMethod:
    method: Method
    support: List[Tuple[Instance, Substitution]] = field(default_factory=list)

    @property
    def signature(self):
        return self.method.signature


class MethodSet(dict):
    """Compound task name -> list of LearnedMethod."""

    def methods(self) -> List[Method]:
        return [lm.method for name in sorted(self) for lm in self[name]]

    def count(self) -> int:
        return sum(len(v) for v in self.values())

    def bodies(self, name: str) -> List[Tuple[str, ...]]:
        return sorted(lm.method.signature[1] for lm in self.get(name, []))


@dataclass
class CoverageCounter:
    """Instrumentation for the polynomial bound: candidate coverage tests."""

    tests: int = 0
    derivations: int = 0


class SynthesisContext:
    """Per-run data shared by every synthesis step: instances, runs, evidence."""

    def __init__(self, samples: SampleSet, dfa: TaskDFA, path_cap: int = DEFAULT_PATH_CAP,
                 witness_cap: int = DEFAULT_WITNESS_CAP):
        self.samples = samples
        self.dfa = dfa
        self.signature: DomainFile = samples.signature
        self.primitive_names = {op.name for op in self.signature.operators}
        self.constants = {c.name for c in self.signature.constants}
        self.path_cap = path_cap
        self.witness_cap = witness_cap
        self.counter = CoverageCounter()
        self.instances: List[Instance] = []
        self.paths: List[List[int]] = []
        self.annotated: List[Set[Tuple[Task, int, int]]] = []
        for t, trace in enumerate(samples.positive):
            path = dfa.run(trace.tasks)
            if path is None:
                raise ValueError(f"automaton rejects positive trace {t}")
            self.paths.append(path)
            self.annotated.append({(a.task, a.start, a.end) for a in trace.annotations})
            for k, a in enumerate(trace.annotations):
                self.instances.append(Instance(t, k, a.task, a.start, a.end))
        self.by_task: Dict[str, List[Instance]] = {}
        for inst in self.instances:
            self.by_task.setdefault(inst.task.name, []).append(inst)
        # (node, compound task) -> target nodes seen in any annotation
        self.evidence: Dict[int, List[Tuple[Task, frozenset]]] = {}
        for (node, label), targets in sorted(dfa.compound_targets.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
            self.evidence.setdefault(node, []).append((label, frozenset(targets)))

    @property
    def compound_names(self) -> List[str]:
        return sorted(t.name for t in self.signature.tasks)

    @property
    def n_primitive(self) -> int:
        return self.samples.n_tasks

    def chart(self, trace: int, methods: Iterable[Method]) -> DerivationChart:
        tr = self.samples.positive[trace]
        return DerivationChart(methods, self.primitive_names, self.samples.objects, self.signature.hierarchy,
                               tr.tasks)

    def types_of(self, name: str) -> Tuple[str, ...]:
        return self.signature.signature_types(name)


# --------------------------------------------------------------------------- lifting

def _pattern(flat: Sequence[str]) -> Tuple[int, ...]:
    first: Dict[str, int] = {}
    return tuple(first.setdefault(a, i) for i, a in enumerate(flat))


def _flat(head: Task, body: Sequence[Task]) -> Tuple[str, ...]:
    return tuple(head.args) + tuple(a for t in body for a in t.args)


def _most_specific(types: Sequence[str], ctx: SynthesisContext) -> str:
    h = ctx.signature.hierarchy
    for t in types:
        if all(h.conforms(t, other) for other in types):
            return t
    return types[0]


def lift_methods(head_name: str, witnesses: Dict[Instance, List[Tuple[Task, ...]]],
                 ctx: SynthesisContext) -> LearnedMethod:
    """OI-generalize one ground body per instance into a single lifted method.

    Among an instance's ground bodies, the one whose argument equality pattern
    is most common across instances is used, so that incidental coincidences
    of objects do not decide which variables are shared.
    """
    votes: Counter = Counter()
    for inst, bodies in witnesses.items():
        for p in {_pattern(_flat(inst.task, b)) for b in bodies}:
            votes[p] += 1
    order = sorted(witnesses, key=lambda i: (i.trace, i.index))
    chosen = []
    for inst in order:
        bodies = witnesses[inst]
        best = min(bodies, key=lambda b: (-votes[_pattern(_flat(inst.task, b))], [str(t) for t in b]))
        chosen.append((inst, best))
    items = [[(head_name, inst.task.args)] + [(t.name, t.args) for t in body] for inst, body in chosen]
    lifted, bindings = generalize_sequences(items, ctx.constants)
    slot_types: Dict[str, List[str]] = {}
    for name, args in lifted:
        for var, typ in zip(args, ctx.types_of(name)):
            if is_variable(var):
                slot_types.setdefault(var, []).append(typ)
    variables = list(dict.fromkeys(v for _, args in lifted for v in args if is_variable(v)))
    params = tuple((v, _most_specific(slot_types[v], ctx)) for v in variables)
    head = Task(head_name, lifted[0][1], False)
    subtasks = tuple(Task(n, a, n in ctx.primitive_names) for n, a in lifted[1:])
    method = Method(f"m-{head_name}", head, params, (), subtasks)
    return LearnedMethod(method, [(inst, b) for (inst, _), b in zip(chosen, bindings)])


def _normalize(name: str, learned: Sequence[LearnedMethod]) -> List[LearnedMethod]:
    """Sort a task's methods canonically and name them m-<task>-<k>."""
    ordered = sorted(learned, key=lambda lm: (len(lm.method.subtasks), lm.method.signature[1],
                                               [str(t) for t in lm.method.subtasks]))
    out = []
    for k, lm in enumerate(ordered):
        m = lm.method
        out.append(LearnedMethod(Method(f"m-{name}-{k}", m.task, m.parameters, m.precondition, m.subtasks),
                                 lm.support))
    return out


# --------------------------------------------------------------------------- candidates

def initialize(ctx: SynthesisContext) -> MethodSet:
    """One method per distinct observed primitive expansion of each compound task."""
    M = MethodSet()
    for name, insts in sorted(ctx.by_task.items()):
        groups: Dict[Tuple[str, ...], Dict[Instance, List[Tuple[Task, ...]]]] = {}
        for inst in insts:
            body = tuple(ctx.samples.positive[inst.trace].tasks[inst.start:inst.end])
            groups.setdefault(tuple(t.name for t in body), {})[inst] = [body]
        M[name] = _normalize(name, [lift_methods(name, w, ctx) for _, w in sorted(groups.items())])
    return M


def _edges(ctx: SynthesisContext, inst: Instance, chart: DerivationChart, k: int, depth: int):
    """Edges leaving position ``k`` inside the span of ``inst``: (end, task, annotated)."""
    tasks = ctx.samples.positive[inst.trace].tasks
    path = ctx.paths[inst.trace]
    annotated = ctx.annotated[inst.trace]
    out = []
    if k < inst.end:
        out.append((k + 1, tasks[k], False))
    if depth > 0:
        for label, targets in ctx.evidence.get(path[k], ()):
            for l in range(k, inst.end + 1):
                if path[l] not in targets:
                    continue
                if (k, l) == (inst.start, inst.end) and label.name == inst.task.name:
                    continue
                ctx.counter.derivations += 1
                if chart.derives(label, k, l):
                    out.append((l, label, (label, k, l) in annotated))
    out.sort(key=lambda e: (not e[2], -(e[0] - k), str(e[1])))
    return out


def instance_bodies(ctx: SynthesisContext, inst: Instance, chart: DerivationChart, depth: int) -> List[Tuple[Task, ...]]:
    """Ground bodies for ``inst`` built from primitive and derivable compound edges.

    At most ``depth`` distinct compound task names per body, and at most
    ``depth`` distinct empty compound edges at any one position. Bodies are
    enumerated shortest first and enumeration stops once ``ctx.path_cap``
    bodies are known, so a cap never hides a body shorter than one it keeps.
    """
    if inst.start == inst.end:
        return [()]  # nothing happened: only the empty body explains it
    edge_cache: Dict[int, list] = {}
    found: List[Tuple[Task, ...]] = []

    def edges(k):
        if k not in edge_cache:
            edge_cache[k] = _edges(ctx, inst, chart, k, depth)
        return edge_cache[k]

    def walk(k: int, body: List[Task], names: frozenset, empties: frozenset, length: int):
        if len(body) == length:
            if k == inst.end:
                found.append(tuple(body))
            return
        for l, label, _ in edges(k):
            if label.primitive:
                body.append(label)
                walk(l, body, names, frozenset(), length)
                body.pop()
                continue
            if l == k and (label in empties or len(empties) >= depth):
                continue
            new_names = names | {label.name}
            if len(new_names) > depth:
                continue
            body.append(label)
            walk(l, body, new_names, empties | {label} if l == k else frozenset(), length)
            body.pop()

    span = inst.end - inst.start
    longest = span + depth * (span + 1)
    for length in range(longest + 1):
        walk(inst.start, [], frozenset(), frozenset(), length)
        if len(found) >= ctx.path_cap:
            break
    return list(dict.fromkeys(found))


def extract_candidates(ctx: SynthesisContext, c: str, fixed: MethodSet, depth: int) -> List[CandidateDecomposition]:
    """Candidate decompositions for every observed instance of ``c``, grouped by body names."""
    methods = fixed.methods()
    charts: Dict[int, DerivationChart] = {}
    groups: Dict[Tuple[str, ...], CandidateDecomposition] = {}
    for inst in ctx.by_task.get(c, ()):
        if inst.trace not in charts:
            charts[inst.trace] = ctx.chart(inst.trace, methods)
        for body in instance_bodies(ctx, inst, charts[inst.trace], depth):
            names = tuple(t.name for t in body)
            cand = groups.setdefault(names, CandidateDecomposition(c, names))
            ws = cand.witnesses.setdefault(inst, [])
            if len(ws) < ctx.witness_cap:
                ws.append(body)
    return [groups[k] for k in sorted(groups)]


def greedy_cover(candidates: Sequence[CandidateDecomposition], instances: Iterable[Instance],
                 counter: Optional[CoverageCounter] = None) -> List[CandidateDecomposition]:
    """Classic greedy set cover; ties go to shorter bodies, then lexicographic names."""
    uncovered = set(instances)
    chosen: List[CandidateDecomposition] = []
    while uncovered:
        best, best_key = None, None
        for cand in candidates:
            if counter is not None:
                counter.tests += 1
            gain = len(cand.covered & uncovered)
            key = (-gain, len(cand.subtasks), cand.subtasks)
            if gain and (best_key is None or key < best_key):
                best, best_key = cand, key
        if best is None:
            missing = sorted(uncovered, key=lambda i: (i.trace, i.index))[0]
            raise UncoverableInstanceError(f"no candidate decomposes {missing.task} in trace {missing.trace}")
        chosen.append(best)
        uncovered -= best.covered
    return chosen


def greedy(ctx: SynthesisContext, c: str, fixed: MethodSet, depth: int) -> List[LearnedMethod]:
    candidates = extract_candidates(ctx, c, fixed, depth)
    chosen = greedy_cover(candidates, ctx.by_task.get(c, ()), ctx.counter)
    return _normalize(c, [lift_methods(c, cand.witnesses, ctx) for cand in chosen])


def undecomposed(ctx: SynthesisContext, M: MethodSet) -> List[Instance]:
    """Observed instances that ``M`` cannot decompose into their recorded span."""
    methods = M.methods()
    missing = []
    by_trace: Dict[int, List[Instance]] = {}
    for inst in ctx.instances:
        by_trace.setdefault(inst.trace, []).append(inst)
    for t, insts in sorted(by_trace.items()):
        chart = ctx.chart(t, methods)
        missing.extend(i for i in insts if not chart.derives(i.task, i.start, i.end))
    return missing


def heuristic_learn(ctx: SynthesisContext, initial: Optional[MethodSet] = None,
                    names: Optional[Sequence[str]] = None) -> MethodSet:
    """Dependency-aware greedy method learning.

    Starts from the observed primitive expansions (``initial`` entries, if
    given, take their place). Iteration i allows i distinct compound tasks per
    body; a task's method set is replaced only when the new one is smaller
    and every observed instance stays decomposable.
    """
    M = initialize(ctx)
    if initial:
        for name, learned in initial.items():
            M[name] = list(learned)
    names = [n for n in (names or ctx.compound_names) if n in ctx.by_task]
    for i in range(1, len(ctx.compound_names) + 1):
        proposals = {c: greedy(ctx, c, M, i) for c in names}
        for c in names:
            if len(proposals[c]) < len(M[c]):
                trial = MethodSet(M)
                trial[c] = proposals[c]
                if not undecomposed(ctx, trial):
                    M = trial
    return M
