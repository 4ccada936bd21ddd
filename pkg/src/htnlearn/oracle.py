"""Ground-truth blackbox over a hand-encoded HDDL domain and problem."""
from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .hddl import DomainFile, Method, Operator, ProblemFile
from .logic import (Atom, AtomIndex, ObjectDecl, Substitution, Task, TypeHierarchy, apply_substitution,
                    ground_universe, is_variable, match_atoms, objects_by_type, substitute_task)

DEFAULT_MAX_DEPTH = 64


class InapplicableActionError(ValueError):
    pass


class NotDecomposableError(ValueError):
    pass


@dataclass(frozen=True)
class GroundAction:
    task: Task
    prec: frozenset
    add: frozenset
    delete: frozenset


@dataclass(frozen=True)
class GroundMethod:
    name: str
    head: Task
    prec: frozenset
    subtasks: Tuple[Task, ...]


@dataclass(frozen=True)
class Annotation:
    """A compound task that produced primitives ``[start, end)`` of a trace."""

    task: Task
    start: int
    end: int
    subtasks: Tuple[Task, ...] = ()

    def shifted(self, offset: int) -> "Annotation":
        return Annotation(self.task, self.start + offset, self.end + offset, self.subtasks)


@dataclass(frozen=True)
class Decomposition:
    primitives: Tuple[Task, ...]
    annotations: Tuple[Annotation, ...]
    state: frozenset


def applicable(action: GroundAction, state) -> bool:
    return action.prec <= state


def step(state, action: GroundAction) -> frozenset:
    if not applicable(action, state):
        raise InapplicableActionError(str(action.task))
    return (frozenset(state) - action.delete) | action.add


class Grounder:
    """Lazy grounding of operators and methods over a fixed object set.

    Operator parameters are bound injectively (distinct parameters denote
    distinct objects); method parameters are not.
    """

    def __init__(self, domain: DomainFile, objects: Sequence[ObjectDecl]):
        self.domain = domain
        self.hierarchy: TypeHierarchy = domain.hierarchy
        self.objects: Tuple[ObjectDecl, ...] = tuple(domain.constants) + tuple(
            o for o in objects if o.name not in {c.name for c in domain.constants})
        self.type_of: Dict[str, str] = {o.name: o.type for o in self.objects}
        self.by_type = objects_by_type(self.objects, self.hierarchy)
        self.operators: Dict[str, Operator] = {op.name: op for op in domain.operators}
        self.methods: Dict[str, List[Method]] = {}
        for m in domain.methods:
            self.methods.setdefault(m.task.name, []).append(m)
        self._action_cache: Dict[Task, Optional[GroundAction]] = {}

    def is_primitive(self, name: str) -> bool:
        return name in self.operators

    def conforms(self, obj: str, typ: str) -> bool:
        return obj in self.type_of and self.hierarchy.conforms(self.type_of[obj], typ)

    def ground_action(self, task: Task) -> Optional[GroundAction]:
        """The ground action for ``task``, or None if the arguments are not admissible."""
        if task in self._action_cache:
            return self._action_cache[task]
        op = self.operators.get(task.name)
        result = None
        if op is not None and len(op.parameters) == len(task.args) and len(set(task.args)) == len(task.args) \
                and all(self.conforms(a, t) for a, (_, t) in zip(task.args, op.parameters)):
            sub = dict(zip(op.variables, task.args))
            add = frozenset(apply_substitution(a, sub) for a in op.add)
            delete = frozenset(apply_substitution(a, sub) for a in op.delete)
            result = GroundAction(Task(task.name, task.args, True),
                                  frozenset(apply_substitution(a, sub) for a in op.precondition),
                                  add, delete - add)
        self._action_cache[task] = result
        return result

    def ground_tasks(self) -> List[Task]:
        """Every instantiable ground task; primitive ones respect object identity."""
        out = []
        for op in self.domain.operators:
            pools = [self.by_type.get(t, []) for _, t in op.parameters]
            for args in product(*pools):
                if len(set(args)) == len(args):
                    out.append(Task(op.name, tuple(args), True))
        for ts in self.domain.tasks:
            pools = [self.by_type.get(t, []) for _, t in ts.parameters]
            for args in product(*pools):
                out.append(Task(ts.name, tuple(args), False))
        return out

    def method_bindings(self, method: Method, task: Task, state: Optional[AtomIndex],
                        check_precondition: bool = True) -> Iterator[Substitution]:
        """Bindings of every method parameter compatible with ``task`` (and the state)."""
        if len(method.task.args) != len(task.args):
            return
        types = dict(method.parameters)
        binding: Substitution = {}
        for term, value in zip(method.task.args, task.args):
            if is_variable(term):
                if binding.get(term, value) != value or not self.conforms(value, types.get(term, "object")):
                    return
                binding[term] = value
            elif term != value:
                return
        if check_precondition and state is not None:
            partials = match_atoms(list(method.precondition), state, binding)
        else:
            partials = iter([binding])
        seen = set()
        for partial in partials:
            free = [v for v, _ in method.parameters if v not in partial]
            pools = [self.by_type.get(types[v], []) for v in free]
            for values in product(*pools):
                full = dict(partial)
                full.update(zip(free, values))
                if not all(self.conforms(full[v], t) for v, t in method.parameters):
                    continue
                key = tuple(sorted(full.items()))
                if key not in seen:
                    seen.add(key)
                    yield full

    def ground_methods(self, task: Task, state, check_precondition: bool = True) -> List[GroundMethod]:
        index = AtomIndex(state) if state is not None else None
        out = []
        for m in self.methods.get(task.name, []):
            for b in self.method_bindings(m, task, index, check_precondition):
                subtasks = tuple(substitute_task(s, b) for s in m.subtasks)
                subtasks = tuple(Task(s.name, s.args, self.is_primitive(s.name)) for s in subtasks)
                out.append(GroundMethod(m.name, Task(task.name, task.args, False),
                                        frozenset(apply_substitution(a, b) for a in m.precondition), subtasks))
        # binding order follows set iteration; fix it so seeded shuffles are reproducible
        out.sort(key=lambda g: (g.name, g.subtasks, sorted(g.prec)))
        return out


class Oracle:
    """Applicability, transitions and recursive decomposition for one problem."""

    def __init__(self, domain: DomainFile, problem: ProblemFile, max_depth: int = DEFAULT_MAX_DEPTH):
        self.domain = domain
        self.problem = problem
        self.max_depth = max_depth
        self.grounder = Grounder(domain, problem.objects)
        self.init = frozenset(problem.init)
        self.universe = ground_universe(domain.predicates, self.grounder.objects, domain.hierarchy)
        self._tasks: Optional[List[Task]] = None

    @property
    def objects(self) -> Tuple[ObjectDecl, ...]:
        return self.grounder.objects

    def ground_tasks(self) -> List[Task]:
        if self._tasks is None:
            self._tasks = self.grounder.ground_tasks()
        return self._tasks

    def action(self, task: Task) -> Optional[GroundAction]:
        return self.grounder.ground_action(task)

    def is_applicable(self, task: Task, state) -> bool:
        a = self.action(task)
        return a is not None and applicable(a, state)

    def apply(self, state, task: Task) -> frozenset:
        a = self.action(task)
        if a is None:
            raise InapplicableActionError(str(task))
        return step(state, a)

    def execute(self, tasks: Sequence[Task], state=None) -> Optional[List[frozenset]]:
        """States visited by executing ``tasks``; None if some step is inapplicable."""
        state = self.init if state is None else frozenset(state)
        states = [state]
        for t in tasks:
            a = self.action(t)
            if a is None or not applicable(a, state):
                return None
            state = step(state, a)
            states.append(state)
        return states

    def decomposable(self, task: Task, state) -> bool:
        if self.grounder.is_primitive(task.name):
            return self.is_applicable(task, state)
        return next(self._decompositions(task, frozenset(state), None, 0), None) is not None

    def decompose(self, task: Task, state, rng: Optional[random.Random] = None) -> Decomposition:
        """Fully primitive decomposition of ``task`` from ``state``.

        Among applicable methods the choice is uniform over those whose
        recursive decomposition succeeds (shuffle, then backtrack).
        """
        result = next(self._decompositions(Task(task.name, task.args, self.grounder.is_primitive(task.name)),
                                           frozenset(state), rng, 0), None)
        if result is None:
            raise NotDecomposableError(str(task))
        final, prims, annots = result
        return Decomposition(tuple(prims), tuple(annots), final)

    def try_decompose(self, task: Task, state, rng: Optional[random.Random] = None) -> Optional[Decomposition]:
        try:
            return self.decompose(task, state, rng)
        except NotDecomposableError:
            return None

    def _decompositions(self, task: Task, state: frozenset, rng, depth: int):
        if self.grounder.is_primitive(task.name):
            a = self.action(task)
            if a is not None and applicable(a, state):
                yield step(state, a), [a.task], []
            return
        if depth >= self.max_depth:
            return
        methods = self.grounder.ground_methods(task, state)
        if rng is not None:
            rng.shuffle(methods)
        for gm in methods:
            for final, prims, annots in self._network(gm.subtasks, state, rng, depth + 1):
                head = Annotation(gm.head, 0, len(prims), gm.subtasks)
                yield final, prims, [head] + annots

    def _network(self, tasks: Sequence[Task], state: frozenset, rng, depth: int):
        if not tasks:
            yield state, [], []
            return
        first, rest = tasks[0], tasks[1:]
        for mid, prims, annots in self._decompositions(first, state, rng, depth):
            for final, prims2, annots2 in self._network(rest, mid, rng, depth):
                offset = len(prims)
                yield final, prims + prims2, annots + [a.shifted(offset) for a in annots2]
