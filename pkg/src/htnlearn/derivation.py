"""Memoized parser for totally ordered decompositions.

Decides whether a compound task (or a task network) can be decomposed by a
method set into exactly a given primitive sequence. Method preconditions are
checked against the state before the first primitive of each method's span
when states are supplied; otherwise they are ignored.
"""
from __future__ import annotations

from itertools import product
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .hddl import Method
from .logic import AtomIndex, ObjectDecl, Substitution, Task, TypeHierarchy, is_variable, match_atoms, objects_by_type


class DerivationChart:
    """Parse chart for one primitive sequence.

    ``states[k]`` is the state before ``seq[k]`` (``len(states) == len(seq) + 1``).
    """

    def __init__(self, methods: Iterable[Method], primitive_names: Iterable[str], objects: Sequence[ObjectDecl],
                 hierarchy: TypeHierarchy, seq: Sequence[Task], states: Optional[Sequence[frozenset]] = None):
        self.methods: Dict[str, List[Method]] = {}
        for m in methods:
            self.methods.setdefault(m.task.name, []).append(m)
        self.primitive = set(primitive_names)
        self.hierarchy = hierarchy
        self.type_of = {o.name: o.type for o in objects}
        self.by_type = objects_by_type(objects, hierarchy)
        self.seq = tuple(seq)
        self.states = states
        self._index: Dict[int, AtomIndex] = {}
        self._memo: Dict[Tuple[Task, int, int], bool] = {}
        self.calls = 0

    def _conforms(self, obj: str, typ: str) -> bool:
        return obj in self.type_of and self.hierarchy.conforms(self.type_of[obj], typ)

    def _state(self, k: int) -> AtomIndex:
        if k not in self._index:
            self._index[k] = AtomIndex(self.states[k])
        return self._index[k]

    def _unify(self, terms: Sequence[str], values: Sequence[str], binding: Substitution,
               types: Dict[str, str]) -> Optional[Substitution]:
        if len(terms) != len(values):
            return None
        new = binding
        for term, value in zip(terms, values):
            if is_variable(term):
                bound = new.get(term)
                if bound is None:
                    if not self._conforms(value, types.get(term, "object")):
                        return None
                    if new is binding:
                        new = dict(binding)
                    new[term] = value
                elif bound != value:
                    return None
            elif term != value:
                return None
        return new

    def head_bindings(self, method: Method, task: Task, start: int) -> Iterator[Substitution]:
        types = dict(method.parameters)
        binding = self._unify(method.task.args, task.args, {}, types)
        if binding is None:
            return
        if self.states is not None and method.precondition:
            for b in match_atoms(list(method.precondition), self._state(start), binding):
                if all(self._conforms(v, types.get(k, "object")) for k, v in b.items()):
                    yield b
        else:
            yield binding

    def derives(self, task: Task, start: int, end: int) -> bool:
        """True iff ``task`` decomposes into exactly ``seq[start:end]``."""
        key = (task, start, end)
        if key in self._memo:
            return self._memo[key]
        self.calls += 1
        if task.name in self.primitive:
            result = end == start + 1 and self.seq[start].name == task.name and self.seq[start].args == task.args
            self._memo[key] = result
            return result
        self._memo[key] = False  # a task re-entering its own span does not derive it
        result = any(self.method_derives(m, task, start, end) for m in self.methods.get(task.name, ()))
        self._memo[key] = result
        return result

    def method_derives(self, method: Method, task: Task, start: int, end: int) -> bool:
        return next(self.method_bindings(method, task, start, end), None) is not None

    def method_bindings(self, method: Method, task: Task, start: int, end: int) -> Iterator[Substitution]:
        """Bindings under which ``method`` decomposes ``task`` into ``seq[start:end]``."""
        types = dict(method.parameters)
        for binding in self.head_bindings(method, task, start):
            yield from self._body(method.subtasks, 0, start, end, binding, types)

    def network_derives(self, tasks: Sequence[Task], start: int = 0, end: Optional[int] = None) -> bool:
        end = len(self.seq) if end is None else end
        return next(self._body(tuple(tasks), 0, start, end, {}, {}), None) is not None

    def _min_len(self, subtasks: Sequence[Task], k: int) -> int:
        return sum(1 for t in subtasks[k:] if t.name in self.primitive)

    def _body(self, subtasks: Sequence[Task], k: int, pos: int, end: int, binding: Substitution,
              types: Dict[str, str]) -> Iterator[Substitution]:
        if k == len(subtasks):
            if pos == end:
                yield binding
            return
        sub = subtasks[k]
        if end - pos < self._min_len(subtasks, k):
            return
        if sub.name in self.primitive:
            if pos >= end or self.seq[pos].name != sub.name:
                return
            new = self._unify(sub.args, self.seq[pos].args, binding, types)
            if new is not None:
                yield from self._body(subtasks, k + 1, pos + 1, end, new, types)
            return
        free = [a for a in dict.fromkeys(sub.args) if is_variable(a) and a not in binding]
        pools = [self.by_type.get(types.get(v, "object"), []) for v in free]
        rest_min = self._min_len(subtasks, k + 1)
        for values in product(*pools):
            full = dict(binding)
            full.update(zip(free, values))
            ground = Task(sub.name, tuple(full.get(a, a) for a in sub.args), False)
            for mid in range(pos, end - rest_min + 1):
                if self.derives(ground, pos, mid):
                    yield from self._body(subtasks, k + 1, mid, end, full, types)
