"""Typed first-order STRIPS vocabulary: atoms, tasks, states, observations and substitutions."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

Substitution = Dict[str, str]
State = frozenset


class UnboundVariableError(KeyError):
    pass


class ArityMismatchError(ValueError):
    pass


def is_variable(term: str) -> bool:
    return term.startswith("?")


class Predicate(NamedTuple):
    name: str
    types: Tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.types)


class ObjectDecl(NamedTuple):
    name: str
    type: str = "object"


class Atom(NamedTuple):
    """A (ground or lifted) atom. Lifted arguments start with '?'."""

    predicate: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.predicate}({' '.join(self.args)})"

    def sexpr(self) -> str:
        return "(" + " ".join((self.predicate,) + self.args) + ")"

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)


class Task(NamedTuple):
    """A task occurrence, primitive (an action) or compound."""

    name: str
    args: Tuple[str, ...] = ()
    primitive: bool = True

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.args)})"

    def sexpr(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"


def parse_task(text: str, primitive: bool = True) -> Task:
    """Inverse of ``str(Task)``: ``pick(b1,l,ra)`` -> Task."""
    text = text.strip()
    name, _, rest = text.partition("(")
    if not rest.endswith(")"):
        raise ValueError(f"malformed task {text!r}")
    body = rest[:-1].strip()
    args = tuple(a.strip() for a in body.split(",")) if body else ()
    return Task(name, args, primitive)


@dataclass(frozen=True)
class Observation:
    """Three-valued view of a state: atoms in neither set are unobserved."""

    present: frozenset = frozenset()
    absent: frozenset = frozenset()

    def __post_init__(self):
        if self.present & self.absent:
            raise ValueError("an atom cannot be both present and absent")

    @classmethod
    def from_state(cls, state: Iterable[Atom], universe: Iterable[Atom]) -> "Observation":
        state = frozenset(state)
        return cls(state, frozenset(universe) - state)

    def value(self, atom: Atom) -> Optional[bool]:
        if atom in self.present:
            return True
        if atom in self.absent:
            return False
        return None


@dataclass
class TypeHierarchy:
    """Maps each declared type to its parent; every chain ends in ``object``."""

    parents: Dict[str, str] = field(default_factory=dict)

    def ancestors(self, name: str) -> List[str]:
        chain = [name]
        seen = {name}
        while chain[-1] in self.parents:
            parent = self.parents[chain[-1]]
            if parent in seen:
                break
            chain.append(parent)
            seen.add(parent)
        if chain[-1] != "object":
            chain.append("object")
        return chain

    def conforms(self, actual: str, expected: str) -> bool:
        return expected == "object" or expected in self.ancestors(actual)


def objects_by_type(objects: Sequence[ObjectDecl], hierarchy: TypeHierarchy) -> Dict[str, List[str]]:
    """Index objects under every type they conform to."""
    index: Dict[str, List[str]] = {}
    for obj in objects:
        for t in hierarchy.ancestors(obj.type):
            index.setdefault(t, []).append(obj.name)
    return index


def ground_universe(predicates: Sequence[Predicate], objects: Sequence[ObjectDecl],
                    hierarchy: TypeHierarchy) -> frozenset:
    """All type-conformant ground atoms over ``objects``."""
    index = objects_by_type(objects, hierarchy)
    atoms = set()
    for pred in predicates:
        pools = [index.get(t, []) for t in pred.types]
        for args in product(*pools):
            atoms.add(Atom(pred.name, tuple(args)))
    return frozenset(atoms)


def apply_substitution(atom: Atom, sub: Mapping[str, str]) -> Atom:
    args = []
    for a in atom.args:
        if is_variable(a):
            if a not in sub:
                raise UnboundVariableError(a)
            args.append(sub[a])
        else:
            args.append(a)
    return Atom(atom.predicate, tuple(args))


def substitute_task(task: Task, sub: Mapping[str, str]) -> Task:
    args = []
    for a in task.args:
        if is_variable(a):
            if a not in sub:
                raise UnboundVariableError(a)
            args.append(sub[a])
        else:
            args.append(a)
    return Task(task.name, tuple(args), task.primitive)


def lift_atom(atom: Atom, inverse: Mapping[str, str], constants: Iterable[str] = ()) -> Optional[Atom]:
    """Replace objects by variables using ``inverse`` (object -> variable).

    Returns None when an argument is neither mapped nor a constant.
    """
    constants = set(constants)
    args = []
    for a in atom.args:
        if a in inverse:
            args.append(inverse[a])
        elif a in constants:
            args.append(a)
        else:
            return None
    return Atom(atom.predicate, tuple(args))


def oi_generalize(items: Sequence[Tuple[str, Sequence[str]]]) -> Tuple[Tuple[str, Tuple[str, ...]], List[Substitution]]:
    """Least general positional generalization of same-headed ground items.

    Each argument position gets its own variable ``?v<i>``, so two distinct
    variables are never forced to co-refer. Returns the lifted head and, per
    input item, the binding that reproduces it.
    """
    if not items:
        raise ValueError("nothing to generalize")
    name, first = items[0][0], tuple(items[0][1])
    for other_name, args in items:
        if other_name != name or len(args) != len(first):
            raise ArityMismatchError(f"cannot generalize {other_name}/{len(args)} with {name}/{len(first)}")
    variables = tuple(f"?v{i}" for i in range(len(first)))
    bindings = [dict(zip(variables, args)) for _, args in items]
    return (name, variables), bindings


def generalize_sequences(instances: Sequence[Sequence[Tuple[str, Sequence[str]]]],
                         constants: Iterable[str] = ()) -> Tuple[List[Tuple[str, Tuple[str, ...]]], List[Substitution]]:
    """Generalize instances that share one shape (same names, same arities).

    Two argument slots share a variable iff they hold the same object in every
    instance; a slot keeps a domain constant only if every instance has it
    there. Variables are named ?v0, ?v1, ... by first occurrence.
    """
    if not instances:
        raise ValueError("nothing to generalize")
    shape = [(name, len(args)) for name, args in instances[0]]
    for inst in instances:
        if [(name, len(args)) for name, args in inst] != shape:
            raise ArityMismatchError("instances do not share a shape")
    constants = set(constants)
    slots = [(i, j) for i, (_, n) in enumerate(shape) for j in range(n)]
    columns = [tuple(inst[i][1][j] for inst in instances) for i, j in slots]

    var_of_column: Dict[tuple, str] = {}
    lifted_args: Dict[Tuple[int, int], str] = {}
    for slot, col in zip(slots, columns):
        if len(set(col)) == 1 and col[0] in constants:
            lifted_args[slot] = col[0]
            continue
        if col not in var_of_column:
            var_of_column[col] = f"?v{len(var_of_column)}"
        lifted_args[slot] = var_of_column[col]

    lifted = [(name, tuple(lifted_args[(i, j)] for j in range(n))) for i, (name, n) in enumerate(shape)]
    bindings = []
    for k in range(len(instances)):
        bindings.append({var: col[k] for col, var in var_of_column.items()})
    return lifted, bindings


class AtomIndex:
    """State indexed by predicate for unification."""

    def __init__(self, atoms: Iterable[Atom]):
        self.by_pred: Dict[str, List[Tuple[str, ...]]] = {}
        for a in atoms:
            self.by_pred.setdefault(a.predicate, []).append(a.args)

    def candidates(self, predicate: str) -> List[Tuple[str, ...]]:
        return self.by_pred.get(predicate, [])


def match_atoms(atoms: Sequence[Atom], state: AtomIndex, binding: Substitution) -> Iterator[Substitution]:
    """Enumerate extensions of ``binding`` that make every atom true in ``state``."""
    if not atoms:
        yield binding
        return

    def n_candidates(atom: Atom) -> int:
        return len(state.candidates(atom.predicate))

    ordered = sorted(atoms, key=lambda a: (any(is_variable(x) and x not in binding for x in a.args), n_candidates(a)))
    head, rest = ordered[0], ordered[1:]
    for cand in state.candidates(head.predicate):
        if len(cand) != len(head.args):
            continue
        new = dict(binding)
        ok = True
        for term, value in zip(head.args, cand):
            if is_variable(term):
                bound = new.get(term)
                if bound is None:
                    new[term] = value
                elif bound != value:
                    ok = False
                    break
            elif term != value:
                ok = False
                break
        if ok:
            yield from match_atoms(rest, state, new)
