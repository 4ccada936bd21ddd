"""Action model and method precondition induction from the task DFA.

Preconditions come from the observations of a label's pre-set, effects from
its post-set; ground models are lifted under object identity and then
repaired: effects are added where transitions demand them, deleted atoms are
made preconditions, and a tabu search tunes the operators against the samples.
"""
from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .dfa import TaskDFA, postset, preset
from .hddl import DomainFile, Method, Operator
from .logic import Atom, ObjectDecl, Observation, Task, ground_universe, is_variable, lift_atom, objects_by_type
from .methods import LearnedMethod, MethodSet, SynthesisContext
from .sampling import SampleSet

DEFAULT_TENURE = 10
DEFAULT_MOVES = 100
DEFAULT_BUDGET = 1000
DEFAULT_PATIENCE = 20
DEFAULT_WEIGHTS = (1.0, 1.0, 0.5)


class EmptyPresetError(ValueError):
    pass


class NoObservationError(ValueError):
    pass


def default_tolerance(noise: float) -> float:
    """Share of contradicting sightings an induced atom may have."""
    return min(0.5, 2.0 * noise)


@dataclass
class Evidence:
    """How often each atom was seen present and absent."""

    present: Counter = field(default_factory=Counter)
    absent: Counter = field(default_factory=Counter)

    def add(self, other: "Evidence") -> None:
        self.present.update(other.present)
        self.absent.update(other.absent)

    def holds(self, tolerance: float = 0.0) -> frozenset:
        """Atoms seen present at least once and absent at most a ``tolerance`` share of the time."""
        return frozenset(a for a, p in self.present.items()
                         if p >= 1 and self.absent.get(a, 0) <= tolerance * (p + self.absent.get(a, 0)))

    def fails(self, tolerance: float = 0.0) -> frozenset:
        return frozenset(a for a, n in self.absent.items()
                         if n >= 1 and self.present.get(a, 0) <= tolerance * (n + self.present.get(a, 0)))


def node_evidence(dfa: TaskDFA, nodes: Iterable[int]) -> Evidence:
    ev = Evidence()
    for n in nodes:
        ev.present.update(dfa.present_counts.get(n, Counter()))
        ev.absent.update(dfa.absent_counts.get(n, Counter()))
    return ev


def induce_preconditions(dfa: TaskDFA, label: Task, tolerance: float = 0.0) -> frozenset:
    """Atoms holding in every observation of the pre-set of ``label``.

    Unobserved atoms do not block an atom; an atom never seen present is out.
    """
    nodes = preset(dfa, label) if label in dfa.alphabet else set()
    if not nodes:
        raise EmptyPresetError(str(label))
    return node_evidence(dfa, nodes).holds(tolerance)


def induce_effects(dfa: TaskDFA, label: Task, tolerance: float = 0.0) -> Tuple[frozenset, frozenset]:
    """(add, del): atoms always true after ``label`` minus its preconditions, and
    preconditions observed false after it."""
    prec = induce_preconditions(dfa, label, tolerance)
    nodes = postset(dfa, label)
    if not nodes:
        raise EmptyPresetError(str(label))
    post = node_evidence(dfa, nodes)
    return post.holds(tolerance) - prec, prec & post.fails(tolerance)


# --------------------------------------------------------------------------- lifting

@dataclass
class GroundModel:
    label: Task
    pre: Evidence
    post: Evidence


def ground_models(dfa: TaskDFA) -> Dict[Task, GroundModel]:
    out = {}
    for label in sorted((l for l in dfa.alphabet if l.primitive), key=str):
        out[label] = GroundModel(label, node_evidence(dfa, preset(dfa, label)),
                                 node_evidence(dfa, postset(dfa, label)))
    return out


def positional(op: Operator) -> Operator:
    """Rename parameters to ?v0, ?v1, ... for structural comparison."""
    ren = {v: f"?v{i}" for i, v in enumerate(op.variables)}

    def atoms(xs):
        return tuple(sorted(Atom(a.predicate, tuple(ren.get(x, x) for x in a.args)) for a in xs))

    return Operator(op.name, tuple((ren[v], t) for v, t in op.parameters),
                    atoms(op.precondition), atoms(op.add), atoms(op.delete))


def _lift_evidence(ev: Evidence, inverse: Dict[str, str], constants) -> Evidence:
    out = Evidence()
    for src, dst in ((ev.present, out.present), (ev.absent, out.absent)):
        for atom, n in src.items():
            lifted = lift_atom(atom, inverse, constants)
            if lifted is not None:
                dst[lifted] += n
    return out


def lift_operators(ground: Dict[Task, GroundModel], signature: DomainFile, tolerance: float = 0.0) -> List[Operator]:
    """One operator per action name; parameters are ?v0.. typed as in the signature.

    Ground evidence is lifted under object identity (argument i becomes ?vi)
    and pooled over instances, so an atom is kept iff it survives the
    intersection across all instances (up to ``tolerance``).
    """
    constants = {c.name for c in signature.constants}
    ops = []
    for schema in signature.operators:
        params = tuple((f"?v{i}", t) for i, (_, t) in enumerate(schema.parameters))
        pre, post = Evidence(), Evidence()
        for label, gm in ground.items():
            if label.name != schema.name:
                continue
            inverse = {obj: f"?v{i}" for i, obj in enumerate(label.args)}
            pre.add(_lift_evidence(gm.pre, inverse, constants))
            post.add(_lift_evidence(gm.post, inverse, constants))
        prec = pre.holds(tolerance)
        add = post.holds(tolerance) - prec
        delete = prec & post.fails(tolerance)
        ops.append(Operator(schema.name, params, tuple(sorted(prec)), tuple(sorted(add)), tuple(sorted(delete))))
    return ops


# --------------------------------------------------------------------------- refinement

def _with(op: Operator, prec=None, add=None, delete=None) -> Operator:
    prec = op.precondition if prec is None else tuple(sorted(set(prec)))
    add = op.add if add is None else tuple(sorted(set(add)))
    delete = op.delete if delete is None else tuple(sorted(set(delete)))
    return Operator(op.name, op.parameters, prec, add, delete)


def _transition_observations(dfa: TaskDFA, samples: Optional[SampleSet]):
    """(label, before, after) per primitive transition traversal.

    With samples, every step of every positive trace is one traversal and
    carries that trace's own observations; otherwise each automaton edge is
    used once with its nodes' merged observations.
    """
    if samples is None:
        for src, row in dfa.transitions.items():
            before = dfa.observation(src)
            for label, dst in row.items():
                if label.primitive:
                    yield label, before, dfa.observation(dst)
        return
    for trace in samples.positive:
        obs = trace.observations
        for k, label in enumerate(trace.tasks):
            yield label, obs[k], obs[k + 1]


def refine_effects(operators: Sequence[Operator], dfa: TaskDFA, constants: Iterable[str] = (),
                   tolerance: float = 0.0, samples: Optional[SampleSet] = None) -> List[Operator]:
    """Add the effects the automaton's transitions require.

    For every primitive transition, an atom seen absent before and present
    after supports an add effect and one seen present before and absent after
    supports a delete; sightings after the transition that contradict the
    effect count against it.
    """
    constants = set(constants)
    add_ev: Dict[str, Evidence] = {op.name: Evidence() for op in operators}
    del_ev: Dict[str, Evidence] = {op.name: Evidence() for op in operators}
    for label, before, after in _transition_observations(dfa, samples):
        if label.name not in add_ev:
            continue
        inverse = {obj: f"?v{i}" for i, obj in enumerate(label.args)}
        for atoms, counter in ((before.absent & after.present, add_ev[label.name].present),
                               (after.absent, add_ev[label.name].absent),
                               (before.present & after.absent, del_ev[label.name].present),
                               (after.present, del_ev[label.name].absent)):
            for atom in atoms:
                lifted = lift_atom(atom, inverse, constants)
                if lifted is not None:
                    counter[lifted] += 1
    out = []
    for op in operators:
        add = set(op.add) | add_ev[op.name].holds(tolerance)
        delete = (set(op.delete) | del_ev[op.name].holds(tolerance)) - add
        out.append(_with(op, add=add, delete=delete))
    return out


def refine_preconditions(operators: Sequence[Operator]) -> List[Operator]:
    """Every deleted atom becomes a precondition."""
    return [_with(op, prec=set(op.precondition) | set(op.delete)) for op in operators]


# --------------------------------------------------------------------------- fitness / tabu

class _Bits:
    def __init__(self, atoms: Iterable[Atom]):
        self.index: Dict[Atom, int] = {a: i for i, a in enumerate(sorted(atoms))}

    def bit(self, atom: Atom) -> int:
        if atom not in self.index:
            self.index[atom] = len(self.index)
        return 1 << self.index[atom]

    def mask(self, atoms: Iterable[Atom]) -> int:
        m = 0
        for a in atoms:
            m |= self.bit(a)
        return m


class Fitness:
    """Scores an operator set against a sample set.

    fitness = w0 * (executed share of I+ steps)
            + w1 * (share of I- sequences the model rejects)
            + w2 * (share of observed atoms the simulated states agree with)
    """

    def __init__(self, samples: SampleSet, weights: Tuple[float, float, float] = DEFAULT_WEIGHTS):
        self.samples = samples
        self.weights = weights
        hierarchy = samples.signature.hierarchy
        self.bits = _Bits(ground_universe(samples.signature.predicates, samples.objects, hierarchy))
        self.init = self.bits.mask(samples.init)
        self.traces = []
        for tr in samples.positive:
            obs = [(self.bits.mask(o.present), self.bits.mask(o.absent)) for _, o in tr.steps]
            self.traces.append((tr.tasks, obs))
        self.negatives = [tuple(n) for n in samples.negative]
        self._cache: Dict[Tuple[Operator, Task], Tuple[int, int, int]] = {}

    def _ground(self, op: Operator, label: Task) -> Tuple[int, int, int]:
        key = (op, label)
        g = self._cache.get(key)
        if g is None:
            sub = dict(zip(op.variables, label.args))

            def m(atoms):
                return self.bits.mask(Atom(a.predicate, tuple(sub.get(x, x) for x in a.args)) for a in atoms)

            add = m(op.add)
            g = (m(op.precondition), add, m(op.delete) & ~add)
            self._cache[key] = g
        return g

    def components(self, operators: Sequence[Operator]) -> Tuple[float, float, float]:
        ops = {op.name: op for op in operators}
        ok = total = 0
        agree = seen = 0
        for tasks, obs in self.traces:
            state = self.init
            total += len(tasks)
            for task, (present, absent) in zip(tasks, obs):
                op = ops.get(task.name)
                if op is None or len(op.parameters) != len(task.args):
                    break
                prec, add, delete = self._ground(op, task)
                if state & prec != prec:
                    break
                state = (state & ~delete) | add
                ok += 1
                agree += bin(state & present).count("1") + bin(absent & ~state).count("1")
                seen += bin(present | absent).count("1")
        rejected = 0
        for seq in self.negatives:
            state = self.init
            for task in seq:
                op = ops.get(task.name)
                if op is None or len(op.parameters) != len(task.args):
                    rejected += 1
                    break
                prec, add, delete = self._ground(op, task)
                if state & prec != prec:
                    rejected += 1
                    break
                state = (state & ~delete) | add
        pos = ok / total if total else 1.0
        neg = rejected / len(self.negatives) if self.negatives else 1.0
        cons = agree / seen if seen else 1.0
        return pos, neg, cons

    def __call__(self, operators: Sequence[Operator]) -> float:
        pos, neg, cons = self.components(operators)
        w = self.weights
        return w[0] * pos + w[1] * neg + w[2] * cons


def lifted_atom_space(op: Operator, signature: DomainFile) -> List[Atom]:
    """Every type-conformant atom over the operator's parameters and the domain constants."""
    hierarchy = signature.hierarchy
    terms = [ObjectDecl(v, t) for v, t in op.parameters] + list(signature.constants)
    by_type = objects_by_type(terms, hierarchy)
    out = []
    for pred in signature.predicates:
        pools = [by_type.get(t, []) for t in pred.types]
        for args in product(*pools):
            out.append(Atom(pred.name, tuple(args)))
    return sorted(set(out))


@dataclass
class TabuResult:
    operators: List[Operator]
    fitness: float
    history: List[float]
    iterations: int


def tabu_improve(operators: Sequence[Operator], samples: SampleSet, budget: int = DEFAULT_BUDGET,
                 tenure: int = DEFAULT_TENURE, moves: int = DEFAULT_MOVES, patience: int = DEFAULT_PATIENCE,
                 seed: int = 0, fitness: Optional[Fitness] = None) -> TabuResult:
    """Local search over single-atom toggles in one operator's prec/add/del.

    Each iteration samples up to ``moves`` non-tabu toggles and applies the
    best one if it strictly improves fitness; its reverse is then tabu for
    ``tenure`` iterations. Stops after ``budget`` iterations or ``patience``
    iterations without improvement.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    fitness = fitness or Fitness(samples)
    rng = random.Random(seed)
    current = list(operators)
    score = fitness(current)
    history = [score]
    spaces = {op.name: lifted_atom_space(op, samples.signature) for op in current}
    neighbourhood = [(i, slot, atom) for i, op in enumerate(current)
                     for slot in ("precondition", "add", "delete") for atom in spaces[op.name]]
    tabu: deque = deque()
    stale = 0
    it = 0
    for it in range(1, budget + 1):
        while tabu and tabu[0][0] <= it:
            tabu.popleft()
        banned = {m for _, m in tabu}
        allowed = [m for m in neighbourhood if m not in banned]
        if not allowed:
            break
        sample = rng.sample(allowed, min(moves, len(allowed)))
        best_move, best_score, best_ops = None, score, None
        for i, slot, atom in sample:
            op = current[i]
            atoms = set(getattr(op, slot))
            atoms.symmetric_difference_update({atom})
            trial = list(current)
            trial[i] = _with(op, **{"prec" if slot == "precondition" else slot: atoms})
            s = fitness(trial)
            if s > best_score:
                best_move, best_score, best_ops = (i, slot, atom), s, trial
        if best_move is None:
            stale += 1
            if stale >= patience:
                break
            continue
        stale = 0
        current, score = best_ops, best_score
        history.append(score)
        tabu.append((it + tenure, best_move))
    return TabuResult(current, score, history, it)


@dataclass
class ActionModelResult:
    operators: List[Operator]
    fitness: float
    rounds: int
    initial: List[Operator]


def learn_action_model(dfa: TaskDFA, samples: SampleSet, tolerance: float = 0.0, budget: int = DEFAULT_BUDGET,
                       seed: int = 0, max_rounds: int = 5) -> ActionModelResult:
    """Induce, lift, then alternate refinement and tabu search until fitness stops rising."""
    signature = samples.signature
    constants = {c.name for c in signature.constants}
    ops = lift_operators(ground_models(dfa), signature, tolerance)
    initial = list(ops)
    fitness = Fitness(samples)
    best_ops: Optional[List[Operator]] = None
    best = float("-inf")
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        ops = refine_preconditions(refine_effects(ops, dfa, constants, tolerance, samples))
        ops = refine_preconditions(tabu_improve(ops, samples, budget=budget, seed=seed + rounds,
                                                fitness=fitness).operators)
        score = fitness(ops)
        if best_ops is not None and score <= best:
            break
        best_ops, best = ops, score
    return ActionModelResult(best_ops, best, rounds, initial)


# --------------------------------------------------------------------------- method preconditions

@dataclass
class MethodModel:
    method: Method
    precondition: frozenset
    add: frozenset
    delete: frozenset


def _lift_all(atom: Atom, inverse: Dict[str, List[str]], constants) -> List[Atom]:
    pools = []
    for a in atom.args:
        if a in inverse:
            pools.append(inverse[a])
        elif a in constants:
            pools.append([a])
        else:
            return []
    return [Atom(atom.predicate, tuple(args)) for args in product(*pools)]


def _lift_method_evidence(ev: Evidence, binding, constants) -> Evidence:
    inverse: Dict[str, List[str]] = {}
    for var, obj in binding.items():
        inverse.setdefault(obj, []).append(var)
    out = Evidence()
    for src, dst in ((ev.present, out.present), (ev.absent, out.absent)):
        for atom, n in src.items():
            lifts = _lift_all(atom, inverse, constants)
            for lifted in lifts:  # an object bound to several variables says less about each
                dst[lifted] += n / len(lifts)
    return out


def _observation_evidence(obs: Observation, weight: float = 1.0) -> Evidence:
    ev = Evidence()
    for atom in obs.present:
        ev.present[atom] += weight
    for atom in obs.absent:
        ev.absent[atom] += weight
    return ev


def task_guarantees(ctx: SynthesisContext, tolerance: float = 0.0) -> Dict[str, frozenset]:
    """Atoms over a compound task's own arguments (``?a0``, ``?a1``, ...) that
    hold after every observed instance of it."""
    out = {}
    for name, instances in ctx.by_task.items():
        ev = Evidence()
        for inst in instances:
            obs = ctx.samples.positive[inst.trace].observations[inst.end]
            binding = {f"?a{i}": obj for i, obj in enumerate(inst.task.args)}
            ev.add(_lift_method_evidence(_observation_evidence(obs), binding, ctx.constants))
        out[name] = ev.holds(tolerance)
    return out


def _established(method: Method, guarantees: Dict[str, frozenset]) -> frozenset:
    """What the compound subtasks before the first primitive of the body achieve."""
    out = set()
    for sub in method.subtasks:
        if sub.primitive:
            break
        rename = {f"?a{i}": arg for i, arg in enumerate(sub.args)}
        out.update(Atom(a.predicate, tuple(rename.get(x, x) for x in a.args)) for a in guarantees.get(sub.name, ()))
    return frozenset(out)


def learn_method_preconditions(ctx: SynthesisContext, methods: MethodSet, tolerance: float = 0.0) -> Dict[str, MethodModel]:
    """Treat each method as an action applied at the start of every instance it
    decomposes. Each instance votes once with its own observations (split over
    its bindings), so a node that merged many distinct states under noise does
    not swamp the count. Atoms the leading compound subtasks establish anyway
    are not required."""
    constants = ctx.constants
    guarantees = task_guarantees(ctx, tolerance)
    out = {}
    for name in sorted(methods):
        for lm in methods[name]:
            if not lm.support:
                raise NoObservationError(lm.method.name)
            per_instance = Counter(inst for inst, _ in lm.support)
            pre, post = Evidence(), Evidence()
            for inst, binding in lm.support:
                obs = ctx.samples.positive[inst.trace].observations
                w = 1.0 / per_instance[inst]
                pre.add(_lift_method_evidence(_observation_evidence(obs[inst.start], w), binding, constants))
                post.add(_lift_method_evidence(_observation_evidence(obs[inst.end], w), binding, constants))
            prec = pre.holds(tolerance) - _established(lm.method, guarantees)
            out[lm.method.name] = MethodModel(lm.method, prec, post.holds(tolerance) - prec, prec & post.fails(tolerance))
    return out


def with_method_preconditions(methods: MethodSet, models: Dict[str, MethodModel]) -> MethodSet:
    out = MethodSet()
    for name, learned in methods.items():
        out[name] = [LearnedMethod(replace(lm.method, precondition=tuple(sorted(models[lm.method.name].precondition))),
                                   lm.support) for lm in learned]
    return out


# --------------------------------------------------------------------------- assembly / report

def assemble_domain(signature: DomainFile, operators: Sequence[Operator], methods: Sequence[Method]) -> DomainFile:
    return DomainFile(signature.name, signature.types, signature.constants, signature.predicates, signature.tasks,
                      tuple(methods), tuple(operators), signature.requirements)


def learning_report(learned: Sequence[Operator], reference: Optional[DomainFile] = None) -> str:
    """Per-operator summary; with a reference domain, atoms missing (-) or extra (+)."""
    lines = []
    ref = {op.name: positional(op) for op in reference.operators} if reference else {}
    for op in sorted(learned, key=lambda o: o.name):
        mine = positional(op)
        if op.name not in ref:
            lines.append(f"{op.name}: prec={len(op.precondition)} add={len(op.add)} del={len(op.delete)}")
            continue
        other = ref[op.name]
        diffs = []
        for slot in ("precondition", "add", "delete"):
            a, b = set(getattr(mine, slot)), set(getattr(other, slot))
            diffs += [f"{slot} +{x}" for x in sorted(a - b)] + [f"{slot} -{x}" for x in sorted(b - a)]
        lines.append(f"{op.name}: " + ("exact" if not diffs else "; ".join(diffs)))
    return "\n".join(lines) + "\n"
