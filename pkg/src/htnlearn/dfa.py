"""Task DFA learning: prefix tree, RPNI state merging, compound-task transitions."""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .logic import Observation, Task
from .sampling import SampleSet
from .validation import check_fraction, check_sample_set


class InconsistentSamplesError(ValueError):
    pass


class UnknownLabelError(KeyError):
    pass


@dataclass
class TaskDFA:
    """Deterministic automaton over ground task labels.

    Every node is accepting: the sample language is prefix-closed, so a
    sequence is accepted iff it has a run. Observation counts per node record
    how often each atom was seen present / absent by the traces reaching it.
    """

    initial: int
    transitions: Dict[int, Dict[Task, int]]
    present_counts: Dict[int, Counter] = field(default_factory=dict)
    absent_counts: Dict[int, Counter] = field(default_factory=dict)
    compound_targets: Dict[Tuple[int, Task], Counter] = field(default_factory=dict)
    merges: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def nodes(self) -> Set[int]:
        out = {self.initial} | set(self.transitions)
        for row in self.transitions.values():
            out.update(row.values())
        return out

    @property
    def accepting(self) -> Set[int]:
        return self.nodes

    @property
    def alphabet(self) -> Set[Task]:
        return {label for row in self.transitions.values() for label in row}

    def target(self, node: int, label: Task) -> Optional[int]:
        return self.transitions.get(node, {}).get(label)

    def run(self, seq: Iterable[Task]) -> Optional[List[int]]:
        """Node path of ``seq`` from the initial node, or None if it falls off."""
        node = self.initial
        path = [node]
        for label in seq:
            node = self.transitions.get(node, {}).get(label)
            if node is None:
                return None
            path.append(node)
        return path

    def accepts(self, seq: Iterable[Task]) -> bool:
        return self.run(seq) is not None

    def observation(self, node: int) -> Observation:
        """Majority view of the observations merged into ``node``."""
        pos = self.present_counts.get(node, Counter())
        neg = self.absent_counts.get(node, Counter())
        present = frozenset(a for a in pos if pos[a] > neg.get(a, 0))
        absent = frozenset(a for a in neg if neg[a] > pos.get(a, 0))
        return Observation(present, absent)

    def export(self) -> str:
        lines = []
        for src in sorted(self.transitions):
            for label, dst in sorted(self.transitions[src].items(), key=lambda kv: str(kv[0])):
                lines.append(f"{src} {label} {dst}")
        return "\n".join(lines) + ("\n" if lines else "")


def preset(dfa: TaskDFA, label: Task) -> Set[int]:
    if label not in dfa.alphabet:
        raise UnknownLabelError(str(label))
    return {src for src, row in dfa.transitions.items() if label in row}


def postset(dfa: TaskDFA, label: Task) -> Set[int]:
    if label not in dfa.alphabet:
        raise UnknownLabelError(str(label))
    return {row[label] for row in dfa.transitions.values() if label in row}


# --------------------------------------------------------------------------- PTA

def build_pta(samples: SampleSet) -> TaskDFA:
    """Prefix tree of the positive traces, nodes numbered breadth-first."""
    trie: Dict[int, Dict[Task, int]] = {0: {}}
    pos: Dict[int, Counter] = {0: Counter()}
    neg: Dict[int, Counter] = {0: Counter()}
    for trace in samples.positive:
        node = 0
        obs = trace.observations
        pos[0].update(obs[0].present)
        neg[0].update(obs[0].absent)
        for k, task in enumerate(trace.tasks, start=1):
            row = trie[node]
            if task not in row:
                row[task] = len(trie)
                trie[row[task]] = {}
                pos[row[task]] = Counter()
                neg[row[task]] = Counter()
            node = row[task]
            pos[node].update(obs[k].present)
            neg[node].update(obs[k].absent)

    order = {0: 0}
    queue = deque([0])
    while queue:
        n = queue.popleft()
        for label in sorted(trie[n], key=str):
            child = trie[n][label]
            order[child] = len(order)
            queue.append(child)
    transitions = {order[n]: {lab: order[c] for lab, c in row.items()} for n, row in trie.items()}
    return TaskDFA(0, transitions,
                   {order[n]: c for n, c in pos.items()},
                   {order[n]: c for n, c in neg.items()})


# --------------------------------------------------------------------------- RPNI

class _Attempt:
    """Overlay on the automaton for one merge attempt; ``commit`` writes it back."""

    def __init__(self, trans, pos, neg, theta: float):
        self.base_trans, self.base_pos, self.base_neg = trans, pos, neg
        self.trans: Dict[int, Dict[Task, int]] = {}
        self.pos: Dict[int, Counter] = {}
        self.neg: Dict[int, Counter] = {}
        self.theta = theta
        self.absorbed: List[Tuple[int, int]] = []

    def row(self, node: int) -> Dict[Task, int]:
        if node in self.trans:
            return self.trans[node]
        return self.base_trans.get(node, {})

    def _w_row(self, node: int) -> Dict[Task, int]:
        if node not in self.trans:
            self.trans[node] = dict(self.base_trans.get(node, {}))
        return self.trans[node]

    def _counts(self, node: int):
        if node in self.pos:
            return self.pos[node], self.neg[node]
        return self.base_pos.get(node, Counter()), self.base_neg.get(node, Counter())

    def redirect(self, src: int, label: Task, dst: int) -> None:
        self._w_row(src)[label] = dst

    def fold(self, red: int, blue: int) -> bool:
        stack = [(red, blue)]
        while stack:
            r, b = stack.pop()
            if r == b:
                continue
            bp, bn = self._counts(b)
            if bp or bn:
                rp, rn = self._counts(r)
                if not _compatible(rp, rn, bp, bn, self.theta):
                    return False
                self.pos[r] = rp + bp
                self.neg[r] = rn + bn
            for label, bc in self.row(b).items():
                rc = self.row(r).get(label)
                if rc is None:
                    self._w_row(r)[label] = bc
                else:
                    stack.append((rc, bc))
            self.absorbed.append((r, b))
            self.trans[b] = {}
        return True

    def accepts(self, seq: Sequence[Task], initial: int) -> bool:
        node = initial
        for label in seq:
            node = self.row(node).get(label)
            if node is None:
                return False
        return True

    def commit(self) -> None:
        absorbed = {b for _, b in self.absorbed}
        for node, row in self.trans.items():
            if node not in absorbed:
                self.base_trans[node] = row
        for node in self.pos:
            self.base_pos[node] = self.pos[node]
            self.base_neg[node] = self.neg[node]
        for b in absorbed:
            self.base_trans.pop(b, None)
            self.base_pos.pop(b, None)
            self.base_neg.pop(b, None)


def _compatible(rp: Counter, rn: Counter, bp: Counter, bn: Counter, theta: float) -> bool:
    for atom in set(bp) | set(bn):
        p = rp.get(atom, 0) + bp.get(atom, 0)
        n = rn.get(atom, 0) + bn.get(atom, 0)
        if min(p, n) > theta * (p + n):
            return False
    return True


def rpni_learn(samples: SampleSet, noise_tolerance: float = 0.0) -> TaskDFA:
    """Red-blue RPNI over the positive prefix tree.

    A merge is kept only if no negative sequence becomes accepted and the
    merged observations stay compatible: for every atom, the minority of
    present/absent sightings is at most ``noise_tolerance`` of the total.
    """
    pta = build_pta(samples)
    negatives = [tuple(n) for n in samples.negative]
    for neg in negatives:
        if pta.accepts(neg):
            raise InconsistentSamplesError(f"sequence is both positive and negative: {' '.join(map(str, neg))}")

    trans = {n: dict(row) for n, row in pta.transitions.items()}
    pos, neg_counts = dict(pta.present_counts), dict(pta.absent_counts)
    red: List[int] = [pta.initial]
    red_set = {pta.initial}
    merges: List[Tuple[int, int]] = []
    empty = Counter()

    def blue_nodes() -> List[Tuple[int, int, Task]]:
        """(blue node, red parent, label), smallest blue first."""
        out = {}
        for r in red:
            for label, child in trans.get(r, {}).items():
                if child not in red_set:
                    out[child] = (r, label)
        return [(q, *out[q]) for q in sorted(out)]

    blues = blue_nodes()
    while blues:
        q, src, label = blues[0]
        merged = False
        for r in red:
            if not _compatible(pos.get(r, empty), neg_counts.get(r, empty),
                               pos.get(q, empty), neg_counts.get(q, empty), noise_tolerance):
                continue
            attempt = _Attempt(trans, pos, neg_counts, noise_tolerance)
            attempt.redirect(src, label, r)
            if not attempt.fold(r, q):
                continue
            if any(attempt.accepts(n, pta.initial) for n in negatives):
                continue
            attempt.commit()
            merges.extend(attempt.absorbed)
            merged = True
            break
        if not merged:
            red.append(q)
            red_set.add(q)
        blues = blue_nodes()

    reachable = {pta.initial}
    queue = deque([pta.initial])
    while queue:
        n = queue.popleft()
        for child in trans.get(n, {}).values():
            if child not in reachable:
                reachable.add(child)
                queue.append(child)
    return TaskDFA(pta.initial,
                   {n: dict(trans.get(n, {})) for n in reachable},
                   {n: pos.get(n, Counter()) for n in reachable},
                   {n: neg_counts.get(n, Counter()) for n in reachable},
                   merges=merges)


def add_compound_transitions(dfa: TaskDFA, samples: SampleSet) -> TaskDFA:
    """Add one transition per observed compound-task annotation.

    When annotations disagree on the target of (node, task), the target seen
    most often wins and ties go to the smaller node id; all targets stay in
    ``compound_targets``.
    """
    targets: Dict[Tuple[int, Task], Counter] = {k: Counter(v) for k, v in dfa.compound_targets.items()}
    for trace in samples.positive:
        path = dfa.run(trace.tasks)
        if path is None:
            raise ValueError("automaton does not accept a positive trace")
        for a in trace.annotations:
            targets.setdefault((path[a.start], a.task), Counter())[path[a.end]] += 1
    transitions = {n: dict(row) for n, row in dfa.transitions.items()}
    for (src, label), counts in targets.items():
        best = min(counts, key=lambda node: (-counts[node], node))
        transitions.setdefault(src, {})[label] = best
    return TaskDFA(dfa.initial, transitions, dfa.present_counts, dfa.absent_counts, targets, list(dfa.merges))


def primitive_only(dfa: TaskDFA) -> TaskDFA:
    transitions = {n: {lab: d for lab, d in row.items() if lab.primitive} for n, row in dfa.transitions.items()}
    return TaskDFA(dfa.initial, transitions, dfa.present_counts, dfa.absent_counts, {}, list(dfa.merges))


class RPNI(BaseEstimator):
    """Estimator wrapper: ``fit`` learns the task DFA, ``predict`` tells accepted sequences."""

    def __init__(self, noise_tolerance: float = 0.0, compound_transitions: bool = True):
        self.noise_tolerance = noise_tolerance
        self.compound_transitions = compound_transitions

    def fit(self, X: SampleSet, y=None):
        check_sample_set(X)
        check_fraction(self.noise_tolerance, "noise_tolerance")
        dfa = rpni_learn(X, self.noise_tolerance)
        self.pta_size_ = len(build_pta(X).nodes)
        self.merges_ = list(dfa.merges)
        self.dfa_ = add_compound_transitions(dfa, X) if self.compound_transitions else dfa
        return self

    def predict(self, X: Sequence[Sequence[Task]]) -> np.ndarray:
        check_is_fitted(self, "dfa_")
        return np.array([self.dfa_.accepts(seq) for seq in X], dtype=bool)

    def score(self, X: SampleSet, y=None) -> float:
        """Fraction of I+ accepted and I- rejected."""
        check_is_fitted(self, "dfa_")
        pos = [self.dfa_.accepts(t.tasks) for t in X.positive]
        neg = [not self.dfa_.accepts(s) for s in X.negative]
        both = pos + neg
        return float(np.mean(both)) if both else 1.0
