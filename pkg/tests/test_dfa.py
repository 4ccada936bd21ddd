import random
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from htnlearn.dfa import (RPNI, InconsistentSamplesError, UnknownLabelError, add_compound_transitions, build_pta,
                          postset, preset, primitive_only, rpni_learn)
from htnlearn.logic import Task
from htnlearn.oracle import Oracle
from htnlearn.sampling import CorruptionConfig, corrupt_samples, exhaustive_samples

from conftest import bench_dfa, bench_oracle, bench_samples, seq, sequence_samples, toy

FIG1_POS = ["a", "ab", "ba", "bab", "abb"]
FIG1_NEG = ["aa", "bb", "aba", "baa"]


def canonical(dfa):
    """Transitions renamed by BFS discovery order over sorted labels."""
    order = {dfa.initial: 0}
    queue = [dfa.initial]
    edges = set()
    while queue:
        n = queue.pop(0)
        for label in sorted(dfa.transitions.get(n, {}), key=str):
            m = dfa.transitions[n][label]
            if m not in order:
                order[m] = len(order)
                queue.append(m)
            edges.add((order[n], str(label), order[m]))
    return len(order), edges


def test_pta_shape():
    pta = build_pta(sequence_samples(["a", "ab"], []))
    assert len(pta.nodes) == 3
    assert pta.run(seq("ab")) == [0, 1, 2]
    assert len(build_pta(sequence_samples([], [])).nodes) == 1


def test_pta_counts_distinct_prefixes():
    ss = bench_samples("gripper", 100, 0)
    prefixes = {tuple(t.tasks[:k]) for t in ss.positive for k in range(len(t) + 1)}
    assert len(build_pta(ss).nodes) == len(prefixes)


def test_small_two_label_automaton():
    dfa = rpni_learn(sequence_samples(FIG1_POS, FIG1_NEG))
    # s0 -a-> s2, s0 -b-> s1, s1 -a-> s2, s2 -b-> s2, renamed by discovery order
    expected = (3, {(0, "a()", 1), (0, "b()", 2), (2, "a()", 1), (1, "b()", 1)})
    assert canonical(dfa) == expected
    a, b = seq("ab")
    s0 = dfa.initial
    s2, s1 = dfa.target(s0, a), dfa.target(s0, b)
    assert preset(dfa, b) == {s0, s2}
    assert postset(dfa, b) == {s1, s2}


def test_inconsistent_samples():
    with pytest.raises(InconsistentSamplesError):
        rpni_learn(sequence_samples(["a"], ["a"]))


def test_unknown_label():
    dfa = rpni_learn(sequence_samples(FIG1_POS, FIG1_NEG))
    with pytest.raises(UnknownLabelError):
        preset(dfa, Task("zz", (), True))


def test_toy_language_equivalence_up_to_8():
    d, p = toy()
    o = Oracle(d, p)
    dfa = rpni_learn(exhaustive_samples(o, 6))
    assert len(dfa.nodes) == 2
    a, b = seq("ab")
    assert preset(dfa, a) == {dfa.initial} and postset(dfa, a) == {dfa.target(dfa.initial, a)}
    for n in range(9):
        for word in product("ab", repeat=n):
            s = seq("".join(word))
            assert dfa.accepts(s) == (o.execute(s) is not None), word


@pytest.mark.parametrize("name", ["gripper", "blocksworld", "childsnack"])
def test_consistency_on_benchmarks(name):
    ss = bench_samples(name, 600, 0)
    dfa = bench_dfa(name, 600, 0)
    assert all(dfa.accepts(t.tasks) for t in ss.positive)
    assert not any(dfa.accepts(n) for n in ss.negative)
    assert len(dfa.nodes) <= len(build_pta(ss).nodes)


@settings(max_examples=12, deadline=None)
@given(st.sampled_from(["gripper", "blocksworld"]), st.integers(20, 150), st.integers(0, 10_000),
       st.sampled_from([(1.0, 0.0), (0.25, 0.2), (0.5, 0.1)]))
def test_consistency_property(name, size, seed, corruption):
    o = bench_oracle(name)
    from htnlearn.sampling import generate
    ss = corrupt_samples(generate(o, size, random.Random(seed)), CorruptionConfig(*corruption, seed), o.universe)
    dfa = add_compound_transitions(rpni_learn(ss, corruption[1]), ss)
    assert all(dfa.accepts(t.tasks) for t in ss.positive)
    assert not any(dfa.accepts(n) for n in ss.negative)
    for row in dfa.transitions.values():  # deterministic, endpoints are nodes
        assert set(row.values()) <= dfa.nodes


def test_merge_record_replays():
    ss = bench_samples("gripper", 100, 0)
    dfa = rpni_learn(ss)
    pta = build_pta(ss)
    rep = {n: n for n in pta.nodes}

    def find(n):
        while rep[n] != n:
            n = rep[n]
        return n

    for survivor, absorbed in dfa.merges:
        rep[find(absorbed)] = find(survivor)
    for src, row in pta.transitions.items():
        for label, dst in row.items():
            assert dfa.transitions[find(src)][label] == find(dst)


def test_compound_transitions():
    ss = bench_samples("gripper", 600, 0)
    base = rpni_learn(ss)
    dfa = add_compound_transitions(base, ss)
    for n, row in base.transitions.items():  # primitive transitions untouched
        for label, dst in row.items():
            assert dfa.transitions[n][label] == dst
    for tr in ss.positive:
        path = dfa.run(tr.tasks)
        for a in tr.annotations:
            key = (path[a.start], a.task)
            assert path[a.end] in dfa.compound_targets[key]
            assert dfa.transitions[key[0]][a.task] in dfa.compound_targets[key]
    empties = [a for tr in ss.positive for a in tr.annotations if a.start == a.end]
    assert empties  # goto with the robot already there
    assert primitive_only(dfa).transitions == {n: r for n, r in base.transitions.items()}


def test_compound_majority_and_tie_break():
    ss = bench_samples("gripper", 600, 0)
    dfa = bench_dfa("gripper", 600, 0)
    for (src, label), counts in dfa.compound_targets.items():
        best = max(counts.values())
        assert dfa.transitions[src][label] == min(n for n, c in counts.items() if c == best)


def test_no_annotations_leaves_dfa_unchanged():
    ss = sequence_samples(FIG1_POS, FIG1_NEG)
    dfa = rpni_learn(ss)
    assert add_compound_transitions(dfa, ss).transitions == dfa.transitions


def test_estimator_wrapper():
    ss = sequence_samples(FIG1_POS, FIG1_NEG)
    est = RPNI().fit(ss)
    assert est.score(ss) == 1.0
    assert est.predict([seq("ab"), seq("aa")]).tolist() == [True, False]
    assert isinstance(est.predict([seq("a")]), np.ndarray)
    assert est.get_params() == {"noise_tolerance": 0.0, "compound_transitions": True}


def test_export_format():
    dfa = rpni_learn(sequence_samples(FIG1_POS, FIG1_NEG))
    lines = dfa.export().splitlines()
    assert len(lines) == 4 and all(len(l.split()) == 3 for l in lines)
