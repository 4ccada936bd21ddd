import random

import pytest

from htnlearn.benchmarks import load_benchmark
from htnlearn.hddl import ProblemFile
from htnlearn.logic import Atom, ObjectDecl, Task
from htnlearn.oracle import InapplicableActionError, NotDecomposableError, Oracle

from conftest import bench_oracle


def A(pred, *args):
    return Atom(pred, args)


def T(name, *args, primitive=True):
    return Task(name, args, primitive)


@pytest.fixture
def gripper():
    return bench_oracle("gripper")


def test_applicability(gripper):
    s = {A("at-robby", "ra"), A("at", "b1", "ra"), A("free", "l")}
    assert gripper.is_applicable(T("pick", "b1", "l", "ra"), s)
    s2 = {A("at-robby", "rb"), A("at", "b1", "ra"), A("free", "l")}
    assert not gripper.is_applicable(T("pick", "b1", "l", "ra"), s2)


def test_transition(gripper):
    s = {A("at-robby", "ra"), A("at", "b1", "ra"), A("free", "l")}
    assert gripper.apply(s, T("pick", "b1", "l", "ra")) == {A("at-robby", "ra"), A("carry", "b1", "l")}
    with pytest.raises(InapplicableActionError):
        gripper.apply({A("at-robby", "rb")}, T("pick", "b1", "l", "ra"))


def test_operator_grounding_is_injective(gripper):
    assert gripper.action(T("move", "ra", "ra")) is None
    assert all(len(set(t.args)) == len(t.args) for t in gripper.ground_tasks() if t.primitive)


def test_goto_decomposability(gripper):
    at_rb = {A("at-robby", "rb")}
    assert gripper.decomposable(T("goto", "ra", primitive=False), at_rb)
    here = gripper.decompose(T("goto", "ra", primitive=False), {A("at-robby", "ra")})
    assert here.primitives == ()
    assert here.annotations[0].start == here.annotations[0].end == 0


def test_move1ball_decomposition_shape(gripper):
    s = {A("at-robby", "ra"), A("at", "b1", "rb"), A("free", "l"), A("free", "r")}
    dec = gripper.decompose(T("move1ball", "b1", "ra", primitive=False), s, random.Random(0))
    names = [t.name for t in dec.primitives]
    assert names == ["move", "pick", "move", "drop"]
    g = dec.primitives[1].args[1]
    assert dec.primitives == (T("move", "ra", "rb"), T("pick", "b1", g, "rb"), T("move", "rb", "ra"),
                              T("drop", "b1", g, "ra"))
    # every level is annotated, and spans nest
    spans = sorted((a.start, a.end, a.task.name) for a in dec.annotations)
    assert (0, 4, "move1ball") in spans and (0, 1, "goto") in spans and (2, 3, "goto") in spans
    assert A("at", "b1", "ra") in dec.state


def test_primitive_task_decomposes_to_itself(gripper):
    s = {A("at-robby", "ra")}
    assert gripper.decompose(T("move", "ra", "rb"), s).primitives == (T("move", "ra", "rb"),)


def test_no_binding_means_not_decomposable():
    d = load_benchmark("gripper").domain
    empty = Oracle(d, ProblemFile("p", d.name, (ObjectDecl("ra", "room"),), frozenset({A("at-robby", "ra")})))
    assert not empty.decomposable(T("move1ball", "b1", "ra", primitive=False), empty.init)
    with pytest.raises(NotDecomposableError):
        empty.decompose(T("move1ball", "b1", "ra", primitive=False), empty.init)


def test_execute_reports_failure(gripper):
    assert gripper.execute([T("move", "ra", "rb")]) is not None
    assert gripper.execute([T("move", "rb", "ra")]) is None
