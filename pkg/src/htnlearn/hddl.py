"""Reader and canonical printer for the totally-ordered HDDL subset.

Supported: ``:typing``, ``:hierarchy``, ``:constants``, ``:task``, ``:method`` with
``:ordered-subtasks``, ``:action`` with conjunctive positive preconditions and
STRIPS effects, and problems with an ``:htn`` initial task network.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .logic import Atom, ObjectDecl, Predicate, Task, TypeHierarchy, is_variable

Param = Tuple[str, str]


class HDDLSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class HDDLSemanticError(ValueError):
    def __init__(self, message: str, item: str):
        super().__init__(f"{message}: {item}")
        self.item = item


@dataclass(frozen=True)
class TaskSchema:
    name: str
    parameters: Tuple[Param, ...] = ()


@dataclass(frozen=True)
class Operator:
    name: str
    parameters: Tuple[Param, ...] = ()
    precondition: Tuple[Atom, ...] = ()
    add: Tuple[Atom, ...] = ()
    delete: Tuple[Atom, ...] = ()

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(p for p, _ in self.parameters)


@dataclass(frozen=True)
class Method:
    name: str
    task: Task
    parameters: Tuple[Param, ...] = ()
    precondition: Tuple[Atom, ...] = ()
    subtasks: Tuple[Task, ...] = ()

    @property
    def signature(self) -> Tuple[str, Tuple[str, ...]]:
        return self.task.name, tuple(t.name for t in self.subtasks)


def _by_name(items):
    return tuple(sorted(items, key=lambda x: x.name))


@dataclass(frozen=True)
class DomainFile:
    name: str
    types: Tuple[Tuple[str, str], ...] = ()
    constants: Tuple[ObjectDecl, ...] = ()
    predicates: Tuple[Predicate, ...] = ()
    tasks: Tuple[TaskSchema, ...] = ()
    methods: Tuple[Method, ...] = ()
    operators: Tuple[Operator, ...] = ()
    requirements: Tuple[str, ...] = (":typing", ":hierarchy")

    def __post_init__(self):
        # canonical order so that parse(print(d)) == d
        object.__setattr__(self, "types", tuple(sorted(self.types)))
        object.__setattr__(self, "constants", _by_name(self.constants))
        object.__setattr__(self, "predicates", _by_name(self.predicates))
        object.__setattr__(self, "tasks", _by_name(self.tasks))
        object.__setattr__(self, "methods", _by_name(self.methods))
        object.__setattr__(self, "operators", _by_name(self.operators))

    @property
    def hierarchy(self) -> TypeHierarchy:
        return TypeHierarchy(dict(self.types))

    def operator(self, name: str) -> Operator:
        for op in self.operators:
            if op.name == name:
                return op
        raise KeyError(name)

    def task_schema(self, name: str) -> TaskSchema:
        for t in self.tasks:
            if t.name == name:
                return t
        raise KeyError(name)

    def methods_for(self, task_name: str) -> List[Method]:
        return [m for m in self.methods if m.task.name == task_name]

    def is_primitive(self, name: str) -> bool:
        return any(op.name == name for op in self.operators)

    def signature_types(self, name: str) -> Tuple[str, ...]:
        """Parameter types of a primitive or compound task."""
        for op in self.operators:
            if op.name == name:
                return tuple(t for _, t in op.parameters)
        return tuple(t for _, t in self.task_schema(name).parameters)


@dataclass(frozen=True)
class ProblemFile:
    name: str
    domain_name: str
    objects: Tuple[ObjectDecl, ...] = ()
    init: frozenset = frozenset()
    goal: frozenset = frozenset()
    initial_network: Tuple[Task, ...] = ()


# --------------------------------------------------------------------------- lexing

@dataclass
class _Tok:
    text: str
    line: int
    col: int


class _List(list):
    line = 0
    col = 0


def _read_sexpr(text: str) -> list:
    tokens: List[_Tok] = []
    line, col = 1, 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 0
            i += 1
            continue
        col += 1
        if ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch.isspace():
            i += 1
            continue
        if ch in "()":
            tokens.append(_Tok(ch, line, col))
            i += 1
            continue
        start, start_col = i, col
        while i + 1 < len(text) and not text[i + 1].isspace() and text[i + 1] not in "();":
            i += 1
            col += 1
        tokens.append(_Tok(text[start:i + 1].lower(), line, start_col))
        i += 1

    stack: List[_List] = []
    result = None
    for tok in tokens:
        if tok.text == "(":
            lst = _List()
            lst.line, lst.col = tok.line, tok.col
            stack.append(lst)
        elif tok.text == ")":
            if not stack:
                raise HDDLSyntaxError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            elif result is None:
                result = done
            else:
                raise HDDLSyntaxError("trailing expression", tok.line, tok.col)
        else:
            if not stack:
                raise HDDLSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)
            stack[-1].append(tok.text)
    if stack:
        raise HDDLSyntaxError("unbalanced '('", stack[-1].line, stack[-1].col)
    if result is None:
        raise HDDLSyntaxError("empty input", line, col)
    return result


def _where(expr) -> Tuple[int, int]:
    return getattr(expr, "line", 0), getattr(expr, "col", 0)


def _expect_list(expr, what: str) -> list:
    if not isinstance(expr, list):
        raise HDDLSyntaxError(f"expected {what}", *_where(expr))
    return expr


def _typed_list(items: Sequence[str]) -> List[Tuple[str, str]]:
    """Parse ``a b - t c`` into [(a, t), (b, t), (c, object)]."""
    out: List[Tuple[str, str]] = []
    pending: List[str] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if not isinstance(tok, str):
            raise HDDLSyntaxError("nested list in typed list", *_where(tok))
        if tok == "-":
            if i + 1 >= len(items):
                raise HDDLSyntaxError("missing type after '-'")
            out.extend((name, items[i + 1]) for name in pending)
            pending = []
            i += 2
            continue
        pending.append(tok)
        i += 1
    out.extend((name, "object") for name in pending)
    return out


def _keyword_args(items: list, start: int) -> Dict[str, object]:
    kw: Dict[str, object] = {}
    i = start
    while i < len(items):
        key = items[i]
        if not isinstance(key, str) or not key.startswith(":"):
            raise HDDLSyntaxError(f"expected keyword, got {key!r}", *_where(items))
        if i + 1 >= len(items):
            raise HDDLSyntaxError(f"missing value for {key}", *_where(items))
        kw[key] = items[i + 1]
        i += 2
    return kw


def _atom(expr) -> Atom:
    expr = _expect_list(expr, "atom")
    if not expr or not all(isinstance(x, str) for x in expr):
        raise HDDLSyntaxError("malformed atom", *_where(expr))
    if expr[0] == "not":
        raise HDDLSyntaxError("negative literal not supported here", *_where(expr))
    return Atom(expr[0], tuple(expr[1:]))


def _conjunction(expr) -> List[list]:
    expr = _expect_list(expr, "formula")
    if not expr:
        return []
    if expr[0] == "and":
        return [_expect_list(x, "formula") for x in expr[1:]]
    return [expr]


def _subtask_list(expr) -> List[Tuple[str, Tuple[str, ...]]]:
    out = []
    for item in _conjunction(expr):
        # labelled form: (task0 (move ?a ?b))
        if len(item) == 2 and isinstance(item[0], str) and isinstance(item[1], list):
            item = item[1]
        if not item or not all(isinstance(x, str) for x in item):
            raise HDDLSyntaxError("malformed subtask", *_where(item))
        out.append((item[0], tuple(item[1:])))
    return out


# --------------------------------------------------------------------------- domain

def parse_domain(text: str) -> DomainFile:
    tree = _expect_list(_read_sexpr(text), "define")
    if len(tree) < 2 or tree[0] != "define":
        raise HDDLSyntaxError("expected (define ...)", *_where(tree))
    header = _expect_list(tree[1], "(domain name)")
    if len(header) != 2 or header[0] != "domain":
        raise HDDLSyntaxError("expected (domain name)", *_where(header))
    name = header[1]
    requirements: Tuple[str, ...] = ()
    types: List[Tuple[str, str]] = []
    constants: List[ObjectDecl] = []
    predicates: List[Predicate] = []
    tasks: List[TaskSchema] = []
    raw_methods: List[list] = []
    raw_actions: List[list] = []
    for section in tree[2:]:
        section = _expect_list(section, "section")
        if not section:
            raise HDDLSyntaxError("empty section", *_where(section))
        tag = section[0]
        if tag == ":requirements":
            requirements = tuple(section[1:])
        elif tag == ":types":
            types.extend(_typed_list(section[1:]))
        elif tag == ":constants":
            constants.extend(ObjectDecl(n, t) for n, t in _typed_list(section[1:]))
        elif tag == ":predicates":
            for p in section[1:]:
                p = _expect_list(p, "predicate")
                predicates.append(Predicate(p[0], tuple(t for _, t in _typed_list(p[1:]))))
        elif tag == ":task":
            kw = _keyword_args(section, 2)
            params = tuple(_typed_list(kw.get(":parameters", [])))
            tasks.append(TaskSchema(section[1], params))
        elif tag == ":method":
            raw_methods.append(section)
        elif tag == ":action":
            raw_actions.append(section)
        else:
            raise HDDLSyntaxError(f"unsupported section {tag}", *_where(section))

    operators = [_parse_action(a) for a in raw_actions]
    op_names = {op.name for op in operators}
    methods = [_parse_method(m, op_names) for m in raw_methods]
    domain = DomainFile(name, tuple(types), tuple(constants), tuple(predicates), tuple(tasks),
                        tuple(methods), tuple(operators), requirements)
    validate_domain(domain)
    return domain


def _parse_action(section: list) -> Operator:
    kw = _keyword_args(section, 2)
    params = tuple(_typed_list(kw.get(":parameters", [])))
    prec = tuple(_atom(x) for x in _conjunction(kw.get(":precondition", [])))
    add, delete = [], []
    for lit in _conjunction(kw.get(":effect", [])):
        if lit and lit[0] == "not":
            if len(lit) != 2:
                raise HDDLSyntaxError("malformed negative effect", *_where(lit))
            delete.append(_atom(lit[1]))
        else:
            add.append(_atom(lit))
    return Operator(section[1], params, prec, tuple(add), tuple(delete))


def _parse_method(section: list, op_names) -> Method:
    kw = _keyword_args(section, 2)
    params = tuple(_typed_list(kw.get(":parameters", [])))
    if ":task" not in kw:
        raise HDDLSemanticError("method without :task", section[1])
    head = _expect_list(kw[":task"], "task")
    task = Task(head[0], tuple(head[1:]), primitive=False)
    prec = tuple(_atom(x) for x in _conjunction(kw.get(":precondition", [])))
    body_expr = kw.get(":ordered-subtasks", kw.get(":ordered-tasks", []))
    if ":subtasks" in kw or ":tasks" in kw:
        raise HDDLSemanticError("partially ordered method bodies are not supported", section[1])
    subtasks = tuple(Task(n, args, primitive=n in op_names) for n, args in _subtask_list(body_expr))
    return Method(section[1], task, params, prec, subtasks)


def validate_domain(d: DomainFile) -> None:
    declared_types = {"object"} | {t for t, _ in d.types} | {p for _, p in d.types}
    constants = {c.name for c in d.constants}
    for c in d.constants:
        if c.type not in declared_types:
            raise HDDLSemanticError("undeclared type", c.type)
    preds = {p.name: p for p in d.predicates}
    for p in d.predicates:
        for t in p.types:
            if t not in declared_types:
                raise HDDLSemanticError("undeclared type", t)
    arity = {t.name: len(t.parameters) for t in d.tasks}
    compound = set(arity)
    for op in d.operators:
        arity[op.name] = len(op.parameters)

    def check_params(params, owner):
        for _, t in params:
            if t not in declared_types:
                raise HDDLSemanticError("undeclared type", t)
        names = [p for p, _ in params]
        if len(set(names)) != len(names):
            raise HDDLSemanticError("duplicate parameter", owner)

    def check_terms(args, scope, owner):
        for a in args:
            if is_variable(a):
                if a not in scope:
                    raise HDDLSemanticError(f"undeclared variable in {owner}", a)
            elif a not in constants:
                raise HDDLSemanticError(f"undeclared constant in {owner}", a)

    def check_atom(atom: Atom, scope, owner):
        if atom.predicate not in preds:
            raise HDDLSemanticError("undeclared predicate", atom.predicate)
        if len(atom.args) != preds[atom.predicate].arity:
            raise HDDLSemanticError("wrong arity for predicate", atom.predicate)
        check_terms(atom.args, scope, owner)

    for t in d.tasks:
        check_params(t.parameters, t.name)
    for op in d.operators:
        check_params(op.parameters, op.name)
        scope = set(op.variables)
        for a in op.precondition + op.add + op.delete:
            check_atom(a, scope, op.name)
    for m in d.methods:
        check_params(m.parameters, m.name)
        scope = {p for p, _ in m.parameters}
        if m.task.name not in compound:
            raise HDDLSemanticError("method head is not a declared compound task", m.task.name)
        if len(m.task.args) != arity[m.task.name]:
            raise HDDLSemanticError("wrong arity for task", m.task.name)
        check_terms(m.task.args, scope, m.name)
        for a in m.precondition:
            check_atom(a, scope, m.name)
        for s in m.subtasks:
            if s.name not in arity:
                raise HDDLSemanticError("undeclared task", s.name)
            if len(s.args) != arity[s.name]:
                raise HDDLSemanticError("wrong arity for task", s.name)
            check_terms(s.args, scope, m.name)


# --------------------------------------------------------------------------- problem

def parse_problem(text: str, domain: DomainFile) -> ProblemFile:
    tree = _expect_list(_read_sexpr(text), "define")
    if len(tree) < 2 or tree[0] != "define":
        raise HDDLSyntaxError("expected (define ...)", *_where(tree))
    header = _expect_list(tree[1], "(problem name)")
    if len(header) != 2 or header[0] != "problem":
        raise HDDLSyntaxError("expected (problem name)", *_where(header))
    domain_name = domain.name
    objects: List[ObjectDecl] = []
    init: List[Atom] = []
    goal: List[Atom] = []
    network: List[Tuple[str, Tuple[str, ...]]] = []
    for section in tree[2:]:
        section = _expect_list(section, "section")
        tag = section[0] if section else None
        if tag == ":domain":
            domain_name = section[1]
        elif tag == ":objects":
            objects.extend(ObjectDecl(n, t) for n, t in _typed_list(section[1:]))
        elif tag == ":init":
            init.extend(_atom(x) for x in section[1:])
        elif tag == ":goal":
            if len(section) > 1:
                goal.extend(_atom(x) for x in _conjunction(section[1]) if x)
        elif tag == ":htn":
            kw = _keyword_args(section, 1)
            body = kw.get(":ordered-subtasks", kw.get(":ordered-tasks", []))
            network.extend(_subtask_list(body))
        elif tag == ":requirements":
            continue
        else:
            raise HDDLSyntaxError(f"unsupported section {tag}", *_where(section))

    op_names = {op.name for op in domain.operators}
    problem = ProblemFile(
        header[1], domain_name, tuple(sorted(objects)), frozenset(init), frozenset(goal),
        tuple(Task(n, args, primitive=n in op_names) for n, args in network))
    validate_problem(problem, domain)
    return problem


def validate_problem(p: ProblemFile, d: DomainFile) -> None:
    hierarchy = d.hierarchy
    declared_types = {"object"} | {t for t, _ in d.types} | {q for _, q in d.types}
    type_of = {c.name: c.type for c in d.constants}
    for o in p.objects:
        if o.type not in declared_types:
            raise HDDLSemanticError("undeclared type", o.type)
        if o.name in type_of:
            raise HDDLSemanticError("duplicate object", o.name)
        type_of[o.name] = o.type
    preds = {q.name: q for q in d.predicates}

    def check_args(args, types, owner):
        if len(args) != len(types):
            raise HDDLSemanticError("wrong arity", owner)
        for a, t in zip(args, types):
            if a not in type_of:
                raise HDDLSemanticError("undeclared object", a)
            if not hierarchy.conforms(type_of[a], t):
                raise HDDLSemanticError(f"object of wrong type in {owner}", a)

    for atom in list(p.init) + list(p.goal):
        if atom.predicate not in preds:
            raise HDDLSemanticError("undeclared predicate", atom.predicate)
        check_args(atom.args, preds[atom.predicate].types, atom.predicate)
    for t in p.initial_network:
        try:
            types = d.signature_types(t.name)
        except KeyError:
            raise HDDLSemanticError("undeclared task", t.name) from None
        check_args(t.args, types, t.name)


# --------------------------------------------------------------------------- printing

def _params(params: Sequence[Param]) -> str:
    return "(" + " ".join(f"{v} - {t}" for v, t in params) + ")"


def _conj(atoms: Sequence[str], indent: str) -> str:
    if not atoms:
        return "()"
    inner = "".join(f"\n{indent}  {a}" for a in atoms)
    return f"(and{inner}\n{indent})"


def print_domain(d: DomainFile) -> str:
    out = [f"(define (domain {d.name})"]
    if d.requirements:
        out.append(f"  (:requirements {' '.join(d.requirements)})")
    if d.types:
        out.append("  (:types")
        out.extend(f"    {name} - {parent}" for name, parent in d.types)
        out.append("  )")
    if d.constants:
        out.append("  (:constants")
        out.extend(f"    {c.name} - {c.type}" for c in d.constants)
        out.append("  )")
    out.append("  (:predicates")
    for p in d.predicates:
        args = " ".join(f"?x{i} - {t}" for i, t in enumerate(p.types))
        out.append(f"    ({p.name}{' ' + args if args else ''})")
    out.append("  )")
    for t in d.tasks:
        out.append(f"  (:task {t.name}")
        out.append(f"    :parameters {_params(t.parameters)}")
        out.append("  )")
    for m in d.methods:
        out.append(f"  (:method {m.name}")
        out.append(f"    :parameters {_params(m.parameters)}")
        out.append(f"    :task {m.task.sexpr()}")
        if m.precondition:
            out.append(f"    :precondition {_conj([a.sexpr() for a in m.precondition], '    ')}")
        out.append(f"    :ordered-subtasks {_conj([s.sexpr() for s in m.subtasks], '    ')}")
        out.append("  )")
    for op in d.operators:
        out.append(f"  (:action {op.name}")
        out.append(f"    :parameters {_params(op.parameters)}")
        out.append(f"    :precondition {_conj([a.sexpr() for a in op.precondition], '    ')}")
        effects = [a.sexpr() for a in op.add] + [f"(not {a.sexpr()})" for a in op.delete]
        out.append(f"    :effect {_conj(effects, '    ')}")
        out.append("  )")
    out.append(")")
    return "\n".join(out) + "\n"


def print_problem(p: ProblemFile) -> str:
    out = [f"(define (problem {p.name})", f"  (:domain {p.domain_name})", "  (:objects"]
    out.extend(f"    {o.name} - {o.type}" for o in p.objects)
    out.append("  )")
    out.append("  (:htn")
    out.append("    :parameters ()")
    out.append(f"    :ordered-subtasks {_conj([t.sexpr() for t in p.initial_network], '    ')}")
    out.append("  )")
    out.append("  (:init")
    out.extend(f"    {a.sexpr()}" for a in sorted(p.init))
    out.append("  )")
    if p.goal:
        out.append(f"  (:goal {_conj([a.sexpr() for a in sorted(p.goal)], '  ')})")
    out.append(")")
    return "\n".join(out) + "\n"


def load_domain(path) -> DomainFile:
    with open(path, encoding="utf-8") as fh:
        return parse_domain(fh.read())


def load_problem(path, domain: DomainFile) -> ProblemFile:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), domain)
