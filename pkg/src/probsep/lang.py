"""Core language: variables, expressions, commands, programs.

Two variable kinds (deterministic / random) live in disjoint namespaces.
Commands come in a full grammar (deterministic assignments allowed) and a
restricted one for the bodies of random conditionals and loops, which may
not assign deterministic variables at any depth. The split is what makes
a configuration's deterministic half a plain map rather than a
distribution.

Variable kinds need not be declared: `classify_variables` computes the
least kind assignment (everything deterministic unless randomness forces
otherwise), and `elaborate` rebuilds a raw command tree into the properly
tagged one while checking the grammar restrictions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .values import (
    OP_ARITY,
    Bool,
    EvalError,
    SetV,
    Token,
    TypeMismatch,
    Value,
    apply_op,
    is_value,
    truthy,
    vset,
)


class Kind(enum.Enum):
    DET = "det"
    RAND = "rand"


@dataclass(frozen=True)
class VarId:
    name: str
    kind: Kind

    def __repr__(self):
        return f"{self.name}:{self.kind.value}"


class UnboundVariable(EvalError):
    pass


class IllFormed(Exception):
    """A command/program violates the grammar or kind constraints."""


class KindConflict(IllFormed):
    """An annotation says deterministic but the program forces random."""

    def __init__(self, name: str, why: str):
        super().__init__(f"variable {name!r} must be random: {why}")
        self.name = name


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Value


@dataclass(frozen=True)
class Var:
    var: VarId


@dataclass(frozen=True)
class Op:
    sym: str
    args: tuple["Expr", ...]

    def __post_init__(self):
        arity = OP_ARITY.get(self.sym)
        if self.sym.startswith("proj"):
            arity = 1
        elif self.sym not in OP_ARITY:
            raise TypeMismatch(f"unknown operation {self.sym!r}")
        if arity is not None and len(self.args) != arity:
            raise TypeMismatch(f"{self.sym} expects {arity} arguments, got {len(self.args)}")


@dataclass(frozen=True)
class EvenPart:
    """Even-partition predicate: does `param -> body` map the elements of
    `src`'s choice set onto exactly `dst`'s elements with equal-sized
    fibers? The one binder in the expression language; it exists so the
    dynamic sampling rule's precondition can be evaluated per memory
    (the partitioned set may depend on a random variable).
    """
    param: str
    body: "Expr"
    src: "Expr"
    dst: "Expr"


Expr = Union[Const, Var, Op, EvenPart]


def free_vars(e: Expr) -> frozenset[VarId]:
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.var,))
    if isinstance(e, Op):
        out: frozenset[VarId] = frozenset()
        for a in e.args:
            out |= free_vars(a)
        return out
    if isinstance(e, EvenPart):
        body = frozenset(v for v in free_vars(e.body) if v.name != e.param)
        return body | free_vars(e.src) | free_vars(e.dst)
    raise TypeMismatch(f"not an expression: {e!r}")


def free_names(e: Expr) -> frozenset[str]:
    return frozenset(v.name for v in free_vars(e))


def is_deterministic(e: Expr) -> bool:
    """An expression is deterministic iff it mentions no random variable."""
    return all(v.kind is Kind.DET for v in free_vars(e))


def subst_expr(e: Expr, x: VarId, repl: Expr) -> Expr:
    """Capture-free substitution e[repl/x]."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return repl if e.var == x else e
    if isinstance(e, Op):
        return Op(e.sym, tuple(subst_expr(a, x, repl) for a in e.args))
    if isinstance(e, EvenPart):
        body = e.body
        if e.param != x.name:
            if e.param in free_names(repl):
                # the binder would capture a variable of repl; rename it
                fresh = e.param
                taken = free_names(repl) | free_names(e.body)
                while fresh in taken:
                    fresh += "_"
                body = subst_expr(body, VarId(e.param, Kind.DET), Var(VarId(fresh, Kind.DET)))
                body = subst_expr(body, VarId(e.param, Kind.RAND), Var(VarId(fresh, Kind.RAND)))
                return EvenPart(fresh, subst_expr(body, x, repl),
                                subst_expr(e.src, x, repl), subst_expr(e.dst, x, repl))
            body = subst_expr(body, x, repl)
        return EvenPart(e.param, body, subst_expr(e.src, x, repl), subst_expr(e.dst, x, repl))
    raise TypeMismatch(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------

def eval_expr(sigma: Mapping[str, Value], m: Mapping[str, Value], e: Expr) -> Value:
    """Evaluate over a deterministic memory sigma and one random memory m.

    Lookup is kind-directed: deterministic variables read sigma, random
    ones read m. Deterministic expressions therefore depend only on
    sigma.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        env = sigma if e.var.kind is Kind.DET else m
        try:
            return env[e.var.name]
        except KeyError:
            raise UnboundVariable(f"unbound variable {e.var.name!r}") from None
    if isinstance(e, Op):
        return apply_op(e.sym, tuple(eval_expr(sigma, m, a) for a in e.args))
    if isinstance(e, EvenPart):
        from .dist import even_partition  # local import: values-only helper

        src = vset(eval_expr(sigma, m, e.src))
        dst = eval_expr(sigma, m, e.dst)
        if not isinstance(dst, SetV):
            raise TypeMismatch("evenpart target must be a set")

        def f(v: Value) -> Value:
            return eval_expr(sigma, m,
                             subst_expr(e.body, VarId(e.param, Kind.DET), Const(v)))

        ok, _ = even_partition(f, src, tuple(dst.items))
        return Bool(ok)
    raise TypeMismatch(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class DAssign:
    var: VarId
    expr: Expr


@dataclass(frozen=True)
class RAssign:
    var: VarId
    expr: Expr


@dataclass(frozen=True)
class Sample:
    var: VarId
    expr: Expr


@dataclass(frozen=True)
class SeqC:
    first: "Command"
    second: "Command"


@dataclass(frozen=True)
class IfDet:
    guard: Expr
    then: "Command"
    els: "Command"


@dataclass(frozen=True)
class IfRand:
    guard: Expr
    then: "Command"
    els: "Command"


@dataclass(frozen=True)
class WhileDet:
    guard: Expr
    body: "Command"


@dataclass(frozen=True)
class WhileRand:
    guard: Expr
    body: "Command"


Command = Union[Skip, DAssign, RAssign, Sample, SeqC, IfDet, IfRand, WhileDet, WhileRand]

SKIP = Skip()


def seq_all(cmds: Iterable[Command]) -> Command:
    """Right-fold a list into nested binary sequencing (empty -> skip)."""
    cs = list(cmds)
    if not cs:
        return SKIP
    out = cs[-1]
    for c in reversed(cs[:-1]):
        out = SeqC(c, out)
    return out


def command_vars(c: Command) -> frozenset[VarId]:
    """Every variable mentioned anywhere in the command."""
    if isinstance(c, Skip):
        return frozenset()
    if isinstance(c, (DAssign, RAssign, Sample)):
        return frozenset((c.var,)) | free_vars(c.expr)
    if isinstance(c, SeqC):
        return command_vars(c.first) | command_vars(c.second)
    if isinstance(c, (IfDet, IfRand)):
        return free_vars(c.guard) | command_vars(c.then) | command_vars(c.els)
    if isinstance(c, (WhileDet, WhileRand)):
        return free_vars(c.guard) | command_vars(c.body)
    raise IllFormed(f"not a command: {c!r}")


def contains_det_assign(c: Command) -> bool:
    if isinstance(c, DAssign):
        return True
    if isinstance(c, SeqC):
        return contains_det_assign(c.first) or contains_det_assign(c.second)
    if isinstance(c, (IfDet, IfRand)):
        return contains_det_assign(c.then) or contains_det_assign(c.els)
    if isinstance(c, (WhileDet, WhileRand)):
        return contains_det_assign(c.body)
    return False


def check_command(c: Command) -> None:
    """Validate the grammar/kind constraints. Raises IllFormed."""
    if isinstance(c, Skip):
        return
    if isinstance(c, DAssign):
        if c.var.kind is not Kind.DET:
            raise IllFormed(f"det-assign target {c.var} is not deterministic")
        if not is_deterministic(c.expr):
            raise IllFormed(f"det-assign to {c.var.name} has a random right-hand side")
        return
    if isinstance(c, (RAssign, Sample)):
        if c.var.kind is not Kind.RAND:
            raise IllFormed(f"random assignment target {c.var} is not random")
        return
    if isinstance(c, SeqC):
        check_command(c.first)
        check_command(c.second)
        return
    if isinstance(c, IfDet):
        if not is_deterministic(c.guard):
            raise IllFormed("if with a random guard must be a random conditional")
        check_command(c.then)
        check_command(c.els)
        return
    if isinstance(c, WhileDet):
        if not is_deterministic(c.guard):
            raise IllFormed("while with a random guard must be a random loop")
        check_command(c.body)
        return
    if isinstance(c, IfRand):
        for br in (c.then, c.els):
            if contains_det_assign(br):
                raise IllFormed("random conditional branch assigns a deterministic variable")
            check_command(br)
        return
    if isinstance(c, WhileRand):
        if contains_det_assign(c.body):
            raise IllFormed("random loop body assigns a deterministic variable")
        check_command(c.body)
        return
    raise IllFormed(f"not a command: {c!r}")


# ---------------------------------------------------------------------------
# Kind inference
# ---------------------------------------------------------------------------

def classify_variables(body: Command,
                       initial: Mapping[str, Kind] | None = None) -> dict[str, Kind]:
    """Least fixpoint of the kind constraints.

    Start from the given kinds (default: everything deterministic) and
    promote to random: sampled variables; targets of assignments whose
    right-hand side mentions a random variable; and targets of any
    assignment nested inside a conditional/loop whose guard mentions a
    random variable. Guards seen with a random variable make the whole
    construct random, recursively. Monotone over a finite lattice, so
    iteration terminates.
    """
    kinds: dict[str, Kind] = dict(initial or {})

    def name_of(v: VarId) -> str:
        return v.name

    def kind(nm: str) -> Kind:
        return kinds.get(nm, Kind.DET)

    def expr_random(e: Expr) -> bool:
        return any(kind(v.name) is Kind.RAND for v in free_vars(e))

    changed = True

    def visit(c: Command, in_random: bool) -> None:
        nonlocal changed
        if isinstance(c, Skip):
            return
        if isinstance(c, (DAssign, RAssign)):
            nm = name_of(c.var)
            if (in_random or expr_random(c.expr)) and kind(nm) is not Kind.RAND:
                kinds[nm] = Kind.RAND
                changed = True
            return
        if isinstance(c, Sample):
            nm = name_of(c.var)
            if kind(nm) is not Kind.RAND:
                kinds[nm] = Kind.RAND
                changed = True
            return
        if isinstance(c, SeqC):
            visit(c.first, in_random)
            visit(c.second, in_random)
            return
        if isinstance(c, (IfDet, IfRand)):
            rnd = in_random or expr_random(c.guard)
            visit(c.then, rnd)
            visit(c.els, rnd)
            return
        if isinstance(c, (WhileDet, WhileRand)):
            rnd = in_random or expr_random(c.guard)
            visit(c.body, rnd)
            return
        raise IllFormed(f"not a command: {c!r}")

    while changed:
        changed = False
        visit(body, False)
    for v in command_vars(body):
        kinds.setdefault(v.name, Kind.DET)
    return kinds


def retag_expr(e: Expr, kinds: Mapping[str, Kind]) -> Expr:
    """Rewrite variable references to the kinds in `kinds`."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        k = kinds.get(e.var.name, e.var.kind)
        return e if e.var.kind is k else Var(VarId(e.var.name, k))
    if isinstance(e, Op):
        return Op(e.sym, tuple(retag_expr(a, kinds) for a in e.args))
    if isinstance(e, EvenPart):
        inner = dict(kinds)
        inner.pop(e.param, None)
        return EvenPart(e.param, retag_expr(e.body, inner),
                        retag_expr(e.src, kinds), retag_expr(e.dst, kinds))
    raise TypeMismatch(f"not an expression: {e!r}")


def elaborate(c: Command, kinds: Mapping[str, Kind],
              annotations: Mapping[str, Kind] | None = None) -> Command:
    """Rebuild a raw command with resolved kinds and correct node variants.

    Raw trees may use DAssign/IfDet/WhileDet as kind-agnostic placeholders;
    the result uses the proper variant for each node and passes
    check_command. Explicit annotations conflicting with the computed
    kinds raise KindConflict.
    """
    ann = annotations or {}
    for nm, k in ann.items():
        if k is Kind.DET and kinds.get(nm) is Kind.RAND:
            raise KindConflict(nm, "it is sampled, assigned randomness, or "
                                   "assigned under a random guard")

    def kind(nm: str) -> Kind:
        return kinds.get(nm, Kind.DET)

    def go(c: Command) -> Command:
        if isinstance(c, Skip):
            return c
        if isinstance(c, (DAssign, RAssign)):
            v = VarId(c.var.name, kind(c.var.name))
            e = retag_expr(c.expr, kinds)
            return DAssign(v, e) if v.kind is Kind.DET else RAssign(v, e)
        if isinstance(c, Sample):
            return Sample(VarId(c.var.name, Kind.RAND), retag_expr(c.expr, kinds))
        if isinstance(c, SeqC):
            return SeqC(go(c.first), go(c.second))
        if isinstance(c, (IfDet, IfRand)):
            g = retag_expr(c.guard, kinds)
            cls = IfDet if is_deterministic(g) else IfRand
            return cls(g, go(c.then), go(c.els))
        if isinstance(c, (WhileDet, WhileRand)):
            g = retag_expr(c.guard, kinds)
            cls = WhileDet if is_deterministic(g) else WhileRand
            return cls(g, go(c.body))
        raise IllFormed(f"not a command: {c!r}")

    out = go(c)
    check_command(out)
    return out


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Program:
    variables: tuple[VarId, ...]
    init: tuple[tuple[str, Value], ...]  # name -> initial value, sorted
    body: Command

    @staticmethod
    def make(init: Mapping[str, Value], body: Command,
             annotations: Mapping[str, Kind] | None = None) -> "Program":
        """Classify, elaborate, validate and package a program.

        `init` must cover every variable the body mentions; extra entries
        declare variables the body only reads.
        """
        kinds = classify_variables(body, annotations)
        for nm in kinds:
            if nm not in init:
                raise IllFormed(f"variable {nm!r} has no initial value")
        for nm in init:
            kinds.setdefault(nm, (annotations or {}).get(nm, Kind.DET))
        body2 = elaborate(body, kinds, annotations)
        for nm, v in init.items():
            if not is_value(v):
                raise IllFormed(f"initial value for {nm!r} is not a value: {v!r}")
        variables = tuple(sorted((VarId(nm, kinds[nm]) for nm in init),
                                 key=lambda v: v.name))
        return Program(variables=variables,
                       init=tuple(sorted((nm, init[nm]) for nm in init)),
                       body=body2)

    @property
    def kinds(self) -> dict[str, Kind]:
        return {v.name: v.kind for v in self.variables}

    def det_vars(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind is Kind.DET)

    def rand_vars(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind is Kind.RAND)

    def init_map(self) -> dict[str, Value]:
        return dict(self.init)

    def with_init(self, **updates: Value) -> "Program":
        m = self.init_map()
        for nm, v in updates.items():
            if nm not in m:
                raise IllFormed(f"no such variable {nm!r}")
            m[nm] = v
        return Program(self.variables, tuple(sorted(m.items())), self.body)


# ---------------------------------------------------------------------------
# Rule side-condition variable sets
# ---------------------------------------------------------------------------
#
# RV: variables a command may read before writing; WV: variables written
# before any read of them (branch-certain); MV: variables a command may
# modify. The sequencing clauses are the subtle ones:
#     RV(c;c') = RV(c) ∪ (RV(c') − WV(c))
#     WV(c;c') = WV(c) ∪ (WV(c') − RV(c))
# Loops contribute no WV (the body may run zero times).

def read_vars(c: Command) -> frozenset[VarId]:
    if isinstance(c, Skip):
        return frozenset()
    if isinstance(c, (DAssign, RAssign, Sample)):
        return free_vars(c.expr)
    if isinstance(c, SeqC):
        return read_vars(c.first) | (read_vars(c.second) - write_only_vars(c.first))
    if isinstance(c, IfDet):
        return read_vars(c.then) | read_vars(c.els)
    if isinstance(c, WhileDet):
        return read_vars(c.body)
    if isinstance(c, IfRand):
        return read_vars(c.then) | read_vars(c.els) | free_vars(c.guard)
    if isinstance(c, WhileRand):
        return read_vars(c.body) | free_vars(c.guard)
    raise IllFormed(f"not a command: {c!r}")


def write_only_vars(c: Command) -> frozenset[VarId]:
    if isinstance(c, Skip):
        return frozenset()
    if isinstance(c, (DAssign, RAssign, Sample)):
        return frozenset((c.var,)) - free_vars(c.expr)
    if isinstance(c, SeqC):
        return write_only_vars(c.first) | (write_only_vars(c.second) - read_vars(c.first))
    if isinstance(c, IfDet):
        return write_only_vars(c.then) & write_only_vars(c.els)
    if isinstance(c, IfRand):
        return (write_only_vars(c.then) & write_only_vars(c.els)) - free_vars(c.guard)
    if isinstance(c, (WhileDet, WhileRand)):
        return frozenset()
    raise IllFormed(f"not a command: {c!r}")


def modified_vars(c: Command) -> frozenset[VarId]:
    if isinstance(c, Skip):
        return frozenset()
    if isinstance(c, (DAssign, RAssign, Sample)):
        return frozenset((c.var,))
    if isinstance(c, SeqC):
        return modified_vars(c.first) | modified_vars(c.second)
    if isinstance(c, (IfDet, IfRand)):
        return modified_vars(c.then) | modified_vars(c.els)
    if isinstance(c, (WhileDet, WhileRand)):
        return modified_vars(c.body)
    raise IllFormed(f"not a command: {c!r}")
