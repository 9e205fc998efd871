"""Shared plumbing for the case-study builders: parameter errors, a
claim record for reporting, and thin expression/command constructors.

Builders hand `Program.make` raw trees with deterministic placeholder
kinds everywhere; classification and elaboration retag variables and
node variants, so the helpers here never need to know which variables
end up random.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..lang import (
    Command,
    Const,
    DAssign,
    Expr,
    IfDet,
    Kind,
    Op,
    SKIP,
    Sample,
    SeqC,
    Var,
    VarId,
    WhileDet,
)
from ..values import Token, Tup, Value


class ConstraintViolation(ValueError):
    """Builder parameters fall outside the documented domain."""


class InvalidDeleteReference(ValueError):
    """A delete names an operation slot that no live insert occupies."""


@dataclass(frozen=True)
class Claim:
    """One checked statement about a study, for reports and the CLI."""
    name: str
    holds: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'ok' if self.holds else 'FAIL'}] {self.name}" \
               + (f": {self.detail}" if self.detail else "")


def V(name: str) -> Var:
    """Variable reference with a placeholder kind."""
    return Var(VarId(name, Kind.DET))


def E(sym: str, *args: Expr) -> Op:
    return Op(sym, args)


def assign(name: str, e: Expr) -> DAssign:
    return DAssign(VarId(name, Kind.DET), e)


def sample(name: str, e: Expr) -> Sample:
    return Sample(VarId(name, Kind.DET), e)


def if_(guard: Expr, then: Command, els: Command = SKIP) -> IfDet:
    return IfDet(guard, then, els)


def while_(guard: Expr, body: Command) -> WhileDet:
    return WhileDet(guard, body)


def chain(*cmds: Command) -> Command:
    """Right-nested sequencing, so every tail is itself a subtree."""
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = SeqC(c, out)
    return out


def ev(*parts: Value | str | int) -> Tup:
    """Trace event as a value: strings become interned tokens."""
    return Tup(tuple(Token(p) if isinstance(p, str) else p for p in parts))


def ev_expr(*parts: Expr | str | int) -> Expr:
    """Trace event as an expression; non-expression parts are literals."""
    args = tuple(p if isinstance(p, (Op, Var, Const))
                 else Const(Token(p) if isinstance(p, str) else p)
                 for p in parts)
    return Op("tuple", args)


def record(trace_var: str, event: Expr) -> Command:
    return assign(trace_var, E("append", V(trace_var), event))
