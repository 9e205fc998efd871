"""Obliviousness testing: trace distributions and attacker advantage.

A program under test records its observable behaviour (memory accesses,
branch visible effects) in a ghost trace variable, an ordinary random
variable written by ordinary assignments. Running the program for a
concrete secret yields an exact distribution over trace values; an
attacker shown one trace drawn from one of two secrets guesses which.
The best possible guesser succeeds with probability exactly
1/2 + SD/2 where SD is the statistical distance between the two trace
distributions, so a program whose trace distributions coincide for all
secrets reveals nothing at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .assertions import Assertion, PartialConfig, Universe, fv_assert, satisfies
from .dist import FinDist, statistical_distance
from .interp import Config, exec as exec_cmd, init_config
from .lang import Kind, Program
from .values import Bool, Seq, SetV, Token, Tup, Value

HALF = Fraction(1, 2)


def shape_class(v: Value) -> object:
    """A value's shape: what an attacker could tell apart by length or
    type alone, before looking at contents."""
    if isinstance(v, bool) or isinstance(v, Bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, Token):
        return "token"
    if isinstance(v, Seq):
        return ("seq", tuple(shape_class(x) for x in v.items))
    if isinstance(v, Tup):
        return ("tup", tuple(shape_class(x) for x in v.items))
    if isinstance(v, SetV):
        return ("set", len(v.items))
    raise TypeError(f"not a value: {v!r}")


@dataclass(frozen=True)
class ObliviousnessQuery:
    program: Program
    secret_var: str
    secrets: tuple[Value, ...]
    observe_var: str = "Trace"
    fuel: Optional[int] = None

    def __post_init__(self):
        kinds = self.program.kinds
        if self.secret_var not in kinds:
            raise ValueError(f"program has no variable {self.secret_var!r}")
        if kinds[self.secret_var] is not Kind.DET:
            raise ValueError(
                f"secret variable {self.secret_var!r} must be deterministic input")
        if self.observe_var not in kinds:
            raise ValueError(f"program has no variable {self.observe_var!r}")
        if len(self.secrets) < 2:
            raise ValueError("need at least two candidate secrets to compare")
        shapes = {shape_class(s) for s in self.secrets}
        if len(shapes) != 1:
            raise ValueError(
                "secrets must share one shape class; trace comparison across "
                f"shapes is not meaningful (got {sorted(map(str, shapes))})")


def trace_distribution(program: Program, secret: Value,
                       fuel: Optional[int] = None, *,
                       secret_var: str = "S",
                       observe_var: str = "Trace") -> FinDist[Value]:
    """Exact distribution of the trace variable after running the
    program with the secret bound as input."""
    prog = program.with_init(**{secret_var: secret})
    out = exec_cmd(prog.body, init_config(prog), fuel)
    kinds = prog.kinds
    if kinds[observe_var] is Kind.DET:
        from .dist import unit
        return unit(out.sigma[observe_var])
    return out.mu.project((observe_var,)).dist.map(lambda t: t[0])


def attacker_advantage(p: FinDist[Value], q: FinDist[Value],
                       ) -> tuple[Fraction, Callable[[Value], int]]:
    """Best correct-guess probability for distinguishing p from q at
    even prior, together with the maximizing guess function (1 means
    "came from p"). The optimum picks, per observation, whichever
    distribution gives it more mass; its value is 1/2 + SD(p, q)/2.
    """
    def guess(e: Value) -> int:
        return 1 if p.mass(e) >= q.mass(e) else 0

    prob = sum((p.mass(e) * guess(e) + q.mass(e) * (1 - guess(e))
                for e in set(p.support()) | set(q.support())),
               start=Fraction(0)) * HALF
    return prob, guess


PERFECT = "perfectly oblivious"
LEAKS = "leaks"


@dataclass
class SecrecyReport:
    secrets: tuple[Value, ...]
    traces: tuple[FinDist[Value], ...]          # per secret, same order
    sd: tuple[tuple[Fraction, ...], ...]        # pairwise statistical distance
    advantages: tuple[tuple[Fraction, ...], ...]  # best correct-guess probability
    max_epsilon: Fraction                        # max pairwise SD / 2
    verdict: str

    @property
    def oblivious(self) -> bool:
        return self.verdict == PERFECT

    def describe(self) -> str:
        lines = [f"secrets: {len(self.secrets)}, verdict: {self.verdict}, "
                 f"max epsilon {self.max_epsilon}"]
        for i, s in enumerate(self.secrets):
            lines.append(f"  secret {s!r}: {len(self.traces[i])} trace outcomes")
        worst = max(
            ((self.sd[i][j], i, j)
             for i in range(len(self.secrets))
             for j in range(i + 1, len(self.secrets))),
            default=None)
        if worst is not None:
            d, i, j = worst
            lines.append(f"  worst pair ({self.secrets[i]!r}, {self.secrets[j]!r}): "
                         f"SD {d}, best guesser succeeds w.p. {self.advantages[i][j]}")
        return "\n".join(lines)


def statistical_secrecy(query: ObliviousnessQuery) -> SecrecyReport:
    """Run the program once per candidate secret and compare all trace
    distributions pairwise."""
    traces = tuple(
        trace_distribution(query.program, s, query.fuel,
                           secret_var=query.secret_var,
                           observe_var=query.observe_var)
        for s in query.secrets)
    n = len(traces)
    sd = [[Fraction(0)] * n for _ in range(n)]
    adv = [[HALF] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = statistical_distance(traces[i], traces[j])
            sd[i][j] = sd[j][i] = d
            a, _ = attacker_advantage(traces[i], traces[j])
            adv[i][j] = adv[j][i] = a
    eps = max((sd[i][j] for i in range(n) for j in range(i + 1, n)),
              default=Fraction(0)) * HALF
    verdict = PERFECT if all(
        sd[i][j] == 0 for i in range(n) for j in range(n)) else LEAKS
    return SecrecyReport(
        secrets=query.secrets,
        traces=traces,
        sd=tuple(tuple(row) for row in sd),
        advantages=tuple(tuple(row) for row in adv),
        max_epsilon=eps,
        verdict=verdict,
    )


def check_invariant_after(program: Program, assertion: Assertion,
                          u: Universe, fuel: Optional[int] = None) -> bool:
    """Run the program and test the assertion on the final
    configuration, restricted to the assertion's own variables (large
    programs accumulate many cells; the restriction keeps the
    separating-conjunction search on the relevant ones)."""
    out = exec_cmd(program.body, init_config(program), fuel)
    names = fv_assert(assertion)
    det_names = {v.name for v in names if v.kind is Kind.DET}
    rand_names = {v.name for v in names if v.kind is Kind.RAND}
    sigma = {nm: out.sigma[nm] for nm in det_names}
    mu = out.mu.project(sorted(rand_names))
    return satisfies(PartialConfig(sigma, mu), assertion, u)
