"""Two-pass oblivious array shuffle with a feasibility-restricted
first pass.

The algorithm shuffles an input array I into an output O following a
target permutation pi, going through an untrusted temporary T. Pass
one rearranges the data by a freshly sampled permutation pi1, pass
two by pi; since pi1 already randomized every position, the access
pattern of pass two reveals nothing about pi. The perfect variant
rules the known failure mode out by sampling pi1 only from the set
of permutations under which neither pass can overflow its buckets:
the intersection S_p(pi) n S_p(pi_I), where pi_I is the permutation
describing the input's current layout.

The pass itself is a deterministic sub-procedure with a classical
contract: it appends one fixed access pattern TS(n) to the trace and
lands every value v at index pi(v) of O. It is realized here at that
contract's granularity: the data effect is `O := arrange(pi)` (the
permutation is literally a value/index pair table) and the trace
effect appends the canonical TS(n) block, reads of I then writes of
T then reads of T then writes of O, one per position. The trace is
therefore a deterministic constant, which is the whole security
claim.

Permutations are represented as pair tables {(v, index(v))}, matching
the `arrange` operation's input; S_p's bucket overlap threshold is
ceil(p * log2(n)), computed exactly.
"""

from __future__ import annotations

import itertools
from math import isqrt
from typing import Iterable, Mapping

from ..assertions import Certain, Universe
from ..interp import run_program
from ..lang import Const, Expr, Program
from ..security import check_invariant_after
from ..values import Seq, SetV, Tup, Value
from .common import Claim, ConstraintViolation, E, V, assign, chain, ev, sample

Perm = dict[int, int]


def _threshold(n: int, p: int) -> int:
    """ceil(p * log2 n) without floats: the least t with 2^t >= n^p."""
    return (n ** p - 1).bit_length()


def bucket_values(pi: Perm, n: int, i: int) -> frozenset[int]:
    """Values the permutation sends into the i-th sqrt(n)-sized block."""
    r = isqrt(n)
    return frozenset(v for v, idx in pi.items() if r * i <= idx < r * (i + 1))


def in_sp(pi2: Perm, pi: Perm, n: int, p: int = 1) -> bool:
    """Is pi2 in S_p(pi): do the two permutations overlap in at most
    ceil(p*log2 n) values on every sqrt(n)-block of positions?"""
    t = _threshold(n, p)
    return all(
        len(bucket_values(pi, n, i) & bucket_values(pi2, n, i)) <= t
        for i in range(isqrt(n)))


def feasible_set(pi: Perm, pi_i: Perm, n: int, p: int = 1) -> list[Perm]:
    """S_p(pi) n S_p(pi_I): first-pass permutations under which neither
    pass can fail."""
    values = sorted(pi)
    out = []
    for order in itertools.permutations(range(n)):
        cand = dict(zip(values, order))
        if in_sp(cand, pi, n, p) and in_sp(cand, pi_i, n, p):
            out.append(cand)
    return out


def perm_table(pi: Perm) -> SetV:
    """Permutation as the value/index pair table `arrange` consumes."""
    return SetV(Tup((v, idx)) for v, idx in pi.items())


def layout_perm(items: Iterable[int]) -> Perm:
    """The permutation describing an array's current contents: pi_I
    with I[pi_I(v)] = v."""
    return {v: idx for idx, v in enumerate(items)}


def ts_events(n: int) -> Seq:
    """The fixed per-pass access pattern: a pass touches each position
    of I, T, T, O once, in that order, whatever it computes."""
    evs = [ev("read", "I", k) for k in range(n)]
    evs += [ev("write", "T", k) for k in range(n)]
    evs += [ev("read", "T", k) for k in range(n)]
    evs += [ev("write", "O", k) for k in range(n)]
    return Seq(tuple(evs))


_COPY = ev("copy", "O", "I")


def build_melbourne(n: int, p: int, items: Seq | tuple[int, ...],
                    pi: Mapping[int, int]) -> Program:
    """Perfect two-pass shuffle of the n distinct values in `items`
    into target layout `pi` (value -> index).

    The feasible first-pass set is materialized at build time; if it
    is empty at this p, the program still builds and sampling raises
    EmptyChoiceSet when run, surfacing the failure regime.
    """
    data = tuple(items.items if isinstance(items, Seq) else items)
    if n <= 0 or isqrt(n) ** 2 != n:
        raise ConstraintViolation(f"array size must be a positive perfect square, got {n}")
    if len(data) != n or len(set(data)) != n:
        raise ConstraintViolation(f"input must hold {n} distinct values")
    if sorted(pi) != sorted(data) or sorted(pi.values()) != list(range(n)):
        raise ConstraintViolation("target must be a permutation of the input values")

    pi_i = layout_perm(data)
    feas = feasible_set(dict(pi), pi_i, n, p)
    ts = Const(ts_events(n))

    body = chain(
        assign("Trace", Const(Seq(()))),
        sample("pi1", Const(SetV(perm_table(f) for f in feas))),
        assign("T", Const(Seq(()))),
        # pass one: shuffle by pi1
        assign("O", E("arrange", V("pi1"))),
        assign("Trace", E("concat", V("Trace"), ts)),
        # hand the output back as the next input
        assign("I", V("O")),
        assign("Trace", E("append", V("Trace"), Const(_COPY))),
        # pass two: shuffle by the target
        assign("O", E("arrange", V("pi"))),
        assign("Trace", E("concat", V("Trace"), ts)),
    )
    init = {"I": Seq(data), "pi": perm_table(dict(pi)), "pi1": SetV(()),
            "O": Seq(()), "T": Seq(()), "Trace": Seq(())}
    return Program.make(init, body)


def full_trace(n: int) -> Seq:
    ts = ts_events(n).items
    return Seq(ts + (_COPY,) + ts)


def final_assertion(n: int, pi: Mapping[int, int], kinds) -> Certain:
    """The program's closing claim as one certainty: the trace equals
    the fixed pattern and O holds each value v at index pi(v), n
    distinct values in all."""
    from ..lang import Var, VarId
    tr = Var(VarId("Trace", kinds["Trace"]))
    o = Var(VarId("O", kinds["O"]))
    atoms: list[Expr] = [
        E("eq", tr, Const(full_trace(n))),
        E("eq", E("len", o), Const(n)),
    ]
    for v, idx in sorted(pi.items()):
        atoms.append(E("eq", E("index", o, Const(idx)), Const(v)))
        atoms.append(E("eq", E("count", Const(v), o), Const(1)))
    out = atoms[0]
    for a in atoms[1:]:
        out = E("and", out, a)
    return Certain(out)


def all_perms(values: tuple[int, ...]) -> list[Perm]:
    return [dict(zip(values, order))
            for order in itertools.permutations(range(len(values)))]


def check_claims(n: int = 4, p: int = 1, fuel: int = 1000) -> list[Claim]:
    claims: list[Claim] = []
    values = tuple(range(n))
    perms = all_perms(values)

    sym_ok = all(in_sp(a, b, n, p) == in_sp(b, a, n, p)
                 for a in perms for b in perms)
    claims.append(Claim(
        "feasibility is symmetric on every permutation pair", sym_ok,
        f"{len(perms) ** 2} pairs at n={n}"))

    # One fixed trace across every (input layout, target) combination,
    # and the output is the target layout exactly.
    want = full_trace(n)
    traces: set[Value] = set()
    placed = True
    runs = [(Seq(values), tgt) for tgt in perms]
    runs += [(Seq(order), perms[0])
             for order in itertools.permutations(values)]
    for items, tgt in runs:
        prog = build_melbourne(n, p, items, tgt)
        out = run_program(prog, fuel)
        traces.add(out.sigma["Trace"])
        o_dist = out.mu.project(("O",)).dist
        final_o = o_dist.support()[0][0]
        placed = placed and o_dist.is_point() and all(
            final_o.items[idx] == v for v, idx in tgt.items())
    claims.append(Claim(
        "one deterministic trace across all inputs and targets",
        traces == {want}, f"{len(runs)} runs, {len(traces)} distinct trace(s)"))
    claims.append(Claim(
        "output places every value v at index target(v)", placed))

    tgt = perms[1]
    prog = build_melbourne(n, p, Seq(values), tgt)
    o_want = Seq(tuple(v for _, v in sorted((idx, v) for v, idx in tgt.items())))
    u = Universe({"Trace": (want,)}, {"O": (o_want,)})
    holds = check_invariant_after(
        prog, final_assertion(n, tgt, prog.kinds), u, fuel)
    claims.append(Claim(
        "transcribed closing assertion holds after execution", holds))
    return claims
