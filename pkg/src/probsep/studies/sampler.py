"""Oblivious random sampling of k batches of m records each from a
database of n = m*k records.

The algorithm scans the (pre-shuffled) database once, routing each
record into a batch according to a random selector matrix SWO drawn
from X(n, m): the k-row, n-column boolean arrays whose every row
holds exactly m trues. A second shuffle of the staging array S then
decouples the output access pattern from SWO; the pattern that
phase two produces is a function of second-components of S alone,
and after the shuffle those are uniform over all arrangements of
the multiset {m copies of each batch index}.

The two shuffle primitives are modeled as uniform choice over the
permutations of the array's current contents (the `perms` operation
materializes that set at sample time), each recording the single
event ("oblishuffle", size) in place of the primitive's own trace.

Transcription notes:

* Variables j, l, i, p count from 1; sequence reads subtract 1.
* The read-ahead inside the take branch records its event against
  array name "S" even though the data comes from D, and the first
  two recorded reads both fetch D's initial slot. Both quirks of
  the original algorithm's ghost code are preserved.
* Ghost records evaluate their index expressions against the
  pre-statement state, so the t-th take logs write position t
  (len(S)+1 before the append) and scan position t (l before its
  increment), and the j-th routing step logs batch write position
  count(i, batches-so-far)+1 before the batch grows. Those are the
  counts every derived trace property here tracks.
* The take branch's read-ahead D[l] falls one slot past the end
  exactly once, when the n-th record is taken and l reaches n+1.
  The transcription guards that read with the outer loop's own
  condition l < n+1, keeping e_next unchanged at the boundary; the
  trace event is still recorded, so every take contributes its two
  events and the trace stays length 2n+3 after phase one.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from ..dist import is_independent
from ..interp import run_program
from ..lang import Const, Expr, Program
from ..values import Seq, SetV, mkbool
from .common import Claim, ConstraintViolation, E, V, assign, chain, ev, \
    ev_expr, if_, record, sample, while_

ONE = Const(1)


def selector_matrices(n: int, m: int, k: int) -> SetV:
    """X(n, m): every k-by-n boolean matrix with exactly m trues per
    row, as a set of row sequences."""
    rows = [Seq(tuple(mkbool(c in on) for c in range(n)))
            for on in itertools.combinations(range(n), m)]
    return SetV(Seq(pick) for pick in itertools.product(rows, repeat=k))


def _get(name: str, idx1: int | Expr) -> Expr:
    """1-indexed read name[idx1] on 0-indexed sequences."""
    e = Const(idx1) if isinstance(idx1, int) else idx1
    return E("index", V(name), E("sub", e, ONE))


def _cell(name: str, row1: Expr, col1: Expr) -> Expr:
    """1-indexed matrix read name[row][col]."""
    return E("index", _get(name, row1), E("sub", col1, ONE))


def build_sampling(n: int, m: int, k: int,
                   database: Seq | tuple) -> Program:
    """Sampling run over the given database; requires n = m*k and a
    database of exactly n records."""
    data = tuple(database.items if isinstance(database, Seq) else database)
    if n != m * k or n <= 0:
        raise ConstraintViolation(f"batch shape must satisfy n = m*k, got {n} != {m}*{k}")
    if len(data) != n:
        raise ConstraintViolation(f"database must hold {n} records, got {len(data)}")

    np1 = Const(n + 1)
    take = chain(
        record("Trace", ev_expr("write", "S", E("add", E("len", V("S")), ONE))),
        assign("S", E("append", V("S"), E("tuple", V("e"), V("i")))),
        record("Trace", ev_expr("read", "S", V("l"))),
        assign("l", E("add", V("l"), ONE)),
        if_(E("lt", V("l"), np1), assign("enext", _get("D", V("l")))),
    )
    scan = while_(E("lt", V("l"), np1), chain(
        assign("i", ONE),
        while_(E("lt", V("i"), Const(k + 1)), chain(
            if_(_cell("SWO", V("i"), V("j")), take),
            assign("i", E("add", V("i"), ONE)),
        )),
        assign("e", V("enext")),
        assign("j", E("add", V("j"), ONE)),
    ))
    route = while_(E("lt", V("p"), E("add", E("len", V("S")), ONE)), chain(
        assign("e", E("proj0", _get("S", V("p")))),
        assign("i", E("proj1", _get("S", V("p")))),
        record("Trace", ev_expr("read", "S", V("p"))),
        record("Trace", ev_expr("write", "s", V("i"),
                                E("add", E("len", _get("s", V("i"))), ONE))),
        assign("s", E("update", V("s"), E("sub", V("i"), ONE),
                      E("append", _get("s", V("i")), V("e")))),
        assign("p", E("add", V("p"), ONE)),
    ))

    body = chain(
        assign("Trace", Const(Seq(()))),
        sample("D", E("perms", V("D"))),
        record("Trace", Const(ev("oblishuffle", n))),
        sample("SWO", Const(selector_matrices(n, m, k))),
        assign("S", Const(Seq(()))),
        assign("j", ONE),
        assign("l", ONE),
        assign("e", _get("D", 1)),
        record("Trace", Const(ev("read", "D", 1))),
        assign("enext", _get("D", 1)),
        record("Trace", Const(ev("read", "D", 1))),
        scan,
        sample("S", E("perms", V("S"))),
        record("Trace", ev_expr("oblishuffle", E("len", V("S")))),
        assign("s", Const(Seq(tuple(Seq(()) for _ in range(k))))),
        assign("p", ONE),
        route,
    )
    init = {"Trace": Seq(()), "D": Seq(data), "SWO": Seq(()), "S": Seq(()),
            "s": Seq(()), "n": n, "m": m, "k": k,
            "j": 0, "l": 0, "i": 0, "p": 0, "e": 0, "enext": 0}
    return Program.make(init, body)


def check_claims(n: int = 2, m: int = 1, k: int = 2,
                 fuel: int = 2000) -> list[Claim]:
    claims: list[Claim] = []
    databases = [Seq((10, 20)), Seq((7, 9)), Seq((3, 1))]
    finals = [run_program(build_sampling(n, m, k, db), fuel)
              for db in databases]

    tr = [out.mu.project(("Trace",)).dist for out in finals]
    claims.append(Claim(
        "trace distribution does not depend on the database",
        all(t == tr[0] for t in tr[1:]), f"{len(databases)} databases"))

    arrangements = len(set(itertools.permutations(
        [i for i in range(1, k + 1) for _ in range(m)])))
    img = tr[0].support()
    uni = (len(img) == arrangements
           and all(tr[0].mass(t) == Fraction(1, arrangements) for t in img))
    claims.append(Claim(
        f"trace is uniform over its {arrangements}-trace image", uni,
        f"support size {len(img)}"))

    mu = finals[0].mu
    claims.append(Claim(
        "trace is independent of the selector matrix",
        is_independent(mu, ("Trace",), ("SWO",))))
    claims.append(Claim(
        "trace is independent of the shuffled database contents",
        is_independent(mu, ("Trace",), ("D",))))

    lengths = {len(t[0].items) for t in img}
    claims.append(Claim(
        "every trace holds 2n+3 phase-one events plus 2n+1 routing events",
        lengths == {4 * n + 4}, f"lengths {sorted(lengths)}"))
    return claims
