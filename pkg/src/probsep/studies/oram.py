"""Path ORAM at desk scale: a client hides which of its storage slots
it touches by keeping every block on a uniformly random root-to-leaf
path of a small binary tree.

Each access to address a reads the whole path to a's current leaf
into a stash, remaps a to a fresh uniform leaf, then writes the path
back bottom-up, pushing stash blocks as deep as their own (new)
leaves allow. The observable events are one ("Read", x, l) per level
on the way down and one ("Write", x, l) per level on the way back,
where x is the leaf being walked; since x is always a fresh uniform
sample, a fixed-length access sequence yields a trace distribution
that does not depend on which addresses were touched.

Model choices:

* The position map is one random variable per address (q0, q1, ...);
  addresses are build-time constants, so no computed map indexing is
  needed and per-entry independence claims can use disjoint variable
  groups.
* Every map entry is sampled in a prologue, reflecting random
  initialization; the per-entry uniformity invariant is therefore
  meaningful from the first access on.
* The tree is a sequence of 2^(L+1) buckets (sets of address/data
  pairs) indexed as a binary heap with the root at slot 1 and slot 0
  unused; the path function is pure index arithmetic,
  P(x, l) = (x + 2^L) div 2^(L-l).
* Bucket reads and writes happen at that granularity: a read unions
  the bucket into the stash, a write stores the bucket's new
  contents, each paired with its ghost event.
* The eviction filter (stash blocks whose own path meets the written
  bucket) is unrolled over the constant address space; select(z, .)
  enforces the bucket capacity and raises CapacityExceeded on
  overflow, which the desk-scale workloads never trigger.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product

from ..assertions import Star, Uniform, Universe
from ..dist import is_independent, statistical_distance, uniform
from ..interp import run_program
from ..lang import Command, Const, Expr, Program, Var, VarId
from ..security import check_invariant_after
from ..values import SetV, Seq, Token
from .common import Claim, ConstraintViolation, E, V, assign, chain, ev_expr, \
    if_, record, sample, while_

READ = "read"
WRITE = "write"

Op = tuple  # (kind, address) or (kind, address, data)


def _qvar(a: int) -> str:
    return f"q{a}"


def path_node(x: Expr, level: Expr, big_l: int) -> Expr:
    """Heap slot of the level-th node on the path to leaf x."""
    return E("div", E("add", x, Const(2 ** big_l)),
             E("pow", Const(2), E("sub", Const(big_l), level)))


def _leaves(big_l: int) -> SetV:
    return SetV(range(2 ** big_l))


def _check_ops(big_l: int, addrs: int, ops) -> list[Op]:
    checked = []
    for op in ops:
        parts = tuple(op)
        if not parts or parts[0] not in (READ, WRITE):
            raise ConstraintViolation(f"operation kind must be read or write, got {parts!r}")
        kind, a = parts[0], parts[1]
        if not isinstance(a, int) or not 0 <= a < addrs:
            raise ConstraintViolation(f"address {a!r} outside 0..{addrs - 1}")
        if kind == READ and len(parts) != 2:
            raise ConstraintViolation(f"read takes no payload, got {parts!r}")
        if kind == WRITE and len(parts) != 3:
            raise ConstraintViolation(f"write needs a payload, got {parts!r}")
        checked.append(parts)
    return checked


def access(big_l: int, addrs: int, op: Op, z: int) -> Command:
    """One inlined Access call; op's kind, address and payload are
    build-time constants, everything else is program state."""
    kind, a = op[0], op[1]
    payload = Const(op[2]) if kind == WRITE else Const(Token("none"))
    down = while_(E("le", V("l"), Const(big_l)), chain(
        assign("S", E("union", V("S"),
                      E("index", V("Tree"), path_node(V("x"), V("l"), big_l)))),
        record("Trace", ev_expr("Read", V("x"), V("l"))),
        assign("l", E("add", V("l"), Const(1))),
    ))

    # stash blocks whose current leaf shares the bucket being written
    def candidate(addr: int) -> Expr:
        held = E("not", E("eq", E("find", Const(addr), V("S")),
                          Const(Token("missing"))))
        meets = E("eq", path_node(V("x"), V("l"), big_l),
                  path_node(V(_qvar(addr)), V("l"), big_l))
        pair = E("setlit", E("tuple", Const(addr), E("find", Const(addr), V("S"))))
        return E("ite", E("and", held, meets), pair, Const(SetV(())))

    gathered: Expr = Const(SetV(()))
    for addr in range(addrs):
        gathered = E("union", gathered, candidate(addr))
    up = while_(E("le", Const(0), V("l")), chain(
        assign("Sp", gathered),
        assign("Sp", E("select", Const(z), V("Sp"))),
        assign("S", E("diff", V("S"), V("Sp"))),
        assign("Tree", E("update", V("Tree"),
                         path_node(V("x"), V("l"), big_l), V("Sp"))),
        record("Trace", ev_expr("Write", V("x"), V("l"))),
        assign("l", E("sub", V("l"), Const(1))),
    ))

    return chain(
        assign("Tprev", V("Trace")),
        assign("x", V(_qvar(a))),
        sample(_qvar(a), Const(_leaves(big_l))),
        assign("l", Const(0)),
        down,
        assign("data", E("find", Const(a), V("S"))),
        if_(E("eq", Const(Token(kind)), Const(Token(WRITE))),
            assign("S", E("union",
                          E("diff", V("S"),
                            E("setlit", E("tuple", Const(a), V("data")))),
                          E("setlit", E("tuple", Const(a), payload))))),
        assign("l", Const(big_l)),
        up,
    )


def build_path_oram(big_l: int, addrs: int, ops, z: int = 4) -> Program:
    """A program running the given accesses against a height-big_l
    tree; requires addrs <= 2^L so every address can hold a block."""
    if big_l < 0:
        raise ConstraintViolation(f"tree height must be non-negative, got {big_l}")
    if not 1 <= addrs <= 2 ** big_l:
        raise ConstraintViolation(
            f"address count must lie in 1..2^{big_l}, got {addrs}")
    if z < 1:
        raise ConstraintViolation(f"bucket capacity must be positive, got {z}")
    checked = _check_ops(big_l, addrs, ops)

    prologue = [sample(_qvar(a), Const(_leaves(big_l))) for a in range(addrs)]
    body = chain(*prologue,
                 *[access(big_l, addrs, op, z) for op in checked]) \
        if checked else chain(*prologue)
    init = {"Trace": Seq(()), "Tprev": Seq(()), "S": SetV(()),
            "Tree": Seq(tuple(SetV(()) for _ in range(2 ** (big_l + 1)))),
            "x": 0, "l": 0, "data": 0, "Sp": SetV(())}
    init.update({_qvar(a): 0 for a in range(addrs)})
    return Program.make(init, body)


def main_invariant(big_l: int, addrs: int, kinds) -> Star:
    """Per-address uniformity over the leaves, each entry independent
    of the others: the star of Uniform claims over q0..q_{addrs-1}."""
    leaves = Const(_leaves(big_l))
    parts = [Uniform(leaves, Var(VarId(_qvar(a), kinds[_qvar(a)])))
             for a in range(addrs)]
    out = parts[0]
    for p in parts[1:]:
        out = Star(out, p)
    return out


def op_space(addrs: int, payload: int = 7) -> list[Op]:
    """Every distinct single operation at a fixed write payload."""
    return [(READ, a) for a in range(addrs)] + \
           [(WRITE, a, payload) for a in range(addrs)]


def check_claims(big_l: int = 2, addrs: int = 2,
                 fuel: int = 20000) -> list[Claim]:
    claims: list[Claim] = []
    leaves = uniform(tuple(range(2 ** big_l)))
    singles = op_space(addrs)

    # one access: the touched entry is freshly uniform and carries no
    # correlation into the trace, and the trace has one event per
    # level each way
    fresh, decoupled, lengths = True, True, set()
    for op in singles:
        out = run_program(build_path_oram(big_l, addrs, [op]), fuel)
        q = _qvar(op[1])
        fresh = fresh and out.mu.project((q,)).dist.map(
            lambda m: m[0]) == leaves
        decoupled = decoupled and is_independent(out.mu, (q,), ("Trace",))
        lengths |= {len(t[0].items)
                    for t in out.mu.project(("Trace",)).dist.support()}
    claims.append(Claim(
        "after one access the touched entry is uniform over the leaves",
        fresh, f"{len(singles)} single-op programs"))
    claims.append(Claim(
        "after one access the touched entry is independent of the trace",
        decoupled))
    claims.append(Claim(
        "one access emits exactly one read and one write per level",
        lengths == {2 * (big_l + 1)}, f"lengths {sorted(lengths)}"))

    # same-length sequences are indistinguishable: zero statistical
    # distance between every pair of trace distributions
    worst = Fraction(0)
    runs = 0
    for length in (1, 2):
        dists = []
        for seq in product(singles, repeat=length):
            out = run_program(build_path_oram(big_l, addrs, list(seq)), fuel)
            dists.append(out.mu.project(("Trace",)).dist)
            runs += 1
        for i in range(len(dists)):
            for j in range(i + 1, len(dists)):
                worst = max(worst, statistical_distance(dists[i], dists[j]))
    claims.append(Claim(
        "same-length access sequences have identical trace distributions",
        worst == 0, f"{runs} programs, max SD {worst}"))

    # the per-entry uniformity-and-independence invariant after every
    # prefix of a two-op sequence
    seq2 = [(WRITE, 0, 7), (READ, 1)]
    u = Universe({}, {_qvar(a): tuple(range(2 ** big_l))
                      for a in range(addrs)})
    inv_ok = True
    for cut in range(1, len(seq2) + 1):
        prog = build_path_oram(big_l, addrs, seq2[:cut])
        inv_ok = inv_ok and check_invariant_after(
            prog, main_invariant(big_l, addrs, prog.kinds), u, fuel)
    claims.append(Claim(
        "position-map entries stay independently uniform after each access",
        inv_ok, f"{len(seq2)} prefixes"))
    return claims
