"""Path-structured oblivious heap at desk scale.

The heap keeps elements in a binary tree of 2N bucket slots (heap
indexing, root at 1, slot 0 unused) plus a per-node subtree-minimum
array. Insert adds the element to the root bucket, assigns it a
uniform position in 0..N-1, then evicts and re-summarizes two
independently chosen paths, one over each half of the leaf range.
Delete walks the stored position's path removing the element, then
evicts and re-summarizes that same path. Either way every observable
block of accesses is a fixed pattern of one path argument, so traces
depend only on the sequence of operation kinds, never on keys,
values, or which element a delete targets.

The sub-procedures (add, del, readNRm, evict, updateMin) are
deterministic slot scans; each is realized here at the granularity
of its classical contract, appending its whole access pattern in one
step: the in-program trace grows by a table lookup mapping the path
argument to that procedure's pattern, with the pure pattern
generators exposed alongside for host-side reasoning. Bucket slot
counts are n_root at the root and 4 elsewhere; "readAll"/"writeAll"
node accesses are expanded to one event per slot; the subtree-min
array contributes ("readMin", i)/("writeMin", i) events.

Operations are ("insert", key, value) and ("delete", tau) where tau
is the timestamp the targeted insert received. Timestamps are
allocated deterministically, in insert order starting at 0, so they
identify inserts without revealing anything. Inserted payloads land
in a deterministic bookkeeping log (the client's own view); bucket
contents are not otherwise materialized, since every claim here is
about positions and traces.
"""

from __future__ import annotations

from itertools import product

from ..assertions import Assertion, Star, Top, Uniform, Universe
from ..dist import uniform
from ..interp import run_program
from ..lang import Command, Const, Program, SKIP, Var, VarId
from ..security import check_invariant_after
from ..values import Seq, SetV, Tup, Value
from .common import Claim, ConstraintViolation, E, InvalidDeleteReference, \
    V, assign, chain, ev, sample

Event = Tup
INSERT = "insert"
DELETE = "delete"


def slots(node: int, n_root: int) -> int:
    return n_root if node == 1 else 4


def path(p: int, n: int) -> list[int]:
    """Heap slots from the root down to leaf p (= node n+p)."""
    return path_r(p, n)[::-1]


def path_r(p: int, n: int) -> list[int]:
    """Heap slots from leaf p up to the root."""
    node = n + p
    out = []
    while node:
        out.append(node)
        node //= 2
    return out


def trace_add(node: int, n_root: int) -> tuple[Event, ...]:
    """Access pattern of adding into a node: scan every slot, reading
    then writing back, whether or not the slot took the element."""
    out = []
    for j in range(slots(node, n_root)):
        out.append(ev("read", node, j))
        out.append(ev("write", node, j))
    return tuple(out)


def trace_del(node: int, n_root: int) -> tuple[Event, ...]:
    """Access pattern of deleting from a node: the same full scan,
    reading each slot and writing back (a dummy where it matched)."""
    out = []
    j = 0
    while j < slots(node, n_root):
        out.append(ev("read", node, j))
        out.append(ev("write", node, j))
        j += 1
    return tuple(out)


def _read_all(node: int, n_root: int) -> list[Event]:
    return [ev("read", node, j) for j in range(slots(node, n_root))]


def _write_all(node: int, n_root: int) -> list[Event]:
    return [ev("write", node, j) for j in range(slots(node, n_root))]


def trace_read_rm(p: int, n: int, n_root: int) -> tuple[Event, ...]:
    """Read-and-remove along the path to leaf p: one delete scan per
    node from root to leaf."""
    out: list[Event] = []
    for node in path(p, n):
        out.extend(trace_del(node, n_root))
    return tuple(out)


def trace_evict(p: int, n: int, n_root: int) -> tuple[Event, ...]:
    """Evicting along leaf p's path: read every node top-down, then
    write every node top-down."""
    out: list[Event] = []
    for node in path(p, n):
        out.extend(_read_all(node, n_root))
    for node in path(p, n):
        out.extend(_write_all(node, n_root))
    return tuple(out)


def trace_update_min(p: int, n: int, n_root: int) -> tuple[Event, ...]:
    """Recomputing subtree minima bottom-up along leaf p's path: each
    node is re-read whole; above the leaf the two child minima are
    consulted; each node's own minimum is rewritten."""
    out: list[Event] = []
    for i, node in enumerate(path_r(p, n)):
        out.extend(_read_all(node, n_root))
        if i > 0:
            out.append(ev("readMin", 2 * node))
            out.append(ev("readMin", 2 * node + 1))
        out.append(ev("writeMin", node))
    return tuple(out)


def _table(fn, ps, n: int, n_root: int) -> Const:
    """Position-to-pattern lookup table as a constant set of pairs."""
    return Const(SetV(Tup((p, Seq(fn(p, n, n_root)))) for p in ps))


def _extend(block) -> Command:
    return assign("Trace", E("concat", V("Trace"), block))


def build_poh(n: int, n_root: int = 4, ops=()) -> Program:
    """A program running the given heap operations against an N-leaf
    tree (n must be a power of two, at least 2)."""
    if n < 2 or n & (n - 1):
        raise ConstraintViolation(f"leaf count must be a power of two >= 2, got {n}")
    if n_root < 1:
        raise ConstraintViolation(f"root capacity must be positive, got {n_root}")

    te = _table(trace_evict, range(n), n, n_root)
    tu = _table(trace_update_min, range(n), n, n_root)
    tr = _table(trace_read_rm, range(n), n, n_root)
    add_block = Const(Seq(trace_add(1, n_root)))

    cmds = []
    live: set[int] = set()
    stamp = 0
    for op in ops:
        parts = tuple(op)
        if parts and parts[0] == INSERT and len(parts) == 3:
            k, v = parts[1], parts[2]
            pos = f"pos{stamp}"
            cmds += [
                sample(pos, Const(SetV(range(n)))),
                assign("Log", E("append", V("Log"),
                                Const(Tup((k, v, stamp))))),
                _extend(add_block),
                sample("P", Const(SetV(range(n // 2)))),
                sample("Pp", Const(SetV(range(n // 2, n)))),
                _extend(E("find", V("P"), te)),
                _extend(E("find", V("P"), tu)),
                _extend(E("find", V("Pp"), te)),
                _extend(E("find", V("Pp"), tu)),
            ]
            live.add(stamp)
            stamp += 1
        elif parts and parts[0] == DELETE and len(parts) == 2:
            tau = parts[1]
            if tau not in live:
                raise InvalidDeleteReference(
                    f"timestamp {tau!r} does not name a live insert")
            live.remove(tau)
            pos = f"pos{tau}"
            cmds += [
                _extend(E("find", V(pos), tr)),
                _extend(E("find", V(pos), te)),
                _extend(E("find", V(pos), tu)),
            ]
        else:
            raise ConstraintViolation(f"bad heap operation {parts!r}")

    init: dict[str, Value] = {"Trace": Seq(()), "Log": Seq(()),
                              "P": 0, "Pp": 0}
    init.update({f"pos{t}": 0 for t in range(stamp)})
    return Program.make(init, chain(*cmds) if cmds else SKIP)


def live_after(ops, upto: int) -> list[int]:
    """Timestamps of inserts still present after the first `upto` ops."""
    live: list[int] = []
    stamp = 0
    for op in list(ops)[:upto]:
        if op[0] == INSERT:
            live.append(stamp)
            stamp += 1
        else:
            live.remove(op[1])
    return live


def positions_invariant(n: int, stamps, kinds) -> Assertion:
    """Each live position independently uniform over the leaf range:
    the star of per-position Uniform claims (trivial when none live)."""
    leaves = Const(SetV(range(n)))
    parts = [Uniform(leaves, Var(VarId(f"pos{t}", kinds[f"pos{t}"])))
             for t in stamps]
    if not parts:
        return Top()
    out = parts[0]
    for a in parts[1:]:
        out = Star(out, a)
    return out


def insert_trace_set(n: int, n_root: int) -> set[Seq]:
    """Every trace one insert can produce: add's fixed block, then an
    evict+update block for an independent choice from each leaf half."""
    out = set()
    for p, q in product(range(n // 2), range(n // 2, n)):
        evs = trace_add(1, n_root) \
            + trace_evict(p, n, n_root) + trace_update_min(p, n, n_root) \
            + trace_evict(q, n, n_root) + trace_update_min(q, n, n_root)
        out.add(Seq(evs))
    return out


def check_claims(n: int = 4, n_root: int = 4,
                 fuel: int = 20000) -> list[Claim]:
    claims: list[Claim] = []

    nodes = range(1, 2 * n)
    claims.append(Claim(
        "add and delete scans produce the same per-node pattern",
        all(trace_add(x, n_root) == trace_del(x, n_root) for x in nodes),
        f"nodes 1..{2 * n - 1}"))
    levels = (2 * n).bit_length() - 1
    claims.append(Claim(
        "leaf-to-root is the reverse of root-to-leaf, one slot per level",
        all(path(p, n) == path_r(p, n)[::-1] and len(path(p, n)) == levels
            for p in range(n))
        and path(0, n) == [2 ** i for i in range(levels)],
        f"{n} leaves, {levels} levels"))

    one = run_program(build_poh(n, n_root, [(INSERT, 5, 6)]), fuel)
    want = insert_trace_set(n, n_root)
    tdist = one.mu.project(("Trace",)).dist.map(lambda m: m[0])
    claims.append(Claim(
        "one insert's trace is uniform over the expected product set",
        tdist == uniform(tuple(want)), f"{len(want)} traces"))

    # same op kinds, different parameters: identical trace distributions
    shapes = [
        [[(INSERT, 5, 6), (INSERT, 7, 8)], [(INSERT, 1, 1), (INSERT, 2, 9)]],
        [[(INSERT, 5, 6), (DELETE, 0)], [(INSERT, 3, 0), (DELETE, 0)]],
        [[(INSERT, 5, 6), (INSERT, 7, 8), (DELETE, 0)],
         [(INSERT, 0, 0), (INSERT, 1, 0), (DELETE, 1)]],
    ]
    same = True
    for a, b in shapes:
        da = run_program(build_poh(n, n_root, a), fuel).mu.project(("Trace",))
        db = run_program(build_poh(n, n_root, b), fuel).mu.project(("Trace",))
        same = same and da.dist == db.dist
    claims.append(Claim(
        "trace distribution depends only on the operation kinds",
        same, f"{len(shapes)} shape pairs"))

    ops = [(INSERT, 5, 6), (INSERT, 7, 8), (DELETE, 0)]
    u = Universe({}, {f"pos{t}": tuple(range(n)) for t in range(2)})
    inv_ok = True
    for cut in range(1, len(ops) + 1):
        prog = build_poh(n, n_root, ops[:cut])
        phi = positions_invariant(n, live_after(ops, cut), prog.kinds)
        inv_ok = inv_ok and check_invariant_after(prog, phi, u, fuel)
    claims.append(Claim(
        "live positions stay independently uniform after every operation",
        inv_ok, f"{len(ops)} prefixes"))
    return claims
