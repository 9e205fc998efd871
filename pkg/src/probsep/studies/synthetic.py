"""Warm-up study: a table walk whose running time depends on the data
it reads, while the published output stays uniform.

A two-cell table holds independent uniform samples from {0..7}. Each
round the secret index sequence S picks a cell, the cell's value is
appended to the output word O, a counting loop runs for a number of
steps that depends on that value (the deliberate timing channel), and
the consumed cell is refreshed with t mod 8 for t drawn uniformly from
{1..m}. The loop keeps m at 8 times a power of two, so the refresh is
uniform again and O carries no information about S.

`build_synthetic(n)` is the executable model with the table as one
two-element sequence variable A (cell writes are whole-sequence
updates, keeping sampling on plain variables). `outline_program()` is
the same algorithm at n = 1 with each cell its own variable and the
refresh sampled inside the per-cell conditional branches;
`build_outline()` returns a complete proof script for it deriving
uniformity of O, every obligation of which `check_proof` discharges.
"""

from __future__ import annotations

from fractions import Fraction

from ..assertions import (
    And,
    Assertion,
    Certain,
    Or,
    Star,
    Top,
    Uniform,
    Universe,
    dvar,
    subst_assert,
)
from ..dist import uniform
from ..lang import Const, EvenPart, Expr, IfRand, Kind, Program, SKIP, Var, VarId
from ..logic import ProofNode, RuleApp, Triple, check_proof, guard_false, guard_true
from ..security import ObliviousnessQuery, statistical_secrecy
from ..values import Seq, SetV, Tup
from .common import Claim, ConstraintViolation, E, V, assign, chain, if_, sample, while_

E8 = SetV(range(8))
E8c = Const(E8)


def _round_body(sel: Expr, write_cell) -> tuple:
    """The shared per-round skeleton: consume, count, refresh."""
    inner = while_(E("lt", V("j"), sel), chain(
        assign("m", E("mul", V("m"), Const(2))),
        assign("j", E("add", V("j"), Const(1))),
        if_(E("eq", E("mod", E("add", V("j"), E("index", V("S"), V("i"))),
                      Const(3)),
            Const(0)),
            assign("j", E("add", V("j"), Const(1)))),
    ))
    return (
        assign("O", E("append", V("O"), sel)),
        assign("m", Const(8)),
        assign("j", Const(0)),
        inner,
        write_cell,
        assign("i", E("add", V("i"), Const(1))),
    )


def build_synthetic(n: int, secret: Seq | None = None) -> Program:
    """Sequence-table form: n rounds over a two-cell table A.

    The secret S is a 0/1 sequence of length n naming the cell each
    round reads; O is the observable output word.
    """
    if n < 0:
        raise ConstraintViolation(f"round count must be >= 0, got {n}")
    if secret is None:
        secret = Seq((0,) * n)
    if len(secret.items) != n or any(v not in (0, 1) for v in secret.items):
        raise ConstraintViolation(f"secret must be a 0/1 sequence of length {n}")
    sel = E("index", V("A"), E("index", V("S"), V("i")))
    refresh = chain(
        sample("t", E("range", Const(1), V("m"))),
        assign("A", E("update", V("A"), E("index", V("S"), V("i")),
                      E("mod", V("t"), Const(8)))),
    )
    body = chain(
        sample("t", E8c),
        assign("A", E("update", V("A"), Const(0), V("t"))),
        sample("t", E8c),
        assign("A", E("update", V("A"), Const(1), V("t"))),
        assign("i", Const(0)),
        while_(E("lt", V("i"), V("n")), chain(*_round_body(sel, refresh))),
    )
    init = {"S": secret, "n": n, "i": 0, "O": Seq(()),
            "A": Seq((0, 0)), "m": 0, "j": 0, "t": 0}
    return Program.make(init, body)


def outline_program(secret: Seq | None = None) -> Program:
    """Cell-variable form at n = 1, as the proof script walks it.

    Each table cell is its own variable (a0, a1) and the refresh
    sample sits inside the branch that writes the cell, so every
    command's written-variable set is one cell, never both.
    """
    if secret is None:
        secret = Seq((0,))
    if len(secret.items) != 1 or secret.items[0] not in (0, 1):
        raise ConstraintViolation("outline secret is a singleton 0/1 sequence")
    sel = E("ite", E("eq", E("index", V("S"), V("i")), Const(0)),
            V("a0"), V("a1"))
    refresh = if_(
        E("eq", E("index", V("S"), V("i")), Const(0)),
        chain(sample("t", E("range", Const(1), V("m"))),
              assign("a0", E("mod", V("t"), Const(8)))),
        chain(sample("t", E("range", Const(1), V("m"))),
              assign("a1", E("mod", V("t"), Const(8)))),
    )
    body = chain(
        sample("a0", E8c),
        sample("a1", E8c),
        assign("i", Const(0)),
        while_(E("lt", V("i"), V("n")), chain(*_round_body(sel, refresh))),
    )
    init = {"S": secret, "n": 1, "i": 0, "O": Seq(()),
            "a0": 0, "a1": 0, "m": 0, "j": 0, "t": 0}
    return Program.make(init, body)


# ---------------------------------------------------------------------------
# Proof outline
# ---------------------------------------------------------------------------

_SECRETS = Const(SetV((Seq((0,)), Seq((1,)))))


def _node(rule: str, pre: Assertion, cmd, post: Assertion,
          *children: ProofNode, universe: Universe | None = None,
          cite_pre: str | None = None, cite_post: str | None = None) -> ProofNode:
    """Rule application whose premises are its children's conclusions."""
    app = RuleApp(rule, Triple(pre, cmd, post),
                  tuple(ch.app.conclusion for ch in children),
                  universe, (), cite_pre, cite_post)
    return ProofNode(app, children)


def build_outline() -> tuple[ProofNode, Universe]:
    """Proof script for `outline_program()`: from the secret lying in
    a known two-element set, the output word ends uniform over the
    length-n words, whichever secret it was.

    Returns the script plus a default universe for `check_proof`. The
    only obligations that enumerate anything are counting-loop facts
    over m and j, the refresh partition's evenness, and the
    contradictory branch of the cell conditional; all live in small
    candidate pools, and the genuinely distribution-level entailments
    cite lemma templates by name.
    """
    prog = outline_program()
    u_mj = Universe(
        {"S": (Seq((0,)), Seq((1,))), "i": (0, 1), "n": (1,)},
        {"m": (8, 12, 16), "j": (0, 1, 2)},
    )
    u_arm = Universe(
        {"S": (Seq((0,)), Seq((1,))), "i": (0, 1), "n": (1,)},
        {"m": (8, 12, 16), "j": (0, 1, 2), "a0": (0, 1), "a1": (0, 1)},
    )

    # Program pieces, pulled from the elaborated body so every command
    # in the script is the exact subtree the checker compares against.
    s_a0 = prog.body.first
    rest1 = prog.body.second
    s_a1 = rest1.first
    rest2 = rest1.second
    c_i0 = rest2.first
    loop = rest2.second
    lb = loop.body
    b1, lb2 = lb.first, lb.second
    b2, lb3 = lb2.first, lb2.second
    b3, lb4 = lb3.first, lb3.second
    w_loop, lb5 = lb4.first, lb4.second
    b45, b6 = lb5.first, lb5.second
    w1 = w_loop.body.first
    w2 = w_loop.body.second.first
    w3 = w_loop.body.second.second
    arms = {0: b45.then, 1: b45.els}

    kinds = prog.kinds

    def pv(name: str) -> Var:
        return Var(VarId(name, kinds[name]))

    sel = b1.expr.args[1]                      # ite(S[i] = 0, a0, a1)
    sel_idx = sel.args[0].args[0]              # S[i]
    vi, vn, vo, vm, vj = pv("i"), pv("n"), pv("O"), pv("m"), pv("j")
    cell = {0: pv("a0"), 1: pv("a1")}
    di = VarId("i", Kind.DET)

    def words(length: Expr) -> Expr:
        return E("words", E8c, length)

    def u8(e: Expr) -> Uniform:
        return Uniform(E8c, e)

    def conj(*atoms: Expr) -> Expr:
        out = atoms[0]
        for a in atoms[1:]:
            out = E("and", out, a)
        return out

    pre_e = conj(E("eq", vn, Const(1)), E("member", pv("S"), _SECRETS))
    p_top = Certain(pre_e)
    sss = Star(Star(Uniform(words(vi), vo), u8(cell[0])), u8(cell[1]))
    inv = And(Certain(conj(pre_e, E("le", vi, vn))), sss)
    inv0 = subst_assert(inv, di, Const(0))
    inv1 = subst_assert(inv, di, b6.expr)
    at_exit = And(inv, Certain(guard_false(loop.guard)))
    post = And(Certain(conj(pre_e, E("eq", vi, vn))), Uniform(words(vn), vo))

    # Initial cell samples: the identity partition is even, and the
    # facts gathered so far ride along as a constant.
    ep_id = Certain(EvenPart("w", Var(VarId("w", Kind.DET)), s_a0.expr, E8c))

    def init_sample(cmd, carried: Assertion) -> tuple[ProofNode, Assertion]:
        target = u8(Var(cmd.var))
        rs = _node("RSample", ep_id, cmd, target)
        cst = _node("Const", And(ep_id, carried), cmd, And(target, carried), rs)
        out = And(target, carried)
        return _node("Weak", carried, cmd, out, cst), out

    n_a0, r1 = init_sample(s_a0, p_top)
    n_a1, r2 = init_sample(s_a1, r1)

    n_i0 = _node("Weak", r2, c_i0, inv,
                 _node("DAssign", inv0, c_i0, inv),
                 cite_pre="independence-transfer")

    # Loop body, per known value of S[i].
    a_in = And(inv, Certain(guard_true(loop.guard)))
    bp = {k: And(a_in, Certain(E("eq", sel_idx, Const(k)))) for k in (0, 1)}

    pe = conj(E("le", Const(0), vj),
              E("eq", E("mod", vm, Const(8)), Const(0)),
              E("lt", Const(7), vm))
    phi_in = Certain(pe)

    def const_assign(cmd, fact: Expr, eta: Assertion) -> tuple[ProofNode, Assertion]:
        """{eta} x := e {C[fact] and eta} for untouched eta; the inner
        postcondition must be atomic, so the fact is framed by Const."""
        post_c = Certain(fact)
        ra = _node("RAssign", subst_assert(post_c, cmd.var, cmd.expr), cmd, post_c)
        out = And(post_c, eta)
        cst = _node("Const", And(ra.app.conclusion.pre, eta), cmd, out, ra)
        return _node("Weak", eta, cmd, out, cst), out

    def counting_loop(m1: Assertion, m3: Assertion) -> tuple[ProofNode, Assertion]:
        """{m3} while j < sel ... {m4}: the loop only moves m and j,
        keeping m a multiple of 8 above 7; everything else is framed."""
        def step(cmd, pre: Assertion) -> ProofNode:
            ra = _node("RAssign", subst_assert(phi_in, cmd.var, cmd.expr),
                       cmd, phi_in)
            return _node("Weak", pre, cmd, phi_in, ra, universe=u_mj)

        t_w1 = step(w1, Certain(conj(pe, guard_true(w_loop.guard))))
        t_w2 = step(w2, phi_in)
        g3 = w3.guard
        t_w3t = step(w3.then, Certain(conj(pe, guard_true(g3))))
        t_w3e = _node("Weak", Certain(conj(pe, guard_false(g3))), w3.els, phi_in,
                      _node("Skip", phi_in, w3.els, phi_in))
        t_w3 = _node("RCond-certain", phi_in, w3, phi_in, t_w3t, t_w3e)
        t_w23 = _node("Seqn", phi_in, w_loop.body.second, phi_in, t_w2, t_w3)
        t_body = _node("Seqn", Certain(conj(pe, guard_true(w_loop.guard))),
                       w_loop.body, phi_in, t_w1, t_w23)
        unrolled = IfRand(w_loop.guard, w_loop.body, SKIP)
        t_else = _node("Weak", Certain(conj(pe, guard_false(w_loop.guard))),
                       SKIP, phi_in,
                       _node("Skip", phi_in, SKIP, phi_in))
        t_if = _node("RCond-certain", phi_in, unrolled, phi_in, t_body, t_else)
        after = And(phi_in, Certain(guard_false(w_loop.guard)))
        t_loop = _node("RLoop", phi_in, w_loop, after, t_if)
        m4 = And(after, m1)
        t_cst = _node("Const", And(phi_in, m1), w_loop, m4, t_loop)
        return _node("Weak", m3, w_loop, m4, t_cst, universe=u_mj), m4

    def refresh_arm(k: int, arm_pre: Assertion, a: int) -> ProofNode:
        """{arm_pre} arm_a {inv1} inside the branch where S[i] = k.

        On the matching arm (a = k) this is the heart of the proof:
        condition on the output word paired with the spectator cell,
        re-derive uniformity of the refreshed cell, and recombine. On
        the other arm the precondition pins S[i] to two different
        values at once and the checker refutes it by enumeration.
        """
        arm = arms[a]
        samp, upd = arm.first, arm.second
        spec = cell[1 - a]
        a_tup = E("tuple", vo, spec)
        pairs = SetV(Tup((Seq((w,)), v)) for w in range(8) for v in range(8))
        p0 = conj(pre_e, E("lt", vi, vn), E("eq", sel_idx, Const(a)),
                  E("lt", Const(7), vm),
                  E("eq", E("mod", vm, Const(8)), Const(0)))
        pre_ui = And(Star(Certain(E("member", a_tup, Const(pairs))), Top()),
                     Certain(p0))

        # Premise: under those facts the refreshed cell is uniform.
        ep_m = Certain(EvenPart("w", E("mod", Var(VarId("w", Kind.DET)), Const(8)),
                                samp.expr, E8c))
        target = u8(E("mod", Var(samp.var), Const(8)))
        n_rs = _node("RSample", ep_m, samp, target)
        x0 = And(target, Certain(p0))
        n_cst = _node("Const", And(ep_m, Certain(p0)), samp, x0, n_rs)
        n_samp = _node("Weak", pre_ui, samp, x0, n_cst, universe=u_mj)
        n_upd = _node("Weak", x0, upd, u8(cell[a]),
                      _node("RAssign", target, upd, u8(cell[a])))
        n_seq = _node("Seqn", pre_ui, arm, u8(cell[a]), n_samp, n_upd)

        n_ui = _node("Unif-Idp", pre_ui, arm, Star(dvar(a_tup), u8(cell[a])),
                     n_seq)

        # Carried facts: everything the arm does not touch.
        hf = Certain(conj(pre_e, E("lt", vi, vn), E("eq", sel_idx, Const(a))))
        eta = And(Star(Uniform(words(b6.expr), vo), u8(spec)), hf)
        n_true = _node("True", Top(), arm, Top())
        n_carry = _node("Const", And(Top(), eta), arm, And(Top(), eta), n_true)
        n_conj = _node("Conj", And(pre_ui, And(Top(), eta)), arm,
                       And(Star(dvar(a_tup), u8(cell[a])), And(Top(), eta)),
                       n_ui, n_carry)
        return _node("Weak", arm_pre, arm, inv1, n_conj,
                     universe=None if a == k else u_arm,
                     cite_pre="uniform-membership" if a == k else None,
                     cite_post="star-and-shift")

    def branch(k: int) -> ProofNode:
        spec = cell[1 - k]
        hf = Certain(conj(pre_e, E("lt", vi, vn), E("eq", sel_idx, Const(k))))
        post_r = Uniform(words(b6.expr), vo)
        pre_r = Uniform(words(b6.expr), b1.expr)
        m1 = And(Star(post_r, u8(spec)), hf)

        n_ra = _node("RAssign", pre_r, b1, post_r)
        n_fr = _node("Frame", Star(pre_r, u8(spec)), b1, Star(post_r, u8(spec)),
                     n_ra)
        n_cs = _node("Const", And(Star(pre_r, u8(spec)), hf), b1, m1, n_fr)
        n_b1 = _node("Weak", bp[k], b1, m1, n_cs, cite_pre="uniform-pairing")

        n_b2, m2 = const_assign(b2, E("eq", vm, Const(8)), m1)
        n_b3, m3 = const_assign(b3, E("eq", vj, Const(0)), m2)

        n_w, m4 = counting_loop(m1, m3)

        arm0 = refresh_arm(k, And(m4, Certain(guard_true(b45.guard))), 0)
        arm1 = refresh_arm(k, And(m4, Certain(guard_false(b45.guard))), 1)
        n_b45 = _node("DCond", m4, b45, inv1, arm0, arm1)

        n_b6 = _node("DAssign", inv1, b6, inv)

        n_s5 = _node("Seqn", m4, lb5, inv, n_b45, n_b6)
        n_s4 = _node("Seqn", m3, lb4, inv, n_w, n_s5)
        n_s3 = _node("Seqn", m2, lb3, inv, n_b3, n_s4)
        n_s2 = _node("Seqn", m1, lb2, inv, n_b2, n_s3)
        return _node("Seqn", bp[k], lb, inv, n_b1, n_s2)

    n_case = _node("Case", Or(bp[0], bp[1]), lb, Or(inv, inv),
                   branch(0), branch(1))
    n_body = _node("Weak", a_in, lb, inv, n_case, cite_pre="det-case-split")
    n_loop = _node("DLoop", inv, loop, at_exit, n_body)

    n_tail2 = _node("Seqn", r2, rest2, at_exit, n_i0, n_loop)
    n_tail1 = _node("Seqn", r1, rest1, at_exit, n_a1, n_tail2)
    n_all = _node("Seqn", p_top, prog.body, at_exit, n_a0, n_tail1)
    root = _node("Weak", p_top, prog.body, post, n_all,
                 cite_post="uniform-transfer")
    return root, u_mj


# ---------------------------------------------------------------------------
# Claims
# ---------------------------------------------------------------------------

def secrets(n: int) -> tuple[Seq, ...]:
    """All 0/1 index sequences of length n."""
    out: list[tuple[int, ...]] = [()]
    for _ in range(n):
        out = [w + (b,) for w in out for b in (0, 1)]
    return tuple(Seq(w) for w in out)


def _words(n: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = [()]
    for _ in range(n):
        out = [w + (v,) for w in out for v in range(8)]
    return out


def check_claims(n: int = 2, fuel: int = 4000) -> list[Claim]:
    claims: list[Claim] = []

    all_secrets = secrets(n)
    prog = build_synthetic(n)
    query = ObliviousnessQuery(prog, "S", all_secrets, observe_var="O", fuel=fuel)
    report = statistical_secrecy(query)
    want = uniform([Seq(w) for w in _words(n)])
    claims.append(Claim(
        f"output uniform over the {8 ** n} length-{n} words for every secret",
        all(d == want for d in report.traces)))

    idx = range(len(all_secrets))
    max_sd = max(report.sd[i][j] for i in idx for j in idx if i < j)
    max_adv = max(report.advantages[i][j] for i in idx for j in idx if i < j)
    claims.append(Claim(
        "zero statistical distance between every pair of secrets",
        report.oblivious and max_sd == 0, f"max SD {max_sd}"))
    claims.append(Claim(
        "best distinguishing advantage is exactly 1/2",
        max_adv == Fraction(1, 2), f"advantage {max_adv}"))

    script, universe = build_outline()
    result = check_proof(script, universe)
    bad = [o for o in result.obligations if not o.ok]
    claims.append(Claim(
        "proof outline for the n=1 cell form is accepted",
        result.ok,
        f"{len(result.obligations)} obligations discharged" if result.ok
        else "; ".join(f"{o.path} {o.rule} {o.name}: {o.detail}"
                       for o in bad[:3])))
    return claims
