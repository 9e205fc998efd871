"""Hoare triples, rule-application checking, proof scripts, fuzzing.

A triple {pre} c {post} is semantically valid when every configuration
satisfying pre steps through c to a configuration satisfying post;
`holds_semantically` decides this by enumerating all full
configurations a finite universe can express.

`check_rule_app` validates one application of a named proof rule: the
premise triples must match the rule's schema shape exactly, and the
side conditions are computed (variable analyses), discharged by
enumeration (entailments), or checked universe-relatively (the
supported predicate). `check_proof` walks a tree of applications.

`soundness_fuzz` generates random premise-valid instances of a rule and
asserts the conclusion is semantically valid too; a violation would
falsify this implementation, not the logic.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .assertions import (
    And,
    Assertion,
    BOTTOM,
    Bottom,
    Certain,
    EntailResult,
    EnumerationBudgetExceeded,
    Implies,
    Or,
    PartialConfig,
    Star,
    TOP,
    Top,
    Uniform,
    Universe,
    UniverseTooSmall,
    Wand,
    dvar,
    entails,
    fv_assert,
    is_atomic,
    is_supported,
    satisfies,
    subst_assert,
)
from .dist import ZeroMassCondition
from .interp import Config, FuelExhausted, exec as exec_cmd
from .lang import (
    Command,
    Const,
    DAssign,
    EvenPart,
    Expr,
    IfDet,
    IfRand,
    IllFormed,
    Kind,
    Op,
    RAssign,
    SKIP,
    Sample,
    SeqC,
    Skip,
    Var,
    VarId,
    WhileDet,
    WhileRand,
    check_command,
    command_vars,
    eval_expr,
    free_vars,
    modified_vars,
    read_vars,
    subst_expr,
    write_only_vars,
)
from .values import EvalError, FALSE, SetV, Value, truthy

KNOWN_RULES = (
    "RAssign", "RSample", "RCond-certain", "RLoop", "Unif-Idp",
    "DAssign", "Skip", "Seqn", "Weak", "Const", "DCond", "True",
    "DLoop", "RDCond", "RCond", "Conj", "Case", "RCase", "Frame",
)


class GenerationBudgetExceeded(Exception):
    """Rejection sampling failed to find enough premise-valid instances."""


def guard_true(b: Expr) -> Expr:
    """The expression `b != false`."""
    return Op("not", (Op("eq", (b, Const(FALSE))),))


def guard_false(b: Expr) -> Expr:
    return Op("eq", (b, Const(FALSE)))


# ---------------------------------------------------------------------------
# Triples and semantic validity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Triple:
    pre: Assertion
    cmd: Command
    post: Assertion

    def __post_init__(self):
        check_command(self.cmd)


@dataclass
class TripleResult:
    holds: bool
    initial: Optional[PartialConfig] = None
    final: Optional[PartialConfig] = None

    def __bool__(self) -> bool:
        return self.holds

    def describe(self) -> str:
        if self.holds:
            return "valid"
        return (f"invalid; from {self.initial.describe()}\n"
                f"       reached {self.final.describe()}")


def full_configs(u: Universe) -> Iterator[PartialConfig]:
    """All configurations covering every universe variable."""
    det_names = tuple(sorted(u.det))
    rand_names = tuple(sorted(u.rand))
    for sigma in u.det_assignments(det_names):
        for mu in u.mem_dists(rand_names):
            yield PartialConfig(dict(sigma), mu)


def holds_semantically(t: Triple, u: Universe,
                       fuel: Optional[int] = None) -> TripleResult:
    """Decide triple validity over all u-expressible full configurations."""
    lacking = u.missing(command_vars(t.cmd))
    lacking += u.missing(fv_assert(t.pre) | fv_assert(t.post))
    if lacking:
        raise UniverseTooSmall(
            "universe lacks candidates for " + ", ".join(map(repr, lacking)))
    for m in full_configs(u):
        if not satisfies(m, t.pre, u):
            continue
        out = exec_cmd(t.cmd, Config(dict(m.sigma), m.mu), fuel)
        final = PartialConfig(out.sigma, out.mu)
        if not satisfies(final, t.post, u):
            return TripleResult(False, m, final)
    return TripleResult(True)


# ---------------------------------------------------------------------------
# Structural entailment
# ---------------------------------------------------------------------------
#
# Entailment obligations default to enumeration over the application's
# universe, which explodes once an assertion mentions a variable with a
# large candidate pool. The helpers below discharge the common shapes
# first: they are sound in every configuration (or, for the enumerative
# two, relative to the same universe) and never complete.

def _and_leaves(a: Assertion) -> list[Assertion]:
    if isinstance(a, And):
        return _and_leaves(a.left) + _and_leaves(a.right)
    return [a]


def _conj_atoms(e: Expr) -> list[Expr]:
    if isinstance(e, Op) and e.sym == "and":
        return _conj_atoms(e.args[0]) + _conj_atoms(e.args[1])
    return [e]


def _conj_expr(atoms: list[Expr]) -> Expr:
    out = atoms[0]
    for a in atoms[1:]:
        out = Op("and", (out, a))
    return out


def _closed_true(e: Expr) -> bool:
    if free_vars(e):
        return False
    try:
        return truthy(eval_expr({}, {}, e))
    except EvalError:
        return False


def _coverage(a: Assertion) -> frozenset[VarId]:
    """Variables every configuration satisfying `a` must have in scope."""
    if isinstance(a, Certain):
        return free_vars(a.expr)
    if isinstance(a, Uniform):
        return free_vars(a.ed) | free_vars(a.er)
    if isinstance(a, (And, Star)):
        return _coverage(a.left) | _coverage(a.right)
    if isinstance(a, Or):
        return _coverage(a.left) & _coverage(a.right)
    return frozenset()


def _total_expr(e: Expr) -> bool:
    """Evaluation cannot raise: variables, constants, tuples of such."""
    if isinstance(e, (Var, Const)):
        return True
    if isinstance(e, Op) and e.sym == "tuple":
        return all(_total_expr(x) for x in e.args)
    return False


def _derivable(lhs: Assertion, rhs: Assertion) -> bool:
    """Universe-free entailment check. Conjunction and disjunction
    skeletons are walked; other leaves must match syntactically, except
    certainty leaves, whose `and`-chains may be recombined atom by atom,
    with closed atoms evaluated outright and self-equalities (the D[e]
    sugar) accepted once the left side forces e's variables into scope."""
    if lhs == rhs or isinstance(rhs, Top) or isinstance(lhs, Bottom):
        return True
    if isinstance(lhs, Or):
        return _derivable(lhs.left, rhs) and _derivable(lhs.right, rhs)
    leaves = _and_leaves(lhs)
    if any(isinstance(leaf, Bottom) for leaf in leaves):
        return True
    if isinstance(rhs, And):
        return all(_derivable(lhs, leaf) for leaf in _and_leaves(rhs))
    if rhs in leaves:
        return True
    if isinstance(rhs, Or):
        return _derivable(lhs, rhs.left) or _derivable(lhs, rhs.right)
    if isinstance(rhs, Certain):
        have = {a for leaf in leaves if isinstance(leaf, Certain)
                for a in _conj_atoms(leaf.expr)}
        cov = _coverage(lhs)
        return all(
            a in have or _closed_true(a)
            or (isinstance(a, Op) and a.sym == "eq" and a.args[0] == a.args[1]
                and _total_expr(a.args[0]) and free_vars(a.args[0]) <= cov)
            for a in _conj_atoms(rhs.expr))
    return False


def _certain_unsat(atoms: list[Expr], u: Universe) -> bool:
    """No assignment of u-candidates to the atoms' variables makes all
    of them true, so their joint certainty is unsatisfiable over u. A
    cell where evaluation raises counts as undecided, blocking the
    refutation unless another atom is cleanly false there."""
    fvs = frozenset(v for a in atoms for v in free_vars(a))
    if u.missing(fvs):
        return False
    det_names = sorted(v.name for v in fvs if v.kind is Kind.DET)
    rand_names = sorted(v.name for v in fvs if v.kind is Kind.RAND)
    pools = [u.det[n] for n in det_names] + [u.rand[n] for n in rand_names]
    spent = 0
    for cell in itertools.product(*pools):
        spent += 1
        if spent > u.budget:
            return False
        sigma = dict(zip(det_names, cell))
        mem = dict(zip(rand_names, cell[len(det_names):]))
        refuted = False
        for a in atoms:
            try:
                ok = truthy(eval_expr(sigma, mem, a))
            except EvalError:
                continue
            if not ok:
                refuted = True
                break
        if not refuted:
            return False
    return bool(atoms)


def _shrink_universe(u: Universe, fvs: frozenset[VarId]) -> Optional[Universe]:
    if u.missing(fvs):
        return None
    det = {v.name: u.det[v.name] for v in fvs if v.kind is Kind.DET}
    rand = {v.name: u.rand[v.name] for v in fvs if v.kind is Kind.RAND}
    return Universe(det, rand, u.denominator, u.budget)


# ---------------------------------------------------------------------------
# Rule applications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RuleApp:
    rule: str
    conclusion: Triple
    premises: tuple[Triple, ...] = ()
    universe: Optional[Universe] = None  # for entailment/SP obligations
    frame_vars: tuple[VarId, ...] = ()   # Frame's existential T, made explicit
    # optional lemma citations for Weak's two entailment obligations; a
    # citation names a template from the lemma suite, which is then run
    # in place of enumerating the (possibly huge) obligation itself
    cite_pre: Optional[str] = None
    cite_post: Optional[str] = None


_TEMPLATE_CACHE: dict[str, Optional[str]] = {}


def _run_citation(name: str) -> Optional[str]:
    """Run the named lemma template once per process; returns an error
    message or None when all its instances check out."""
    if name not in _TEMPLATE_CACHE:
        from .props import proposition_suite
        found = None
        for check in proposition_suite():
            if check.name == name:
                found = check
                break
        if found is None:
            _TEMPLATE_CACHE[name] = f"unknown lemma template {name!r}"
        else:
            r = found.run()
            _TEMPLATE_CACHE[name] = None if r.ok else f"template {name} fails"
    return _TEMPLATE_CACHE[name]


@dataclass
class Diag:
    name: str
    ok: bool
    detail: str = ""
    universe_relative: bool = False


@dataclass
class RuleCheckResult:
    rule: str
    diags: list[Diag] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(d.ok for d in self.diags)

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        lines = [f"rule {self.rule}: {'ok' if self.ok else 'REJECTED'}"]
        for d in self.diags:
            mark = "pass" if d.ok else "FAIL"
            extra = " (universe-relative)" if d.universe_relative else ""
            lines.append(f"  [{mark}] {d.name}{extra}"
                         + (f": {d.detail}" if d.detail else ""))
        return "\n".join(lines)


def _as_dvar(a: Assertion) -> Optional[Expr]:
    """Match the D[e] sugar: C[e = e]."""
    if isinstance(a, Certain) and isinstance(a.expr, Op) and a.expr.sym == "eq":
        left, right = a.expr.args
        if left == right:
            return left
    return None


def _split_star_dvar(a: Assertion, b: Expr) -> Optional[Assertion]:
    """Match `phi * D[b]` for a given b; returns phi."""
    if isinstance(a, Star):
        e = _as_dvar(a.right)
        if e is not None and e == b:
            return a.left
    return None


def check_rule_app(app: RuleApp) -> RuleCheckResult:
    res = RuleCheckResult(app.rule)
    d = res.diags.append
    c = app.conclusion

    def schema(ok: bool, detail: str = "") -> bool:
        d(Diag("schema", ok, detail))
        return ok

    def side(name: str, ok: bool, detail: str = "") -> bool:
        d(Diag(f"side: {name}", ok, detail))
        return ok

    def need_premises(n: int) -> bool:
        if len(app.premises) != n:
            d(Diag("schema", False,
                   f"expected {n} premise triple(s), got {len(app.premises)}"))
            return False
        return True

    def discharge(name: str, lhs: Assertion, rhs: Assertion,
                  cite: Optional[str] = None) -> None:
        if cite is not None:
            err = _run_citation(cite)
            d(Diag(name, err is None,
                   err or f"cited {cite}; template instances verified",
                   universe_relative=True))
            return
        if _derivable(lhs, rhs):
            d(Diag(name, True, "follows structurally"))
            return
        if app.universe is None:
            d(Diag(name, False, "no universe supplied to discharge entailment"))
            return
        base_atoms = [a for leaf in _and_leaves(lhs) if isinstance(leaf, Certain)
                      for a in _conj_atoms(leaf.expr)]
        try:
            if base_atoms and _certain_unsat(base_atoms, app.universe):
                d(Diag(name, True, "certainty facts on the left conflict",
                       universe_relative=True))
                return
            if not isinstance(lhs, Or):
                residue = [leaf for leaf in _and_leaves(rhs)
                           if not _derivable(lhs, leaf)]
                if residue and all(isinstance(r, Certain) for r in residue):
                    goal = Certain(_conj_expr(
                        [a for r in residue for a in _conj_atoms(r.expr)]))
                    keep = [a for a in base_atoms
                            if free_vars(a) <= free_vars(goal.expr)]
                    small = _shrink_universe(app.universe, free_vars(goal.expr))
                    if keep and small is not None:
                        got = entails(Certain(_conj_expr(keep)), goal, small)
                        if got.holds:
                            d(Diag(name, True,
                                   "certainty residue discharged by enumeration",
                                   universe_relative=True))
                            return
        except EnumerationBudgetExceeded:
            pass
        try:
            r = entails(lhs, rhs, app.universe)
        except UniverseTooSmall as e:
            d(Diag(name, False, str(e)))
            return
        except EnumerationBudgetExceeded as e:
            d(Diag(name, False, f"enumeration budget exhausted: {e}"))
            return
        detail = "" if r.holds else f"counterexample: {r.counterexample.describe()}"
        d(Diag(name, r.holds, detail, universe_relative=True))

    def sp_check(name: str, psi: Assertion) -> None:
        if app.universe is None:
            d(Diag(name, False, "no universe supplied for the supported check"))
            return
        ok = is_supported(psi, app.universe)
        d(Diag(name, ok, "" if ok else "assertion is not supported",
               universe_relative=True))

    if app.rule not in KNOWN_RULES:
        d(Diag("schema", False, f"unknown rule {app.rule!r}"))
        return res

    if app.rule == "Skip":
        need_premises(0)
        schema(isinstance(c.cmd, Skip), "command must be skip")
        schema(c.pre == c.post, "pre and post must coincide")

    elif app.rule == "True":
        need_premises(0)
        schema(isinstance(c.pre, Top) and isinstance(c.post, Top),
               "pre and post must both be top")

    elif app.rule == "DAssign":
        need_premises(0)
        if schema(isinstance(c.cmd, DAssign), "command must be a det assignment"):
            want = subst_assert(c.post, c.cmd.var, c.cmd.expr)
            schema(c.pre == want, "pre must be post with the assignment substituted")

    elif app.rule == "RAssign":
        need_premises(0)
        if schema(isinstance(c.cmd, RAssign), "command must be a random assignment"):
            side("post in AP", is_atomic(c.post),
                 "postcondition must be atomic (a bare certainty or uniformity)")
            want = subst_assert(c.post, c.cmd.var, c.cmd.expr)
            schema(c.pre == want, "pre must be post with the assignment substituted")

    elif app.rule == "RSample":
        need_premises(0)
        if not schema(isinstance(c.cmd, Sample), "command must be a sampling"):
            return res
        x = c.cmd.var
        ok_shape = (isinstance(c.pre, Certain) and isinstance(c.pre.expr, EvenPart)
                    and isinstance(c.post, Uniform))
        if not schema(ok_shape,
                      "pre must be C[evenpart(...)] and post a uniformity"):
            return res
        ep: EvenPart = c.pre.expr
        schema(ep.src == c.cmd.expr, "evenpart source must be the sampled set")
        schema(ep.dst == c.post.ed, "evenpart target must be the post's set")
        applied = subst_expr(ep.body, VarId(ep.param, Kind.DET), Var(x))
        schema(applied == c.post.er,
               "post expression must be the evenpart map applied to the target")
        touched = free_vars(ep.src) | free_vars(ep.dst) | frozenset(
            v for v in free_vars(ep.body) if v.name != ep.param)
        side("sampled variable fresh in f, S, S'", x not in touched,
             f"{x} occurs in the rule's expressions")

    elif app.rule == "Seqn":
        if not schema(isinstance(c.cmd, SeqC), "command must be a sequence"):
            return res
        if need_premises(2):
            p1, p2 = app.premises
            schema(p1.cmd == c.cmd.first and p2.cmd == c.cmd.second,
                   "premise commands must be the two halves")
            schema(p1.pre == c.pre, "first premise pre must match")
            schema(p2.post == c.post, "second premise post must match")
            schema(p1.post == p2.pre, "intermediate assertions must agree")

    elif app.rule == "Weak":
        if need_premises(1):
            inner = app.premises[0]
            schema(inner.cmd == c.cmd, "premise command must match")
            discharge("entailment: pre", c.pre, inner.pre, app.cite_pre)
            discharge("entailment: post", inner.post, c.post, app.cite_post)

    elif app.rule == "Const":
        if need_premises(1):
            inner = app.premises[0]
            schema(inner.cmd == c.cmd, "premise command must match")
            shape = (isinstance(c.pre, And) and isinstance(c.post, And)
                     and c.pre.left == inner.pre and c.post.left == inner.post
                     and c.pre.right == c.post.right)
            if schema(shape, "conclusion must conjoin the same eta on both sides"):
                eta = c.pre.right
                clash = fv_assert(eta) & modified_vars(c.cmd)
                side("FV(eta) disjoint from MV(c)", not clash,
                     f"modified: {sorted(v.name for v in clash)}")

    elif app.rule == "DCond":
        if not schema(isinstance(c.cmd, IfDet),
                      "command must be a deterministic conditional"):
            return res
        if need_premises(2):
            b = c.cmd.guard
            want1 = Triple(And(c.pre, Certain(guard_true(b))), c.cmd.then, c.post)
            want2 = Triple(And(c.pre, Certain(guard_false(b))), c.cmd.els, c.post)
            schema(app.premises[0] == want1, "then-branch premise shape")
            schema(app.premises[1] == want2, "else-branch premise shape")

    elif app.rule == "RDCond":
        if not schema(isinstance(c.cmd, IfRand),
                      "command must be a random conditional"):
            return res
        if need_premises(2):
            b = c.cmd.guard
            want1 = Triple(And(c.pre, Certain(guard_true(b))), c.cmd.then, c.post)
            want2 = Triple(And(c.pre, Certain(guard_false(b))), c.cmd.els, c.post)
            schema(app.premises[0] == want1, "then-branch premise shape")
            schema(app.premises[1] == want2, "else-branch premise shape")
            discharge("entailment: guard is certain one way",
                      c.pre, Or(Certain(guard_true(b)), Certain(guard_false(b))))

    elif app.rule == "RCond-certain":
        if not schema(isinstance(c.cmd, IfRand),
                      "command must be a random conditional"):
            return res
        shape = isinstance(c.pre, Certain) and isinstance(c.post, Certain)
        if not schema(shape, "pre and post must be certainty assertions"):
            return res
        if need_premises(2):
            b = c.cmd.guard
            want1 = Triple(Certain(Op("and", (c.pre.expr, guard_true(b)))),
                           c.cmd.then, c.post)
            want2 = Triple(Certain(Op("and", (c.pre.expr, guard_false(b)))),
                           c.cmd.els, c.post)
            schema(app.premises[0] == want1, "then-branch premise shape")
            schema(app.premises[1] == want2, "else-branch premise shape")

    elif app.rule == "DLoop":
        if not schema(isinstance(c.cmd, WhileDet),
                      "command must be a deterministic loop"):
            return res
        if need_premises(1):
            b = c.cmd.guard
            want = Triple(And(c.pre, Certain(guard_true(b))), c.cmd.body, c.pre)
            schema(app.premises[0] == want, "invariant premise shape")
            schema(c.post == And(c.pre, Certain(guard_false(b))),
                   "post must be the invariant plus guard-false")

    elif app.rule == "RLoop":
        if not schema(isinstance(c.cmd, WhileRand),
                      "command must be a random loop"):
            return res
        if need_premises(1):
            b = c.cmd.guard
            want = Triple(c.pre, IfRand(b, c.cmd.body, SKIP), c.pre)
            schema(app.premises[0] == want,
                   "premise must be the invariant over `if b then body`")
            schema(c.post == And(c.pre, Certain(guard_false(b))),
                   "post must be the invariant plus guard-false")

    elif app.rule == "RCond":
        if not schema(isinstance(c.cmd, IfRand),
                      "command must be a random conditional"):
            return res
        b = c.cmd.guard
        phi = _split_star_dvar(c.pre, b)
        psi = _split_star_dvar(c.post, b)
        if not schema(phi is not None and psi is not None,
                      "pre and post must have the form (phi * D[guard])"):
            return res
        if need_premises(2):
            want1 = Triple(Star(phi, Certain(guard_true(b))), c.cmd.then,
                           Star(psi, Certain(guard_true(b))))
            want2 = Triple(Star(phi, Certain(guard_false(b))), c.cmd.els,
                           Star(psi, Certain(guard_false(b))))
            schema(app.premises[0] == want1, "then-branch premise shape")
            schema(app.premises[1] == want2, "else-branch premise shape")
            sp_check("psi supported", psi)

    elif app.rule == "RCase":
        if need_premises(2):
            maybe = app.premises[0].pre
            b = None
            if isinstance(maybe, Star) and isinstance(maybe.right, Certain):
                e = maybe.right.expr
                if isinstance(e, Op) and e.sym == "not":
                    inner = e.args[0]
                    if isinstance(inner, Op) and inner.sym == "eq":
                        b = inner.args[0]
            phi = _split_star_dvar(c.pre, b) if b is not None else None
            psi = _split_star_dvar(c.post, b) if b is not None else None
            if not schema(phi is not None and psi is not None,
                          "conclusion must have the form {phi*D[b]} c {psi*D[b]}"):
                return res
            want1 = Triple(Star(phi, Certain(guard_true(b))), c.cmd,
                           Star(psi, Certain(guard_true(b))))
            want2 = Triple(Star(phi, Certain(guard_false(b))), c.cmd,
                           Star(psi, Certain(guard_false(b))))
            schema(app.premises[0] == want1, "guard-true premise shape")
            schema(app.premises[1] == want2, "guard-false premise shape")
            sp_check("psi supported", psi)

    elif app.rule == "Conj":
        if need_premises(2):
            p1, p2 = app.premises
            schema(p1.cmd == c.cmd and p2.cmd == c.cmd,
                   "premise commands must match")
            schema(c.pre == And(p1.pre, p2.pre), "pre must conjoin the premises")
            schema(c.post == And(p1.post, p2.post),
                   "post must conjoin the premises")

    elif app.rule == "Case":
        if need_premises(2):
            p1, p2 = app.premises
            schema(p1.cmd == c.cmd and p2.cmd == c.cmd,
                   "premise commands must match")
            schema(c.pre == Or(p1.pre, p2.pre), "pre must disjoin the premises")
            schema(c.post == Or(p1.post, p2.post),
                   "post must disjoin the premises")

    elif app.rule == "Unif-Idp":
        if need_premises(1):
            shape_pre = (isinstance(c.pre, And) and isinstance(c.pre.left, Star)
                         and isinstance(c.pre.left.left, Certain)
                         and isinstance(c.pre.left.left.expr, Op)
                         and c.pre.left.left.expr.sym == "member"
                         and isinstance(c.pre.right, Certain))
            shape_post = isinstance(c.post, Star) and isinstance(c.post.right, Uniform)
            if not schema(shape_pre and shape_post,
                          "conclusion must be {C[a in A]*Q and C[P]} c {D[a]*U_S[b]}"):
                return res
            a = c.pre.left.left.expr.args[0]
            schema(_as_dvar(c.post.left) == a,
                   "post's left star-conjunct must be D[a] for the same a")
            unif = c.post.right
            want = Triple(c.pre, c.cmd, unif)
            schema(app.premises[0] == want,
                   "premise must be the same pre and command with post U_S[b]")
            mv = modified_vars(c.cmd)
            clash = free_vars(a) & mv
            side("FV(a) disjoint from MV(c)", not clash,
                 f"modified: {sorted(v.name for v in clash)}")
            overlap = free_vars(unif.er) & free_vars(a)
            side("FV(b) disjoint from FV(a)", not overlap,
                 f"shared: {sorted(v.name for v in overlap)}")
            # With a compound b the premise constrains only b's image,
            # so b's own variable can stay correlated with a through the
            # command and the starred conclusion comes out false; see
            # the regression test with b = y mod 2 after sampling y from
            # an a-dependent set.
            side("uniform subject is a variable", isinstance(unif.er, Var),
                 "post uniformity must be over a bare variable")

    elif app.rule == "Frame":
        if need_premises(1):
            inner = app.premises[0]
            schema(inner.cmd == c.cmd, "premise command must match")
            shape = (isinstance(c.pre, Star) and isinstance(c.post, Star)
                     and c.pre.left == inner.pre and c.post.left == inner.post
                     and c.pre.right == c.post.right)
            if schema(shape, "conclusion must star the same eta on both sides"):
                eta = c.pre.right
                mv = modified_vars(c.cmd)
                clash = fv_assert(eta) & mv
                side("FV(eta) disjoint from MV(c)", not clash,
                     f"modified: {sorted(v.name for v in clash)}")
                rv, wv = read_vars(c.cmd), write_only_vars(c.cmd)
                allowed = set(app.frame_vars) | rv | wv
                extra = fv_assert(inner.post) - allowed
                side("FV(psi) within T, RV(c), WV(c)", not extra,
                     f"outside: {sorted(v.name for v in extra)}")
                owned = sorted(set(app.frame_vars) | rv, key=lambda v: v.name)
                if owned:
                    discharge("entailment: pre owns T and RV(c)",
                              inner.pre, dvar(*(Var(v) for v in owned)))
                else:
                    d(Diag("entailment: pre owns T and RV(c)", True,
                           "vacuous: no variables to own"))

    return res


# ---------------------------------------------------------------------------
# Proof scripts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProofNode:
    app: RuleApp
    children: tuple["ProofNode", ...] = ()


ProofScript = ProofNode


@dataclass
class Obligation:
    path: str
    rule: str
    name: str
    ok: bool
    detail: str = ""
    universe_relative: bool = False


@dataclass
class ProofReport:
    obligations: list[Obligation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(o.ok for o in self.obligations)

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        lines = []
        for o in self.obligations:
            mark = "pass" if o.ok else "FAIL"
            extra = " (universe-relative)" if o.universe_relative else ""
            lines.append(f"[{mark}] {o.path} {o.rule} :: {o.name}{extra}"
                         + (f": {o.detail}" if o.detail else ""))
        lines.append(f"proof {'accepted' if self.ok else 'REJECTED'}"
                     f" ({len(self.obligations)} obligations)")
        return "\n".join(lines)


def check_proof(script: ProofNode, u: Optional[Universe] = None) -> ProofReport:
    """Walk the proof tree, checking every rule application and that each
    child proves the premise it is attached to. `u` is the default
    universe for nodes that do not carry their own."""
    report = ProofReport()

    def walk(node: ProofNode, path: str) -> None:
        app = node.app
        if app.universe is None and u is not None:
            app = RuleApp(app.rule, app.conclusion, app.premises, u,
                          app.frame_vars, app.cite_pre, app.cite_post)
        rc = check_rule_app(app)
        for diag in rc.diags:
            report.obligations.append(Obligation(
                path, app.rule, diag.name, diag.ok, diag.detail,
                diag.universe_relative))
        if len(node.children) != len(app.premises):
            report.obligations.append(Obligation(
                path, app.rule, "children", False,
                f"{len(app.premises)} premises but {len(node.children)} subproofs"))
        else:
            for i, (child, premise) in enumerate(zip(node.children, app.premises)):
                if child.app.conclusion != premise:
                    report.obligations.append(Obligation(
                        path, app.rule, f"premise {i} linkage", False,
                        "child conclusion does not match the premise"))
                walk(child, f"{path}.{i}")

    walk(script, "root")
    return report


# ---------------------------------------------------------------------------
# Soundness fuzzing
# ---------------------------------------------------------------------------

@dataclass
class FuzzViolation:
    instance: RuleApp
    result: TripleResult


@dataclass
class FuzzReport:
    rule: str
    seed: int
    checked: int = 0
    attempts: int = 0
    violations: list[FuzzViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def describe(self) -> str:
        return (f"{self.rule}: {self.checked} premise-valid instances "
                f"(seed {self.seed}, {self.attempts} candidates tried), "
                f"{len(self.violations)} conclusion violations")


def _values_of(u: Universe) -> tuple[Value, ...]:
    vals: list[Value] = []
    for pool in list(u.det.values()) + list(u.rand.values()):
        for v in pool:
            if v not in vals:
                vals.append(v)
    return tuple(vals)


class _Gen:
    """Random syntax generator over a universe's variables."""

    def __init__(self, u: Universe, rng: random.Random):
        self.u = u
        self.rng = rng
        self.det = tuple(VarId(n, Kind.DET) for n in sorted(u.det))
        self.rand = tuple(VarId(n, Kind.RAND) for n in sorted(u.rand))
        self.values = _values_of(u)
        self.ints = tuple(v for v in self.values
                          if isinstance(v, int))

    def const(self) -> Expr:
        return Const(self.rng.choice(self.ints))

    def int_expr(self, vars_: tuple[VarId, ...], depth: int = 2) -> Expr:
        r = self.rng
        if depth <= 0 or r.random() < 0.55:
            if vars_ and r.random() < 0.7:
                return Var(r.choice(vars_))
            return self.const()
        sym = r.choice(("add", "sub", "mul", "mod"))
        if sym == "mod":
            return Op("mod", (self.int_expr(vars_, depth - 1),
                              Const(r.choice((2, 3)))))
        return Op(sym, (self.int_expr(vars_, depth - 1),
                        self.int_expr(vars_, depth - 1)))

    def bool_expr(self, vars_: tuple[VarId, ...], depth: int = 2) -> Expr:
        r = self.rng
        kind = r.random()
        if depth <= 0 or kind < 0.6:
            sym = r.choice(("eq", "lt", "le"))
            return Op(sym, (self.int_expr(vars_, 1), self.int_expr(vars_, 1)))
        if kind < 0.75:
            return Op("not", (self.bool_expr(vars_, depth - 1),))
        sym = r.choice(("and", "or"))
        return Op(sym, (self.bool_expr(vars_, depth - 1),
                        self.bool_expr(vars_, depth - 1)))

    def value_set(self, lo: int = 1, hi: int = 4) -> SetV:
        n = self.rng.randint(lo, min(hi, len(self.ints)))
        return SetV(self.rng.sample(self.ints, n))

    def rand_command(self, depth: int = 2) -> Command:
        """A terminating command with no deterministic assignments."""
        r = self.rng
        roll = r.random()
        if depth <= 0 or roll < 0.35:
            x = r.choice(self.rand)
            if r.random() < 0.5:
                return Sample(x, Const(self.value_set()))
            return RAssign(x, self.int_expr(self.rand, 1))
        if roll < 0.55:
            return SeqC(self.rand_command(depth - 1), self.rand_command(depth - 1))
        if roll < 0.8:
            return IfRand(self.bool_expr(self.rand, 1),
                          self.rand_command(depth - 1),
                          self.rand_command(depth - 1))
        # a surely-terminating random loop: drive a counter upward
        x = r.choice(self.rand)
        bound = Const(max(self.ints))
        body = SeqC(RAssign(x, Op("add", (Var(x), Const(1)))),
                    self.rand_command(depth - 1))
        return WhileRand(Op("lt", (Var(x), bound)), body)

    def full_command(self, depth: int = 2) -> Command:
        r = self.rng
        if not self.det or r.random() < 0.5:
            return self.rand_command(depth)
        roll = r.random()
        x = r.choice(self.det)
        if depth <= 0 or roll < 0.4:
            return DAssign(x, self.int_expr(self.det, 1))
        if roll < 0.6:
            return SeqC(self.full_command(depth - 1), self.full_command(depth - 1))
        if roll < 0.8:
            return IfDet(self.bool_expr(self.det, 1),
                         self.full_command(depth - 1),
                         self.full_command(depth - 1))
        body = SeqC(DAssign(x, Op("add", (Var(x), Const(1)))),
                    self.full_command(depth - 1))
        return WhileDet(Op("lt", (Var(x), Const(max(self.ints)))), body)

    def atomic_assertion(self, vars_: tuple[VarId, ...]) -> Assertion:
        r = self.rng
        if r.random() < 0.5 and vars_:
            return Uniform(Const(self.value_set(2, 3)), Var(r.choice(vars_)))
        return Certain(self.bool_expr(vars_, 1))

    def assertion(self, depth: int = 1) -> Assertion:
        r = self.rng
        roll = r.random()
        pool = self.rand + self.det
        if depth <= 0 or roll < 0.45:
            return self.atomic_assertion(pool)
        if roll < 0.55:
            return TOP
        if roll < 0.7 and self.rand:
            return dvar(Var(r.choice(self.rand)))
        if roll < 0.85:
            return And(self.assertion(depth - 1), self.assertion(depth - 1))
        if len(self.rand) >= 2:
            a, b = self.rng.sample(list(self.rand), 2)
            return Star(self.atomic_assertion((a,)), self.atomic_assertion((b,)))
        return Or(self.assertion(depth - 1), self.assertion(depth - 1))


def _candidate(rule: str, g: _Gen, u: Universe,
               sabotage: bool = False) -> Optional[RuleApp]:
    """Build one schema-correct candidate instance of the rule, or None
    when the random draw is unusable. Premise validity is not yet
    checked here."""
    r = g.rng

    if rule == "Skip":
        phi = g.assertion()
        return RuleApp(rule, Triple(phi, SKIP, phi), universe=u)

    if rule == "True":
        return RuleApp(rule, Triple(TOP, g.full_command(), TOP), universe=u)

    if rule == "DAssign":
        if not g.det:
            return None
        x = r.choice(g.det)
        e = g.int_expr(g.det, 1)
        post = g.assertion()
        cmd = DAssign(x, e)
        return RuleApp(rule, Triple(subst_assert(post, x, e), cmd, post),
                       universe=u)

    if rule == "RAssign":
        x = r.choice(g.rand)
        e = g.int_expr(g.rand, 1)
        post = g.atomic_assertion(g.rand)
        cmd = RAssign(x, e)
        return RuleApp(rule, Triple(subst_assert(post, x, e), cmd, post),
                       universe=u)

    if rule == "RSample":
        x = r.choice(g.rand)
        k = r.choice((2, 3))
        body = Op("mod", (Var(VarId("t", Kind.DET)), Const(k)))
        if r.random() < 0.5:
            src: Expr = Const(g.value_set(2, 4))
        else:
            m = r.choice([v for v in g.rand if v != x] or list(g.rand))
            if m == x:
                return None
            src = Op("range", (Const(1), Var(m)))
        dst = Const(SetV(range(k)))
        pre = Certain(EvenPart("t", body, src, dst))
        post = Uniform(dst, Op("mod", (Var(x), Const(k))))
        return RuleApp(rule, Triple(pre, Sample(x, src), post), universe=u)

    if rule == "Seqn":
        c1, c2 = g.full_command(1), g.full_command(1)
        phi, mid, post = g.assertion(), g.assertion(), g.assertion()
        return RuleApp(rule, Triple(phi, SeqC(c1, c2), post),
                       (Triple(phi, c1, mid), Triple(mid, c2, post)),
                       universe=u)

    if rule == "Weak":
        cmd = g.full_command(1)
        phi, psi = g.assertion(), g.assertion()
        extra1, extra2 = g.assertion(0), g.assertion(0)
        pre = And(phi, extra1)
        post = Or(psi, extra2)
        return RuleApp(rule, Triple(pre, cmd, post), (Triple(phi, cmd, psi),),
                       universe=u)

    if rule in ("Const", "Frame"):
        cmd = g.full_command(1)
        mv = {v.name for v in modified_vars(cmd)}
        if sabotage:
            pool = tuple(v for v in g.rand + g.det if v.name in mv)
        else:
            pool = tuple(v for v in g.rand + g.det if v.name not in mv)
        if not pool:
            return None
        if rule == "Const":
            eta = g.atomic_assertion(pool)
            phi, psi = g.assertion(), g.assertion()
            return RuleApp(rule, Triple(And(phi, eta), cmd, And(psi, eta)),
                           (Triple(phi, cmd, psi),), universe=u)
        eta_pool = tuple(v for v in pool if v.kind is Kind.RAND)
        if not eta_pool:
            return None
        eta = g.atomic_assertion((r.choice(eta_pool),))
        rv, wv = read_vars(cmd), write_only_vars(cmd)
        psi_vars = tuple(sorted(rv | wv, key=lambda v: v.name))
        psi = g.atomic_assertion(psi_vars) if psi_vars else TOP
        extra_t = tuple(sorted(fv_assert(psi) - rv - wv, key=lambda v: v.name))
        owned = sorted(set(extra_t) | rv, key=lambda v: v.name)
        phi0 = g.assertion()
        phi = And(phi0, dvar(*(Var(v) for v in owned))) if owned else phi0
        return RuleApp(rule, Triple(Star(phi, eta), cmd, Star(psi, eta)),
                       (Triple(phi, cmd, psi),), universe=u, frame_vars=extra_t)

    if rule == "DCond":
        if not g.det:
            return None
        b = g.bool_expr(g.det, 1)
        c1, c2 = g.full_command(1), g.full_command(1)
        phi, psi = g.assertion(), g.assertion()
        cmd = IfDet(b, c1, c2)
        return RuleApp(rule, Triple(phi, cmd, psi),
                       (Triple(And(phi, Certain(guard_true(b))), c1, psi),
                        Triple(And(phi, Certain(guard_false(b))), c2, psi)),
                       universe=u)

    if rule == "RDCond":
        b = g.bool_expr(g.rand, 1)
        c1, c2 = g.rand_command(1), g.rand_command(1)
        phi0, psi = g.assertion(), g.assertion()
        phi = And(phi0, Or(Certain(guard_true(b)), Certain(guard_false(b))))
        cmd = IfRand(b, c1, c2)
        return RuleApp(rule, Triple(phi, cmd, psi),
                       (Triple(And(phi, Certain(guard_true(b))), c1, psi),
                        Triple(And(phi, Certain(guard_false(b))), c2, psi)),
                       universe=u)

    if rule == "RCond-certain":
        b = g.bool_expr(g.rand, 1)
        c1, c2 = g.rand_command(1), g.rand_command(1)
        pe, qe = g.bool_expr(g.rand, 1), g.bool_expr(g.rand, 1)
        cmd = IfRand(b, c1, c2)
        return RuleApp(
            rule, Triple(Certain(pe), cmd, Certain(qe)),
            (Triple(Certain(Op("and", (pe, guard_true(b)))), c1, Certain(qe)),
             Triple(Certain(Op("and", (pe, guard_false(b)))), c2, Certain(qe))),
            universe=u)

    if rule == "DLoop":
        if not g.det:
            return None
        x = r.choice(g.det)
        bound = Const(max(g.ints))
        b = Op("lt", (Var(x), bound))
        body = SeqC(DAssign(x, Op("add", (Var(x), Const(1)))), g.full_command(0))
        phi = g.assertion()
        cmd = WhileDet(b, body)
        return RuleApp(rule,
                       Triple(phi, cmd, And(phi, Certain(guard_false(b)))),
                       (Triple(And(phi, Certain(guard_true(b))), body, phi),),
                       universe=u)

    if rule == "RLoop":
        x = r.choice(g.rand)
        bound = Const(max(g.ints))
        b = Op("lt", (Var(x), bound))
        body = SeqC(RAssign(x, Op("add", (Var(x), Const(1)))), g.rand_command(0))
        phi = g.assertion()
        cmd = WhileRand(b, body)
        return RuleApp(rule,
                       Triple(phi, cmd, And(phi, Certain(guard_false(b)))),
                       (Triple(phi, IfRand(b, body, SKIP), phi),),
                       universe=u)

    if rule in ("RCond", "RCase"):
        if len(g.rand) < 2:
            return None
        bvar, other = r.sample(list(g.rand), 2)
        b = Var(bvar)
        phi = g.atomic_assertion((other,))
        psi = g.atomic_assertion((other,))
        if rule == "RCond":
            c1 = g.rand_command(0)
            c2 = g.rand_command(0)
            cmd: Command = IfRand(b, c1, c2)
        else:
            c1 = c2 = g.rand_command(0)
            cmd = c1
        pre = Star(phi, dvar(b))
        post = Star(psi, dvar(b))
        return RuleApp(
            rule, Triple(pre, cmd, post),
            (Triple(Star(phi, Certain(guard_true(b))), c1,
                    Star(psi, Certain(guard_true(b)))),
             Triple(Star(phi, Certain(guard_false(b))), c2,
                    Star(psi, Certain(guard_false(b))))),
            universe=u)

    if rule == "Conj" or rule == "Case":
        cmd = g.full_command(1)
        p1, p2 = g.assertion(), g.assertion()
        q1, q2 = g.assertion(), g.assertion()
        pair = And if rule == "Conj" else Or
        return RuleApp(rule, Triple(pair(p1, p2), cmd, pair(q1, q2)),
                       (Triple(p1, cmd, q1), Triple(p2, cmd, q2)),
                       universe=u)

    if rule == "Unif-Idp":
        if len(g.rand) < 2:
            return None
        avar, bvar = r.sample(list(g.rand), 2)
        a = Var(avar)
        aset = Const(SetV(g.ints))
        q = TOP if r.random() < 0.5 else dvar(a)
        p = g.bool_expr((), 1) if r.random() < 0.3 else Op("eq", (Const(0), Const(0)))
        target = g.value_set(2, 3)
        cmd = Sample(bvar, Const(target))
        unif = Uniform(Const(target), Var(bvar))
        pre = And(Star(Certain(Op("member", (a, aset))), q), Certain(p))
        post = Star(dvar(a), unif)
        return RuleApp(rule, Triple(pre, cmd, post), (Triple(pre, cmd, unif),),
                       universe=u)

    raise ValueError(f"no generator for rule {rule!r}")


def _premises_valid(app: RuleApp, u: Universe, fuel: int) -> bool:
    rc = check_rule_app(app)
    if not rc.ok:
        return False
    for p in app.premises:
        if not holds_semantically(p, u, fuel):
            return False
    return True


def soundness_fuzz(rule: str, n_instances: int, u: Universe, seed: int,
                   fuel: int = 200, max_attempts: Optional[int] = None,
                   sabotage: bool = False) -> FuzzReport:
    """Generate premise-valid instances and check the conclusions.

    With sabotage=True (supported for Const and Frame), generate
    instances whose frame shares variables with MV(c) — the report then
    typically contains violations, demonstrating the side condition is
    load-bearing; schema checking is skipped for these deliberately
    ill-formed instances.
    """
    if rule not in KNOWN_RULES:
        raise ValueError(f"unknown rule {rule!r}")
    if sabotage and rule not in ("Const", "Frame"):
        raise ValueError("sabotage mode is defined for Const and Frame only")
    rng = random.Random(seed)
    g = _Gen(u, rng)
    report = FuzzReport(rule, seed)
    cap = max_attempts if max_attempts is not None else 400 * n_instances
    while report.checked < n_instances:
        if report.attempts >= cap:
            raise GenerationBudgetExceeded(
                f"{rule}: only {report.checked} premise-valid instances "
                f"after {report.attempts} attempts")
        report.attempts += 1
        app = _candidate(rule, g, u, sabotage)
        if app is None:
            continue
        # Draws can be type-junk (eval errors) or loops without sure
        # termination (fuel); both are outside the logic's domain and
        # are rejected rather than counted.
        try:
            check_command(app.conclusion.cmd)
            if sabotage:
                ok = all(holds_semantically(p, u, fuel) for p in app.premises)
            else:
                ok = _premises_valid(app, u, fuel)
            if not ok:
                continue
            outcome = holds_semantically(app.conclusion, u, fuel)
        except (EvalError, FuelExhausted, ZeroMassCondition):
            continue
        except IllFormed:
            continue
        report.checked += 1
        if not outcome.holds:
            report.violations.append(FuzzViolation(app, outcome))
    return report
