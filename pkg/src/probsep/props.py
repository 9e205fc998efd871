"""Entailment lemma suite: the nine assertion-implication templates.

Each lemma is a reusable entailment shape together with concrete
instances over small universes. Running a lemma checks every instance
by exhaustive enumeration (`entails`), after first discharging the
instance's side requirements: entailment side conditions are checked
semantically, and meta-level conditions that the expression language
cannot state (bijectivity of a concrete map, pairwise injectivity,
variable freshness) are checked by direct evaluation here.

The tenth entry is not an entailment but a distinction: a disjunction
of certainties is strictly stronger than certainty of the disjunction,
witnessed by a concrete counterexample configuration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .assertions import (
    And,
    Assertion,
    Certain,
    Or,
    PartialConfig,
    Star,
    TOP,
    Uniform,
    Universe,
    dvar,
    entails,
    fv_assert,
)
from .lang import Const, Expr, Kind, Op, Var, VarId, eval_expr, free_vars
from .values import SetV, Tup, Value, value_key

X = Var(VarId("x", Kind.RAND))
Y = Var(VarId("y", Kind.RAND))
D = Var(VarId("d", Kind.DET))

U1 = Universe(det={}, rand={"x": (0, 1, 2)}, denominator=12)
U2 = Universe(det={}, rand={"x": (0, 1), "y": (0, 1)}, denominator=12)
U2D = Universe(det={"d": (0, 1)}, rand={"x": (0, 1), "y": (0, 1)},
               denominator=12)
UA = Universe(det={}, rand={"a": (1, 2)}, denominator=12)


def uni(vals: Iterable[Value], e: Expr) -> Uniform:
    return Uniform(Const(SetV(vals)), e)


def ceq(a: Expr, b: Expr) -> Certain:
    return Certain(Op("eq", (a, b)))


@dataclass
class LemmaInstance:
    label: str
    universe: Universe
    antecedent: Assertion
    consequent: Assertion
    # named entailment side conditions, discharged before the main check
    side: tuple[tuple[str, Assertion, Assertion], ...] = ()
    # meta-level conditions checked by direct evaluation (e.g. bijectivity)
    meta: tuple[tuple[str, Callable[[], bool]], ...] = ()
    expect_holds: bool = True


@dataclass
class LemmaResult:
    name: str
    ok: bool
    checked: int
    notes: list[str] = field(default_factory=list)
    counterexample: Optional[PartialConfig] = None
    elapsed: float = 0.0

    def describe(self) -> str:
        head = f"{self.name}: {'ok' if self.ok else 'FAIL'} " \
               f"({self.checked} instances, {self.elapsed:.1f}s)"
        return "\n".join([head] + [f"  {n}" for n in self.notes])


@dataclass
class LemmaCheck:
    name: str
    statement: str
    instances: tuple[LemmaInstance, ...]

    def run(self) -> LemmaResult:
        t0 = time.time()
        res = LemmaResult(self.name, True, 0)
        for inst in self.instances:
            for label, fn in inst.meta:
                if not fn():
                    res.ok = False
                    res.notes.append(f"{inst.label}: meta condition broken: {label}")
            for label, lhs, rhs in inst.side:
                r = entails(lhs, rhs, inst.universe)
                if not r.holds:
                    res.ok = False
                    res.notes.append(f"{inst.label}: side condition fails: {label}")
            r = entails(inst.antecedent, inst.consequent, inst.universe)
            res.checked += 1
            if r.holds != inst.expect_holds:
                res.ok = False
                want = "hold" if inst.expect_holds else "fail"
                res.notes.append(f"{inst.label}: expected entailment to {want}")
                if r.counterexample is not None:
                    res.notes.append(f"  at {r.counterexample.describe()}")
            elif not inst.expect_holds:
                res.counterexample = r.counterexample
                res.notes.append(
                    f"{inst.label}: refuted by {r.counterexample.describe()}")
        res.elapsed = time.time() - t0
        return res


def _eval_closed(e: Expr, rand_mem: dict[str, Value]) -> Value:
    return eval_expr({}, rand_mem, e)


def _bijective(f: Expr, var: str, src: tuple[Value, ...],
               dst: tuple[Value, ...]) -> Callable[[], bool]:
    def check() -> bool:
        image = [_eval_closed(f, {var: v}) for v in src]
        return (len(set(map(value_key, image))) == len(src)
                and sorted(map(value_key, image)) == sorted(map(value_key, dst)))
    return check


def _pairwise_injective(f: Expr, xs: tuple[Value, ...],
                        ys: tuple[Value, ...]) -> Callable[[], bool]:
    def check() -> bool:
        outs = [_eval_closed(f, {"x": a, "y": b}) for a in xs for b in ys]
        return len(set(map(value_key, outs))) == len(xs) * len(ys)
    return check


def _image_set(f: Expr, xs: tuple[Value, ...], ys: tuple[Value, ...]) -> SetV:
    return SetV(_eval_closed(f, {"x": a, "y": b}) for a in xs for b in ys)


def _fresh(x: Expr, e: Expr) -> Callable[[], bool]:
    return lambda: not (free_vars(x) & free_vars(e))


BITS = (0, 1)
TRIPLE = (0, 1, 2)


def _item1() -> LemmaCheck:
    """(phi * psi) and eta entails (phi and eta) * psi, provided phi
    already owns the random variables eta mentions."""
    def side_for(phi: Assertion, eta: Assertion,
                 u: Universe) -> tuple[tuple[str, Assertion, Assertion], ...]:
        rand_fv = sorted((v for v in fv_assert(eta) if v.kind is Kind.RAND),
                         key=lambda v: v.name)
        if not rand_fv:
            return ()
        need = dvar(*(Var(v) for v in rand_fv))
        return (("phi owns eta's random variables", phi, need),)

    insts = []
    phi, psi, eta = dvar(X), uni(BITS, Y), ceq(X, Const(0))
    insts.append(LemmaInstance(
        "certain-zero", U2,
        And(Star(phi, psi), eta), Star(And(phi, eta), psi),
        side=side_for(phi, eta, U2)))
    phi, psi, eta = uni(BITS, X), dvar(Y), Certain(Op("le", (X, Const(1))))
    insts.append(LemmaInstance(
        "bounded", U2,
        And(Star(phi, psi), eta), Star(And(phi, eta), psi),
        side=side_for(phi, eta, U2)))
    phi, psi, eta = TOP, uni(BITS, Y), ceq(Const(0), Const(0))
    insts.append(LemmaInstance(
        "no-random-vars", U2,
        And(Star(phi, psi), eta), Star(And(phi, eta), psi),
        side=side_for(phi, eta, U2)))
    phi, psi, eta = dvar(X), uni(BITS, Y), ceq(D, Const(0))
    insts.append(LemmaInstance(
        "det-eta", U2D,
        And(Star(phi, psi), eta), Star(And(phi, eta), psi),
        side=side_for(phi, eta, U2D)))
    return LemmaCheck(
        "star-and-shift",
        "(phi * psi) and eta  entails  (phi and eta) * psi,"
        " when phi implies ownership of eta's random variables",
        tuple(insts))


def _item2() -> LemmaCheck:
    pairs = [
        ("uniform-uniform", uni(BITS, X), uni(BITS, Y)),
        ("certain-uniform", ceq(X, Const(1)), uni(BITS, Y)),
        ("domain-certain", dvar(X), ceq(Y, Const(0))),
        ("top-right", uni(BITS, X), TOP),
    ]
    insts = tuple(
        LemmaInstance(label, U2, Star(p, q), And(p, q))
        for label, p, q in pairs)
    return LemmaCheck("star-weaken",
                      "phi * psi  entails  phi and psi", insts)


def _item3() -> LemmaCheck:
    shift = Op("add", (X, Const(1)))
    flip = Op("sub", (Const(2), X))
    negbit = Op("sub", (Const(1), X))
    insts = (
        LemmaInstance(
            "shift", U1, uni(TRIPLE, X), uni((1, 2, 3), shift),
            meta=(("f bijective onto target",
                   _bijective(shift, "x", TRIPLE, (1, 2, 3))),)),
        LemmaInstance(
            "reverse", U1, uni(TRIPLE, X), uni(TRIPLE, flip),
            meta=(("f bijective onto target",
                   _bijective(flip, "x", TRIPLE, TRIPLE)),)),
        LemmaInstance(
            "negate-bit", U2, uni(BITS, X), uni(BITS, negbit),
            meta=(("f bijective onto target",
                   _bijective(negbit, "x", BITS, BITS)),)),
    )
    return LemmaCheck(
        "uniform-bijection",
        "uniform(S, e) entails uniform(S', f(e)) for f a bijection S -> S'"
        " (bijectivity checked by evaluation)", insts)


def _conj_pairs() -> list[tuple[str, Expr, Expr]]:
    return [
        ("eq-and-neq", Op("eq", (X, Const(0))), Op("not", (Op("eq", (Y, Const(1))),))),
        ("order", Op("le", (X, Y)), Op("eq", (X, X))),
    ]


def _item4() -> LemmaCheck:
    insts = tuple(
        LemmaInstance(label, U2,
                      Certain(Op("and", (p, q))),
                      And(Certain(p), Certain(q)))
        for label, p, q in _conj_pairs())
    return LemmaCheck("certain-split",
                      "certain(p and q) entails certain(p) and certain(q)",
                      insts)


def _item5() -> LemmaCheck:
    insts = tuple(
        LemmaInstance(label, U2,
                      And(Certain(p), Certain(q)),
                      Certain(Op("and", (p, q))))
        for label, p, q in _conj_pairs())
    return LemmaCheck("certain-join",
                      "certain(p) and certain(q) entails certain(p and q)",
                      insts)


def _item6() -> LemmaCheck:
    insts = (
        LemmaInstance("variable", U1, uni(TRIPLE, X),
                      Certain(Op("member", (X, Const(SetV(TRIPLE)))))),
        LemmaInstance("expression", U1, uni(BITS, Op("mod", (X, Const(2)))),
                      Certain(Op("member", (Op("mod", (X, Const(2))),
                                            Const(SetV(BITS)))))),
        LemmaInstance("second-var", U2, uni(BITS, Y),
                      Certain(Op("member", (Y, Const(SetV(BITS)))))),
    )
    return LemmaCheck("uniform-membership",
                      "uniform(S, e) entails certain(e in S)", insts)


def _item7() -> LemmaCheck:
    wrapped = Op("mod", (Op("add", (X, Const(2))), Const(3)))
    insts = (
        LemmaInstance("var-to-var", U2,
                      And(uni(BITS, X), ceq(X, Y)), uni(BITS, Y)),
        LemmaInstance("expr-to-expr", U1,
                      And(uni(TRIPLE, X), ceq(X, wrapped)), uni(TRIPLE, wrapped)),
    )
    return LemmaCheck("uniform-transfer",
                      "uniform(S, e) and certain(e = e') entails uniform(S, e')",
                      insts)


def _item8() -> LemmaCheck:
    insts = (
        LemmaInstance(
            "constant", U2,
            And(ceq(X, Const(1)), Star(dvar(Const(1)), dvar(Y))),
            Star(dvar(X), dvar(Y)),
            meta=(("x not free in e'", _fresh(X, Y)),)),
        LemmaInstance(
            "det-source", U2D,
            And(ceq(X, D), Star(dvar(D), dvar(Y))),
            Star(dvar(X), dvar(Y)),
            meta=(("x not free in e'", _fresh(X, Y)),)),
        LemmaInstance(
            "rand-source", U2D,
            And(ceq(X, Y), Star(dvar(Y), dvar(D))),
            Star(dvar(X), dvar(D)),
            meta=(("x not free in e'", _fresh(X, D)),)),
    )
    return LemmaCheck(
        "independence-transfer",
        "certain(x = e) and (domain(e) * domain(e')) entails"
        " domain(x) * domain(e'), when x is not free in e'", insts)


def _item9() -> LemmaCheck:
    pair = Op("tuple", (X, Y))
    weigh = Op("add", (Op("mul", (Const(2), X)), Y))
    cat = Op("concat", (Op("seqlit", (X,)), Op("seqlit", (Y,))))
    def inst(label: str, f: Expr) -> LemmaInstance:
        return LemmaInstance(
            label, U2,
            Star(uni(BITS, X), uni(BITS, Y)),
            Uniform(Const(_image_set(f, BITS, BITS)), f),
            meta=(("f pairwise injective on S x S'",
                   _pairwise_injective(f, BITS, BITS)),))
    return LemmaCheck(
        "uniform-pairing",
        "uniform(S, x) * uniform(S', e') entails uniform(image(f), f(x, e'))"
        " for f pairwise injective (checked by evaluation)",
        (inst("tuple", pair), inst("weighted-sum", weigh),
         inst("concat", cat)))


def _distinction() -> LemmaCheck:
    a = Var(VarId("a", Kind.RAND))
    strong = Or(ceq(a, Const(1)), ceq(a, Const(2)))
    weak = Certain(Op("or", (Op("eq", (a, Const(1))),
                             Op("eq", (a, Const(2))))))
    return LemmaCheck(
        "certain-or-distinction",
        "a disjunction of certainties is strictly stronger than certainty"
        " of the disjunction",
        (LemmaInstance("forward", UA, strong, weak),
         LemmaInstance("strict", UA, weak, strong, expect_holds=False)))


def _det_case_split() -> LemmaCheck:
    """Known membership of a deterministic expression in a two-element
    set splits into a disjunction of certainties; the deterministic
    memory pins the value, so one disjunct is certain outright. For a
    random expression the same split is wrong (uniform membership makes
    neither side certain), which the last instance witnesses."""
    def split(e: Expr) -> tuple[Assertion, Assertion]:
        pre = Certain(Op("member", (e, Const(SetV((0, 1))))))
        return pre, Or(ceq(e, Const(0)), ceq(e, Const(1)))

    flipped = Op("sub", (Const(1), D))
    insts = (
        LemmaInstance("det-variable", U2D, *split(D)),
        LemmaInstance("det-expression", U2D, *split(flipped)),
        LemmaInstance("random-refuted", U2, *split(X), expect_holds=False),
    )
    return LemmaCheck(
        "det-case-split",
        "certain(e in {v, w}) entails certain(e = v) or certain(e = w)"
        " for deterministic e, and for no other kind", insts)


def proposition_suite() -> tuple[LemmaCheck, ...]:
    """The nine entailment templates, the strictness distinction, and
    the deterministic case split, each with enumerable instances."""
    return (_item1(), _item2(), _item3(), _item4(), _item5(),
            _item6(), _item7(), _item8(), _item9(), _distinction(),
            _det_case_split())


def run_suite() -> list[LemmaResult]:
    return [check.run() for check in proposition_suite()]
