"""Separation-logic assertions and their finite-universe model checker.

Assertions are interpreted over partial configurations: a partial
deterministic memory paired with a distribution over random memories
covering an explicit subset of the random variables. Partial configs
form a resource monoid (combine) ordered by extension (sub_config); the
separating conjunction splits the random domain into independent parts,
while the deterministic memory may be shared.

The connectives that quantify over configurations (implies, wand,
entailment, the supported predicate) are decided relative to an explicit
finite Universe: candidate values per variable plus a denominator bound
for enumerating distributions. Anything outside the universe is reported
as UniverseTooSmall rather than guessed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Union

from .dist import EMPTY_MEM, DistError, FinDist, MemDist, from_pairs, uniform
from .lang import (
    Const,
    Expr,
    Kind,
    Op,
    VarId,
    eval_expr,
    free_vars,
    is_deterministic,
    subst_expr,
)
from .values import EmptyChoiceSet, Value, truthy, vset


class AssertionError_(Exception):
    pass


class IllFormedAssertion(AssertionError_):
    pass


class UniverseTooSmall(AssertionError_):
    """A quantified check needs variables/values the universe lacks."""


class EnumerationBudgetExceeded(AssertionError_):
    """A quantified check would enumerate more configs than allowed."""


# ---------------------------------------------------------------------------
# Assertion syntax
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class Certain:
    """C[e]: e is true in every memory in the support."""
    expr: Expr


@dataclass(frozen=True)
class Uniform:
    """U_{ed}[er]: the pushforward of the distribution through er is
    uniform over the value set of ed. ed must be deterministic."""
    ed: Expr
    er: Expr

    def __post_init__(self):
        if not is_deterministic(self.ed):
            raise IllFormedAssertion(
                "the set expression of a uniformity assertion must be deterministic")


@dataclass(frozen=True)
class And:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class Or:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class Implies:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class Star:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class Wand:
    left: "Assertion"
    right: "Assertion"


Assertion = Union[Top, Bottom, Certain, Uniform, And, Or, Implies, Star, Wand]

TOP = Top()
BOTTOM = Bottom()


def dvar(*exprs: Expr) -> Certain:
    """D[e, ...]: the expressions are defined here, i.e. their variables
    are owned by this configuration. Encoded as C[t = t] for the tuple t
    of the expressions, a tautology whose only content is coverage."""
    if not exprs:
        raise IllFormedAssertion("dvar needs at least one expression")
    t = exprs[0] if len(exprs) == 1 else Op("tuple", tuple(exprs))
    return Certain(Op("eq", (t, t)))


def conj_all(parts: Iterable[Assertion]) -> Assertion:
    out: Optional[Assertion] = None
    for a in parts:
        out = a if out is None else And(out, a)
    return TOP if out is None else out


def star_all(parts: Iterable[Assertion]) -> Assertion:
    out: Optional[Assertion] = None
    for a in parts:
        out = a if out is None else Star(out, a)
    return TOP if out is None else out


def is_atomic(phi: Assertion) -> bool:
    """The AP class: a bare certainty or uniformity assertion."""
    return isinstance(phi, (Certain, Uniform))


def fv_assert(phi: Assertion) -> frozenset[VarId]:
    if isinstance(phi, (Top, Bottom)):
        return frozenset()
    if isinstance(phi, Certain):
        return free_vars(phi.expr)
    if isinstance(phi, Uniform):
        return free_vars(phi.ed) | free_vars(phi.er)
    if isinstance(phi, (And, Or, Implies, Star, Wand)):
        return fv_assert(phi.left) | fv_assert(phi.right)
    raise IllFormedAssertion(f"not an assertion: {phi!r}")


def subst_assert(phi: Assertion, x: VarId, e: Expr) -> Assertion:
    """Capture-free substitution phi[e/x] (assertions bind nothing)."""
    if isinstance(phi, (Top, Bottom)):
        return phi
    if isinstance(phi, Certain):
        return Certain(subst_expr(phi.expr, x, e))
    if isinstance(phi, Uniform):
        return Uniform(subst_expr(phi.ed, x, e), subst_expr(phi.er, x, e))
    if isinstance(phi, (And, Or, Implies, Star, Wand)):
        return type(phi)(subst_assert(phi.left, x, e), subst_assert(phi.right, x, e))
    raise IllFormedAssertion(f"not an assertion: {phi!r}")


# ---------------------------------------------------------------------------
# Partial configurations and the resource monoid
# ---------------------------------------------------------------------------

@dataclass
class PartialConfig:
    sigma: dict[str, Value]
    mu: MemDist

    def __eq__(self, other) -> bool:
        if not isinstance(other, PartialConfig):
            return NotImplemented
        return self.sigma == other.sigma and self.mu == other.mu

    def describe(self) -> str:
        sig = ", ".join(f"{n}={v!r}" for n, v in sorted(self.sigma.items()))
        rows = ", ".join(
            f"{{{', '.join(f'{n}={v!r}' for n, v in zip(self.mu.domain, out))}}}: {p}"
            for out, p in self.mu.dist.items())
        return f"sigma: {{{sig}}}; mu over {self.mu.domain}: {{{rows}}}"


EMPTY_CONFIG = PartialConfig({}, EMPTY_MEM)


def combine(m1: PartialConfig, m2: PartialConfig) -> Optional[PartialConfig]:
    """Monoid composition: agreeing det overlap, disjoint random
    domains, independent product. None when undefined."""
    for n, v in m1.sigma.items():
        if n in m2.sigma and m2.sigma[n] != v:
            return None
    if m1.mu.domain_set() & m2.mu.domain_set():
        return None
    sigma = dict(m1.sigma)
    sigma.update(m2.sigma)
    return PartialConfig(sigma, m1.mu.join(m2.mu))


def mu_sub(mu1: MemDist, mu2: MemDist) -> bool:
    if not mu1.domain_set() <= mu2.domain_set():
        return False
    return mu2.project(mu1.domain) == mu1


def sub_config(m1: PartialConfig, m2: PartialConfig) -> bool:
    """The extension order: m2 knows everything m1 does."""
    for n, v in m1.sigma.items():
        if n not in m2.sigma or m2.sigma[n] != v:
            return False
    return mu_sub(m1.mu, m2.mu)


# ---------------------------------------------------------------------------
# Universes
# ---------------------------------------------------------------------------

def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of `parts` non-negative ints summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


class _Ticker:
    __slots__ = ("count", "cap")

    def __init__(self, cap: int):
        self.count = 0
        self.cap = cap

    def tick(self, n: int = 1) -> None:
        self.count += n
        if self.count > self.cap:
            raise EnumerationBudgetExceeded(
                f"enumeration exceeded the budget of {self.cap} candidates")


@dataclass(frozen=True)
class Universe:
    """Finite search space: candidate values per variable and the
    denominator every enumerated probability is a multiple of."""

    det: dict[str, tuple[Value, ...]] = field(default_factory=dict)
    rand: dict[str, tuple[Value, ...]] = field(default_factory=dict)
    denominator: int = 4
    budget: int = 2_000_000

    def __post_init__(self):
        for table in (self.det, self.rand):
            for n, vals in table.items():
                if not vals:
                    raise IllFormedAssertion(f"empty candidate set for {n!r}")
        if set(self.det) & set(self.rand):
            raise IllFormedAssertion("a variable cannot be both kinds")
        if self.denominator < 1:
            raise IllFormedAssertion("denominator bound must be at least 1")

    def missing(self, vs: Iterable[VarId]) -> list[VarId]:
        out = []
        for v in vs:
            table = self.det if v.kind is Kind.DET else self.rand
            if v.name not in table:
                out.append(v)
        return out

    def require_covers(self, *assertions: Assertion) -> None:
        lacking = self.missing(v for a in assertions for v in fv_assert(a))
        if lacking:
            raise UniverseTooSmall(
                "universe lacks candidates for " + ", ".join(map(repr, lacking)))

    # -- deterministic side ------------------------------------------------

    def det_assignments(self, names: tuple[str, ...],
                        ticker: Optional[_Ticker] = None) -> Iterator[dict]:
        pools = [self.det[n] for n in names]
        for values in itertools.product(*pools):
            if ticker:
                ticker.tick()
            yield dict(zip(names, values))

    def all_sigmas(self, ticker: Optional[_Ticker] = None) -> Iterator[dict]:
        names = tuple(sorted(self.det))
        for r in range(len(names) + 1):
            for dom in itertools.combinations(names, r):
                yield from self.det_assignments(dom, ticker)

    # -- random side ---------------------------------------------------------

    def mem_dists(self, names: tuple[str, ...],
                  ticker: Optional[_Ticker] = None) -> Iterator[MemDist]:
        """Every distribution over exactly these variables whose
        probabilities are multiples of 1/denominator."""
        names = tuple(sorted(names))
        if not names:
            if ticker:
                ticker.tick()
            yield EMPTY_MEM
            return
        outcomes = tuple(itertools.product(*[self.rand[n] for n in names]))
        d = self.denominator
        for comp in compositions(d, len(outcomes)):
            if ticker:
                ticker.tick()
            yield MemDist(names, from_pairs(
                (out, Fraction(k, d)) for out, k in zip(outcomes, comp) if k))

    def all_mem_dists(self, ticker: Optional[_Ticker] = None) -> Iterator[MemDist]:
        names = tuple(sorted(self.rand))
        for r in range(len(names) + 1):
            for dom in itertools.combinations(names, r):
                yield from self.mem_dists(dom, ticker)

    def configs(self, ticker: Optional[_Ticker] = None) -> Iterator[PartialConfig]:
        for sigma in self.all_sigmas():
            for mu in self.all_mem_dists():
                if ticker:
                    ticker.tick()
                yield PartialConfig(dict(sigma), mu)

    # -- extensions ----------------------------------------------------------

    def extensions(self, m: PartialConfig,
                   ticker: Optional[_Ticker] = None) -> Iterator[PartialConfig]:
        """All U-bounded configs above m, including m itself. New random
        variables are attached with arbitrary conditional distributions
        (denominator-bounded per support memory), so correlated
        extensions are covered, and m's own probabilities are untouched."""
        new_det = tuple(sorted(set(self.det) - set(m.sigma)))
        new_rand = tuple(sorted(set(self.rand) - m.mu.domain_set()))
        d = self.denominator

        sigma_exts: list[dict] = []
        for r in range(len(new_det) + 1):
            for dom in itertools.combinations(new_det, r):
                for extra in self.det_assignments(dom):
                    s = dict(m.sigma)
                    s.update(extra)
                    sigma_exts.append(s)

        for r in range(len(new_rand) + 1):
            for dom in itertools.combinations(new_rand, r):
                for mu in self._mu_extensions(m.mu, dom, d):
                    for s in sigma_exts:
                        if ticker:
                            ticker.tick()
                        yield PartialConfig(dict(s), mu)

    def _mu_extensions(self, mu: MemDist, add: tuple[str, ...],
                       d: int) -> Iterator[MemDist]:
        if not add:
            yield mu
            return
        cells = tuple(itertools.product(*[self.rand[n] for n in add]))
        support = tuple(mu.dist.items())
        conds = list(compositions(d, len(cells)))
        dom = mu.domain + add
        for choice in itertools.product(conds, repeat=len(support)):
            pairs = []
            for (out, p), comp in zip(support, choice):
                for cell, k in zip(cells, comp):
                    if k:
                        pairs.append((out + cell, p * Fraction(k, d)))
            yield MemDist(dom, from_pairs(pairs))


# ---------------------------------------------------------------------------
# Satisfaction
# ---------------------------------------------------------------------------

def _covered(vs: frozenset[VarId], m: PartialConfig) -> bool:
    for v in vs:
        if v.kind is Kind.DET:
            if v.name not in m.sigma:
                return False
        elif v.name not in m.mu.domain_set():
            return False
    return True


def _subset_pairs(names: tuple[str, ...]) -> Iterator[tuple[frozenset, frozenset]]:
    """All ordered pairs of disjoint subsets of names."""
    for left_mask in range(2 ** len(names)):
        left = frozenset(n for i, n in enumerate(names) if left_mask >> i & 1)
        rest = tuple(n for n in names if n not in left)
        for right_mask in range(2 ** len(rest)):
            yield left, frozenset(n for i, n in enumerate(rest) if right_mask >> i & 1)


def satisfies(m: PartialConfig, phi: Assertion, u: Universe,
              _ticker: Optional[_Ticker] = None) -> bool:
    """Model check one assertion against one partial configuration.

    Quantified connectives range over u-bounded configurations; the
    variables of phi must all be declared in u so those quantifiers are
    meaningful."""
    if _ticker is None:
        u.require_covers(phi)
        _ticker = _Ticker(u.budget)
    return _sat(m, phi, u, _ticker)


def _sat(m: PartialConfig, phi: Assertion, u: Universe, tk: _Ticker) -> bool:
    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bottom):
        return False

    if isinstance(phi, Certain):
        if not _covered(free_vars(phi.expr), m):
            return False
        for mem, _ in m.mu.memories():
            if not truthy(eval_expr(m.sigma, mem, phi.expr)):
                return False
        return True

    if isinstance(phi, Uniform):
        if not _covered(free_vars(phi.ed) | free_vars(phi.er), m):
            return False
        try:
            target = vset(eval_expr(m.sigma, {}, phi.ed))
        except EmptyChoiceSet:
            return False
        push = m.mu.pushforward(lambda mem: eval_expr(m.sigma, mem, phi.er))
        return push == uniform(target)

    if isinstance(phi, And):
        return _sat(m, phi.left, u, tk) and _sat(m, phi.right, u, tk)
    if isinstance(phi, Or):
        return _sat(m, phi.left, u, tk) or _sat(m, phi.right, u, tk)

    if isinstance(phi, Implies):
        for ext in u.extensions(m, tk):
            if _sat(ext, phi.left, u, tk) and not _sat(ext, phi.right, u, tk):
                return False
        return True

    if isinstance(phi, Star):
        dom = m.mu.domain
        for left, right in _subset_pairs(dom):
            tk.tick()
            both = m.mu.project(left | right)
            part_l = m.mu.project(left)
            part_r = m.mu.project(right)
            if both != part_l.join(part_r):
                continue
            if (_sat(PartialConfig(m.sigma, part_l), phi.left, u, tk)
                    and _sat(PartialConfig(m.sigma, part_r), phi.right, u, tk)):
                return True
        return False

    if isinstance(phi, Wand):
        for other in u.configs(tk):
            joined = combine(m, other)
            if joined is None:
                continue
            if _sat(other, phi.left, u, tk) and not _sat(joined, phi.right, u, tk):
                return False
        return True

    raise IllFormedAssertion(f"not an assertion: {phi!r}")


# ---------------------------------------------------------------------------
# Entailment and the supported predicate
# ---------------------------------------------------------------------------

@dataclass
class EntailResult:
    holds: bool
    counterexample: Optional[PartialConfig] = None

    def __bool__(self) -> bool:
        return self.holds


def entails(phi: Assertion, psi: Assertion, u: Universe) -> EntailResult:
    """Does phi force psi in every u-bounded partial configuration?"""
    u.require_covers(phi, psi)
    tk = _Ticker(u.budget)
    for m in u.configs(tk):
        if _sat(m, phi, u, tk) and not _sat(m, psi, u, tk):
            return EntailResult(False, m)
    return EntailResult(True)


def is_supported(phi: Assertion, u: Universe) -> bool:
    """The corrected supported predicate: for every deterministic
    memory, the set of satisfying distributions is empty or has a least
    element (under the extension order) that itself satisfies phi."""
    u.require_covers(phi)
    tk = _Ticker(u.budget)
    for sigma in u.all_sigmas(tk):
        sat_mus = [mu for mu in u.all_mem_dists(tk)
                   if _sat(PartialConfig(dict(sigma), mu), phi, u, tk)]
        if not sat_mus:
            continue
        if not any(all(mu_sub(lo, mu) for mu in sat_mus) for lo in sat_mus):
            return False
    return True
