"""Finite probability distributions with exact rational weights.

Everything downstream (interpreter, assertion checker, security harness)
manipulates FinDist values, so the invariants are enforced eagerly: all
probabilities are Fraction, strictly positive on the support, and sum to
exactly 1. No floats anywhere.

Distributions over program memories are represented as FinDist over
tuples of values paired with an explicit, ordered domain (see MemDist
helpers at the bottom): dict keys would lose the domain when empty and
make marginalisation awkward.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import (Callable, Generic, Hashable, Iterable, Mapping, Optional,
                    Sequence, TypeVar)

from .values import EmptyChoiceSet, Value, value_key

T = TypeVar("T", bound=Hashable)
U = TypeVar("U", bound=Hashable)

ZERO = Fraction(0)
ONE = Fraction(1)


class DistError(Exception):
    pass


class ZeroMassCondition(DistError):
    """Conditioning on an event of probability zero."""


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    raise DistError(f"probabilities must be exact rationals, got {type(x).__name__}")


@dataclass(frozen=True)
class FinDist(Generic[T]):
    """Immutable finite distribution; `pmf` maps outcome -> Fraction."""

    pmf: Mapping[T, Fraction]

    def __post_init__(self):
        total = ZERO
        for k, p in self.pmf.items():
            q = _as_fraction(p)
            if q <= 0:
                raise DistError(f"non-positive mass {q} at {k!r}")
            total += q
        if total != 1:
            raise DistError(f"total mass is {total}, expected 1")

    # -- introspection ------------------------------------------------------

    def support(self) -> tuple[T, ...]:
        return tuple(self.pmf.keys())

    def mass(self, k: T) -> Fraction:
        return self.pmf.get(k, ZERO)

    def event(self, pred: Callable[[T], bool]) -> Fraction:
        return sum((p for k, p in self.pmf.items() if pred(k)), ZERO)

    def items(self) -> Iterable[tuple[T, Fraction]]:
        return self.pmf.items()

    def __len__(self) -> int:
        return len(self.pmf)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FinDist):
            return NotImplemented
        return dict(self.pmf) == dict(other.pmf)

    def __hash__(self):
        return hash(frozenset(self.pmf.items()))

    def __repr__(self):
        inner = ", ".join(f"{k!r}: {p}" for k, p in self.pmf.items())
        return f"FinDist({{{inner}}})"

    def is_point(self) -> bool:
        return len(self.pmf) == 1

    def map(self, f: Callable[[T], U]) -> "FinDist[U]":
        """Pushforward along f."""
        out: dict[U, Fraction] = {}
        for k, p in self.pmf.items():
            j = f(k)
            out[j] = out.get(j, ZERO) + p
        return _trusted(out)


def _trusted(pmf: dict[T, Fraction]) -> "FinDist[T]":
    """Wrap a pmf whose mass is total-1 by construction (pushforwards,
    exact renormalisations, products of distributions). Skips the
    validating pass; never hand this untrusted weights."""
    d = object.__new__(FinDist)
    object.__setattr__(d, "pmf", pmf)
    return d


def from_pairs(pairs: Iterable[tuple[T, Fraction]]) -> FinDist[T]:
    """Build a distribution from (outcome, weight) pairs, merging
    duplicates and dropping zeros. Weights must total 1."""
    out: dict[T, Fraction] = {}
    for k, p in pairs:
        if p:
            out[k] = out.get(k, ZERO) + p
    return FinDist(out)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def unit(x: T) -> FinDist[T]:
    return FinDist({x: ONE})


def uniform(xs: Iterable[T]) -> FinDist[T]:
    seq = list(xs)
    if not seq:
        raise EmptyChoiceSet("uniform distribution over an empty collection")
    if len(set(seq)) != len(seq):
        raise DistError("uniform distribution requires distinct outcomes")
    p = Fraction(1, len(seq))
    return FinDist({x: p for x in seq})


def bind(mu: FinDist[T], f: Callable[[T], FinDist[U]]) -> FinDist[U]:
    out: dict[U, Fraction] = {}
    for k, p in mu.items():
        for j, q in f(k).items():
            out[j] = out.get(j, ZERO) + p * q
    return FinDist(out)


def product(mu: FinDist[T], nu: FinDist[U]) -> FinDist[tuple[T, U]]:
    return _trusted({(a, b): p * q for a, p in mu.items() for b, q in nu.items()})


def marginal_left(mu: FinDist[tuple[T, U]]) -> FinDist[T]:
    return mu.map(lambda kv: kv[0])


def marginal_right(mu: FinDist[tuple[T, U]]) -> FinDist[U]:
    return mu.map(lambda kv: kv[1])


def condition(mu: FinDist[T], pred: Callable[[T], bool]) -> FinDist[T]:
    """mu restricted to pred and renormalised. Zero-mass events are a
    caller error, not an empty distribution."""
    mass = mu.event(pred)
    if mass == 0:
        raise ZeroMassCondition("conditioning on a zero-probability event")
    return _trusted({k: p / mass for k, p in mu.items() if pred(k)})


def convex(p: Fraction, mu1: FinDist[T], mu2: FinDist[T]) -> FinDist[T]:
    """p * mu1 + (1-p) * mu2. At p in {0, 1} the unused side is ignored
    entirely (it may be None), mirroring how a conditional with an
    always-false branch never runs that branch."""
    p = _as_fraction(p)
    if not (0 <= p <= 1):
        raise DistError(f"mixing weight {p} outside [0, 1]")
    if p == 1:
        return mu1
    if p == 0:
        return mu2
    out: dict[T, Fraction] = {}
    for k, q in mu1.items():
        out[k] = out.get(k, ZERO) + p * q
    for k, q in mu2.items():
        out[k] = out.get(k, ZERO) + (1 - p) * q
    return FinDist(out)


# ---------------------------------------------------------------------------
# Structure tests
# ---------------------------------------------------------------------------

def factors_as_product(mu: FinDist[tuple[T, U]]) -> bool:
    """Does mu factor exactly as (left marginal) x (right marginal)?"""
    return mu == product(marginal_left(mu), marginal_right(mu))


def statistical_distance(mu: FinDist[T], nu: FinDist[U]) -> Fraction:
    """Total variation distance: half the L1 distance between pmfs."""
    keys = set(mu.support()) | set(nu.support())
    tot = sum((abs(mu.mass(k) - nu.mass(k)) for k in keys), ZERO)
    return tot / 2


def even_partition(f: Callable[[Value], Value],
                   src: Sequence[Value],
                   dst: Sequence[Value]) -> tuple[bool, int | None]:
    """Check that f maps src onto exactly the elements of dst with all
    fibers the same size. Returns (ok, fiber_size). This is the shape of
    set map under which pushing a uniform distribution forward stays
    uniform, which is why the dynamic sampling rule cares about it.
    """
    if not src or not dst:
        raise EmptyChoiceSet("even partition over an empty set")
    fibers: dict[tuple, list[Value]] = {}
    for v in src:
        fibers.setdefault(value_key(f(v)), []).append(v)
    dst_keys = {value_key(d) for d in dst}
    if len(dst_keys) != len(dst):
        raise DistError("even partition target contains duplicates")
    if set(fibers.keys()) != dst_keys:
        return False, None
    sizes = {len(vs) for vs in fibers.values()}
    if len(sizes) != 1:
        return False, None
    return True, sizes.pop()


# ---------------------------------------------------------------------------
# Memory distributions
# ---------------------------------------------------------------------------
#
# A random memory is a finite map name -> Value. We fix an ordered domain
# and store outcomes as value tuples in that order, so an empty domain
# still has the one outcome () and restriction is positional.

MemOutcome = tuple[Value, ...]


@dataclass(frozen=True)
class MemDist:
    """Distribution over memories for a fixed ordered variable domain."""

    domain: tuple[str, ...]
    dist: FinDist[MemOutcome]

    def __post_init__(self):
        if len(set(self.domain)) != len(self.domain):
            raise DistError(f"duplicate names in domain {self.domain}")
        for out in self.dist.support():
            if len(out) != len(self.domain):
                raise DistError("outcome arity does not match domain")

    @staticmethod
    def from_map(assign: Mapping[str, Value]) -> "MemDist":
        dom = tuple(sorted(assign))
        return MemDist(dom, unit(tuple(assign[n] for n in dom)))

    @staticmethod
    def point(domain: Sequence[str], outcome: Sequence[Value]) -> "MemDist":
        return MemDist(tuple(domain), unit(tuple(outcome)))

    def mem(self, outcome: MemOutcome) -> dict[str, Value]:
        return dict(zip(self.domain, outcome))

    def memories(self) -> Iterable[tuple[dict[str, Value], Fraction]]:
        for out, p in self.dist.items():
            yield self.mem(out), p

    def domain_set(self) -> frozenset[str]:
        return frozenset(self.domain)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MemDist):
            return NotImplemented
        if self.domain == other.domain:
            return self.dist == other.dist
        if set(self.domain) != set(other.domain):
            return False
        return self.dist == other.reorder(self.domain).dist

    def __hash__(self):
        canon = self.reorder(tuple(sorted(self.domain)))
        return hash((canon.domain, canon.dist))

    def reorder(self, domain: Sequence[str]) -> "MemDist":
        if tuple(domain) == self.domain:
            return self
        if set(domain) != set(self.domain):
            raise DistError("reorder must permute the existing domain")
        idx = [self.domain.index(n) for n in domain]
        return MemDist(tuple(domain),
                       self.dist.map(lambda out: tuple(out[i] for i in idx)))

    def project(self, names: Iterable[str]) -> "MemDist":
        """Forget every variable outside `names` (sum over the rest)."""
        keep = [n for n in self.domain if n in set(names)]
        missing = set(names) - set(self.domain)
        if missing:
            raise DistError(f"cannot project onto absent variables {sorted(missing)}")
        idx = [self.domain.index(n) for n in keep]
        return MemDist(tuple(keep),
                       self.dist.map(lambda out: tuple(out[i] for i in idx)))

    def join(self, other: "MemDist") -> "MemDist":
        """Independent product of distributions over disjoint domains."""
        if self.domain_set() & other.domain_set():
            raise DistError("join requires disjoint domains")
        prod = product(self.dist, other.dist)
        return MemDist(self.domain + other.domain,
                       prod.map(lambda ab: ab[0] + ab[1]))

    def pushforward(self, f: Callable[[dict[str, Value]], Value]) -> FinDist[Value]:
        out: dict[Value, Fraction] = {}
        for mem, p in self.memories():
            v = f(mem)
            out[v] = out.get(v, ZERO) + p
        return FinDist(out)

    def condition_mem(self, pred: Callable[[dict[str, Value]], bool]) -> "MemDist":
        return MemDist(self.domain,
                       condition(self.dist, lambda out: pred(self.mem(out))))

    def event_mem(self, pred: Callable[[dict[str, Value]], bool]) -> Fraction:
        return self.dist.event(lambda out: pred(self.mem(out)))

    def update(self, f: Callable[[dict[str, Value]], dict[str, Value]]) -> "MemDist":
        """Deterministic per-memory rewrite (domain must be preserved)."""
        def g(out: MemOutcome) -> MemOutcome:
            m = f(self.mem(out))
            if set(m) != set(self.domain):
                raise DistError("memory update changed the domain")
            return tuple(m[n] for n in self.domain)

        return MemDist(self.domain, self.dist.map(g))

    def bind_cell(self, name: str,
                  f: Callable[[dict[str, Value]], FinDist[Value]]) -> "MemDist":
        """Monadic update of one cell: each memory m flows into f(m) and
        the result lands in m[name]. Extends the domain if name is new.

        Outcomes are rebuilt positionally; this is the interpreter's
        hottest loop, so no intermediate memory dicts beyond the one f
        needs."""
        if name in self.domain:
            dom = self.domain
            idx = dom.index(name)
        else:
            dom = self.domain + (name,)
            idx = len(self.domain)
        names = self.domain
        out: dict[MemOutcome, Fraction] = {}
        for outc, p in self.dist.pmf.items():
            mem = dict(zip(names, outc))
            head, tail = outc[:idx], outc[idx + 1:]
            for v, q in f(mem).items():
                key = head + (v,) + tail
                w = p * q
                prev = out.get(key)
                out[key] = w if prev is None else prev + w
        return MemDist(dom, _trusted(out))

    def map_cell(self, name: str,
                 g: Callable[[dict[str, Value]], Value]) -> "MemDist":
        """Deterministic rewrite of one cell per memory; bind_cell with
        a point distribution, minus the per-memory wrapping."""
        if name in self.domain:
            dom = self.domain
            idx = dom.index(name)
        else:
            dom = self.domain + (name,)
            idx = len(self.domain)
        names = self.domain
        out: dict[MemOutcome, Fraction] = {}
        for outc, p in self.dist.pmf.items():
            key = outc[:idx] + (g(dict(zip(names, outc))),) + outc[idx + 1:]
            prev = out.get(key)
            out[key] = p if prev is None else prev + p
        return MemDist(dom, _trusted(out))

    def split_mem(self, pred: Callable[[dict[str, Value]], bool],
                  ) -> tuple[Fraction, Optional["MemDist"], Optional["MemDist"]]:
        """One-pass conditional split: (mass of pred, conditioned true
        part, conditioned false part), a zero-mass side being None."""
        names = self.domain
        tr: dict[MemOutcome, Fraction] = {}
        fa: dict[MemOutcome, Fraction] = {}
        mass = ZERO
        for outc, p in self.dist.pmf.items():
            if pred(dict(zip(names, outc))):
                tr[outc] = p
                mass += p
            else:
                fa[outc] = p
        if not tr:
            return ZERO, None, self
        if not fa:
            return ONE, self, None
        rest = 1 - mass
        return (mass,
                MemDist(names, _trusted({k: p / mass for k, p in tr.items()})),
                MemDist(names, _trusted({k: p / rest for k, p in fa.items()})))


EMPTY_MEM = MemDist((), unit(()))


def mixture(pieces: Iterable[tuple[Fraction, FinDist[T]]]) -> FinDist[T]:
    """Weighted sum of distributions; the weights must total 1."""
    pairs: list[tuple[T, Fraction]] = []
    for w, mu in pieces:
        w = _as_fraction(w)
        if w < 0:
            raise DistError(f"negative mixture weight {w}")
        for k, p in mu.items():
            pairs.append((k, w * p))
    return from_pairs(pairs)


def mixture_mem(pieces: Iterable[tuple[Fraction, MemDist]]) -> MemDist:
    """Weighted sum of memory distributions over a common domain."""
    seq = [(w, mu) for w, mu in pieces]
    if not seq:
        raise DistError("mixture of no pieces")
    dom = seq[0][1].domain
    return MemDist(dom, mixture((w, mu.reorder(dom).dist) for w, mu in seq))


def convex_mem(p: Fraction, mu1: MemDist | None, mu2: MemDist | None) -> MemDist:
    """Two-sided mixture; a side with zero weight may be absent."""
    p = _as_fraction(p)
    if p == 1:
        assert mu1 is not None
        return mu1
    if p == 0:
        assert mu2 is not None
        return mu2
    assert mu1 is not None and mu2 is not None
    return mixture_mem([(p, mu1), (1 - p, mu2)])


def project(mu: MemDist, names: Iterable[str]) -> MemDist:
    """Module-level alias for MemDist.project."""
    return mu.project(names)


def is_independent(mu: MemDist, xs: Iterable[str], ys: Iterable[str]) -> bool:
    """Are the two (disjoint) groups of variables independent under mu?"""
    ls, rs = frozenset(xs), frozenset(ys)
    if ls & rs:
        raise DistError("independence groups must be disjoint")
    both = mu.project(ls | rs)
    return both == mu.project(ls).join(mu.project(rs)).reorder(both.domain)
