"""Exact interpreter for the probabilistic language.

A configuration pairs a deterministic memory (a plain map) with an exact
distribution over random memories. `exec` pushes a configuration through
a command following the denotational clauses directly; random loops are
evaluated by iterated guard-splitting, which agrees with the unfolding
semantics because every clause is affine in the distribution argument.

`enumerate_paths_oracle` is an intentionally different algorithm for the
same semantics: it runs every control path on concrete memories, one
sampled value at a time, and aggregates the weighted outcomes. The two
implementations share nothing beyond expression evaluation, so their
agreement on random programs is meaningful evidence of correctness.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from .dist import FinDist, MemDist, convex_mem, from_pairs, mixture_mem, uniform
from .lang import (
    Command,
    DAssign,
    IfDet,
    IfRand,
    Program,
    RAssign,
    Sample,
    SeqC,
    Skip,
    WhileDet,
    WhileRand,
    eval_expr,
)
from .values import Value, truthy, vset

DEFAULT_FUEL = 10_000
DEFAULT_MAX_PATHS = 200_000


class FuelExhausted(Exception):
    """A loop ran longer than the fuel allowance. Always an error: the
    interpreter never silently truncates a distribution."""


class PathExplosion(Exception):
    """The oracle's path count exceeded its budget."""


class _Fuel:
    __slots__ = ("left",)

    def __init__(self, n: int):
        self.left = n

    def tick(self) -> None:
        if self.left <= 0:
            raise FuelExhausted("loop fuel exhausted")
        self.left -= 1


@dataclass
class Config:
    """(deterministic memory, distribution over random memories)."""

    sigma: dict[str, Value]
    mu: MemDist

    def __eq__(self, other) -> bool:
        if not isinstance(other, Config):
            return NotImplemented
        return self.sigma == other.sigma and self.mu == other.mu


def init_config(program: Program) -> Config:
    init = program.init_map()
    sigma = {n: init[n] for n in program.det_vars()}
    rmem = {n: init[n] for n in program.rand_vars()}
    return Config(sigma, MemDist.from_map(rmem))


def exec(c: Command, cfg: Config, fuel: Optional[int] = None) -> Config:  # noqa: A001
    """Run a command on a configuration, exactly."""
    meter = fuel if isinstance(fuel, _Fuel) else _Fuel(DEFAULT_FUEL if fuel is None else fuel)
    return _exec(c, cfg, meter)


def run_program(program: Program, fuel: Optional[int] = None) -> Config:
    return exec(program.body, init_config(program), fuel)


def _guard_prob(sigma, mu: MemDist, b) -> Fraction:
    return mu.event_mem(lambda m: truthy(eval_expr(sigma, m, b)))


@lru_cache(maxsize=1024)
def _uniform_over(v: Value) -> FinDist[Value]:
    """Sampling hits the same choice set across many memories; the
    resulting distribution is immutable, so share it."""
    return uniform(vset(v))


def _exec(c: Command, cfg: Config, fuel: _Fuel) -> Config:
    sigma, mu = cfg.sigma, cfg.mu

    if isinstance(c, Skip):
        return cfg

    if isinstance(c, DAssign):
        v = eval_expr(sigma, {}, c.expr)
        sigma2 = dict(sigma)
        sigma2[c.var.name] = v
        return Config(sigma2, mu)

    if isinstance(c, RAssign):
        return Config(sigma, mu.map_cell(c.var.name,
                                         lambda m: eval_expr(sigma, m, c.expr)))

    if isinstance(c, Sample):
        return Config(sigma, mu.bind_cell(
            c.var.name, lambda m: _uniform_over(eval_expr(sigma, m, c.expr))))

    if isinstance(c, SeqC):
        return _exec(c.second, _exec(c.first, cfg, fuel), fuel)

    if isinstance(c, IfDet):
        branch = c.then if truthy(eval_expr(sigma, {}, c.guard)) else c.els
        return _exec(branch, cfg, fuel)

    if isinstance(c, IfRand):
        p, mt, mf = mu.split_mem(lambda m: truthy(eval_expr(sigma, m, c.guard)))
        taken = _exec(c.then, Config(sigma, mt), fuel).mu if mt is not None else None
        avoided = _exec(c.els, Config(sigma, mf), fuel).mu if mf is not None else None
        return Config(sigma, convex_mem(p, taken, avoided))

    if isinstance(c, WhileDet):
        cur = cfg
        while truthy(eval_expr(cur.sigma, {}, c.guard)):
            fuel.tick()
            cur = _exec(c.body, cur, fuel)
        return cur

    if isinstance(c, WhileRand):
        # Iterated splitting: peel off the (guard false) slice each round,
        # push the (guard true) slice through the body, and mix the slices
        # back with their accumulated weights once the true-mass hits zero.
        pieces: list[tuple[Fraction, MemDist]] = []
        pending = mu
        weight = Fraction(1)
        while True:
            p, mt, mf = pending.split_mem(
                lambda m: truthy(eval_expr(sigma, m, c.guard)))
            if mf is not None:
                pieces.append((weight * (1 - p), mf))
            if mt is None:
                break
            fuel.tick()
            pending = _exec(c.body, Config(sigma, mt), fuel).mu
            weight *= p
        if len(pieces) == 1:
            return Config(sigma, pieces[0][1])
        return Config(sigma, mixture_mem(pieces))

    raise TypeError(f"not a command: {c!r}")


# ---------------------------------------------------------------------------
# Per-path oracle
# ---------------------------------------------------------------------------

class _Meter:
    __slots__ = ("paths", "cap")

    def __init__(self, cap: int):
        self.paths = 0
        self.cap = cap

    def spawn(self, n: int = 1) -> None:
        self.paths += n
        if self.paths > self.cap:
            raise PathExplosion(f"more than {self.cap} execution paths")


_PathState = tuple[dict, dict, Fraction, int]  # sigma, rmem, weight, fuel left


def _run_path(c: Command, st: _PathState, meter: _Meter) -> list[_PathState]:
    sigma, rmem, w, f = st

    if isinstance(c, Skip):
        return [st]

    if isinstance(c, DAssign):
        sigma2 = dict(sigma)
        sigma2[c.var.name] = eval_expr(sigma, {}, c.expr)
        return [(sigma2, rmem, w, f)]

    if isinstance(c, RAssign):
        rmem2 = dict(rmem)
        rmem2[c.var.name] = eval_expr(sigma, rmem, c.expr)
        return [(sigma, rmem2, w, f)]

    if isinstance(c, Sample):
        vs = vset(eval_expr(sigma, rmem, c.expr))
        meter.spawn(len(vs) - 1)
        share = w / len(vs)
        out = []
        for v in vs:
            rmem2 = dict(rmem)
            rmem2[c.var.name] = v
            out.append((sigma, rmem2, share, f))
        return out

    if isinstance(c, SeqC):
        out = []
        for st1 in _run_path(c.first, st, meter):
            out.extend(_run_path(c.second, st1, meter))
        return out

    if isinstance(c, (IfDet, IfRand)):
        branch = c.then if truthy(eval_expr(sigma, rmem, c.guard)) else c.els
        return _run_path(branch, st, meter)

    if isinstance(c, (WhileDet, WhileRand)):
        frontier = [st]
        done: list[_PathState] = []
        while frontier:
            s, m, wt, fl = frontier.pop()
            if not truthy(eval_expr(s, m, c.guard)):
                done.append((s, m, wt, fl))
                continue
            if fl <= 0:
                raise FuelExhausted("loop fuel exhausted on a path")
            frontier.extend(_run_path(c.body, (s, m, wt, fl - 1), meter))
        return done

    raise TypeError(f"not a command: {c!r}")


def enumerate_paths_oracle(c: Command, cfg: Config, fuel: Optional[int] = None,
                           max_paths: int = DEFAULT_MAX_PATHS) -> MemDist:
    """Exact final distribution over random memories, computed path by
    path on concrete memories. Checks that the deterministic memory is
    path-independent (the grammar guarantees it; the oracle re-verifies).
    """
    n = DEFAULT_FUEL if fuel is None else fuel
    meter = _Meter(max_paths)
    finals: list[_PathState] = []
    for rmem, p in cfg.mu.memories():
        meter.spawn()
        finals.extend(_run_path(c, (dict(cfg.sigma), rmem, p, n), meter))

    sigmas = {tuple(sorted(s.items(), key=lambda kv: kv[0])) for s, _, _, _ in finals}
    if len(sigmas) > 1:
        raise AssertionError("deterministic memory diverged across paths")

    domains = {frozenset(m) for _, m, _, _ in finals}
    if len(domains) != 1:
        raise AssertionError("random-memory domain diverged across paths")
    dom = tuple(sorted(domains.pop()))
    return MemDist(dom, from_pairs(
        (tuple(m[nm] for nm in dom), wt) for _, m, wt, _ in finals))
