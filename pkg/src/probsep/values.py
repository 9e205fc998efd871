"""Runtime values and the operations defined on them.

Values are immutable and structurally comparable: integers, booleans,
finite sequences, finite sets, tuples, and interned tokens (symbols used
for trace events such as "read").

Booleans are a dedicated kind rather than Python's bool on purpose:
``0 == False`` in Python, which would silently merge distinct support
keys in a distribution and break the guard convention that *any* value
other than the boolean false counts as true.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Union


class EvalError(Exception):
    """Base class for value/expression evaluation failures."""


class TypeMismatch(EvalError):
    pass


class DivisionByZero(EvalError):
    pass


class IndexOutOfRange(EvalError):
    pass


class EmptyChoiceSet(EvalError):
    """A non-empty set was required (sampling, uniform targets)."""


class CapacityExceeded(EvalError):
    """select(z, s) was asked to take more elements than its bound allows."""


class Token:
    """Interned symbol. Equality and hashing by name; one instance per name."""

    __slots__ = ("name",)
    _interned: dict[str, "Token"] = {}

    def __new__(cls, name: str) -> "Token":
        tok = cls._interned.get(name)
        if tok is None:
            tok = object.__new__(cls)
            object.__setattr__(tok, "name", name)
            cls._interned[name] = tok
        return tok

    def __setattr__(self, key, value):
        raise AttributeError("Token is immutable")

    def __eq__(self, other):
        return self is other or (isinstance(other, Token) and other.name == self.name)

    def __hash__(self):
        return hash(("tok", self.name))

    def __repr__(self):
        return f'"{self.name}"'


@dataclass(frozen=True)
class Bool:
    val: bool

    def __repr__(self):
        return "true" if self.val else "false"


TRUE = Bool(True)
FALSE = Bool(False)


@dataclass(frozen=True)
class Seq:
    items: tuple["Value", ...]

    def __repr__(self):
        return "[" + ", ".join(map(repr, self.items)) + "]"

    def __len__(self):
        return len(self.items)


@dataclass(frozen=True)
class Tup:
    items: tuple["Value", ...]

    def __repr__(self):
        return "(" + ", ".join(map(repr, self.items)) + ")"

    def __len__(self):
        return len(self.items)


class SetV:
    """Finite set value. Elements are kept sorted in the canonical value
    order so iteration, printing and serialization are deterministic."""

    __slots__ = ("items", "_frozen")

    def __init__(self, elems: Iterable["Value"]):
        uniq = {}
        for e in elems:
            uniq[e] = None
        object.__setattr__(self, "items", tuple(sorted(uniq, key=value_key)))
        object.__setattr__(self, "_frozen", frozenset(uniq))

    def __setattr__(self, key, value):
        raise AttributeError("SetV is immutable")

    def __contains__(self, v) -> bool:
        return v in self._frozen

    def __iter__(self) -> Iterator["Value"]:
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __eq__(self, other):
        return isinstance(other, SetV) and self._frozen == other._frozen

    def __hash__(self):
        return hash(("set", self.items))

    def __repr__(self):
        return "{" + ", ".join(map(repr, self.items)) + "}"


Value = Union[int, Bool, Seq, Tup, SetV, Token]

_KIND_RANK = {int: 0, Bool: 1, Token: 2, Seq: 3, Tup: 4, SetV: 5}


def value_key(v: Value):
    """Total order on values: rank by kind, then recursively by payload.

    Only used for canonical ordering (set elements, report rendering),
    never for the language's `<` operator, which is integer-only.
    """
    if isinstance(v, bool):  # reject stray Python bools early
        raise TypeMismatch("raw Python bool leaked into a Value position")
    if isinstance(v, int):
        return (0, v)
    if isinstance(v, Bool):
        return (1, v.val)
    if isinstance(v, Token):
        return (2, v.name)
    if isinstance(v, Seq):
        return (3, tuple(value_key(x) for x in v.items))
    if isinstance(v, Tup):
        return (4, tuple(value_key(x) for x in v.items))
    if isinstance(v, SetV):
        return (5, tuple(value_key(x) for x in v.items))
    raise TypeMismatch(f"not a Value: {v!r}")


def is_value(v) -> bool:
    return (
        (isinstance(v, int) and not isinstance(v, bool))
        or isinstance(v, (Bool, Seq, Tup, SetV, Token))
    )


def mkbool(b: bool) -> Bool:
    return TRUE if b else FALSE


def truthy(v: Value) -> bool:
    """Guard convention: every value except the boolean false is true."""
    return v is not FALSE and v != FALSE


def vset(v: Value) -> tuple[Value, ...]:
    """The choice set a sample draws from: a set's elements, or a singleton.

    Scalars (and sequences/tuples) degrade to a one-element choice, which
    makes `x :$= e` behave as plain assignment when e is not a set.
    Empty sets are rejected: the choice set must be non-empty.
    """
    if isinstance(v, SetV):
        if len(v) == 0:
            raise EmptyChoiceSet("cannot choose from an empty set")
        return v.items
    return (v,)


def _want_int(v: Value, op: str) -> int:
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    raise TypeMismatch(f"{op} expects integers, got {v!r}")


def _want_seq(v: Value, op: str) -> Seq:
    if isinstance(v, Seq):
        return v
    raise TypeMismatch(f"{op} expects a sequence, got {v!r}")


def _want_set(v: Value, op: str) -> SetV:
    if isinstance(v, SetV):
        return v
    raise TypeMismatch(f"{op} expects a set, got {v!r}")


def _want_bool(v: Value, op: str) -> Bool:
    if isinstance(v, Bool):
        return v
    raise TypeMismatch(f"{op} expects a boolean, got {v!r}")


def euclidean_divmod(a: int, b: int) -> tuple[int, int]:
    # Euclidean convention: remainder always in [0, |b|). Coincides with
    # truncation toward zero when both operands are nonnegative.
    if b == 0:
        raise DivisionByZero("division by zero")
    r = a % abs(b)
    q = (a - r) // b
    return q, r


def seq_index(s: Value, i: Value) -> Value:
    sq = _want_seq(s, "indexing")
    idx = _want_int(i, "indexing")
    if not 0 <= idx < len(sq.items):
        raise IndexOutOfRange(f"index {idx} out of range for length {len(sq.items)}")
    return sq.items[idx]


def seq_update(s: Value, i: Value, v: Value) -> Seq:
    sq = _want_seq(s, "update")
    idx = _want_int(i, "update")
    if not 0 <= idx < len(sq.items):
        raise IndexOutOfRange(f"update index {idx} out of range for length {len(sq.items)}")
    items = list(sq.items)
    items[idx] = v
    return Seq(tuple(items))


def permutations_of(s: Value) -> SetV:
    """All arrangements of a sequence's elements, as a set of sequences."""
    import itertools

    sq = _want_seq(s, "perms")
    return SetV(Seq(p) for p in itertools.permutations(sq.items))


def apply_op(sym: str, args: tuple[Value, ...]) -> Value:
    """Structural evaluation of every primitive operation.

    Arithmetic and comparisons are integer-only; = is structural equality
    on any pair of values; the collection ops are typed per kind.
    """
    if sym == "add":
        return _want_int(args[0], "+") + _want_int(args[1], "+")
    if sym == "sub":
        return _want_int(args[0], "-") - _want_int(args[1], "-")
    if sym == "mul":
        return _want_int(args[0], "*") * _want_int(args[1], "*")
    if sym == "div":
        return euclidean_divmod(_want_int(args[0], "/"), _want_int(args[1], "/"))[0]
    if sym == "mod":
        return euclidean_divmod(_want_int(args[0], "%"), _want_int(args[1], "%"))[1]
    if sym == "eq":
        a, b = args
        if not is_value(a) or not is_value(b):
            raise TypeMismatch("= expects values")
        return mkbool(a == b)
    if sym == "lt":
        return mkbool(_want_int(args[0], "<") < _want_int(args[1], "<"))
    if sym == "le":
        return mkbool(_want_int(args[0], "<=") <= _want_int(args[1], "<="))
    if sym == "and":
        return mkbool(_want_bool(args[0], "&&").val and _want_bool(args[1], "&&").val)
    if sym == "or":
        return mkbool(_want_bool(args[0], "||").val or _want_bool(args[1], "||").val)
    if sym == "not":
        return mkbool(not _want_bool(args[0], "!").val)
    if sym == "append":
        return Seq(_want_seq(args[0], "push").items + (args[1],))
    if sym == "concat":
        return Seq(_want_seq(args[0], "++").items + _want_seq(args[1], "++").items)
    if sym == "index":
        return seq_index(args[0], args[1])
    if sym == "update":
        return seq_update(args[0], args[1], args[2])
    if sym == "len":
        v = args[0]
        if isinstance(v, Seq):
            return len(v.items)
        if isinstance(v, SetV):
            return len(v.items)
        if isinstance(v, Tup):
            return len(v.items)
        raise TypeMismatch(f"len expects a collection, got {v!r}")
    if sym == "count":
        sq = _want_seq(args[1], "count")
        return sum(1 for x in sq.items if x == args[0])
    if sym == "tuple":
        return Tup(args)
    if sym.startswith("proj"):
        t = args[0]
        if not isinstance(t, Tup):
            raise TypeMismatch(f"projection expects a tuple, got {t!r}")
        k = int(sym[4:])
        if not 0 <= k < len(t.items):
            raise IndexOutOfRange(f"projection .{k} out of range for arity {len(t.items)}")
        return t.items[k]
    if sym == "range":
        lo = _want_int(args[0], "range")
        hi = _want_int(args[1], "range")
        return SetV(range(lo, hi + 1))
    if sym == "setlit":
        return SetV(args)
    if sym == "seqlit":
        return Seq(args)
    if sym == "perms":
        return permutations_of(args[0])
    if sym == "union":
        a = _want_set(args[0], "union")
        b = _want_set(args[1], "union")
        return SetV(a.items + b.items)
    if sym == "diff":
        a = _want_set(args[0], "diff")
        b = _want_set(args[1], "diff")
        return SetV(x for x in a.items if x not in b)
    if sym == "member":
        col = args[1]
        if isinstance(col, SetV):
            return mkbool(args[0] in col)
        if isinstance(col, Seq):
            return mkbool(args[0] in col.items)
        raise TypeMismatch(f"member expects a set or sequence, got {col!r}")
    if sym == "find":
        # lookup in a set/sequence of pairs by first component; the token
        # "missing" is the not-found result (the caller can test for it)
        key = args[0]
        col = args[1]
        if isinstance(col, (SetV, Seq)):
            for x in col.items:
                if isinstance(x, Tup) and len(x.items) == 2 and x.items[0] == key:
                    return x.items[1]
            return Token("missing")
        raise TypeMismatch(f"find expects a set or sequence of pairs, got {col!r}")
    if sym == "select":
        z = _want_int(args[0], "select")
        s = _want_set(args[1], "select")
        if len(s) > z:
            raise CapacityExceeded(f"select({z}, ...) got {len(s)} elements")
        return s
    if sym == "pow":
        base = _want_int(args[0], "pow")
        exp = _want_int(args[1], "pow")
        if exp < 0:
            raise TypeMismatch(f"pow expects a non-negative exponent, got {exp}")
        return base ** exp
    if sym == "ite":
        return args[1] if truthy(args[0]) else args[2]
    if sym == "arrange":
        # lay out a value/index pair table as the sequence it describes
        table = args[0]
        if not isinstance(table, (SetV, Seq)):
            raise TypeMismatch(f"arrange expects a pair table, got {table!r}")
        slots: dict[int, Value] = {}
        for x in table.items:
            if not (isinstance(x, Tup) and len(x.items) == 2
                    and isinstance(x.items[1], int)):
                raise TypeMismatch(f"arrange expects value/index pairs, got {x!r}")
            v, idx = x.items
            if idx in slots:
                raise TypeMismatch(f"arrange saw target index {idx} twice")
            slots[idx] = v
        if sorted(slots) != list(range(len(slots))):
            raise TypeMismatch("arrange needs target indexes covering 0..k-1")
        return Seq(tuple(slots[i] for i in range(len(slots))))
    if sym == "words":
        # all sequences of a given length over a set of symbols
        import itertools

        alphabet = _want_set(args[0], "words")
        k = _want_int(args[1], "words")
        if k < 0:
            raise TypeMismatch(f"words expects a non-negative length, got {k}")
        if len(alphabet.items) ** k > 100_000:
            raise CapacityExceeded(
                f"words({len(alphabet.items)} symbols, {k}) is too large")
        return SetV(Seq(w) for w in itertools.product(alphabet.items, repeat=k))
    raise TypeMismatch(f"unknown operation {sym!r}")


#: arity table; None means variadic
OP_ARITY: dict[str, int | None] = {
    "add": 2, "sub": 2, "mul": 2, "div": 2, "mod": 2,
    "eq": 2, "lt": 2, "le": 2, "and": 2, "or": 2, "not": 1,
    "append": 2, "concat": 2, "index": 2, "update": 3,
    "len": 1, "count": 2, "tuple": None, "range": 2,
    "setlit": None, "seqlit": None, "perms": 1,
    "union": 2, "diff": 2, "member": 2, "find": 2, "select": 2,
    "pow": 2, "ite": 3, "words": 2, "arrange": 1,
}
