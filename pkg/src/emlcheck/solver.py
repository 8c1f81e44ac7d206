"""Decision procedure for path conditions.

The engine only ever needs a sound Unsat answer, and an exact one on a small
fragment: conjunctions whose atoms each mention a single symbol and compare
an affine term (symbol, or symbol plus a constant) against a constant,
including boolean combinations of such comparisons. Those are decided by
interval arithmetic modulo 2^64; signed comparisons reduce to unsigned ones
by biasing both sides with 2^63. Groups of constraints over 1-bit symbols
are decided by enumeration. Anything else is reported Unknown, which callers
treat as possibly satisfiable.
"""

from __future__ import annotations

import enum
import itertools

from .expr import (
    Bin, Const, Ite, Not,
    const64, eq, eval_expr, not_, simplify, symbols_of,
)


class SatResult(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


class _Marker:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


NOT_UNIQUE = _Marker("NotUnique")
UNKNOWN_VALUE = _Marker("Unknown")

# Joint enumeration budget for groups made of 1-bit symbols only.
_MAX_BOOL_SYMS = 12


class IntervalSet:
    """Finite union of disjoint half-open intervals over [0, 2^bits)."""

    __slots__ = ("bits", "ivs")

    def __init__(self, bits: int, ivs):
        self.bits = bits
        self.ivs = tuple(ivs)

    @classmethod
    def empty(cls, bits):
        return cls(bits, ())

    @classmethod
    def full(cls, bits):
        return cls(bits, ((0, 1 << bits),))

    @classmethod
    def singleton(cls, bits, v):
        v &= (1 << bits) - 1
        return cls(bits, ((v, v + 1),))

    @classmethod
    def wrapped(cls, bits, lo, size):
        """Interval of `size` values starting at lo, wrapping modulo 2^bits."""
        dom = 1 << bits
        if size <= 0:
            return cls.empty(bits)
        if size >= dom:
            return cls.full(bits)
        lo %= dom
        hi = lo + size
        if hi <= dom:
            return cls(bits, ((lo, hi),))
        return cls(bits, ((0, hi - dom), (lo, dom)))

    def is_empty(self):
        return not self.ivs

    def min_value(self):
        return self.ivs[0][0]

    def complement(self):
        dom = 1 << self.bits
        out = []
        prev = 0
        for lo, hi in self.ivs:
            if prev < lo:
                out.append((prev, lo))
            prev = hi
        if prev < dom:
            out.append((prev, dom))
        return IntervalSet(self.bits, out)

    def intersect(self, other):
        out = []
        i = j = 0
        a, b = self.ivs, other.ivs
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo < hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(self.bits, out)

    def union(self, other):
        merged = sorted(self.ivs + other.ivs)
        out = []
        for lo, hi in merged:
            if out and lo <= out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], hi))
            else:
                out.append((lo, hi))
        return IntervalSet(self.bits, out)


_BIAS = 1 << 63
_DOM64 = 1 << 64


def _affine_of(e, sym):
    """Recognize e as sym + c (mod 2^64); return c or None."""
    if e == sym:
        return 0
    if isinstance(e, Bin) and e.op == "add" and e.lhs == sym and isinstance(e.rhs, Const):
        return e.rhs.value
    return None


def _leaf_set(op, lhs, rhs, sym):
    """Solution set of one comparison leaf over `sym`, or None."""
    if op == "slt":
        # v <s k  iff  (v + 2^63) <u (k + 2^63); shift both sides and retry.
        lhs2 = simplify(Bin("add", lhs, const64(_BIAS))) if not isinstance(lhs, Const) \
            else const64(lhs.value + _BIAS)
        rhs2 = simplify(Bin("add", rhs, const64(_BIAS))) if not isinstance(rhs, Const) \
            else const64(rhs.value + _BIAS)
        return _leaf_set("ult", lhs2, rhs2, sym)
    if isinstance(rhs, Const) and not isinstance(lhs, Const):
        c = _affine_of(lhs, sym)
        if c is None:
            return None
        k = rhs.value
        if op == "eq":
            return IntervalSet.singleton(64, k - c)
        if op == "ult":
            # x + c < k  ->  x in [-c, k-c), a wrapped window of k values
            return IntervalSet.wrapped(64, -c, k)
    elif isinstance(lhs, Const) and not isinstance(rhs, Const):
        c = _affine_of(rhs, sym)
        if c is None:
            return None
        k = lhs.value
        if op == "eq":
            return IntervalSet.singleton(64, k - c)
        if op == "ult":
            # k < x + c  ->  x + c in [k+1, 2^64)
            return IntervalSet.wrapped(64, k + 1 - c, _DOM64 - k - 1)
    return None


def _cond_set(e, sym):
    """Solution set of a 1-bit term over a single 64-bit symbol, or None."""
    if isinstance(e, Const):
        return IntervalSet.full(64) if e.value else IntervalSet.empty(64)
    if isinstance(e, Not):
        inner = _cond_set(e.operand, sym)
        return None if inner is None else inner.complement()
    if isinstance(e, Ite):
        c = _cond_set(e.cond, sym)
        t = _cond_set(e.then, sym)
        o = _cond_set(e.orelse, sym)
        if c is None or t is None or o is None:
            return None
        return c.intersect(t).union(c.complement().intersect(o))
    if isinstance(e, Bin):
        if e.op in ("ult", "slt"):
            return _leaf_set(e.op, e.lhs, e.rhs, sym)
        if e.op == "eq":
            from .expr import width_of
            if width_of(e.lhs) == 64:
                return _leaf_set("eq", e.lhs, e.rhs, sym)
            # Boolean equivalence of two 1-bit subterms.
            l = _cond_set(e.lhs, sym)
            r = _cond_set(e.rhs, sym)
            if l is None or r is None:
                return None
            return l.intersect(r).union(l.complement().intersect(r.complement()))
    return None


def _decide_word_group(atoms, sym):
    """Intersect per-atom interval sets for one 64-bit symbol."""
    acc = IntervalSet.full(64)
    for a in atoms:
        s = _cond_set(a, sym)
        if s is None:
            return SatResult.UNKNOWN, None
        acc = acc.intersect(s)
        if acc.is_empty():
            return SatResult.UNSAT, None
    return SatResult.SAT, acc.min_value()


def _decide_bool_group(atoms, syms):
    """Exhaust assignments of a small all-1-bit symbol group."""
    serials = sorted(s.serial for s in syms)
    for values in itertools.product((0, 1), repeat=len(serials)):
        env = dict(zip(serials, values))
        if all(eval_expr(a, env) for a in atoms):
            return SatResult.SAT, env
    return SatResult.UNSAT, None


def _solve(atoms):
    """Decide a conjunction; returns (SatResult, partial model serial->value).

    The model covers every symbol mentioned by a decided group. Unsat is
    sound: one unsatisfiable group refutes the whole conjunction even when
    other groups are undecidable.
    """
    residual = []
    for raw in atoms:
        a = simplify(raw)
        if isinstance(a, Const):
            if a.value == 0:
                return SatResult.UNSAT, None
            continue
        residual.append(a)
    if not residual:
        return SatResult.SAT, {}

    # Union-find over symbols that co-occur in an atom.
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    atom_syms = []
    for a in residual:
        syms = symbols_of(a)
        atom_syms.append(syms)
        for s in syms:
            parent.setdefault(s, s)
        it = iter(syms)
        first = next(it)
        for s in it:
            union(first, s)

    groups = {}
    for a, syms in zip(residual, atom_syms):
        root = find(next(iter(syms)))
        groups.setdefault(root, (set(), []))
        groups[root][0].update(syms)
        groups[root][1].append(a)

    model = {}
    unknown = False
    for syms, group_atoms in groups.values():
        if len(syms) == 1:
            s = next(iter(syms))
            if s.width == 1:
                res, env = _decide_bool_group(group_atoms, syms)
                if res is SatResult.UNSAT:
                    return SatResult.UNSAT, None
                model.update(env)
            else:
                res, v = _decide_word_group(group_atoms, s)
                if res is SatResult.UNSAT:
                    return SatResult.UNSAT, None
                if res is SatResult.UNKNOWN:
                    unknown = True
                else:
                    model[s.serial] = v
        elif all(s.width == 1 for s in syms) and len(syms) <= _MAX_BOOL_SYMS:
            res, env = _decide_bool_group(group_atoms, syms)
            if res is SatResult.UNSAT:
                return SatResult.UNSAT, None
            model.update(env)
        else:
            unknown = True
    if unknown:
        return SatResult.UNKNOWN, model
    return SatResult.SAT, model


def is_satisfiable(pc) -> SatResult:
    """Decide a path condition (a sequence of 1-bit constraints)."""
    res, _ = _solve(list(pc))
    return res


def may_hold(pc, cond) -> bool:
    """True when cond is possibly true under pc (Unknown counts as possible)."""
    return is_satisfiable(list(pc) + [cond]) is not SatResult.UNSAT


def may_hold_result(pc, cond) -> SatResult:
    return is_satisfiable(list(pc) + [cond])


def unique_value(pc, e):
    """Concrete value entailed for e by pc, NOT_UNIQUE, or UNKNOWN_VALUE."""
    se = simplify(e)
    if isinstance(se, Const):
        return se.value
    res, model = _solve(list(pc))
    if res is SatResult.UNSAT:
        return UNKNOWN_VALUE
    env = dict(model or {})
    for s in symbols_of(se):
        env.setdefault(s.serial, 0)
    try:
        candidate = eval_expr(se, env)
    except KeyError:
        return UNKNOWN_VALUE
    other = may_hold_result(pc, not_(eq(se, const64(candidate))))
    if other is SatResult.UNSAT:
        return candidate
    if res is SatResult.SAT and other is SatResult.SAT:
        return NOT_UNIQUE
    return UNKNOWN_VALUE
