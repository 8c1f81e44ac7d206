"""Fixed-width bitvector expression terms.

Two sorts exist: 64-bit machine words and 1-bit conditions. Terms are
immutable; the module-level constructors normalize as they build (constant
folding plus a handful of algebraic identities), so expressions produced by
the engine stay small and constant subterms collapse eagerly. Shift amounts
of 64 or more yield zero, matching wide bitvector shift semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

MASK64 = (1 << 64) - 1

# 64-bit binary operators and the 1-bit-result comparisons.
ARITH_OPS = ("add", "sub", "and", "or", "xor", "shl", "lshr")
CMP_OPS = ("eq", "ult", "slt")


@dataclass(frozen=True)
class Const:
    width: int
    value: int

    def __post_init__(self):
        if self.width not in (1, 64):
            raise ValueError(f"bad width: {self.width}")
        if not 0 <= self.value < (1 << self.width):
            raise ValueError(f"constant does not fit width {self.width}: {self.value}")


@dataclass(frozen=True)
class Sym:
    width: int
    tag: str
    serial: int

    def __post_init__(self):
        if self.width not in (1, 64):
            raise ValueError(f"bad width: {self.width}")


@dataclass(frozen=True)
class Bin:
    op: str
    lhs: object
    rhs: object

    def __post_init__(self):
        lw, rw = width_of(self.lhs), width_of(self.rhs)
        if self.op in ARITH_OPS:
            if lw != 64 or rw != 64:
                raise ValueError(f"{self.op} needs 64-bit operands")
        elif self.op == "eq":
            if lw != rw:
                raise ValueError("eq needs equal-width operands")
        elif self.op in ("ult", "slt"):
            if lw != 64 or rw != 64:
                raise ValueError(f"{self.op} needs 64-bit operands")
        else:
            raise ValueError(f"unknown operator: {self.op}")


@dataclass(frozen=True)
class Not:
    operand: object

    def __post_init__(self):
        if width_of(self.operand) != 1:
            raise ValueError("not needs a 1-bit operand")


@dataclass(frozen=True)
class Ite:
    cond: object
    then: object
    orelse: object

    def __post_init__(self):
        if width_of(self.cond) != 1:
            raise ValueError("ite condition must be 1-bit")
        if width_of(self.then) != width_of(self.orelse):
            raise ValueError("ite branches must share a width")


def width_of(e) -> int:
    if isinstance(e, (Const, Sym)):
        return e.width
    if isinstance(e, Bin):
        return 64 if e.op in ARITH_OPS else 1
    if isinstance(e, (Not,)):
        return 1
    if isinstance(e, Ite):
        return width_of(e.then)
    raise TypeError(f"not an expression: {e!r}")


TRUE = Const(1, 1)
FALSE = Const(1, 0)


def const64(value: int) -> Const:
    return Const(64, value & MASK64)


def bit(value: int) -> Const:
    return TRUE if value else FALSE


def _signed(v: int) -> int:
    return v - (1 << 64) if v >> 63 else v


def _fold_arith(op: str, a: int, b: int) -> int:
    if op == "add":
        return (a + b) & MASK64
    if op == "sub":
        return (a - b) & MASK64
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "shl":
        return (a << b) & MASK64 if b < 64 else 0
    if op == "lshr":
        return a >> b if b < 64 else 0
    raise ValueError(op)


def add(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return const64(a.value + b.value)
    if isinstance(a, Const):
        a, b = b, a
    if isinstance(b, Const):
        if b.value == 0:
            return a
        # Fold constant chains so affine terms stay affine.
        if isinstance(a, Bin) and a.op == "add" and isinstance(a.rhs, Const):
            return add(a.lhs, const64(a.rhs.value + b.value))
    return Bin("add", a, b)


def sub(a, b):
    if a == b:
        return const64(0)
    if isinstance(b, Const):
        # Canonicalize subtraction of a constant as addition of its negation.
        return add(a, const64(-b.value))
    if isinstance(a, Const) and isinstance(b, Const):
        return const64(a.value - b.value)
    return Bin("sub", a, b)


def and_(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return const64(a.value & b.value)
    for x, y in ((a, b), (b, a)):
        if isinstance(x, Const):
            if x.value == 0:
                return const64(0)
            if x.value == MASK64:
                return y
    if a == b:
        return a
    return Bin("and", a, b)


def or_(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return const64(a.value | b.value)
    for x, y in ((a, b), (b, a)):
        if isinstance(x, Const):
            if x.value == 0:
                return y
            if x.value == MASK64:
                return const64(MASK64)
    if a == b:
        return a
    return Bin("or", a, b)


def xor(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return const64(a.value ^ b.value)
    if a == b:
        return const64(0)
    for x, y in ((a, b), (b, a)):
        if isinstance(x, Const) and x.value == 0:
            return y
    return Bin("xor", a, b)


def shl(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return const64(_fold_arith("shl", a.value, b.value))
    if isinstance(b, Const) and b.value == 0:
        return a
    if isinstance(a, Const) and a.value == 0:
        return const64(0)
    return Bin("shl", a, b)


def lshr(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return const64(_fold_arith("lshr", a.value, b.value))
    if isinstance(b, Const) and b.value == 0:
        return a
    if isinstance(a, Const) and a.value == 0:
        return const64(0)
    return Bin("lshr", a, b)


def eq(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return bit(a.value == b.value)
    if a == b:
        return TRUE
    return Bin("eq", a, b)


def ult(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return bit(a.value < b.value)
    if a == b:
        return FALSE
    if isinstance(b, Const) and b.value == 0:
        return FALSE
    return Bin("ult", a, b)


def slt(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return bit(_signed(a.value) < _signed(b.value))
    if a == b:
        return FALSE
    return Bin("slt", a, b)


def not_(a):
    if isinstance(a, Const):
        return bit(1 - a.value)
    if isinstance(a, Not):
        return a.operand
    return Not(a)


def ite(c, t, e):
    if isinstance(c, Const):
        return t if c.value else e
    if t == e:
        return t
    return Ite(c, t, e)


_BIN_CTORS = {
    "add": add, "sub": sub, "and": and_, "or": or_, "xor": xor,
    "shl": shl, "lshr": lshr, "eq": eq, "ult": ult, "slt": slt,
}


def simplify(e):
    """Rebuild a term bottom-up through the normalizing constructors."""
    if isinstance(e, (Const, Sym)):
        return e
    if isinstance(e, Bin):
        return _BIN_CTORS[e.op](simplify(e.lhs), simplify(e.rhs))
    if isinstance(e, Not):
        return not_(simplify(e.operand))
    if isinstance(e, Ite):
        return ite(simplify(e.cond), simplify(e.then), simplify(e.orelse))
    raise TypeError(f"not an expression: {e!r}")


def eval_expr(e, env: dict) -> int:
    """Evaluate under a full assignment (serial -> value). Raises on gaps."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Sym):
        return env[e.serial]
    if isinstance(e, Bin):
        a = eval_expr(e.lhs, env)
        b = eval_expr(e.rhs, env)
        if e.op in ARITH_OPS:
            return _fold_arith(e.op, a, b)
        if e.op == "eq":
            return int(a == b)
        if e.op == "ult":
            return int(a < b)
        if e.op == "slt":
            return int(_signed(a) < _signed(b))
    if isinstance(e, Not):
        return 1 - eval_expr(e.operand, env)
    if isinstance(e, Ite):
        return eval_expr(e.then if eval_expr(e.cond, env) else e.orelse, env)
    raise TypeError(f"not an expression: {e!r}")


def symbols_of(e) -> set:
    out = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Sym):
            out.add(n)
        elif isinstance(n, Bin):
            stack.append(n.lhs)
            stack.append(n.rhs)
        elif isinstance(n, Not):
            stack.append(n.operand)
        elif isinstance(n, Ite):
            stack.extend((n.cond, n.then, n.orelse))
    return out


_OP_GLYPH = {
    "add": "+", "sub": "-", "and": "&", "or": "|", "xor": "^",
    "shl": "<<", "lshr": ">>", "eq": "==", "ult": "<u", "slt": "<s",
}


def render(e) -> str:
    """Stable human-readable rendering, used in violation details."""
    if isinstance(e, Const):
        return f"0x{e.value:x}"
    if isinstance(e, Sym):
        return f"{e.tag}#{e.serial}"
    if isinstance(e, Bin):
        if e.op == "add" and isinstance(e.rhs, Const):
            c = e.rhs.value
            if c >> 63:
                return f"{render(e.lhs)} - 0x{(1 << 64) - c:x}"
            return f"{render(e.lhs)} + 0x{c:x}"
        return f"({render(e.lhs)} {_OP_GLYPH[e.op]} {render(e.rhs)})"
    if isinstance(e, Not):
        return f"!{render(e.operand)}"
    if isinstance(e, Ite):
        return f"ite({render(e.cond)}, {render(e.then)}, {render(e.orelse)})"
    raise TypeError(f"not an expression: {e!r}")
