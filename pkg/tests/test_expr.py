from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from emlcheck.expr import (
    Bin, Const, Ite, Not, Sym,
    add, and_, const64, eq, eval_expr, lshr, not_, or_, render,
    shl, simplify, slt, sub, ult, xor,
)

X = Sym(64, "x", 0)
Y = Sym(64, "y", 1)
B = Sym(1, "b", 2)


def test_xor_self_is_zero():
    assert simplify(Bin("xor", X, X)) == const64(0)


def test_constant_fold_add():
    assert simplify(Bin("add", Const(64, 2), Const(64, 3))) == Const(64, 5)


def test_constant_fold_ult():
    assert simplify(Bin("ult", Const(64, 1), Const(64, 2))) == Const(1, 1)


def test_ite_constant_condition():
    assert simplify(Ite(Const(1, 1), X, Y)) == X
    assert simplify(Ite(Const(1, 0), X, Y)) == Y


def test_identity_rules():
    assert add(X, const64(0)) == X
    assert and_(X, const64(0)) == const64(0)
    assert or_(X, const64(0)) == X
    assert sub(X, X) == const64(0)
    assert not_(not_(B)) == B


def test_sub_constant_becomes_negated_add():
    e = sub(X, const64(8))
    assert isinstance(e, Bin) and e.op == "add"
    assert e.rhs == const64(-8)


def test_add_chain_folds():
    e = add(add(X, const64(8)), const64(8))
    assert e == add(X, const64(16))


def test_shift_past_width_is_zero():
    assert shl(const64(1), const64(64)) == const64(0)
    assert lshr(const64(1 << 63), const64(200)) == const64(0)


def test_width_checks():
    with pytest.raises(ValueError):
        Bin("add", X, B)
    with pytest.raises(ValueError):
        Not(X)
    with pytest.raises(ValueError):
        Const(64, 1 << 64)


def test_render_stable():
    assert render(const64(42)) == "0x2a"
    assert render(X) == "x#0"
    assert render(add(X, const64(8))) == "x#0 + 0x8"
    assert render(add(X, const64(-8))) == "x#0 - 0x8"
    assert render(ult(X, const64(5))) == "(x#0 <u 0x5)"


@st.composite
def exprs(draw, depth=0):
    if depth >= 4 or draw(st.booleans()):
        if draw(st.booleans()):
            return Const(64, draw(st.integers(0, (1 << 64) - 1)))
        return [X, Y][draw(st.integers(0, 1))]
    op = draw(st.sampled_from(["add", "sub", "and", "or", "xor", "shl", "lshr"]))
    return Bin(op, draw(exprs(depth=depth + 1)), draw(exprs(depth=depth + 1)))


@st.composite
def conditions(draw):
    a = draw(exprs())
    b = draw(exprs())
    op = draw(st.sampled_from(["eq", "ult", "slt"]))
    c = Bin(op, a, b)
    if draw(st.booleans()):
        c = Not(c)
    if draw(st.booleans()):
        return Ite(c, draw(exprs()), draw(exprs()))
    return c


@given(exprs(), st.integers(0, (1 << 64) - 1), st.integers(0, (1 << 64) - 1))
def test_simplify_preserves_semantics(e, vx, vy):
    env = {0: vx, 1: vy}
    assert eval_expr(simplify(e), env) == eval_expr(e, env)


@given(conditions(), st.integers(0, (1 << 64) - 1), st.integers(0, (1 << 64) - 1))
def test_simplify_preserves_condition_semantics(e, vx, vy):
    env = {0: vx, 1: vy}
    assert eval_expr(simplify(e), env) == eval_expr(e, env)


def test_eval_matches_python_semantics():
    rng = random.Random(7)
    mask = (1 << 64) - 1
    for _ in range(500):
        a, b = rng.getrandbits(64), rng.getrandbits(64)
        assert eval_expr(add(Sym(64, "a", 0), Sym(64, "b", 1)), {0: a, 1: b}) == (a + b) & mask
        assert eval_expr(sub(Sym(64, "a", 0), Sym(64, "b", 1)), {0: a, 1: b}) == (a - b) & mask
        sa = a - (1 << 64) if a >> 63 else a
        sb = b - (1 << 64) if b >> 63 else b
        assert eval_expr(slt(Sym(64, "a", 0), Sym(64, "b", 1)), {0: a, 1: b}) == int(sa < sb)
        assert eval_expr(ult(Sym(64, "a", 0), Sym(64, "b", 1)), {0: a, 1: b}) == int(a < b)
        assert eval_expr(eq(xor(Sym(64, "a", 0), Sym(64, "b", 1)), const64(0)),
                         {0: a, 1: b}) == int(a == b)
