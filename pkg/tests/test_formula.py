import random

import pytest
from hypothesis import given, strategies as st

from ratlogic.formula import (
    DERIVED, TRUE, Atom, Comp, Count, DialectError, Diamond, FormulaError, ModCount, Not, Pnueli, Prop, Rat,
    Star, Until, URat, cat, expand_derived, formula_size, has_derived, parse_formula, parse_ratexpr,
    random_derived, random_formula, star, top_level_set, union, unparse, walk,
)
from ratlogic.timed import ALWAYS, Interval

a, b = Prop("a"), Prop("b")


def test_parse_example_urat():
    f = parse_formula("(urat (0,1) (cat a (star b)) a b)", "ratmtl")
    assert f == URat(Interval.open(0, 1), cat(Atom(a), star(Atom(b))), a, b)


def test_parse_true_and_even_count():
    assert parse_formula("true") is TRUE
    f = parse_formula("(rat (1,2) (star (cat a a)))")
    assert f == Rat(Interval.open(1, 2), Star(cat(Atom(a), Atom(a))))


def test_syntax_error_has_position():
    with pytest.raises(FormulaError, match="line 2, column"):
        parse_formula("(until (0,1)\n a )")


@pytest.mark.parametrize("text, dialect", [
    ("(freeze (in [0,1]))", "mtl"),
    ("(rat (0,1) a)", "mtl"),
    ("(until (0,1) a b)", "tptl"),
    ("(in [0,1])", "tptl"),
])
def test_dialect_violations(text, dialect):
    with pytest.raises(DialectError):
        parse_formula(text, dialect)


@given(st.integers(0, 10_000))
def test_unparse_round_trip(seed):
    rng = random.Random(seed)
    f = random_formula(rng, kinds=("rat", "urat", "um"))
    assert parse_formula(unparse(f)) is f
    g = random_derived(rng)
    assert parse_formula(unparse(g)) is g


def test_expand_mod_count_even():
    f = expand_derived(parse_formula("(mc (1,2) 0 2 a)"))
    assert unparse(f) == "(rat (1,2) (cat (star (cat (star (not a)) a (star (not a)) a)) (star (not a))))"


def test_expand_diamond_and_pnueli():
    assert expand_derived(Diamond(Interval.open(0, 1), a)) == Until(Interval.open(0, 1), TRUE, a)
    pn = expand_derived(Pnueli(ALWAYS, (a, b)))
    t = star(Atom(TRUE))
    assert pn == Rat(ALWAYS, cat(t, Atom(a), t, Atom(b), t))


@given(st.integers(0, 10_000))
def test_expand_removes_every_derived_node(seed):
    f = random_derived(random.Random(seed))
    g = expand_derived(f)
    assert not has_derived(g)
    assert not any(isinstance(n, DERIVED) for n in walk(g))


def test_expand_rejects_bad_counts():
    with pytest.raises(FormulaError):
        expand_derived(Count(ALWAYS, -1, a))


def test_top_level_set():
    assert set(top_level_set(parse_formula("(rat (0,1) (cat a (star b)))"))) == {a, b}
    assert top_level_set(parse_formula("(rat (0,1) eps)")) == ()
    inner = parse_formula("(rat (0,1) (not (rat (0,1) a)))")
    assert top_level_set(inner) == (Not(parse_formula("(rat (0,1) a)")),)
    with pytest.raises(FormulaError):
        top_level_set(a)


def test_top_level_set_ignores_union_order():
    x = Rat(ALWAYS, union(Atom(a), Atom(b)))
    y = Rat(ALWAYS, union(Atom(b), Atom(a)))
    assert set(top_level_set(x)) == set(top_level_set(y))


@pytest.mark.parametrize("text, size", [
    ("(until (0,2) a (and (not b) (until (0,1) c d)))", 4),
    ("a", 0),
    ("(until [0,inf) true a)", 1),
])
def test_formula_size(text, size):
    assert formula_size(parse_formula(text)) == size


def test_hash_consing_makes_equal_nodes_identical():
    assert parse_formula("(and a b)") is parse_formula("(and a b)")
    assert Comp(Atom(a)) is Comp(Atom(a))
