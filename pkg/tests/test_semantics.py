import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ratlogic.ata import beh, eg1
from ratlogic.formula import TRUE, Prop, parse_formula, random_derived, random_formula
from ratlogic.reduction import random_word
from ratlogic.semantics import (
    BatchEvaluator, EvalError, Evaluator, eval_tptl, evaluate, language_member, marking, oracle_eval, seg, tseg,
)
from ratlogic.timed import Interval

from conftest import word

EX1 = parse_formula("(urat (0,1) (cat a (star b)) a b)")
EX2 = parse_formula("(rat (0,1) (not (rat (0,1) a)))")
EX3 = parse_formula("(rat (0,1) (star (rat (0,1) a)))")

WORKED = [
    (word("a", 0, "ab", "0.3", "ab", "0.99"), EX1, True),
    (word("a", 0, "a", "0.3", "a", "0.5", "a", "0.9", "b", "0.99"), EX1, False),
    (word("ab", 0, "ab", "0.91", "a", "1.2"), EX2, False),
    (word("ab", 0, "ab", "0.91", "b", "1.1"), EX2, True),
    (word("ab", 0, "ab", "0.7", "b", "0.98", "ab", "1.4"), EX3, False),
]


@pytest.mark.parametrize("w, f, expected", WORKED)
def test_worked_examples(w, f, expected):
    assert evaluate(w, 1, f) is expected
    assert oracle_eval(w, 1, f) is expected


def test_eval_tptl_examples():
    f = parse_formula("(freeze (tuntil true (and b (in (1,2)))))", "tptl")
    assert eval_tptl(word("a", 0, "b", "1.5"), 1, 0, f)
    w = word("a", 0, "b", "0.4")
    zero = parse_formula("(freeze (in [0,0]))", "tptl")
    assert all(eval_tptl(w, i, Fraction(7), zero) for i in (1, 2))
    assert eval_tptl(word("b", 0, "b", "0.5"), 1, 0, beh(eg1()).formula)


def test_position_out_of_range():
    with pytest.raises(EvalError):
        evaluate(word("a", 0), 2, TRUE)


def test_seg_and_tseg():
    w = word("a", 0, "ab", "0.3", "ab", "0.99")
    S = [Prop("a"), Prop("b")]
    assert seg(w, S, 1, 3) == [frozenset(S)]
    assert seg(w, S, 1, 2) == []
    w2 = word("ab", 0, "ab", "0.91", "a", "1.2")
    inner = parse_formula("(not (rat (0,1) a))")
    assert len(tseg(w2, [inner], Interval.open(0, 1), 1)) == 1


def test_tseg_includes_earlier_points_at_the_same_stamp():
    w = word("a", 0, "b", 1, "a", 1)
    assert len(tseg(w, [Prop("a")], Interval.point(0), 3)) == 2


def test_language_member():
    assert language_member(word("a", 0), TRUE)
    assert not language_member(word("b", 0), Prop("a"))
    assert language_member(WORKED[0][0], EX1)


@given(st.integers(0, 100_000))
def test_marking_is_the_truth_table(seed):
    rng = random.Random(seed)
    w = random_word(rng, ("a", "b"), 5, 3)
    S = [random_formula(rng, 1, 2), Prop("a")]
    m = marking(w, S)
    for k in w.positions():
        assert m.at(k) == frozenset(f for f in S if oracle_eval(w, k, f))


@given(st.integers(0, 100_000))
def test_evaluator_agrees_with_naive_oracle(seed):
    rng = random.Random(seed)
    f = random_formula(rng, 2, 3, ("rat", "urat", "um"))
    w = random_word(rng, ("a", "b"), 5, 3)
    ev = Evaluator(w)
    for i in w.positions():
        assert ev.holds(f, i) == oracle_eval(w, i, f)


@given(st.integers(0, 100_000))
def test_derived_nodes_agree_with_oracle(seed):
    rng = random.Random(seed)
    f = random_derived(rng)
    w = random_word(rng, ("a", "b"), 5, 3)
    for i in w.positions():
        assert evaluate(w, i, f) == oracle_eval(w, i, f)


@given(st.integers(0, 100_000), st.integers(1, 5))
def test_batch_evaluator_agrees_with_evaluator(seed, n):
    rng = random.Random(seed)
    f = random_formula(rng, 2, 3, ("rat", "urat"))
    words = []
    while len(words) < 30:
        w = random_word(rng, ("a", "b"), n, 3)
        if len(w) == n:
            words.append(w)
    batch = BatchEvaluator(words)
    for i in range(1, n + 1):
        got = batch.holds(f, i)
        assert list(got) == [Evaluator(w).holds(f, i) for w in words]


def test_batch_evaluator_handles_freeze_and_valuations():
    b = beh(eg1())
    words = [word("b", 0, "b", "0.5"), word("a", 0, "a", 1), word("a", 0, "b", "1.5"), word("a", 0, "a", "0.5")]
    words = [w for w in words if len(w) == 2]
    got = BatchEvaluator(words).holds(b.formula, 1, 0)
    assert list(got) == [Evaluator(w).holds(b.formula, 1, 0) for w in words]
    assert list(got) == [True, False, True, False]
    with pytest.raises(EvalError):
        BatchEvaluator([word("a", 0), word("a", 0, "b", 1)])
