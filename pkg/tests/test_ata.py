import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ratlogic.ata import (
    AtaError, accepts_from, ata_to_sfrmtl, bd_and, bd_formula, bd_set, beh, bottom_up, eg1, format_ata,
    grid_words, parse_ata, random_ata, region_class, region_representatives, sfr_to_tptl, simulate,
    tptl_to_ata, triangle, validate_ata,
)
from ratlogic.formula import max_constant, parse_formula, pretty, unparse
from ratlogic.semantics import Evaluator, eval_tptl, evaluate
from ratlogic.timed import TimedWord

from conftest import word


def random_singleton_words(rng, alphabet, K, n, max_len=5):
    grid = [Fraction(i, 4) for i in range(4 * (K + 2) + 1)]
    for _ in range(n):
        stamps = sorted([Fraction(0)] + [rng.choice(grid) for _ in range(rng.randint(0, max_len - 1))])
        yield TimedWord.of([(frozenset([rng.choice(alphabet)]), t) for t in stamps])


def automata(seed, n):
    rng = random.Random(seed)
    return [eg1()] + [random_ata(rng, locations=rng.randint(1, 3)) for _ in range(n)]


@pytest.mark.parametrize("w, expected", [
    (word("b", 0, "b", "0.5"), True),
    (word("a", 0, "a", "1"), False),
    (word("a", 0, "b", "1.5"), True),
    (word("a", 0), True),
    (word("a", 0, "a", "0.5"), False),
])
def test_eg1_simulation(w, expected):
    assert simulate(eg1(), w) is expected


def test_eg1_is_valid_and_round_trips():
    A = eg1()
    assert validate_ata(A) == []
    B = parse_ata(format_ata(A))
    assert format_ata(B) == format_ata(A)


def test_self_reset_is_rejected():
    text = format_ata(eg1()).replace("(and sa x<1)", "(and (x. sa) x<1)")
    errs = validate_ata(parse_ata(text))
    assert any("x.sa" in e for e in errs)


def test_cyclic_order_is_rejected():
    text = format_ata(eg1()) + "order s0 < sa\n"
    assert any("cyclic" in e for e in validate_ata(parse_ata(text)))


def test_call_outside_order_is_rejected():
    text = format_ata(eg1()).replace("trans sl b := sl", "trans sl b := sa")
    assert any("not below" in e for e in validate_ata(parse_ata(text)))


def test_multi_letter_events_need_the_adapter():
    w = word("ab", 0)
    with pytest.raises(AtaError):
        simulate(eg1(), w)
    assert simulate(eg1(), w, adapter=True)


def test_beh_of_eg1():
    b = beh(eg1())
    assert unparse(b.formulas["sl"]) == "(boxns b)"
    assert unparse(b.formulas["sa"]) == "(uns (in [0,1)) (in (1,inf)))"
    assert pretty(b.formula) == "(((a ∧ x.O(x∈[0,1) Uns x∈(1,inf))) ∨ b) W (a ∧ Ō□ns b))"


def test_beh_of_universal_automaton():
    A = parse_ata("ata K=0\nalphabet a b\nloc s init final\ntrans s a := s\ntrans s b := s\n")
    w = word("a", 0, "b", "0.5")
    assert eval_tptl(w, 1, 0, beh(A).formula)
    assert unparse(beh(A).formula) == "(boxns true)"


def test_beh_agrees_with_simulation():
    rng = random.Random(2)
    for A in automata(2, 10):
        f = beh(A).formula
        for w in random_singleton_words(rng, A.alphabet, A.K, 30):
            assert simulate(A, w) == eval_tptl(w, 1, 0, f), format_ata(A)


def test_bd_entries_for_eg1():
    A = eg1()
    sa = {(b.start.index, b.exit.index): str(b) for b in bd_set(A, "sa")}
    assert sa[(0, 3)] == "BD(sa,R0,R+1) = (□ns (a ∨ b), □ns (a ∨ b) ∨ ε, ε, (a ∨ b))"
    sl = {(b.start.index, b.exit.index): str(b) for b in bd_set(A, "sl")}
    assert sl[(1, 3)] == "BD(sl,R1,R+1) = (⊤, □ns b, □ns b ∨ ε, b W ⊥)"


def test_bd_formulas_describe_location_behaviour():
    A = eg1()
    words = list(grid_words(A.alphabet, 3, "1/2", 3))
    for s in bottom_up(A):
        bds = bd_set(A, s)
        for w in words:
            assert accepts_from(A, w, s) == any(evaluate(w, 1, bd_formula(b)) for b in bds), (s, w)


def test_bd_conjunction_is_componentwise():
    A = eg1()
    sa = [b for b in bd_set(A, "sa") if b.start.index == 1][0]
    sl = [b for b in bd_set(A, "sl") if b.start.index == 1][0]
    both = bd_and(sa, sl)
    assert both.start == sa.start
    words = list(grid_words(A.alphabet, 3, "1/2", 3))
    for w in words:
        assert evaluate(w, 1, bd_formula(both)) == (evaluate(w, 1, bd_formula(sa)) and evaluate(w, 1, bd_formula(sl)))
    with pytest.raises(AtaError):
        bd_and(sa, bd_set(A, "sl")[0])


def test_tableau_examples():
    f = parse_formula("(freeze (tuntil true (and a (in (0,1)))))", "tptl")
    A = tptl_to_ata(f, ["a", "b"])
    assert len(A.locations) == 2
    rng = random.Random(3)
    for w in random_singleton_words(rng, ["a", "b"], 1, 50):
        assert simulate(A, w) == eval_tptl(w, 1, 0, f)
    B = tptl_to_ata(parse_formula("(boxns b)", "tptl"), ["a", "b"])
    loops = [s for s in B.locations if B.trans(s, "b") == parse_formula(s)]
    assert len(loops) == 1 and loops[0] in B.finals


def test_tableau_round_trip_on_beh():
    rng = random.Random(4)
    for A in automata(4, 10):
        f = beh(A).closed
        B = tptl_to_ata(f, A.alphabet)
        g = beh(B).closed
        for w in random_singleton_words(rng, A.alphabet, A.K, 30):
            assert simulate(B, w) == eval_tptl(w, 1, 0, f) == eval_tptl(w, 1, 0, g)


def test_sfr_to_tptl_examples():
    rng = random.Random(5)
    for text in ("(rat (0,1) (rat (1,2) (star (union a b))))", "(rat [0,inf) (star true))"):
        f = parse_formula(text)
        g = sfr_to_tptl(f)
        for w in random_singleton_words(rng, ["a", "b"], 2, 60):
            assert evaluate(w, 1, f) == eval_tptl(w, 1, 0, g)


def test_sfr_to_tptl_rejects_cycles():
    with pytest.raises(AtaError):
        sfr_to_tptl(parse_formula("(rat (0,1) (star (cat a b)))"))


def test_sfr_to_tptl_on_automaton_translations():
    rng = random.Random(6)
    translated = 0
    for A in automata(6, 12):
        S = ata_to_sfrmtl(A)
        try:
            T = sfr_to_tptl(S)
        except AtaError:
            continue
        translated += 1
        for w in random_singleton_words(rng, A.alphabet, A.K, 30):
            assert Evaluator(w).holds(S, 1) == eval_tptl(w, 1, 0, T)
    assert translated > 0


def test_ata_to_sfrmtl_of_universal_automaton():
    A = parse_ata("ata K=1\nalphabet a b\nloc s init final\ntrans s a := s\ntrans s b := s\n")
    f = ata_to_sfrmtl(A)
    for w in grid_words(A.alphabet, 2, "1/2", 3):
        assert evaluate(w, 1, f)


def test_small_triangle():
    for A in automata(7, 5):
        K = max(A.K, max_constant(ata_to_sfrmtl(A)), max_constant(beh(A).formula))
        ws = region_representatives(grid_words(A.alphabet, K + 2, "1/4", 3), K)
        assert triangle(A, ws) == []


def test_grid_words_start_at_zero():
    ws = list(grid_words(["a"], 1, "1/2", 2))
    assert len(ws) == 1 + 3
    assert all(w.stamps[0] == 0 and len(w) <= 2 for w in ws)


@given(st.integers(0, 10_000))
def test_region_class_determines_verdicts(seed):
    rng = random.Random(seed)
    A = eg1()
    K = 1
    n = rng.randint(1, 4)
    gaps = [rng.choice([0, 1]) * rng.randint(0, 2) + Fraction(rng.randint(0, 3), 4) for _ in range(n - 1)]
    letters = [rng.choice("ab") for _ in range(n)]
    stamps = [Fraction(0)]
    for g in gaps:
        stamps.append(stamps[-1] + g)
    w = TimedWord.of([(frozenset(x), t) for x, t in zip(letters, stamps)])
    # squeeze the fractional parts while keeping every difference in its region
    v = TimedWord.of([(frozenset(x), math.floor(t) + (t - math.floor(t)) * Fraction(9, 10)) for x, t in zip(letters, stamps)])
    if region_class(v, K) != region_class(w, K):
        return
    assert simulate(A, v) == simulate(A, w)
    assert eval_tptl(v, 1, 0, beh(A).formula) == eval_tptl(w, 1, 0, beh(A).formula)
