from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ratlogic.timed import (
    ALWAYS, Extension, Interval, TimedWord, WordError, erase, format_word, in_interval,
    parse_interval, parse_word, region_of, regions, validate_word,
)

from conftest import word


@pytest.mark.parametrize("w, problem", [
    (word("a", 0, "b", "0.5"), None),
    (word("a", "0.3", "b", 1), "first stamp nonzero"),
    (word("a", 0, "b", "0.5", "c", "0.4"), "non-monotone at 3"),
    (TimedWord((), ()), "empty word"),
    (TimedWord((frozenset(),), (Fraction(0),)), "empty event set at 1"),
])
def test_validate_word(w, problem):
    assert validate_word(w) == problem


def test_strict_words_reject_repeated_stamps():
    assert validate_word(word("a", 0, "b", 0), strict=True) == "repeated stamp at 2"
    assert validate_word(word("a", 0, "b", 0)) is None


@pytest.mark.parametrize("t, base, iv, expected", [
    ("0.99", 0, Interval.open(0, 1), True),
    (1, 0, Interval.open(0, 1), False),
    ("0.5", "0.7", ALWAYS, False),
    (1, 0, Interval.point(1), True),
])
def test_in_interval(t, base, iv, expected):
    assert in_interval(Fraction(str(t)), Fraction(str(base)), iv) is expected


@pytest.mark.parametrize("bad", [(2, 1, True, True), (1, 1, False, True), (0, None, True, True), (-1, 2, True, True)])
def test_interval_invariants(bad):
    with pytest.raises(ValueError):
        Interval(*bad)


def test_interval_text_round_trip():
    for text in ["(0,1)", "[1,2)", "[0,inf)", "[3,3]"]:
        assert str(parse_interval(text)) == text


@pytest.mark.parametrize("t, K, text", [(0, 1, "[0,0]"), ("0.7", 1, "(0,1)"), ("3.2", 1, "(1,inf)"), (1, 1, "[1,1]")])
def test_region_of(t, K, text):
    assert str(region_of(Fraction(str(t)), K).interval) == text


@given(st.integers(0, 3), st.fractions(min_value=0, max_value=6, max_denominator=8))
def test_regions_partition(K, t):
    hits = [r for r in regions(K) if r.interval.contains(t)]
    assert hits == [region_of(t, K)]


@given(st.integers(0, 3), st.integers(0, 4), st.booleans(), st.booleans(),
       st.fractions(min_value=0, max_value=8, max_denominator=4))
def test_interval_splits_into_halves(lo, span, lc, hc, d):
    hi = lo + span
    if span == 0:
        lc = hc = True
    iv = Interval(lo, hi, lc, hc)
    left = Interval(lo, None, lc, False)
    right = Interval(0, hi, True, hc)
    assert iv.contains(d) == (left.contains(d) and right.contains(d))


def test_word_text_round_trip_is_exact():
    text = "t=0 {a}\nt=3/10 {a,b}\nt=0.99 {b}\n"
    w = parse_word(text)
    assert w.stamps == (0, Fraction(3, 10), Fraction(99, 100))
    assert parse_word(format_word(w)) == w


def test_parse_word_reports_bad_lines():
    with pytest.raises(WordError, match="line 2"):
        parse_word("t=0 {a}\nnonsense\n")


def test_erase_simple_and_oversampled():
    base = word("a", 0, "b", "0.5")
    simple = Extension(base, word("aw", 0, "bw", "0.5"), frozenset("w"), frozenset())
    assert erase(simple) == base
    over = Extension(base, word("a", 0, "d", "0.2", "b", "0.5", "d", 1), frozenset("d"), frozenset({2, 4}))
    assert erase(over) == base
    assert erase(Extension(base, base, frozenset(), frozenset())) == base


def test_erase_rejects_old_symbol_at_new_point():
    base = word("a", 0)
    bad = Extension(base, word("a", 0, "a", 1), frozenset("d"), frozenset({2}))
    with pytest.raises(WordError):
        erase(bad)
