import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ratlogic.formula import (
    TRUE, Diamond, Prop, Rat, URat, UntilMod, Until, has_punctual, neg, parse_formula, parse_ratexpr,
    random_formula, random_interval, random_re, substitute, unparse, walk,
)
from ratlogic.rational import Dfa, compile_exnf
from ratlogic.semantics import Evaluator, evaluate
from ratlogic.timed import Interval, TimedWord
from ratlogic import reduction as R

from conftest import word

EX1 = parse_formula("(urat (0,1) (cat a (star b)) a b)")
EX1_YES = word("a", 0, "ab", "0.3", "ab", "0.99")
EX1_NO = word("a", 0, "a", "0.3", "a", "0.5", "a", "0.9", "b", "0.99")
UM_EX = parse_formula("(um (0,1) 1 2 b true (or a b))")
BASE = [Prop("a"), Prop("b"), parse_formula("true"), neg(Prop("a"))]


def random_strict_word(rng, n=6):
    return R.random_word(rng, ["a", "b"], n, 4, strict=True)


def reconstruct(flat, defs):
    """Substitute definition bodies for witnesses until none is left."""
    table = {Prop(td.witness): td.body for td in defs}
    while any(n in table for n in walk(flat)):
        flat = substitute(flat, table)
    return flat


def test_flatten_names_every_rational_modality():
    f = parse_formula("(rat (0,1) (urat (1,2) (star (rat (0,1) (union a b))) a b))")
    flat, defs = R.flatten(f)
    assert flat == Prop("w.1")
    assert [td.witness for td in defs] == ["w.1", "w.2", "w.3"]
    assert all(isinstance(td.body, (Rat, URat)) for td in defs)
    assert unparse(defs[0].body) == "(rat (0,1) w.2)"


def test_flatten_leaves_plain_mtl_alone():
    f = parse_formula("(until (0,1) a b)")
    assert R.flatten(f) == (f, [])


def test_flatten_nested_depth_three():
    f = parse_formula("(rat (0,1) (rat (0,2) (rat [1,2] a)))")
    assert len(R.flatten(f)[1]) == 3


def test_flatten_then_substitute_is_equivalent():
    rng = random.Random(3)
    for _ in range(30):
        f = random_formula(rng, modalities=2, kinds=("rat", "urat"))
        g = reconstruct(*R.flatten(f))
        w = R.random_word(rng, ["a", "b"], 5, 4)
        ev = Evaluator(w)
        assert [ev.holds(f, i) for i in w.positions()] == [ev.holds(g, i) for i in w.positions()]


def test_relativize_guards_until():
    f = parse_formula("(until (0,1) (not b) b)")
    assert unparse(R.relativize(f, Prop("a"))) == "(until (0,1) (or (not a) (not b)) (and a b))"
    p = parse_formula("(and a b)")
    assert R.relativize(p, Prop("a")) == p


def test_relativize_rejects_unflattened_input():
    with pytest.raises(R.ReductionError):
        R.relativize(parse_formula("(rat (0,1) a)"), Prop("a"))


def test_annotate_single_position():
    dfa = compile_exnf(parse_ratexpr("(cat a (star b))"))
    ext = R.annotate_threads(word("a", 0), dfa)
    assert ext.events[0] == frozenset({"a", "th.1.1.0", "th.1.2.x", "th.1.3.x"})


def test_single_state_dfa_never_merges():
    dfa = Dfa((TRUE,), ((0, 0),), frozenset({0}), mask=True)
    w = R.random_word(random.Random(1), ["a", "b"], 6, 4)
    assert not any(s.startswith("mg.") for s in R.annotate_threads(w, dfa).props())


def test_two_state_run_formula_mentions_one_merge():
    dfa = compile_exnf(parse_ratexpr("(star (cat a a))"), )
    merges = {n.name for n in walk(R.run_formula(dfa)) if isinstance(n, Prop) and n.name.startswith("mg.")}
    if dfa.size == 2:
        assert merges == {"mg.1.1.2"}
    else:
        assert merges


def test_annotation_satisfies_run_formula():
    rng = random.Random(7)
    for _ in range(50):
        re = random_re(rng, rng.sample(BASE, 2))
        dfa = compile_exnf(re)
        w = R.random_word(rng, ["a", "b"], 5, 3)
        ext = R.annotate_threads(w, dfa)
        assert evaluate(ext, 1, R.run_formula(dfa))
        active = lambda e: {s.split(".")[2] for s in e if s.startswith("th.") and not s.endswith(".x")}
        assert all(len(active(e)) <= dfa.size for e in ext.events)


def test_broken_annotation_violates_run_formula():
    rng = random.Random(8)
    dfa = compile_exnf(parse_ratexpr("(cat a (star b))"))
    hits = 0
    for _ in range(20):
        w = R.random_word(rng, ["a", "b"], 5, 3)
        ext = R.annotate_threads(w, dfa)
        k = rng.randrange(len(ext))
        ev = set(ext.events[k])
        dropped = sorted(s for s in ev if s.startswith("th.1.1."))
        ev -= set(dropped)
        bad = ext.with_events([ev if i == k else e for i, e in enumerate(ext.events)])
        assert not evaluate(bad, 1, R.run_formula(dfa))
        hits += 1
    assert hits == 20


def test_oversample_integer_points():
    ov = R.oversample(word("a", 0, "a", "2.5"), 3)
    labels = [(t, sorted(s for s in e if s.startswith("c."))) for e, t in zip(ov.extended.events, ov.extended.stamps)]
    assert labels == [(0, ["c.0"]), (1, ["c.1"]), (2, ["c.2"]), (Fraction(5, 2), [])]
    assert ov.new_positions == frozenset({2, 3})


def test_oversample_offset_points():
    ov = R.oversample(word("a", "0.01"), None, [(2, 3)])
    assert ov.extended.stamps == (Fraction(1, 100), Fraction(201, 100), Fraction(301, 100))
    ov = R.oversample(word("a", "0.01"), 2, [(2, 3)])
    idx = ov.extended.stamps.index(Fraction(301, 100))
    before = [e for e, t in zip(ov.extended.events, ov.extended.stamps) if t == 3]
    assert "ovs" in ov.extended.events[idx] and "c.1" in before[0]


def test_oversample_only_c_points_without_bounds():
    w = word("a", 0, "b", "1.5")
    ov = R.oversample(w, 1)
    assert ov.extended.props() - w.props() == {"c.0"}


@given(st.integers(0, 10_000))
def test_oversample_erases_back(seed):
    rng = random.Random(seed)
    w = R.random_word(rng, ["a", "b"], 6, 4)
    f = random_formula(rng, modalities=2, kinds=("rat", "urat", "um"))
    out = R.reduce(f, ["a", "b"])
    if out.strict and not w.is_strict():
        return
    ext = out.recipe(w)
    assert out.erase(ext.extended) == w
    assert all(not (ext.extended.events[k - 1] & {"a", "b"}) for k in ext.new_positions)


def witness_word(w, td):
    col = Evaluator(w).vec(td.source)
    return w.with_events([e | ({td.witness} if col[k] else set()) for k, e in enumerate(w.events)])


@pytest.mark.parametrize("text, eliminate, strict", [
    ("(rat (0,1) a)", R.eliminate_rat, False),
    ("(rat [1,inf) (star a))", R.eliminate_rat, False),
    ("(urat (0,1) (cat a (star b)) a b)", R.eliminate_urat, True),
    ("(urat [2,inf) (star a) true b)", R.eliminate_urat, True),
    ("(um (0,1) 1 2 b true (or a b))", R.eliminate_um, True),
])
def test_single_elimination_both_directions(text, eliminate, strict):
    f = parse_formula(text)
    td = R.flatten(f)[1][0]
    out = eliminate(td, ["a", "b"])
    rng = random.Random(text)
    for _ in range(30):
        w = R.random_word(rng, ["a", "b"], 5, 4, strict=strict)
        w1 = witness_word(w, td)
        assert evaluate(out.extend(w, w1).extended, 1, out.formula)
        k = rng.randrange(len(w))
        flipped = w1.with_events([e ^ {td.witness} if i == k else e for i, e in enumerate(w1.events)])
        assert not evaluate(out.extend(w, flipped).extended, 1, out.formula)


def test_eliminate_rat_on_small_word():
    td = R.flatten(parse_formula("(rat (0,1) a)"))[1][0]
    out = R.eliminate_rat(td, ["a"])
    w = witness_word(word("a", 0, "a", "0.5"), td)
    assert evaluate(out.extend(w, w).extended, 1, out.formula)


def punctual_offsets(f):
    return {(n.interval.lo, n.interval.hi) for n in walk(f)
            if isinstance(n, (Until, Diamond)) and n.interval.punctual}


def test_unbounded_rat_has_no_upper_anchor():
    td = R.flatten(parse_formula("(rat [1,inf) (star a))"))[1][0]
    offsets = punctual_offsets(R.eliminate_rat(td, ["a"]).formula)
    assert all(lo in (0, 1) for lo, _ in offsets)


def test_urat_elimination_is_punctuality_free():
    for text in ("(urat (0,1) (cat a (star b)) a b)", "(urat [2,inf) (star a) true b)"):
        td = R.flatten(parse_formula(text))[1][0]
        assert not has_punctual(R.eliminate_urat(td, ["a", "b"]).formula)


def test_um_elimination_with_trivial_modulus():
    f = parse_formula("(um (0,1) 0 1 b a b)")
    out = R.reduce(f, ["a", "b"])
    rng = random.Random(4)
    for _ in range(20):
        w = random_strict_word(rng)
        assert evaluate(out.recipe(w).extended, 1, out.formula) is evaluate(w, 1, f) or not evaluate(w, 1, f)


def test_um_counters_step_on_counted_points():
    f = parse_formula("(um (0,2) 1 2 b true a)")
    out = R.reduce(f, ["a", "b"])
    ext = out.recipe(word("b", 0, "a", "0.5", "b", "1", "b", "1.5")).extended
    counters = [sorted(s for s in e if s.startswith("b.")) for e in ext.events if e & {"a", "b"}]
    assert counters[0] != counters[2] and counters[2] != counters[3]
    assert counters[1] == counters[2] or counters[0] == counters[1]


def test_reduce_example_one_forward_and_backward():
    out = R.reduce(EX1, ["a", "b"])
    assert evaluate(out.recipe(EX1_YES).extended, 1, out.formula)
    assert not evaluate(out.recipe(EX1_NO).extended, 1, out.formula)
    rep = R.backward_search(EX1, out, random.Random(0), bases=30)
    assert rep.models and not rep.violations


def test_reduce_plain_mtl_has_no_definitions():
    out = R.reduce(parse_formula("(until (0,1) a b)"), ["a", "b"])
    assert out.definitions == []


def test_reduce_mitl_is_punctuality_free():
    rng = random.Random(11)
    for k in range(20):
        f = random_formula(rng, kinds=(("um", "urat")[k % 2],), punctual=False)
        assert not has_punctual(f)
        assert not has_punctual(R.reduce(f, ["a", "b"]).formula)


def test_reduce_rejects_reserved_names():
    with pytest.raises(R.ReductionError):
        R.reduce(parse_formula("(rat (0,1) a)"), ["a", "w.1"])
    with pytest.raises(R.ReductionError):
        R.reduce(parse_formula("(rat (0,1) a)"), ["b"])


def test_strict_recipe_rejects_weak_words():
    out = R.reduce(EX1, ["a", "b"])
    with pytest.raises(ValueError):
        out.recipe(word("a", 0, "b", 0))


def test_forward_equisat_random():
    rng = random.Random(21)
    done = 0
    while done < 40:
        f = random_formula(rng, kinds=("rat",))
        w = next((w for w in (R.random_word(rng, ["a", "b"], 5, 4) for _ in range(20)) if evaluate(w, 1, f)), None)
        if w is None:
            continue
        out = R.reduce(f, ["a", "b"])
        assert evaluate(out.recipe(w).extended, 1, out.formula), unparse(f)
        done += 1


def test_locate_names_broken_constraint():
    out = R.reduce(parse_formula("(rat (0,1) a)"), ["a", "b"])
    ext = out.recipe(word("a", 0, "a", "0.5")).extended
    assert out.locate(ext) == []
    bad = ext.with_events([e - {"c.0"} for e in ext.events])
    assert out.locate(bad)


def test_urat_to_rat_example_one():
    g = R.urat_to_rat(EX1)
    assert evaluate(EX1_YES, 1, g) and not evaluate(EX1_NO, 1, g)


def test_urat_to_rat_with_sigma_star_is_until():
    f = parse_formula("(urat (1,3) (star true) true b)")
    u = parse_formula("(until (1,3) true b)")
    g = R.urat_to_rat(f)
    rng = random.Random(2)
    for _ in range(30):
        w = random_strict_word(rng)
        ev = Evaluator(w)
        assert [ev.holds(g, i) for i in w.positions()] == [ev.holds(u, i) for i in w.positions()]


def test_um_to_mc_example():
    g = R.um_to_mc(UM_EX)
    rng = random.Random(5)
    for _ in range(30):
        w = random_strict_word(rng)
        ev = Evaluator(w)
        assert [ev.holds(g, i) for i in w.positions()] == [ev.holds(UM_EX, i) for i in w.positions()]


def test_um_to_mc_counted_at_witness():
    f = parse_formula("(um (0,2) 1 2 a true a)")
    w = word("a", 0, "a", "0.5", "a", "1")
    ev = Evaluator(w)
    g = R.um_to_mc(f)
    assert [ev.holds(g, i) for i in w.positions()] == [ev.holds(f, i) for i in w.positions()]
    assert ev.holds(f, 1)


def test_um_to_mc_trivial_modulus_is_until():
    f = parse_formula("(um (0,2) 0 1 a a b)")
    u = parse_formula("(until (0,2) a b)")
    rng = random.Random(6)
    for _ in range(20):
        w = random_strict_word(rng)
        ev = Evaluator(w)
        assert [ev.holds(R.um_to_mc(f), i) for i in w.positions()] == [ev.holds(u, i) for i in w.positions()]


@given(st.integers(0, 10_000))
def test_rewrites_are_pointwise_identities(seed):
    rng = random.Random(seed)
    f = URat(random_interval(rng), random_re(rng, rng.sample(BASE, 2)), rng.choice(BASE), rng.choice(BASE))
    n = rng.randint(1, 3)
    g = UntilMod(random_interval(rng), rng.randrange(n), n, rng.choice(BASE), rng.choice(BASE), rng.choice(BASE))
    w = random_strict_word(rng)
    ev = Evaluator(w)
    f2, g2 = R.urat_to_rat(f), R.um_to_mc(g)
    for i in w.positions():
        assert ev.holds(f, i) == ev.holds(f2, i)
        assert ev.holds(g, i) == ev.holds(g2, i)


def test_tptl_check_on_example_two_word():
    f = parse_formula("(rat (0,1) a)")
    w = word("ab", 0, "ab", "0.91", "a", "1.2")
    chk = R.rat_to_tptl_check(f)
    aw = R.annotate_threads(w, compile_exnf(f.re))
    e1, e0 = Evaluator(aw), Evaluator(w)
    assert [e1.holds(chk, i) for i in w.positions()] == [e0.holds(f, i) for i in w.positions()]


def test_tptl_check_zero_start_has_no_leading_search():
    chk = R.rat_to_tptl_check(parse_formula("(rat [0,1) a)"))
    assert "(next" not in unparse(chk)
    chk = R.rat_to_tptl_check(parse_formula("(rat (1,2) a)"))
    assert "(next" in unparse(chk)


def test_tptl_check_empty_window_follows_nullable():
    w = word("a", 0, "a", 3)
    for text, expected in (("(rat (1,2) (star a))", True), ("(rat (1,2) a)", False)):
        f = parse_formula(text)
        aw = R.annotate_threads(w, compile_exnf(f.re))
        assert Evaluator(aw).holds(R.rat_to_tptl_check(f), 1) is expected is evaluate(w, 1, f)


@given(st.integers(0, 10_000))
def test_tptl_check_agrees_with_rat(seed):
    rng = random.Random(seed)
    f = Rat(random_interval(rng), random_re(rng, rng.sample(BASE, 2)))
    w = R.random_word(rng, ["a", "b"], 6, 4)
    aw = R.annotate_threads(w, compile_exnf(f.re))
    chk = R.rat_to_tptl_check(f)
    e1, e0 = Evaluator(aw), Evaluator(w)
    assert [e1.holds(chk, i) for i in w.positions()] == [e0.holds(f, i) for i in w.positions()]


def test_backward_search_finds_no_violations():
    rng = random.Random(31)
    models = 0
    for kinds in (("rat",), ("urat",), ("um",)):
        for _ in range(3):
            f = random_formula(rng, kinds=kinds)
            rep = R.backward_search(f, R.reduce(f, ["a", "b"]), rng, bases=4, max_len=5)
            assert not rep.violations
            models += len(rep.models)
    assert models > 0
