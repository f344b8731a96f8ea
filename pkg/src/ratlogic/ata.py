"""Partially ordered one-clock alternating timed automata.

Transition formulas reuse the formula nodes: a location is a ``Prop``, a clock
constraint ``x⋈c`` is a ``ClockIn`` and the reset ``x.φ`` is a ``Freeze``.

Three views of an automaton are built here and must agree on every word:

* ``simulate`` runs the automaton by exhaustive choice of minimal models;
* ``beh`` solves the location equations bottom-up into one-clock TPTL;
* ``ata_to_sfrmtl`` cuts the clock range into regions and describes the
  behaviour inside each region by a rational expression.
"""

from __future__ import annotations

import itertools
import re as _re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .formula import (
    ALWAYS, EMPTY, EPS, FALSE, TRUE, And, Atom, BoxNS, ClockIn, Const, DiamondNS, Formula,
    Freeze, Next, Not, Or, Prop, Rat, RatExpr, Since, TUntil, Until, UntilNS, URat, WeakNext,
    WeakUntil, cat, conj, disj, expand_derived, max_constant, neg, props, re_atoms, substitute, unparse,
)
from .rational import (
    Dfa, RegionFormula, R_EPS, R_TOP, Undetermined, boolean_cover, compile_exnf, dfa_to_regex,
    is_star_free, minimize, r_and, r_box, r_box_or_eps, r_expr, r_first, r_or, r_until, r_weak,
)
from .timed import Interval, Region, TimedWord, region_of, regions

MODEL_CAP = 1 << 12


class AtaError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Ata:
    """Locations are strings; ``order`` holds pairs (lower, higher)."""

    alphabet: Tuple[str, ...]
    locations: Tuple[str, ...]
    initial: str
    finals: FrozenSet[str]
    order: FrozenSet[Tuple[str, str]]
    delta: Dict[Tuple[str, str], Formula] = field(default_factory=dict)
    K: int = 0

    def trans(self, s: str, a: str) -> Formula:
        return self.delta.get((s, a), FALSE)

    def calls(self, s: str) -> List[str]:
        """Locations other than ``s`` mentioned in its transitions, in first-use order."""
        out: List[str] = []
        for a in self.alphabet:
            for name in _locs(self.trans(s, a)):
                if name != s and name not in out:
                    out.append(name)
        return out

    def below(self, s: str) -> Set[str]:
        """Locations strictly lower than ``s`` in the transitive closure of the order."""
        down: Dict[str, Set[str]] = {}
        for lo, hi in self.order:
            down.setdefault(hi, set()).add(lo)
        out: Set[str] = set()
        stack = [s]
        while stack:
            for t in down.get(stack.pop(), ()):
                if t not in out:
                    out.add(t)
                    stack.append(t)
        return out


def _locs(f: Formula) -> List[str]:
    out: List[str] = []

    def go(g):
        if isinstance(g, Prop):
            if g.name not in out:
                out.append(g.name)
        elif isinstance(g, (And, Or)):
            for x in g.args:
                go(x)
        elif isinstance(g, Freeze):
            go(g.arg)

    go(f)
    return out


def _reset_locs(f: Formula, under: bool = False) -> Set[str]:
    if isinstance(f, Prop):
        return {f.name} if under else set()
    if isinstance(f, (And, Or)):
        return set().union(*[_reset_locs(x, under) for x in f.args])
    if isinstance(f, Freeze):
        return _reset_locs(f.arg, True)
    return set()


# --- transition formula syntax -------------------------------------------------------

_CLOCK = _re.compile(r"^x(<=|>=|<|>)(\d+)$")
_TTOK = _re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def clock_constraint(op: str, c: int) -> Formula:
    if op == "<":
        return ClockIn(Interval(0, c, True, False)) if c > 0 else FALSE
    if op == "<=":
        return ClockIn(Interval(0, c, True, True))
    if op == ">":
        return ClockIn(Interval(c, None, False, False))
    if op == ">=":
        return ClockIn(Interval(c, None, True, False)) if c > 0 else TRUE
    raise AtaError(f"bad comparison {op}")


def _clock_text(iv: Interval) -> str:
    if iv.hi is None:
        return f"x{'>=' if iv.lo_closed else '>'}{iv.lo}"
    if iv.lo == 0 and iv.lo_closed:
        return f"x{'<=' if iv.hi_closed else '<'}{iv.hi}"
    return f"(and x{'>=' if iv.lo_closed else '>'}{iv.lo} x{'<=' if iv.hi_closed else '<'}{iv.hi})"


def clock_atoms(iv: Interval) -> Formula:
    """A clock interval as a conjunction of single-sided constraints."""
    parts = []
    if iv.lo > 0 or not iv.lo_closed:
        parts.append(ClockIn(Interval(iv.lo, None, iv.lo_closed, False)))
    if iv.hi is not None:
        parts.append(ClockIn(Interval(0, iv.hi, True, iv.hi_closed)))
    return conj(*parts)


def parse_trans(text: str) -> Formula:
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TTOK.match(text, pos)
        if not m or m.end() == pos:
            raise AtaError(f"bad transition formula near {text[pos:]!r}")
        pos = m.end()
        if m.group(1):
            toks.append("(")
        elif m.group(2):
            toks.append(")")
        elif m.group(3):
            toks.append(m.group(3))
    i = 0

    def expr():
        nonlocal i
        if i >= len(toks):
            raise AtaError("unexpected end of transition formula")
        t = toks[i]
        i += 1
        if t == "(":
            if i >= len(toks):
                raise AtaError("unexpected end of transition formula")
            head = toks[i]
            i += 1
            args = []
            while i < len(toks) and toks[i] != ")":
                args.append(expr())
            if i >= len(toks):
                raise AtaError("missing ')' in transition formula")
            i += 1
            if head == "and":
                return conj(*args)
            if head == "or":
                return disj(*args)
            if head == "x." and len(args) == 1:
                return Freeze(args[0])
            raise AtaError(f"unknown transition operator {head!r}")
        if t == ")":
            raise AtaError("unexpected ')' in transition formula")
        if t == "true":
            return TRUE
        if t == "false":
            return FALSE
        m = _CLOCK.match(t)
        if m:
            return clock_constraint(m.group(1), int(m.group(2)))
        if not _re.match(r"^[A-Za-z_][A-Za-z0-9_.']*$", t) or t == "x":
            raise AtaError(f"bad location name {t!r}")
        return Prop(t)

    out = expr()
    if i != len(toks):
        raise AtaError("trailing tokens in transition formula")
    return out


def format_trans(f: Formula) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, ClockIn):
        return _clock_text(f.interval)
    if isinstance(f, Freeze):
        return f"(x. {format_trans(f.arg)})"
    if isinstance(f, (And, Or)):
        head = "and" if isinstance(f, And) else "or"
        return f"({head} " + " ".join(format_trans(x) for x in f.args) + ")"
    raise AtaError(f"not a transition formula: {unparse(f)}")


def parse_ata(text: str) -> Ata:
    K: Optional[int] = None
    alphabet: List[str] = []
    locs: List[str] = []
    initial: List[str] = []
    finals: Set[str] = set()
    order: Set[Tuple[str, str]] = set()
    delta: Dict[Tuple[str, str], Formula] = {}
    declared_alphabet = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            if words[0] == "ata":
                if len(words) != 2 or not words[1].startswith("K="):
                    raise AtaError("header must read 'ata K=<n>'")
                K = int(words[1][2:])
            elif words[0] == "alphabet":
                alphabet = words[1:]
                declared_alphabet = True
            elif words[0] == "loc":
                if len(words) < 2 or any(w not in ("init", "final") for w in words[2:]):
                    raise AtaError("expected 'loc <name> [init] [final]'")
                locs.append(words[1])
                if "init" in words[2:]:
                    initial.append(words[1])
                if "final" in words[2:]:
                    finals.add(words[1])
            elif words[0] == "order":
                if len(words) != 4 or words[2] != "<":
                    raise AtaError("expected 'order a < b'")
                order.add((words[1], words[3]))
            elif words[0] == "trans":
                head, _, body = line.partition(":=")
                hw = head.split()
                if len(hw) != 3 or not body.strip():
                    raise AtaError("expected 'trans <loc> <letter> := <formula>'")
                s, a = hw[1], hw[2]
                if (s, a) in delta:
                    raise AtaError(f"duplicate transition for ({s}, {a})")
                delta[(s, a)] = parse_trans(body)
                if not declared_alphabet and a not in alphabet:
                    alphabet.append(a)
            else:
                raise AtaError(f"unknown directive {words[0]!r}")
        except (AtaError, ValueError) as e:
            raise AtaError(f"line {lineno}: {e}") from None
    if K is None:
        raise AtaError("missing 'ata K=<n>' header")
    if len(initial) != 1:
        raise AtaError(f"exactly one initial location required, found {len(initial)}")
    if not alphabet:
        raise AtaError("empty alphabet")
    return Ata(tuple(alphabet), tuple(locs), initial[0], frozenset(finals), frozenset(order), delta, K)


def format_ata(A: Ata) -> str:
    lines = [f"ata K={A.K}", "alphabet " + " ".join(A.alphabet)]
    for s in A.locations:
        flags = (" init" if s == A.initial else "") + (" final" if s in A.finals else "")
        lines.append(f"loc {s}{flags}")
    for lo, hi in sorted(A.order):
        lines.append(f"order {lo} < {hi}")
    for s in A.locations:
        for a in A.alphabet:
            if (s, a) in A.delta:
                lines.append(f"trans {s} {a} := {format_trans(A.delta[(s, a)])}")
    return "\n".join(lines) + "\n"


EG1 = """\
ata K=1
alphabet a b
loc s0 init final
loc sa
loc sl final
order sa < s0
order sl < s0
trans s0 a := (or (and s0 (x. sa)) sl)
trans s0 b := s0
trans sa a := (or (and sa x<1) x>1)
trans sa b := (or (and sa x<1) x>1)
trans sl a := false
trans sl b := sl
"""


def eg1() -> Ata:
    return parse_ata(EG1)


# --- validation -----------------------------------------------------------------------


def _grammar_errors(f: Formula) -> List[str]:
    if isinstance(f, (Const, Prop)):
        return []
    if isinstance(f, ClockIn):
        iv = f.interval
        one_sided = iv.hi is None or (iv.lo == 0 and iv.lo_closed)
        return [] if one_sided else [f"clock constraint {iv} is not of the form x⋈c"]
    if isinstance(f, (And, Or)):
        return [e for x in f.args for e in _grammar_errors(x)]
    if isinstance(f, Freeze):
        return _grammar_errors(f.arg)
    return [f"{type(f).__name__} is not allowed in transition formulas"]


def validate_ata(A: Ata) -> List[str]:
    """Violations of the grammar and of the two ordering conditions; empty means ok."""
    errs: List[str] = []
    locs = set(A.locations)
    if len(locs) != len(A.locations):
        errs.append("duplicate location names")
    if A.initial not in locs:
        errs.append(f"initial location {A.initial} is not declared")
    for s in A.finals - locs:
        errs.append(f"final location {s} is not declared")
    for lo, hi in sorted(A.order):
        if lo not in locs or hi not in locs:
            errs.append(f"order mentions undeclared location in {lo} < {hi}")
    for s in A.locations:
        if s in A.below(s):
            errs.append(f"order is cyclic through {s}")
    for (s, a), f in sorted(A.delta.items()):
        if s not in locs:
            errs.append(f"transition from undeclared location {s}")
            continue
        if a not in A.alphabet:
            errs.append(f"transition on letter {a} outside the alphabet")
        errs += [f"δ({s},{a}): {e}" for e in _grammar_errors(f)]
        below = A.below(s)
        for t in _locs(f):
            if t not in locs:
                errs.append(f"δ({s},{a}) mentions undeclared location {t}")
            elif t != s and t not in below:
                errs.append(f"δ({s},{a}) mentions {t}, which is not below {s}")
        if s in _reset_locs(f):
            errs.append(f"δ({s},{a}) contains x.{s}")
        if max_constant(f) > A.K:
            errs.append(f"δ({s},{a}) uses a constant above K={A.K}")
    return errs


def check_ata(A: Ata) -> Ata:
    errs = validate_ata(A)
    if errs:
        raise AtaError("invalid automaton:\n  " + "\n  ".join(errs))
    return A


# --- minimal models --------------------------------------------------------------------

Lit = Tuple[str, object]  # ("loc", s) | ("reset", s) | ("clk", Interval)


def _prune(models: List[FrozenSet[Lit]]) -> List[FrozenSet[Lit]]:
    uniq = sorted(set(models), key=lambda m: (len(m), sorted(map(str, m))))
    out: List[FrozenSet[Lit]] = []
    for m in uniq:
        if not any(o <= m for o in out):
            out.append(m)
    return out


def dnf(f: Formula, reset: bool = False) -> List[FrozenSet[Lit]]:
    """Minimal models as sets of literals; clock constraints under a reset read 0."""
    if isinstance(f, Const):
        return [frozenset()] if f.value else []
    if isinstance(f, Prop):
        return [frozenset([("reset" if reset else "loc", f.name)])]
    if isinstance(f, ClockIn):
        if reset:
            return [frozenset()] if f.interval.contains(0) else []
        return [frozenset([("clk", f.interval)])]
    if isinstance(f, Freeze):
        return dnf(f.arg, True)
    if isinstance(f, Or):
        return _prune([m for x in f.args for m in dnf(x, reset)])
    if isinstance(f, And):
        acc = [frozenset()]
        for x in f.args:
            acc = _prune([m | n for m in acc for n in dnf(x, reset)])
            if len(acc) > MODEL_CAP:
                raise AtaError(f"more than {MODEL_CAP} minimal models")
        return acc
    raise AtaError(f"not a transition formula: {unparse(f)}")


class _Models:
    """Cached minimal models of each δ(s,a)."""

    def __init__(self, A: Ata):
        self.A = A
        self._cache: Dict[Tuple[str, str], List[FrozenSet[Lit]]] = {}

    def of(self, s: str, a: str) -> List[FrozenSet[Lit]]:
        key = (s, a)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = dnf(self.A.trans(s, a))
        return hit

    def at(self, s: str, a: str, value) -> List[FrozenSet[Lit]]:
        """Models whose clock literals hold at the clock value, clock literals dropped."""
        out = []
        for m in self.of(s, a):
            if all(v.contains(value) for k, v in m if k == "clk"):
                out.append(frozenset(l for l in m if l[0] != "clk"))
        return _prune(out)


# --- simulation -------------------------------------------------------------------------


def _letters(A: Ata, w: TimedWord, adapter: bool) -> List[List[str]]:
    out = []
    for k, ev in enumerate(w.events, 1):
        if not adapter and len(ev) != 1:
            raise AtaError(f"position {k} carries {len(ev)} events; the automaton reads single letters")
        bad = sorted(set(ev) - set(A.alphabet))
        if bad:
            raise AtaError(f"position {k} carries {bad[0]}, outside the alphabet")
        out.append(sorted(ev))
    return out


def run_configs(A: Ata, w: TimedWord, start: int = 1, base: int = 1, location: Optional[str] = None,
                adapter: bool = False) -> Set[FrozenSet[Tuple[str, Fraction]]]:
    """Minimal configurations after reading positions ``start``..n.

    The run begins in ``location`` (default: the initial one) with the clock
    reset at position ``base``. A configuration is a set of (location, reset
    time) pairs, so the clock value of a pair at time t is t minus its reset time.
    """
    models = _Models(A)
    letters = _letters(A, w, adapter)
    s0 = location or A.initial
    configs: Set[FrozenSet[Tuple[str, Fraction]]] = {frozenset([(s0, w.stamp(base))])}
    for k in range(start, len(w) + 1):
        configs = _advance(models, configs, letters[k - 1], w.stamp(k))
        if not configs:
            break
    return configs


def _advance(models: "_Models", configs, letters: Sequence[str], t: Fraction):
    """Minimal configurations after reading one event (as any of ``letters``) at time t."""
    new: Set[FrozenSet[Tuple[str, Fraction]]] = set()
    for C in configs:
        options = []
        for s, r in sorted(C):
            ms = []
            for a in letters:
                for m in models.at(s, a, t - r):
                    ms.append(frozenset((name, r if kind == "loc" else t) for kind, name in m))
            if not ms:
                break
            options.append(ms)
        else:
            for combo in itertools.product(*options):
                new.add(frozenset().union(*combo))
    return set(_prune(list(new)))


def simulate(A: Ata, w: TimedWord, adapter: bool = False) -> bool:
    """Some run from {(s0, 0)} over the whole word ends in an accepting configuration."""
    return _accepting(A, run_configs(A, w, adapter=adapter))


def accepts_from(A: Ata, w: TimedWord, location: str, start: int = 1, base: int = 1) -> bool:
    return _accepting(A, run_configs(A, w, start, base, location))


def _accepting(A: Ata, configs) -> bool:
    return any(all(s in A.finals for s, _ in C) for C in configs)


# --- Beh: the location equations solved into 1-TPTL ----------------------------------------------


@dataclass(frozen=True)
class Beh:
    formulas: Dict[str, Formula]
    initial: str

    @property
    def formula(self) -> Formula:
        """Beh(s0), with the clock free; it reads 0 at the first position."""
        return self.formulas[self.initial]

    @property
    def closed(self) -> Formula:
        return Freeze(self.formula)


def bottom_up(A: Ata) -> List[str]:
    """Locations reachable from the initial one, each after everything it calls."""
    out: List[str] = []
    seen: Set[str] = set()

    def visit(s):
        if s in seen:
            return
        seen.add(s)
        for t in A.calls(s):
            visit(t)
        out.append(s)

    visit(A.initial)
    return out


def _by_letter(A: Ata, parts: Sequence[Tuple[str, Formula]]) -> Formula:
    """⋁ (a ∧ φ_a), with letters sharing a formula grouped; a group covering Σ drops its letters."""
    groups: List[Tuple[List[str], Formula]] = []
    for a, f in parts:
        if f is FALSE:
            continue
        for letters, g in groups:
            if g is f:
                letters.append(a)
                break
        else:
            groups.append(([a], f))
    out = []
    for letters, f in groups:
        if len(letters) == len(A.alphabet):
            out.append(f)
        else:
            out.append(conj(disj(*[Prop(a) for a in letters]), f))
    return disj(*out)


def beh(A: Ata) -> Beh:
    check_ata(A)
    models = _Models(A)
    solved: Dict[str, Formula] = {}

    def obligation(s: str) -> Formula:
        g = solved[s]
        return WeakNext(g) if s in A.finals else Next(ALWAYS, g)

    def lit(l: Lit) -> Formula:
        kind, v = l
        if kind == "clk":
            return ClockIn(v)
        if kind == "loc":
            return obligation(v)
        return Freeze(obligation(v))

    def ordered(m: FrozenSet[Lit]) -> List[Lit]:
        rank = {"clk": 0, "reset": 1, "loc": 2}
        return sorted(m, key=lambda l: (rank[l[0]], str(l[1])))

    for s in bottom_up(A):
        stay, leave = [], []
        for a in A.alphabet:
            ms = models.of(s, a)
            st = [conj(*[lit(l) for l in ordered(m - {("loc", s)})]) for m in ms if ("loc", s) in m]
            lv = [conj(*[lit(l) for l in ordered(m)]) for m in ms if ("loc", s) not in m]
            stay.append((a, disj(*st)))
            leave.append((a, disj(*lv)))
        phi1, phi2 = _by_letter(A, stay), _by_letter(A, leave)
        if phi1 is FALSE:
            solved[s] = phi2
        elif s in A.finals:
            solved[s] = BoxNS(phi1) if phi2 is FALSE else WeakUntil(phi1, phi2)
        else:
            solved[s] = FALSE if phi2 is FALSE else UntilNS(ALWAYS, phi1, phi2)
    return Beh(solved, A.initial)


# --- 1-TPTL to automaton (tableau) --------------------------------------------------------------


def tptl_to_ata(f: Formula, alphabet: Optional[Sequence[str]] = None) -> Ata:
    """One location per temporal obligation; freezes become resets.

    Accepts negation normal form built from propositions (negated or not),
    ∧, ∨, O, weak O, U^ns, W, □^ns, ◇^ns, strict untimed U, freeze and clock
    constraints.
    """
    sigma = tuple(alphabet) if alphabet else tuple(sorted(props(f))) or ("a",)
    # a location is its obligation plus acceptance; the next-location of an
    # until and its self-loop location coincide
    names: Dict[Tuple[Formula, bool], str] = {}
    finals: Set[str] = set()
    bodies: Dict[str, Formula] = {}
    delta: Dict[Tuple[str, str], Formula] = {}
    pending: List[str] = []

    def loc(g: Formula, final: bool) -> str:
        key = (g, final)
        if key not in names:
            name = f"l{len(names) + 1}"
            names[key] = name
            bodies[name] = g
            if final:
                finals.add(name)
            pending.append(name)
        return names[key]

    def tau(g: Formula, a: str) -> Formula:
        if isinstance(g, Const):
            return g
        if isinstance(g, Prop):
            return TRUE if g.name == a else FALSE
        if isinstance(g, Not):
            if not isinstance(g.arg, Prop):
                raise AtaError(f"not in negation normal form: {unparse(g)}")
            return FALSE if g.arg.name == a else TRUE
        if isinstance(g, And):
            return conj(*[tau(x, a) for x in g.args])
        if isinstance(g, Or):
            return disj(*[tau(x, a) for x in g.args])
        if isinstance(g, ClockIn):
            return clock_atoms(g.interval)
        if isinstance(g, Freeze):
            return Freeze(tau(g.arg, a))
        if isinstance(g, Next):
            _untimed(g)
            return Prop(loc(g.arg, False))
        if isinstance(g, WeakNext):
            return Prop(loc(g.arg, True))
        if isinstance(g, TUntil):
            return Prop(loc(UntilNS(ALWAYS, g.left, g.right), False))
        if isinstance(g, UntilNS):
            _untimed(g)
            return disj(tau(g.right, a), conj(tau(g.left, a), Prop(loc(g, False))))
        if isinstance(g, WeakUntil):
            return disj(tau(g.right, a), conj(tau(g.left, a), Prop(loc(g, True))))
        if isinstance(g, BoxNS):
            return conj(tau(g.arg, a), Prop(loc(g, True)))
        if isinstance(g, DiamondNS):
            return disj(tau(g.arg, a), Prop(loc(g, False)))
        raise AtaError(f"{type(g).__name__} is outside the tableau fragment")

    for a in sigma:
        delta[("s0", a)] = tau(f, a)
    while pending:
        name = pending.pop(0)
        for a in sigma:
            # a next-location reads its argument; an until-location re-expands itself
            delta[(name, a)] = tau(bodies[name], a)
    locs = ("s0",) + tuple(names[k] for k in names)
    order = set()
    for s in locs:
        for a in sigma:
            for t in _locs(delta[(s, a)]):
                if t != s:
                    order.add((t, s))
    # transitive closure keeps the declared order explicit
    changed = True
    while changed:
        changed = False
        for (a1, b1), (a2, b2) in list(itertools.product(order, order)):
            if b1 == a2 and (a1, b2) not in order:
                order.add((a1, b2))
                changed = True
    A = Ata(sigma, locs, "s0", frozenset(finals), frozenset(order), delta, max_constant(f))
    return check_ata(A)


def _untimed(g: Formula) -> None:
    if g.interval != ALWAYS:
        raise AtaError("1-TPTL modalities are untimed; use clock constraints")


# --- regions ----------------------------------------------------------------------------------


def _rep(R: Region) -> Fraction:
    i, odd = divmod(R.index, 2)
    if R.unbounded:
        return Fraction(2 * R.K + 1, 2)
    return Fraction(i) + (Fraction(1, 2) if odd else 0)


Config = FrozenSet[str]


class _RegionEngine:
    """Per-region automata over block letters (a letter of Σ plus the truth of each reset target)."""

    def __init__(self, A: Ata):
        self.A = check_ata(A)
        self.models = _Models(A)
        self.regions = regions(A.K)
        self.last = len(self.regions) - 1
        targets: List[str] = []
        for s in bottom_up(A):
            for a in A.alphabet:
                for t in sorted(_reset_locs(A.trans(s, a))):
                    if t not in targets:
                        targets.append(t)
        self.targets = tuple(targets)
        nz = len(self.targets)
        self.letters = [(a, z) for a in A.alphabet for z in range(1 << nz)]
        self._dfa: Dict[Tuple[int, Config], Tuple[list, list]] = {}
        self._re: Dict[Tuple, RatExpr] = {}
        self._z: Dict[str, Formula] = {}
        self._g: Dict[Tuple[int, Config], Formula] = {}

    # letters ------------------------------------------------------------------------

    def letter_formula(self, xs: Iterable[int]) -> Formula:
        nz = len(self.targets)
        by_a: Dict[str, Set[int]] = {}
        for x in xs:
            a, z = self.letters[x]
            by_a.setdefault(a, set()).add(z)
        if len(by_a) == len(self.A.alphabet) and all(len(v) == 1 << nz for v in by_a.values()):
            return TRUE
        # placeholders first: a reset target whose bit never matters drops out of
        # the cover, so only the lower locations' formulas are ever built
        holes = [Prop(f"z.{i}") for i in range(nz)]
        out = []
        for a in self.A.alphabet:
            if a in by_a:
                out.append(conj(Prop(a), boolean_cover(by_a[a], holes)))
        f = disj(*out)
        used = props(f)
        return substitute(f, {h: self.z(t) for h, t in zip(holes, self.targets) if h.name in used})

    # automata -----------------------------------------------------------------------

    def step(self, r: int, C: Config, x: int) -> Set[Config]:
        a, z = self.letters[x]
        value = _rep(self.regions[r])
        options = []
        for s in sorted(C):
            ms = []
            for m in self.models.at(s, a, value):
                ok = all(z >> self.targets.index(t) & 1 for k, t in m if k == "reset")
                if ok:
                    ms.append(frozenset(t for k, t in m if k == "loc"))
            if not ms:
                return set()
            options.append(ms)
        return {frozenset().union(*combo) for combo in itertools.product(*options)}

    def dfa(self, r: int, L: Config) -> Tuple[list, list]:
        """Subset automaton from configuration L; states are antichains of configurations."""
        key = (r, L)
        hit = self._dfa.get(key)
        if hit is not None:
            return hit
        start = frozenset([L])
        index = {start: 0}
        states = [start]
        rows = []
        i = 0
        while i < len(states):
            cur = states[i]
            row = []
            for x in range(len(self.letters)):
                nxt: Set[Config] = set()
                for C in cur:
                    nxt |= self.step(r, C, x)
                kept = frozenset(_antichain(nxt))
                if kept not in index:
                    index[kept] = len(states)
                    states.append(kept)
                row.append(index[kept])
            rows.append(row)
            i += 1
        self._dfa[key] = (rows, states)
        return rows, states

    def targets_after(self, r: int, L: Config) -> List[Config]:
        _, states = self.dfa(r, L)
        seen = {C for D in states for C in D}
        return sorted(seen, key=lambda C: (len(C), sorted(C)))

    def expr(self, r: int, L: Config, done, right: Optional[FrozenSet[int]] = None) -> RatExpr:
        """Words leading from L to a configuration accepted by ``done``.

        With ``right`` set, the word must be followed by one of those letters.
        """
        rows, states = self.dfa(r, L)
        fin = [q for q, D in enumerate(states) if any(done(C) for C in D)]
        if right is not None:
            fin = [q for q in range(len(rows)) if any(rows[q][x] in fin for x in right)]
        mrows, mfin = minimize(rows, fin)
        d = Dfa((), mrows, mfin)
        if not mfin:
            return EMPTY
        return dfa_to_regex(d, 0, mfin, label=lambda xs: Atom(self.letter_formula(xs)))

    def block(self, r: int, L: Config, L2: Config) -> RatExpr:
        key = ("b", r, L, L2)
        if key not in self._re:
            self._re[key] = self.expr(r, L, lambda C: C <= L2)
        return self._re[key]

    def last_block(self, L: Config) -> RatExpr:
        key = ("f", L)
        if key not in self._re:
            self._re[key] = self.expr(self.last, L, lambda C: C <= self.A.finals)
        return self._re[key]

    # formulas -----------------------------------------------------------------------

    def rat(self, r: int, re: RatExpr) -> Formula:
        if re is EMPTY:
            return FALSE
        if _universal(re):
            return TRUE
        return Rat(self.regions[r].interval, re)

    def g(self, r: int, L: Config) -> Formula:
        """Blocks r..last (measured from the evaluation point) discharge L."""
        key = (r, L)
        hit = self._g.get(key)
        if hit is not None:
            return hit
        if not L:
            out = TRUE
        elif r == self.last:
            out = self.rat(r, self.last_block(L))
        else:
            parts = []
            for L2 in self.targets_after(r, L):
                here = self.rat(r, self.block(r, L, L2))
                if here is FALSE:
                    continue
                rest = self.g(r + 1, L2)
                if rest is FALSE:
                    continue
                parts.append(conj(here, rest))
            out = disj(*parts)
        self._g[key] = out
        return out

    def z(self, s: str) -> Formula:
        """x.O Beh(s) as a formula: reset here, s reads from the next position on."""
        hit = self._z.get(s)
        if hit is not None:
            return hit
        L = frozenset([s])
        if self.last == 0:
            out = self.same_stamp(L, lambda C: C <= self.A.finals)
        else:
            parts = []
            for L2 in self.targets_after(0, L):
                first = self.same_stamp(L, lambda C, L2=L2: C <= L2)
                if first is FALSE:
                    continue
                rest = self.g(1, L2)
                if rest is not FALSE:
                    parts.append(conj(first, rest))
            out = disj(*parts)
        self._z[s] = out
        return out

    def same_stamp(self, L: Config, done) -> Formula:
        """The later points sharing the current stamp take L to ``done``.

        A timed segment from here would also cover earlier points with the same
        stamp, so the block is read with an until-rational modality that
        stops at the last point of the stamp.
        """
        zero = Interval.point(0)
        last_here = neg(Next(zero, TRUE))
        rows, states = self.dfa(0, L)
        parts = []
        if any(done(C) for C in states[0]):
            parts.append(last_here)
        fin = {q for q, D in enumerate(states) if any(done(C) for C in D)}
        groups: Dict[FrozenSet[int], List[int]] = {}
        for x in range(len(self.letters)):
            into = frozenset(q for q in range(len(rows)) if rows[q][x] in fin)
            if into:
                groups.setdefault(into, []).append(x)
        for into, xs in sorted(groups.items(), key=lambda kv: kv[1]):
            mrows, mfin = minimize(rows, into)
            if not mfin:
                continue
            re = dfa_to_regex(Dfa((), mrows, mfin), 0, mfin, label=lambda ys: Atom(self.letter_formula(ys)))
            parts.append(URat(zero, re, TRUE, conj(self.letter_formula(xs), last_here)))
        return disj(*parts)


def _antichain(configs: Iterable[Config]) -> List[Config]:
    uniq = sorted(set(configs), key=lambda C: (len(C), sorted(C)))
    out: List[Config] = []
    for C in uniq:
        if not any(D <= C for D in out):
            out.append(C)
    return out


def _universal(re: RatExpr) -> bool:
    """Every marking matches: some atom is ⊤ and the minimal DFA accepts everything."""
    from .rational import compile_re
    if TRUE not in re_atoms(re):
        return False
    d = compile_re(re)
    return d.size == 1 and 0 in d.finals


def ata_to_sfrmtl(A: Ata) -> Formula:
    """A rational MTL formula holding at position 1 exactly on the accepted words.

    The disjunction over region-by-region behaviours is kept factored: after
    each region the remaining obligations form a configuration, and the
    formula for the later regions is shared among all histories reaching it.
    """
    eng = _RegionEngine(A)
    return eng.g(0, frozenset([A.initial]))


# --- behaviour descriptions ------------------------------------------------------------------


@dataclass(frozen=True)
class Bd:
    location: str
    start: Region
    exit: Region
    entries: Tuple[RegionFormula, ...]

    def __str__(self) -> str:
        return f"BD({self.location},{self.start},{self.exit}) = (" + ", ".join(map(str, self.entries)) + ")"


def is_lowest(A: Ata, s: str) -> bool:
    return not A.calls(s)


def bd_set(A: Ata, s: str, cap: int = 4096) -> List[Bd]:
    """Behaviour descriptions of location ``s``.

    For a lowest location the entries follow the region case analysis
    (□ns P at the start region, □ns P ∨ ε or ε in between, and P U Q, Q or
    P W Q at the exit region). For a higher location the lower obligations
    are stitched in through the per-region automata and entries are
    explicit expressions.
    """
    check_ata(A)
    if s not in A.locations:
        raise AtaError(f"unknown location {s}")
    if is_lowest(A, s):
        return _lowest_bds(A, s)
    return _stitched_bds(A, s, cap)


def _lowest_bds(A: Ata, s: str) -> List[Bd]:
    models = _Models(A)
    regs = regions(A.K)
    last = len(regs) - 1
    P, Q = [], []
    for R in regs:
        v = _rep(R)
        stay = [a for a in A.alphabet if any(("loc", s) in m for m in models.at(s, a, v))]
        leave = [a for a in A.alphabet if any(not m for m in models.at(s, a, v))]
        P.append(disj(*[Prop(a) for a in stay]))
        Q.append(disj(*[Prop(a) for a in leave]))
    final = s in A.finals

    def exit_entry(j: int) -> Optional[RegionFormula]:
        p, q = P[j], Q[j]
        if final and j == last:
            if p is not FALSE:
                return r_weak(p, q)
            return r_or(r_first(q), R_EPS) if q is not FALSE else R_EPS
        if q is FALSE:
            return None
        return r_until(p, q) if p is not FALSE else r_first(q)

    out = []
    for i in range(len(regs)):
        if P[i] is FALSE and Q[i] is FALSE:
            continue
        for j in range(i, len(regs)):
            ex = exit_entry(j)
            if ex is None:
                continue
            entries = []
            ok = True
            for r in range(len(regs)):
                if r < i or r > j:
                    entries.append(R_TOP)
                elif r == j:
                    entries.append(ex)
                elif r == i:
                    if P[i] is FALSE:
                        ok = False
                        break
                    entries.append(r_box(P[i]))
                else:
                    entries.append(r_box_or_eps(P[r]) if P[r] is not FALSE else R_EPS)
            if ok:
                out.append(Bd(s, regs[i], regs[j], tuple(entries)))
    return out


def _stitched_bds(A: Ata, s: str, cap: int) -> List[Bd]:
    eng = _RegionEngine(A)
    regs = eng.regions
    last = eng.last
    out: List[Bd] = []
    L0 = frozenset([s])

    def walk(i: int, r: int, L: Config, entries: List[RegionFormula]):
        if len(out) >= cap:
            raise AtaError(f"more than {cap} behaviour descriptions")
        if r == last:
            re = eng.last_block(L)
            if r == i:
                re = _nonempty(re)
            if re is not EMPTY:
                out.append(Bd(s, regs[i], regs[r], tuple(entries + [r_expr(re)])))
            return
        for L2 in eng.targets_after(r, L):
            re = eng.block(r, L, L2)
            if r == i:
                re = _nonempty(re)
            if re is EMPTY:
                continue
            here = entries + [r_expr(re)]
            if not L2:
                out.append(Bd(s, regs[i], regs[r], tuple(here + [R_TOP] * (last - r))))
            else:
                walk(i, r + 1, L2, here)

    for i in range(len(regs)):
        walk(i, i, L0, [R_TOP] * i)
    return out


def _nonempty(re: RatExpr) -> RatExpr:
    """The language minus the empty word."""
    if re is EMPTY:
        return EMPTY
    from .rational import compile_re, nullable
    if not nullable(re):
        return re
    d = compile_re(re)
    # a fresh, non-accepting initial state with the old initial state's moves
    rows = [tuple(x + 1 for x in d.delta[0])] + [tuple(x + 1 for x in row) for row in d.delta]
    mrows, mfin = minimize(rows, [q + 1 for q in d.finals])
    if not mfin:
        return EMPTY
    return dfa_to_regex(Dfa(d.atoms, mrows, mfin), 0, mfin)


def bd_and(b1: Bd, b2: Bd) -> Bd:
    """Component-wise conjunction of two descriptions with the same start region."""
    if b1.start != b2.start:
        raise AtaError("descriptions start in different regions")
    entries = []
    for x, y in zip(b1.entries, b2.entries):
        if x == R_TOP:
            entries.append(y)
        elif y == R_TOP:
            entries.append(x)
        else:
            entries.append(r_and(x, y))
    return Bd(f"{b1.location}∧{b2.location}", b1.start, max(b1.exit, b2.exit), tuple(entries))


def bd_formula(bd: Bd) -> Formula:
    """Rat-conjunction asserting the description from the current point.

    The start region is the first non-empty one: the regions before it are
    empty and it has a point.
    """
    from .rational import region_ltl_to_sf
    regs = regions(bd.start.K)
    parts = [Rat(regs[g].interval, EPS) for g in range(bd.start.index)]
    parts.append(Rat(bd.start.interval, cat(Atom(TRUE), _every())))
    for R, e in zip(regs, bd.entries):
        if e == R_TOP:
            continue
        parts.append(Rat(R.interval, region_ltl_to_sf(e)))
    return conj(*parts)


def _every() -> RatExpr:
    from .formula import Star
    return Star(Atom(TRUE))


# --- SfrMTL to 1-TPTL ------------------------------------------------------------------------------


def sfr_to_tptl(f: Formula) -> Formula:
    """Closed 1-TPTL formula equivalent to a star-free rational MTL formula.

    Each rational modality is read through the exclusive DFA of its
    expression; the DFA must be partially ordered (its only cycles are
    self-loops), which holds for the region templates and for the automata
    produced from partially ordered ATAs with single-letter loops. A timed
    segment whose interval contains 0 starts at the current point: earlier
    points with the same stamp are out of reach of a future-only formula.
    """
    memo: Dict[Formula, Formula] = {}

    def tr(g: Formula) -> Formula:
        hit = memo.get(g)
        if hit is not None:
            return hit
        out = _tr(g, tr)
        memo[g] = out
        return out

    return tr(expand_derived(f, keep=(BoxNS, DiamondNS, WeakUntil, UntilNS)))


def _tr(g: Formula, tr) -> Formula:
    if isinstance(g, (Const, Prop)):
        return g
    if isinstance(g, Not):
        return neg(tr(g.arg))
    if isinstance(g, And):
        return conj(*[tr(x) for x in g.args])
    if isinstance(g, Or):
        return disj(*[tr(x) for x in g.args])
    if isinstance(g, Next):
        if g.interval == ALWAYS:
            return Next(ALWAYS, tr(g.arg))
        return Freeze(Next(ALWAYS, conj(tr(g.arg), ClockIn(g.interval))))
    if isinstance(g, WeakNext):
        return WeakNext(tr(g.arg))
    if isinstance(g, Until):
        inner = UntilNS(ALWAYS, tr(g.left), conj(tr(g.right), ClockIn(g.interval)))
        return Freeze(Next(ALWAYS, inner)) if g.interval != ALWAYS else Next(ALWAYS, inner)
    if isinstance(g, UntilNS):
        if g.interval != ALWAYS:
            return _tr(expand_derived(g), tr)
        return UntilNS(ALWAYS, tr(g.left), tr(g.right))
    if isinstance(g, WeakUntil):
        return WeakUntil(tr(g.left), tr(g.right))
    if isinstance(g, BoxNS):
        return BoxNS(tr(g.arg))
    if isinstance(g, DiamondNS):
        return DiamondNS(tr(g.arg))
    if isinstance(g, Rat):
        return _rat_tptl(g, tr)
    if isinstance(g, URat):
        return _urat_tptl(g, tr)
    if isinstance(g, Since):
        raise AtaError("past modalities have no 1-TPTL counterpart here")
    raise AtaError(f"{type(g).__name__} is not a star-free rational MTL construct")


def _po_dfa(re: RatExpr) -> Tuple[Dfa, Tuple[Formula, ...]]:
    try:
        if not is_star_free(re):
            raise AtaError(f"expression is not star-free: {unparse(re)}")
    except Undetermined:
        pass
    atoms = re_atoms(re)
    d = compile_exnf(re, atoms)
    dead = d.sink_states()
    live = [q for q in range(d.size) if q not in dead]
    # a cycle other than a self-loop shows up as a strongly connected pair
    reach = {q: set() for q in live}
    for q in live:
        stack = [r for r in d.delta[q] if r not in dead and r != q]
        while stack:
            r = stack.pop()
            if r not in reach[q]:
                reach[q].add(r)
                stack.extend(x for x in d.delta[r] if x not in dead and x != r)
    for q in live:
        if q in reach[q]:
            raise AtaError(f"expression's automaton has a cycle through several states: {unparse(re)}")
    return d, atoms


def _cover(d: Dfa, masks: Iterable[int], atoms: Sequence[Formula]) -> Formula:
    return boolean_cover(sorted(masks), list(atoms))


def _rat_tptl(g: Rat, tr) -> Formula:
    d, atoms = _po_dfa(g.re)
    tatoms = [tr(a) for a in atoms]
    dead = d.sink_states()
    iv = g.interval
    inI = ClockIn(iv)
    memo: Dict[int, Formula] = {}

    def F(q: int) -> Formula:
        if q in memo:
            return memo[q]
        loop = [x for x in range(d.letters) if d.delta[q][x] == q]
        stay = conj(inI, _cover(d, loop, tatoms)) if loop else FALSE
        exits = [neg(inI)] if q in d.finals else []
        moves: Dict[int, List[int]] = {}
        for x in range(d.letters):
            r = d.delta[q][x]
            if r != q and r not in dead:
                moves.setdefault(r, []).append(x)
        for r, xs in sorted(moves.items()):
            after = WeakNext(F(r)) if r in d.finals else Next(ALWAYS, F(r))
            exits.append(conj(inI, _cover(d, xs, tatoms), after))
        ex = disj(*exits)
        if stay is FALSE:
            out = ex
        elif q in d.finals:
            out = WeakUntil(stay, ex)
        else:
            out = UntilNS(ALWAYS, stay, ex)
        memo[q] = out
        return out

    if iv.lo == 0 and iv.lo_closed:
        return Freeze(F(0))
    before = ClockIn(Interval(0, iv.lo, True, not iv.lo_closed))
    body = UntilNS(ALWAYS, before, conj(neg(before), F(0)))
    if 0 in d.finals:
        body = disj(body, BoxNS(before))
    return Freeze(body)


def _urat_tptl(g: URat, tr) -> Formula:
    d, atoms = _po_dfa(g.re)
    tatoms = [tr(a) for a in atoms]
    dead = d.sink_states()
    left, right = tr(g.left), tr(g.right)
    inI = ClockIn(g.interval)
    memo: Dict[int, Formula] = {}

    def H(q: int) -> Formula:
        if q in memo:
            return memo[q]
        loop = [x for x in range(d.letters) if d.delta[q][x] == q]
        stay = conj(left, _cover(d, loop, tatoms)) if loop else FALSE
        exits = [conj(right, inI)] if q in d.finals else []
        moves: Dict[int, List[int]] = {}
        for x in range(d.letters):
            r = d.delta[q][x]
            if r != q and r not in dead:
                moves.setdefault(r, []).append(x)
        for r, xs in sorted(moves.items()):
            exits.append(conj(left, _cover(d, xs, tatoms), Next(ALWAYS, H(r))))
        ex = disj(*exits)
        out = ex if stay is FALSE else UntilNS(ALWAYS, stay, ex)
        memo[q] = out
        return out

    return Freeze(Next(ALWAYS, H(0)))


# --- random automata ---------------------------------------------------------------------------------


def random_ata(rng, locations: int = 3, K: int = 2, alphabet: Sequence[str] = ("a", "b")) -> Ata:
    """A random partially ordered automaton; s0 is highest and s{i} calls only s{j}, j > i."""
    n = rng.randint(1, locations)
    locs = tuple(f"s{i}" for i in range(n))
    finals = frozenset(s for s in locs if rng.random() < 0.5)
    order = frozenset((locs[j], locs[i]) for i in range(n) for j in range(i + 1, n))

    def clock():
        c = rng.randint(0, K)
        op = rng.choice(["<", "<=", ">", ">="])
        if c == 0 and op in ("<", ">="):
            op = ">" if op == ">=" else "<="
        return clock_constraint(op, c)

    def literal(i):
        roll = rng.random()
        lower = locs[i + 1:]
        if roll < 0.35:
            return Prop(locs[i])
        if roll < 0.55 and lower:
            return Prop(rng.choice(lower))
        if roll < 0.7 and lower:
            return Freeze(Prop(rng.choice(lower)))
        if roll < 0.95:
            return clock()
        return TRUE

    delta = {}
    for i, s in enumerate(locs):
        for a in alphabet:
            if rng.random() < 0.1:
                delta[(s, a)] = FALSE
                continue
            terms = [conj(*[literal(i) for _ in range(rng.randint(1, 2))]) for _ in range(rng.randint(1, 2))]
            delta[(s, a)] = disj(*terms)
    used = max([max_constant(f) for f in delta.values()] + [0])
    return check_ata(Ata(tuple(alphabet), locs, "s0", finals, order, delta, used))


# --- the translation triangle on enumerated words -------------------------------------------------


def grid_words(alphabet: Sequence[str], horizon, step, max_len: int) -> Iterator[TimedWord]:
    """Singleton words of length 1..max_len starting at 0 with stamps on the step grid up to horizon.

    Every formula and automaton here reads only stamp differences, so starting
    at 0 loses no behaviour.
    """
    step = Fraction(step)
    top = int(Fraction(horizon) / step)
    for n in range(1, max_len + 1):
        for ticks in itertools.combinations_with_replacement(range(top + 1), n - 1):
            stamps = [Fraction(0)] + [k * step for k in ticks]
            for letters in itertools.product(alphabet, repeat=n):
                yield TimedWord(tuple(frozenset([a]) for a in letters), tuple(stamps))


def region_class(w: TimedWord, K: int) -> tuple:
    """Letters plus the region of every pairwise stamp difference.

    Words in one class satisfy the same formulas whose interval bounds are at
    most K and are accepted alike by automata whose constants are at most K.
    """
    t = w.stamps
    gaps = tuple(region_of(t[j] - t[i], K).index for i in range(len(t)) for j in range(i + 1, len(t)))
    return (w.events, gaps)


def region_representatives(words: Iterable[TimedWord], K: int) -> List[TimedWord]:
    seen: Set[tuple] = set()
    out = []
    for w in words:
        key = region_class(w, K)
        if key not in seen:
            seen.add(key)
            out.append(w)
    return out


@dataclass(frozen=True)
class TriangleMismatch:
    word: TimedWord
    simulate: bool
    beh: bool
    sfrmtl: bool


def triangle(A: Ata, words: Sequence[TimedWord], batch: int = 4096) -> List[TriangleMismatch]:
    """Words on which simulation, Beh(s0) and the SfrMTL translation disagree.

    Simulation shares configurations between words with a common prefix; both
    formulas are evaluated on batches of equal-length words.
    """
    from .semantics import BatchEvaluator

    phi = beh(A).formula
    psi = ata_to_sfrmtl(A)
    models = _Models(A)
    start: Dict[tuple, Set[FrozenSet[Tuple[str, Fraction]]]] = {}
    prefix: Dict[tuple, Set[FrozenSet[Tuple[str, Fraction]]]] = {}

    def run(w: TimedWord) -> bool:
        configs = start.setdefault(w.stamps[:1], {frozenset([(A.initial, w.stamps[0])])})
        for k in range(len(w)):
            key = (w.events[:k + 1], w.stamps[:k + 1])
            hit = prefix.get(key)
            if hit is None:
                letters = _letters(A, TimedWord(w.events[k:k + 1], w.stamps[k:k + 1]), False)[0]
                hit = prefix[key] = _advance(models, configs, letters, w.stamps[k]) if configs else set()
            configs = hit
        return _accepting(A, configs)

    out = []
    by_len: Dict[int, List[TimedWord]] = {}
    for w in words:
        by_len.setdefault(len(w), []).append(w)
    for n in sorted(by_len):
        group = by_len[n]
        for lo in range(0, len(group), batch):
            chunk = group[lo:lo + batch]
            ev = BatchEvaluator(chunk)
            b, s = ev.holds(phi, 1, 0), ev.holds(psi, 1)
            for w, vb, vs in zip(chunk, b, s):
                vr = run(w)
                if not vr == bool(vb) == bool(vs):
                    out.append(TriangleMismatch(w, vr, bool(vb), bool(vs)))
    return out
