"""Satisfiability-preserving reductions from rational MTL to plain MTL.

Every Rat, URat or modular-until subformula is replaced by a fresh witness
proposition ``w.N`` whose meaning is pinned down by an MTL formula over an
extended alphabet. The extension adds

* thread annotations ``th.N.i.q`` / ``th.N.i.x`` and merge marks ``mg.N.j.i``
  that record a deterministic run of the expression's automaton started at
  every position,
* integer c-points ``c.k`` (k counts modulo a fixed cycle) and ``ovs`` points
  at fixed offsets after every original point,
* modular counters ``b.N.k`` for the modular until.

Each reduction carries a recipe that builds the canonical extension of a word;
erasing the added points and symbols gives the word back.
"""

from __future__ import annotations

import builtins
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .formula import (
    EMPTY,
    FALSE,
    SIGMA_STAR,
    TRUE,
    Atom,
    Cat,
    ClockIn,
    Comp,
    Const,
    Formula,
    FormulaError,
    Freeze,
    ModCount,
    Next,
    Node,
    Plus,
    Prop,
    Rat,
    RatExpr,
    Since,
    Star,
    TUntil,
    URat,
    Union,
    Until,
    UntilMod,
    WeakNext,
    always_ns,
    cat,
    conj,
    disj,
    expand_derived,
    has_punctual,
    implies,
    max_constant,
    neg,
    props,
    re_atoms,
    rebuild,
)
from .rational import Dfa, boolean_cover, compile_exnf, compile_re, decompose, dfa_to_regex, nullable
from .semantics import Evaluator
from .timed import ALWAYS, Extension, Interval, TimedWord, WordError, erase_symbols

POINT0 = Interval.point(0)
UNIT = Interval(0, 1, False, True)  # (0,1]
OPEN_UNIT = Interval(0, 1, False, False)  # (0,1)
AFTER = Interval(0, None, False, False)  # (0,inf)


class ReductionError(ValueError):
    pass


# --- temporal definitions ---------------------------------------------------------


@dataclass(frozen=True)
class TemporalDefinition:
    """``witness`` holds exactly where ``body`` does; ``source`` is the unflattened subformula."""

    witness: str
    body: Formula
    source: Formula

    @property
    def formula(self) -> Formula:
        w = Prop(self.witness)
        return always_ns(conj(implies(w, self.body), implies(self.body, w)))

    @property
    def tag(self) -> str:
        return self.witness.split(".", 1)[1]


_LIFTED = (Rat, URat, UntilMod)


def _map_children(node: Node, fn) -> Node:
    args = []
    for v in node._key:
        if isinstance(v, Node):
            args.append(fn(v))
        elif isinstance(v, tuple) and v and isinstance(v[0], Node):
            args.append(tuple(fn(x) for x in v))
        else:
            args.append(v)
    return type(node)(*args)


def flatten(f: Formula) -> Tuple[Formula, List[TemporalDefinition]]:
    """Name every Rat/URat/modular-until subformula by a witness, outermost first.

    Derived modalities other than the modular until are expanded first.
    Definition bodies mention inner witnesses instead of inner subformulas.
    """
    f = expand_derived(f, keep=(UntilMod,))
    counter = itertools.count(1)
    names: Dict[Node, str] = {}
    defs: Dict[str, TemporalDefinition] = {}
    memo: Dict[Node, Node] = {}

    def visit(n: Node) -> Node:
        hit = memo.get(n)
        if hit is not None:
            return hit
        if isinstance(n, _LIFTED):
            name = f"w.{next(counter)}"
            names[n] = name
            body = _map_children(n, visit)
            defs[name] = TemporalDefinition(name, body, n)
            out = Prop(name)
        else:
            out = _map_children(n, visit)
        memo[n] = out
        return out

    flat = visit(f)
    order = sorted(defs, key=lambda s: int(s.split(".")[1]))
    return flat, [defs[k] for k in order]


# --- relativization ----------------------------------------------------------------


def relativize(f: Formula, act: Formula) -> Formula:
    """Make every modality skip positions where ``act`` fails."""
    if act is TRUE:
        return f

    def step(n):
        if isinstance(n, Until):
            return Until(n.interval, implies(act, n.left), conj(act, n.right))
        if isinstance(n, Since):
            return Since(n.interval, implies(act, n.left), conj(act, n.right))
        if isinstance(n, Next):
            return Until(n.interval, neg(act), conj(act, n.arg))
        if isinstance(n, WeakNext):
            return neg(Until(ALWAYS, neg(act), conj(act, neg(n.arg))))
        if isinstance(n, (Rat, URat, UntilMod, Freeze, ClockIn, TUntil)):
            raise ReductionError(f"cannot relativize {type(n).__name__}; flatten first")
        return n

    return rebuild(f, step)


def _next_act(x: Formula, act: Formula) -> Formula:
    if act is TRUE:
        return Next(ALWAYS, x)
    return Until(ALWAYS, neg(act), conj(act, x))


def _weak_next_act(x: Formula, act: Formula) -> Formula:
    if act is TRUE:
        return WeakNext(x)
    return neg(_next_act(neg(x), act))


# --- threads -----------------------------------------------------------------------


@dataclass(frozen=True)
class ThreadRow:
    """Thread states before reading one position, and merges recorded there."""

    states: Dict[int, int]
    merges: frozenset


def thread_table(dfa: Dfa, letters: Sequence[int]) -> List[ThreadRow]:
    """Canonical annotation: one run per start position, equal runs merged into the lowest thread.

    Thread 1 starts at the first position. After each step the lowest thread
    in a state keeps it; the others are merged into it and become free. If no
    thread is in the initial state, the lowest free thread restarts there.
    """
    rows: List[ThreadRow] = []
    cur = {1: 0}
    merges: frozenset = frozenset()
    for x in letters:
        rows.append(ThreadRow(dict(cur), merges))
        owner: Dict[int, int] = {}
        nxt: Dict[int, int] = {}
        found = set()
        for i in sorted(cur):
            q = dfa.delta[cur[i]][x]
            if q in owner:
                found.add((owner[q], i))
            else:
                owner[q] = i
                nxt[i] = q
        if 0 not in owner:
            free = min(i for i in range(1, dfa.size + 1) if i not in nxt)
            nxt[free] = 0
        cur, merges = nxt, frozenset(found)
    return rows


class _Threads:
    """Proposition names and transition formulas for one definition's threads."""

    def __init__(self, dfa: Dfa, tag: str, atoms: Sequence[Formula], act: Formula):
        self.dfa = dfa
        self.tag = tag
        self.act = act
        self.atoms = tuple(atoms)
        self.m = dfa.size
        self.ids = range(1, self.m + 1)
        self._covers: Dict[frozenset, Formula] = {}

    def th(self, i: int, q: int) -> Prop:
        return Prop(f"th.{self.tag}.{i}.{q}")

    def bot(self, i: int) -> Prop:
        return Prop(f"th.{self.tag}.{i}.x")

    def mg(self, j: int, i: int) -> Prop:
        return Prop(f"mg.{self.tag}.{j}.{i}")

    def symbols(self) -> List[str]:
        out = []
        for i in self.ids:
            out += [self.th(i, q).name for q in range(self.m)] + [self.bot(i).name]
            out += [self.mg(j, i).name for j in range(1, i)]
        return out

    def mrg(self, g: int) -> Formula:
        """Thread ``g`` hands its run to a lower thread here."""
        return conj(self.act, disj(*[self.mg(j, g) for j in range(1, g)]))

    def cover(self, masks) -> Formula:
        key = frozenset(masks)
        hit = self._covers.get(key)
        if hit is None:
            hit = boolean_cover(sorted(key), self.atoms)
            self._covers[key] = hit
        return hit

    def _letters(self, p: int, pred) -> Formula:
        return self.cover(x for x in range(self.dfa.letters) if pred(self.dfa.delta[p][x]))

    def nxt(self, i: int, q: int) -> Formula:
        """After reading this position, thread ``i`` is in state ``q``."""
        return disj(*[conj(self.th(i, p), self._letters(p, lambda r: r == q)) for p in range(self.m)])

    def final_next(self, g: int) -> Formula:
        fin = self.dfa.finals
        return disj(*[conj(self.th(g, p), self._letters(p, lambda r: r in fin)) for p in range(self.m)])

    def final_here(self, g: int) -> Formula:
        return disj(*[self.th(g, q) for q in sorted(self.dfa.finals)])

    def fresh(self, body) -> Formula:
        """Some thread starts here in the initial state and ``body(i)`` holds for it."""
        return disj(*[conj(self.th(i, 0), body(i)) for i in self.ids])

    def events(self, letters: Sequence[int]) -> List[frozenset]:
        out = []
        for row in thread_table(self.dfa, letters):
            ev = set()
            for i in self.ids:
                q = row.states.get(i)
                ev.add(self.bot(i).name if q is None else self.th(i, q).name)
            ev |= {self.mg(j, i).name for j, i in row.merges}
            out.append(frozenset(ev))
        return out


def run_formula(dfa: Dfa, tag: str = "1", act: Formula = TRUE, atoms: Optional[Sequence[Formula]] = None) -> Formula:
    """The annotation over ``act`` positions follows the merged-thread discipline.

    Any annotation satisfying it tracks, on some thread, the run started at
    every ``act`` position, and records every hand-over by a merge mark.
    """
    return _run_constraint(_Threads(dfa, tag, dfa.atoms if atoms is None else atoms, act)).formula


def _run_constraint(T: _Threads) -> Constraint:
    act = T.act
    ids = list(T.ids)
    states = range(T.m)
    wna = lambda x: _weak_next_act(x, act)
    init = conj(T.th(1, 0), *[T.bot(i) for i in ids[1:]],
                *[neg(T.mg(j, i)) for i in ids for j in range(1, i)])
    nxt = {(i, q): T.nxt(i, q) for i in ids for q in states}
    keep = {(i, q): conj(nxt[i, q], *[neg(nxt[j, q]) for j in range(1, i)]) for i in ids for q in states}
    clauses = []
    for i in ids:
        slots = [T.th(i, q) for q in states] + [T.bot(i)]
        clauses.append(disj(*slots))
        clauses += [neg(conj(a, b)) for a, b in itertools.combinations(slots, 2)]
    for q in states:
        clauses += [neg(conj(T.th(i, q), T.th(j, q))) for i, j in itertools.combinations(ids, 2)]
    clauses.append(disj(*[T.th(i, 0) for i in ids]))
    for i in ids:
        unmerged = [neg(T.mg(j, i)) for j in range(1, i)]
        for q in states:
            clauses.append(implies(keep[i, q], wna(conj(T.th(i, q), *unmerged))))
        for j in range(1, i):
            pairs = [conj(nxt[i, q], keep[j, q]) for q in states]
            for pq in pairs:
                clauses.append(implies(pq, wna(conj(T.mg(j, i), disj(T.bot(i), T.th(i, 0))))))
            clauses.append(implies(neg(disj(*pairs)), wna(neg(T.mg(j, i)))))
        clauses.append(implies(T.bot(i), wna(conj(disj(T.bot(i), T.th(i, 0)), *unmerged))))
    return Constraint(f"w.{T.tag} run", init, implies(act, conj(*clauses)))


def annotate_threads(w: TimedWord, dfa: Dfa, tag: str = "1") -> TimedWord:
    """Add the canonical thread annotation for ``dfa`` to every position of ``w``."""
    T = _Threads(dfa, tag, dfa.atoms, TRUE)
    ext = T.events(_letters_of(w, dfa))
    return w.with_events([e | x for e, x in zip(w.events, ext)])


def _letters_of(w: TimedWord, dfa: Dfa, positions: Optional[Sequence[int]] = None) -> List[int]:
    ev = Evaluator(w)
    cols = [ev.vec(a) for a in dfa.atoms]
    idx = positions if positions is not None else range(len(w))
    return [sum(1 << x for x in range(len(cols)) if cols[x][k]) for k in idx]


@dataclass(frozen=True)
class Constraint:
    """``init`` at the first position and ``body`` at every position."""

    name: str
    init: Formula
    body: Formula = TRUE

    @property
    def formula(self) -> Formula:
        return conj(self.init, always_ns(self.body)) if self.body is not TRUE else self.init

    def locate(self, ev: Evaluator) -> Optional[int]:
        """First failing position, or None when the constraint holds."""
        if not ev.n:
            return None
        if not ev.holds(self.init, 1):
            return 1
        col = ev.vec(self.body)
        return next((k + 1 for k, v in enumerate(col) if not v), None)


# --- chases over thread annotations ---------------------------------------------------


class _Chase:
    """Follow one run forward along merges until ``term`` holds for the carrying thread.

    ``guard`` must hold at every position strictly after the start.
    """

    def __init__(self, T: _Threads, term: Callable[[int], Formula], guard: Formula = TRUE,
                 step: Interval = ALWAYS, until=None):
        self.T, self.term, self.guard, self.step = T, term, guard, step
        self.until = until or (lambda a, b: Until(self.step, a, b))
        self._memo: Dict[int, Formula] = {}

    def ft(self, g: int) -> Formula:
        hit = self._memo.get(g)
        if hit is None:
            T = self.T
            stay = conj(neg(T.mrg(g)), self.guard)
            hop = conj(T.act, self.guard, disj(*[conj(T.mg(k, g), self.ft(k)) for k in range(1, g)]))
            hit = disj(self.term(g), self.until(stay, disj(conj(stay, self.term(g)), hop)))
            self._memo[g] = hit
        return hit


def c_label(k: int, M: int) -> Prop:
    return Prop(f"c.{k % M}")


def _any_c(M: int) -> Formula:
    return disj(*[c_label(k, M) for k in range(M)])


@dataclass
class _Window:
    """A run over the act points between an anchor P and a later point Q.

    The run is split at B, the first c-point labelled ``b`` after P. The part
    before B is chased forward from P; the part from B is chased backward from
    Q. The two halves agree on a link: either the run starts after B, or the
    thread carrying it at the last act point before B.
    """

    T: _Threads
    b: int
    M: int
    h: int
    start_incl: bool
    end_incl: bool
    null: bool

    def __post_init__(self):
        T, M = self.T, self.M
        self.act = T.act
        self.B = c_label(self.b, M)
        allowed = {(self.b + k) % M for k in range(self.h + 1)}
        self.forb = disj(*[c_label(k, M) for k in range(M) if k not in allowed])
        self.G = conj(neg(self.B), neg(self.forb))
        self._fl: Dict[Tuple[int, int], Formula] = {}
        self._bc: Dict[Tuple[int, object], Formula] = {}

    # forward half
    def fl(self, g: int, t: int) -> Formula:
        key = (g, t)
        hit = self._fl.get(key)
        if hit is None:
            T, B = self.T, self.B
            stay = conj(neg(T.mrg(g)), neg(B))
            hop = conj(self.act, neg(B), disj(*[conj(T.mg(k, g), self.fl(k, t)) for k in range(1, g)]))
            hit = Until(ALWAYS, stay, disj(B if g == t else FALSE, hop))
            self._fl[key] = hit
        return hit

    def fwd(self, link) -> Formula:
        act, B = self.act, self.B
        quiet = conj(neg(act), neg(B))
        if link == "start":
            core = Until(ALWAYS, quiet, B)
            return core if not self.start_incl else conj(neg(act), core)
        x = self.T.fresh(lambda i: self.fl(i, link))
        later = Until(ALWAYS, quiet, conj(act, neg(B), x))
        if not self.start_incl:
            return later
        return disj(conj(act, x), conj(neg(act), later))

    # backward half
    def _first(self, x: Formula) -> Formula:
        return conj(x, disj(self.B, Since(ALWAYS, conj(neg(self.act), self.G), conj(self.B, neg(self.act)))))

    def _link(self, g: int, link) -> Formula:
        T = self.T
        if link == "start":
            return T.th(g, 0)
        if g == link:
            return neg(T.mrg(link))
        return T.mg(g, link) if g < link else FALSE

    def _prev(self, x: Formula) -> Formula:
        return Since(ALWAYS, conj(neg(self.act), self.G), conj(self.act, x))

    def bc(self, g: int, link) -> Formula:
        key = (g, link)
        hit = self._bc.get(key)
        if hit is None:
            T, act = self.T, self.act
            here = self._first(self._link(g, link))
            sw = conj(act, neg(self.B), disj(*[conj(T.mg(g, k), self._prev(self.bc(k, link)))
                                               for k in range(g + 1, T.m + 1)]))
            y = conj(neg(self.forb), disj(here, sw))
            stay = conj(neg(T.mrg(g)), self.G)
            hit = disj(y, conj(neg(T.mrg(g)), Since(ALWAYS, stay, conj(act, y))))
            self._bc[key] = hit
        return hit

    def _link_empty(self, link) -> Formula:
        if link == "start":
            return Const(self.null)
        return Since(ALWAYS, neg(self.act), conj(self.act, self.T.final_next(link)))

    def bwd(self, link) -> Formula:
        act, B, G = self.act, self.B, self.G
        le = self._link_empty(link)
        none = disj(conj(B, le), conj(neg(B), Since(ALWAYS, conj(neg(act), G), conj(B, neg(act), le))))
        x = disj(*[conj(self.T.final_next(g), self.bc(g, link)) for g in self.T.ids])
        land = conj(act, neg(self.forb), x)
        walk = Since(ALWAYS, conj(neg(act), G), land)
        if self.end_incl:
            none = conj(neg(act), none)
            last = disj(land, conj(neg(act), neg(B), walk))
        else:
            last = conj(neg(B), walk)
        return disj(none, last)

    def formula(self, J: Interval, qcond: Formula) -> Formula:
        links = ["start"] + list(self.T.ids)
        return disj(*[conj(self.fwd(L), Until(J, TRUE, conj(qcond, self.bwd(L)))) for L in links])


def _per_label(M: int, body: Callable[[int], Formula]) -> Formula:
    """Case split on the label of the first c-point in (now, now+1]."""
    return disj(*[conj(Until(UNIT, TRUE, c_label(b, M)), body(b)) for b in range(M)])


# --- the pieces of a reduction ---------------------------------------------------------


@dataclass
class _Part:
    """One eliminated definition: its constraint and how to annotate words for it."""

    constraints: List[Constraint]
    symbols: List[str]
    annotate: Callable[[TimedWord], List[frozenset]]
    offsets: List[int] = field(default_factory=list)
    cpoints: bool = False
    strict: bool = False
    punctual: bool = False


def _first_at_stamp() -> Formula:
    return neg(Since(POINT0, TRUE, TRUE))


def _last_at_stamp() -> Formula:
    return neg(Until(POINT0, TRUE, TRUE))


def _at_offset(l: int, x: Formula) -> Formula:
    if l > 0:
        return Until(Interval.point(l), TRUE, x)
    return disj(x, Until(POINT0, TRUE, x), Since(POINT0, TRUE, x))


def _def_constraint(td: TemporalDefinition, act: Formula, check: Formula) -> Constraint:
    w = Prop(td.witness)
    return Constraint(f"{td.witness} definition", TRUE, implies(act, conj(implies(w, check), implies(check, w))))


def _thread_part(td: TemporalDefinition, re: RatExpr, act: Formula) -> Tuple[_Threads, Dfa]:
    dfa = compile_exnf(re)
    atoms = [relativize(a, act) for a in dfa.atoms]
    return _Threads(dfa, td.tag, atoms, act), dfa


def _thread_annotator(T: _Threads, dfa: Dfa, act_names: frozenset):
    def annotate(w: TimedWord) -> List[frozenset]:
        pos = [k for k in range(len(w)) if w.events[k] & act_names]
        letters = _letters_of(w, dfa, pos)
        evs = T.events(letters)
        out = [frozenset()] * len(w)
        for k, e in zip(pos, evs):
            out[k] = e
        return out

    return annotate


def _rat_part(td: TemporalDefinition, sigma: Sequence[str], M: int) -> _Part:
    body = td.body
    if not isinstance(body, Rat):
        raise ReductionError("eliminate_rat expects a Rat definition")
    act = _act(sigma)
    T, dfa = _thread_part(td, body.re, act)
    I = body.interval
    l, u = I.lo, I.hi
    null = nullable(body.re)
    fa, la = _first_at_stamp(), _last_at_stamp()
    offsets = [l] if l > 0 else []
    cpoints = False
    if I.punctual:
        term = lambda g: conj(act, T.final_next(g), neg(Until(POINT0, TRUE, act)))
        ch = _Chase(T, term, step=POINT0)
        x = conj(fa, disj(conj(act, T.fresh(ch.ft)), conj(neg(act), Const(null))))
    elif u is None:
        term = lambda g: conj(act, T.final_next(g), neg(Until(ALWAYS, TRUE, act)))
        ch = _Chase(T, term)
        run = T.fresh(ch.ft)
        later = Until(ALWAYS, neg(act), conj(act, run))
        empty = neg(Until(ALWAYS, TRUE, act))
        if I.lo_closed:
            x = conj(fa, disj(conj(act, run), conj(neg(act), later), conj(neg(act), empty, Const(null))))
        else:
            x = conj(la, disj(later, conj(empty, Const(null))))
    else:
        d = u - l
        cpoints = True
        offsets.append(u)
        start = fa if I.lo_closed else la
        qcond = la if I.hi_closed else fa

        def win(b):
            W = _Window(T, b, M, d - 1, I.lo_closed, I.hi_closed, null)
            return W.formula(Interval.point(d), qcond)

        x = conj(start, _per_label(M, win))
    check = _at_offset(l, x)
    return _Part(
        constraints=[_def_constraint(td, act, check), _run_constraint(T)],
        symbols=T.symbols(),
        annotate=_thread_annotator(T, dfa, frozenset(sigma)),
        offsets=offsets,
        cpoints=cpoints,
        punctual=True,
    )


def _push_left(re: RatExpr, x: Formula) -> RatExpr:
    """Conjoin ``x`` to every atom of ``re``."""
    if x is TRUE:
        return re
    if isinstance(re, Atom):
        return Atom(conj(re.formula, x))
    if isinstance(re, (Cat, Union)):
        return type(re)(tuple(_push_left(p, x) for p in re.parts))
    if isinstance(re, (Star, Plus, Comp)):
        return type(re)(_push_left(re.arg, x))
    return re


def _urat_part(td: TemporalDefinition, sigma: Sequence[str], M: int) -> _Part:
    body = td.body
    if not isinstance(body, URat):
        raise ReductionError("eliminate_urat expects a URat definition")
    act = _act(sigma)
    T, dfa = _thread_part(td, _push_left(body.re, body.left), act)
    y = relativize(body.right, act)
    I = body.interval
    l, u = I.lo, I.hi
    null = nullable(_push_left(body.re, body.left))
    term = lambda g: conj(act, y, T.final_here(g))
    cpoints = False
    if I.punctual and l == 0:
        check = FALSE
    elif u is None and l == 0:
        ch = _Chase(T, term)
        check = Until(ALWAYS, neg(act), conj(act, T.fresh(ch.ft)))
    elif u is None:
        cpoints = True

        def cases(b):
            W = _Window(T, b, M, l - 1, False, False, null)
            near = W.formula(Interval(l, l + 1, I.lo_closed, False), conj(act, y))
            return disj(near, _crossing(T, c_label(b + l, M), term))

        check = _per_label(M, cases)
    else:
        cpoints = True

        def cases(b):
            B = c_label(b, M)
            W = _Window(T, b, M, u - 1, False, False, null)
            out = [W.formula(I, conj(act, y))]
            if l == 0:
                ch = _Chase(T, term, guard=neg(B))
                out.append(Until(ALWAYS, conj(neg(act), neg(B)), conj(act, neg(B), T.fresh(ch.ft))))
            return disj(*out)

        check = _per_label(M, cases)
    return _Part(
        constraints=[_def_constraint(td, act, check), _run_constraint(T)],
        symbols=T.symbols(),
        annotate=_thread_annotator(T, dfa, frozenset(sigma)),
        cpoints=cpoints,
        strict=True,
    )


def _crossing(T: _Threads, B2: Formula, term) -> Formula:
    """The run from the next act point ends at or after the c-point ``B2``."""
    act = T.act
    ch = _Chase(T, term)
    memo: Dict[int, Formula] = {}

    def cross(g):
        at_act = conj(act, disj(conj(neg(T.mrg(g)), ch.ft(g)),
                                *[conj(T.mg(k, g), ch.ft(k)) for k in range(1, g)]))
        return disj(at_act, conj(neg(act), ch.ft(g)))

    def pre(g):
        if g not in memo:
            stay = conj(neg(T.mrg(g)), neg(B2))
            hop = conj(act, neg(B2), disj(*[conj(T.mg(k, g), pre(k)) for k in range(1, g)]))
            memo[g] = Until(ALWAYS, stay, disj(hop, conj(B2, cross(g))))
        return memo[g]

    quiet = conj(neg(act), neg(B2))
    fresh_after = T.fresh(ch.ft)
    at_b2 = disj(conj(act, fresh_after), conj(neg(act), Until(ALWAYS, neg(act), conj(act, fresh_after))))
    return disj(Until(ALWAYS, quiet, conj(act, neg(B2), T.fresh(pre))), Until(ALWAYS, quiet, conj(B2, at_b2)))


def _um_part(td: TemporalDefinition, sigma: Sequence[str]) -> _Part:
    body = td.body
    if not isinstance(body, UntilMod):
        raise ReductionError("eliminate_um expects a modular-until definition")
    act = _act(sigma)
    n, K = body.n, body.k
    psi = relativize(body.counted, act)
    x = relativize(body.left, act)
    y = relativize(body.right, act)
    cnt = [Prop(f"b.{td.tag}.{k}") for k in range(n)]
    na = lambda f: _next_act(f, act)
    step = []
    for k in range(n):
        step.append(implies(conj(cnt[k], na(psi)), na(cnt[(k + 1) % n])))
        step.append(implies(conj(cnt[k], na(neg(psi))), na(cnt[k])))
    step.append(disj(*cnt))
    step += [neg(conj(a, b)) for a, b in itertools.combinations(cnt, 2)]
    w = Prop(td.witness)
    marks = []
    for k in range(n):
        target = conj(act, y, disj(conj(neg(psi), cnt[(k + K) % n]), conj(psi, cnt[(k + K + 1) % n])))
        rhs = Until(body.interval, implies(act, x), target)
        marks.append(implies(cnt[k], conj(implies(w, rhs), implies(rhs, w))))
    cons = [Constraint(f"{td.witness} counters", cnt[0], implies(act, conj(*step))),
            Constraint(f"{td.witness} definition", TRUE, implies(act, conj(*marks)))]
    names = frozenset(sigma)

    def annotate(wd: TimedWord) -> List[frozenset]:
        col = Evaluator(wd).vec(body.counted)
        out, c, seen = [], 0, False
        for k in range(len(wd)):
            if not wd.events[k] & names:
                out.append(frozenset())
                continue
            if seen and col[k]:
                c = (c + 1) % n
            seen = True
            out.append(frozenset([cnt[c].name]))
        return out

    return _Part(cons, [p.name for p in cnt], annotate, strict=True)


def _act(sigma: Sequence[str]) -> Formula:
    return disj(*[Prop(s) for s in sorted(sigma)])


def _td_sigma(td: TemporalDefinition) -> List[str]:
    return sorted(props(td.body) | {td.witness})


# --- oversampling ------------------------------------------------------------------------


def oversample(w: TimedWord, max: Optional[int], bounds: Sequence[Tuple[int, Optional[int]]] = (),
               upto=None) -> Extension:
    """Add ``ovs`` points at every original stamp plus each bound, and integer c-points.

    c-points carry ``c.k`` with k the integer modulo ``max``; they sit on the
    first point at their stamp, new or old, and cover every integer from 0 up
    to the last stamp, or up to ``upto`` when that is later.
    ``max=None`` adds no c-points. New points never share a stamp with another point.
    """
    offsets = sorted({d for pair in bounds for d in pair if d})
    stamps = set(w.stamps)
    extra = sorted({t + d for t in w.stamps for d in offsets} - stamps)
    items = [(t, 0, k, set(e)) for k, (e, t) in enumerate(zip(w.events, w.stamps))]
    items += [(t, 1, 0, {"ovs"}) for t in extra]
    new_syms = {"ovs"} if extra else set()
    if max is not None:
        if max < 1:
            raise ReductionError("c-point cycle must be positive")
        last = builtins.max((t for t, *_ in items), default=Fraction(0))
        occupied = stamps | set(extra)
        top = int(last) if upto is None else builtins.max(int(last), int(upto))
        for n in range(0, top + 1):
            lab = f"c.{n % max}"
            new_syms.add(lab)
            if Fraction(n) not in occupied:
                items.append((Fraction(n), 1, 0, set()))
        items.sort(key=lambda it: (it[0], it[1], it[2]))
        firsts = {}
        for idx, (t, *_rest) in enumerate(items):
            firsts.setdefault(t, idx)
        for n in range(0, top + 1):
            items[firsts[Fraction(n)]][3].add(f"c.{n % max}")
    items.sort(key=lambda it: (it[0], it[1], it[2]))
    ext = TimedWord(tuple(frozenset(e) for *_x, e in items), tuple(t for t, *_x in items))
    new_pos = frozenset(i + 1 for i, it in enumerate(items) if it[1] == 1)
    return Extension(w, ext, frozenset(new_syms), new_pos)



# --- assembling reductions -----------------------------------------------------------------


@dataclass
class ReductionOutput:
    """A reduced formula with the recipe that builds a model for it from a source model."""

    formula: Formula
    constraints: List[Constraint]
    alphabet: Tuple[str, ...]
    definitions: List[TemporalDefinition]
    new_symbols: frozenset
    max_label: Optional[int]
    offsets: Tuple[int, ...]
    strict: bool
    _witness: Callable[[TimedWord], TimedWord]
    _parts: List[_Part]

    def recipe(self, w: TimedWord) -> Extension:
        """The canonical extension of a word over the alphabet."""
        sig = frozenset(self.alphabet)
        for k, e in enumerate(w.events, 1):
            if not e & sig:
                raise WordError(f"position {k} carries no letter of the alphabet {sorted(sig)}")
            if e - sig:
                raise WordError(f"position {k} uses symbols outside the alphabet: {sorted(e - sig)}")
        if self.strict and not w.is_strict():
            raise WordError("this reduction needs a strictly monotone word")
        return self.extend(w, self._witness(w))

    def extend(self, w: TimedWord, w1: TimedWord) -> Extension:
        """Extension of ``w`` built from ``w1``, a copy of ``w`` carrying chosen witness values."""
        extra = [set() for _ in range(len(w))]
        for part in self._parts:
            for k, e in enumerate(part.annotate(w1)):
                extra[k] |= e
        w2 = w1.with_events([e | x for e, x in zip(w1.events, extra)])
        ov = oversample(w2, self.max_label, [(d, None) for d in self.offsets], upto=_ceil_last(w2, self.offsets))
        return Extension(w, ov.extended, self.new_symbols, ov.new_positions)

    def witnesses(self, w: TimedWord) -> TimedWord:
        """``w`` with every witness set to the truth value of its subformula."""
        return self._witness(w)

    def locate(self, w: TimedWord) -> List[Tuple[str, int]]:
        """Every violated constraint with the first position where it fails."""
        ev = Evaluator(w)
        out = []
        for c in self.constraints:
            k = c.locate(ev)
            if k is not None:
                out.append((c.name, k))
        return out

    def erase(self, w: TimedWord) -> TimedWord:
        """Project any word over the extended alphabet back onto the original alphabet."""
        sig = frozenset(self.alphabet)
        return erase_symbols(w, self.new_symbols | (w.props() - sig), lambda ev: bool(ev & sig))


def _ceil_last(w: TimedWord, offsets: Sequence[int]) -> int:
    """c-points run up to the last stamp rounded up, so every point has one within the next unit."""
    if not len(w):
        return 0
    last = w.stamps[-1] + builtins.max(offsets, default=0)
    return -(-last.numerator // last.denominator)


def _assemble(top: Formula, defs: List[TemporalDefinition], parts: List[_Part], sigma: Sequence[str],
              M: int, witness: Callable[[TimedWord], TimedWord]) -> ReductionOutput:
    act = _act(sigma)
    offsets = sorted({d for p in parts for d in p.offsets})
    cpoints = any(p.cpoints for p in parts)
    punctual = any(p.punctual for p in parts)
    cons = [Constraint("top", top)] + [c for p in parts for c in p.constraints]
    syms = set(d.witness for d in defs)
    for p in parts:
        syms |= set(p.symbols)
    if offsets:
        cons.append(Constraint("ovs", TRUE, implies(act, conj(*[Until(Interval.point(d), TRUE, TRUE) for d in offsets]))))
        syms.add("ovs")
    if cpoints:
        cons.append(_cpoint_formula(M, punctual))
        syms |= {f"c.{k}" for k in range(M)}
    if punctual:
        alone = conj(neg(Until(POINT0, TRUE, TRUE)), neg(Since(POINT0, TRUE, TRUE)))
        cons.append(Constraint("isolation", TRUE, implies(neg(act), alone)))
    return ReductionOutput(
        formula=conj(*[c.formula for c in cons]),
        constraints=cons,
        alphabet=tuple(sorted(sigma)),
        definitions=defs,
        new_symbols=frozenset(syms),
        max_label=M if cpoints else None,
        offsets=tuple(offsets),
        strict=any(p.strict for p in parts),
        _witness=witness,
        _parts=parts,
    )


def _cpoint_formula(M: int, punctual: bool) -> Constraint:
    C = _any_c(M)
    labels = [c_label(k, M) for k in range(M)]
    body = [implies(C, neg(Until(OPEN_UNIT, TRUE, C)))]
    body += [implies(labels[k], implies(Until(AFTER, TRUE, TRUE), Until(UNIT, TRUE, labels[(k + 1) % M])))
             for k in range(M)]
    body += [neg(conj(a, b)) for a, b in itertools.combinations(labels, 2)]
    if punctual:
        body.append(implies(C, neg(Since(POINT0, TRUE, TRUE))))
    return Constraint("c-points", labels[0], conj(*body))


def _single(td: TemporalDefinition, maker, sigma: Optional[Sequence[str]], M: Optional[int]) -> ReductionOutput:
    sigma = list(sigma) if sigma is not None else _td_sigma(td)
    M = M if M is not None else max_constant(td.body) + 2
    part = maker(td, sigma, M) if maker is not _um_part else maker(td, sigma)
    return _assemble(conj(_act(sigma)), [], [part], sigma, M, lambda w: w)


def eliminate_rat(td: TemporalDefinition, sigma: Optional[Sequence[str]] = None,
                  M: Optional[int] = None) -> ReductionOutput:
    """MTL constraint over thread annotations, c-points and ovs points equivalent to a Rat definition.

    The word being extended already carries the witness; ``sigma`` defaults to
    the propositions of the definition.
    """
    return _single(td, _rat_part, sigma, M)


def eliminate_urat(td: TemporalDefinition, sigma: Optional[Sequence[str]] = None,
                   M: Optional[int] = None) -> ReductionOutput:
    """MITL constraint equivalent to a URat definition over strictly monotone words."""
    return _single(td, _urat_part, sigma, M)


def eliminate_um(td: TemporalDefinition, sigma: Optional[Sequence[str]] = None) -> ReductionOutput:
    """Counter-based MITL constraint equivalent to a modular-until definition."""
    return _single(td, _um_part, sigma, None)


def reduce(f: Formula, alphabet: Optional[Sequence[str]] = None) -> ReductionOutput:
    """Equisatisfiable MTL (or MITL, for URat and modular-until inputs) formula with its recipe.

    ``alphabet`` defaults to the propositions of ``f`` (or ``a`` when it has none).
    """
    sigma = sorted(set(alphabet) if alphabet is not None else props(f)) or ["a"]
    missing = props(f) - set(sigma)
    if missing:
        raise ReductionError(f"alphabet misses {sorted(missing)}")
    clash = [s for s in sigma if s.split(".")[0] in ("w", "th", "mg", "c", "b") and "." in s or s == "ovs"]
    if clash:
        raise ReductionError(f"alphabet uses reserved names {clash}")
    flat, defs = flatten(f)
    M = max_constant(f) + 2
    act = _act(sigma)
    parts = []
    for td in defs:
        if isinstance(td.body, Rat):
            parts.append(_rat_part(td, sigma, M))
        elif isinstance(td.body, URat):
            parts.append(_urat_part(td, sigma, M))
        else:
            parts.append(_um_part(td, sigma))
    top = conj(act, relativize(flat, act))

    def witness(w: TimedWord) -> TimedWord:
        ev = Evaluator(w)
        cols = [(td.witness, ev.vec(td.source)) for td in defs]
        return w.with_events([e | {n for n, col in cols if col[k]} for k, e in enumerate(w.events)])

    return _assemble(top, defs, parts, sigma, M, witness)


# --- rewritings between rational and counting operators ------------------------------------


def urat_to_rat(f: Formula) -> Formula:
    """Rewrite every URat into Rat operators; exact on strictly monotone words."""

    def step(n):
        if not isinstance(n, URat):
            return n
        I = n.interval
        re1 = _push_left(n.re, n.left)
        tail = cat(Atom(n.right), SIGMA_STAR)
        if I.punctual and I.lo == 0:
            return FALSE
        if I.lo == 0:
            # complements inside re1 range over its own letters; going through
            # the automaton keeps the added y and true letters out of them
            d = compile_re(re1)
            return Rat(Interval(0, I.hi, False, I.hi_closed), cat(dfa_to_regex(d, 0, d.finals), tail))
        pre = Interval(0, I.lo, False, not I.lo_closed)
        out = []
        for r1, r2 in decompose(re1):
            if r1 is EMPTY or r2 is EMPTY:
                continue
            out.append(conj(Rat(pre, r1), Rat(I, cat(r2, tail))))
        return disj(*out)

    return rebuild(f, step)


def um_to_mc(f: Formula) -> Formula:
    """Rewrite every modular until into modular counting; exact on strictly monotone words.

    With C(i) the count of the counted formula strictly after i, the count
    strictly between i and j is C(i) - C(j) minus one if it also holds at j.
    """

    def step(n):
        if not isinstance(n, UntilMod):
            return n
        k, m, psi = n.k, n.n, n.counted
        out = []
        for k1 in range(m):
            here = ModCount(AFTER, k1, m, psi)
            k2 = (k1 - k) % m
            k3 = (k1 - k - 1) % m
            at_j = disj(conj(neg(psi), ModCount(AFTER, k2, m, psi)), conj(psi, ModCount(AFTER, k3, m, psi)))
            out.append(conj(here, Until(n.interval, n.left, conj(n.right, at_j))))
        return disj(*out)

    return rebuild(f, step)


# --- one-clock check over an annotated word -------------------------------------------------


def rat_to_tptl_check(f: Formula, tag: str = "1") -> Formula:
    """Closed 1-TPTL formula that holds exactly where the Rat formula ``f`` holds.

    It reads the thread annotation added by ``annotate_threads`` for
    ``compile_exnf(f.re)`` under the same ``tag``: it freezes the clock, finds
    the first position of the window, and chases that position's run to the
    window's last position.
    """
    if not isinstance(f, Rat):
        raise ReductionError("rat_to_tptl_check expects a Rat formula")
    dfa = compile_exnf(f.re)
    T = _Threads(dfa, tag, dfa.atoms, TRUE)
    I = f.interval
    inside = ClockIn(I)
    last_in = conj(inside, WeakNext(neg(inside)))
    ch = _Chase(T, lambda g: conj(last_in, T.final_next(g)), until=TUntil)
    good = T.fresh(ch.ft)
    if I.lo == 0 and I.lo_closed:
        first_in = conj(inside, neg(Since(ALWAYS, FALSE, inside)))
        start = conj(first_in, good)
        main = Freeze(disj(start, Since(ALWAYS, TRUE, start)))
    else:
        below = ClockIn(Interval(0, I.lo, True, not I.lo_closed))
        entry = Next(ALWAYS, conj(inside, good))
        main = Freeze(disj(TUntil(TRUE, conj(below, entry)), entry))
    some = Freeze(disj(inside, TUntil(TRUE, inside), Since(ALWAYS, TRUE, inside)))
    return disj(main, conj(Const(nullable(f.re)), neg(some)))


# --- bounded backward search ---------------------------------------------------------------


@dataclass
class SearchReport:
    candidates: int = 0
    models: List[TimedWord] = field(default_factory=list)
    violations: List[Tuple[TimedWord, TimedWord]] = field(default_factory=list)


def random_word(rng, alphabet: Sequence[str], max_len: int, horizon, grid=Fraction(1, 4),
                strict: bool = False) -> TimedWord:
    """Random word with stamps on the grid inside [0, horizon], starting at 0."""
    slots = int(Fraction(horizon) / grid)
    n = rng.randint(1, max_len)
    if strict:
        n = builtins.min(n, slots + 1)
        ticks = [0] + sorted(rng.sample(range(1, slots + 1), n - 1))
    else:
        ticks = [0] + sorted(rng.randint(0, slots) for _ in range(n - 1))
    events = []
    for _ in range(n):
        ev = frozenset(a for a in alphabet if rng.random() < 0.5)
        events.append(ev or frozenset([rng.choice(list(alphabet))]))
    return TimedWord(tuple(events), tuple(t * grid for t in ticks))


def _mutants(out: ReductionOutput, ext: TimedWord, rng, count: int, grid) -> List[TimedWord]:
    syms = sorted(out.new_symbols - {d.witness for d in out.definitions})
    sig = frozenset(out.alphabet)
    res = []
    for _ in range(count):
        events = [set(e) for e in ext.events]
        stamps = list(ext.stamps)
        kind = rng.random()
        if kind < 0.6 and syms:
            for _ in range(rng.randint(1, 2)):
                k = rng.randrange(len(events))
                events[k] ^= {rng.choice(syms)}
        elif kind < 0.8:
            new = [k for k, e in enumerate(events) if not e & sig]
            if new:
                k = rng.choice(new)
                del events[k], stamps[k]
        else:
            t = rng.randint(0, int(stamps[-1] / grid) + 2) * grid
            labels = {x for x in syms if x == "ovs" or x.startswith("c.")}
            ev = {x for x in labels if rng.random() < 0.3}
            k = next((i for i, u in enumerate(stamps) if u > t), len(stamps))
            events.insert(k, ev)
            stamps.insert(k, t)
        res.append(TimedWord(tuple(frozenset(e) for e in events), tuple(stamps)))
    return res


def backward_search(source: Formula, out: ReductionOutput, rng, bases: int = 20, max_len: int = 6,
                    grid=Fraction(1, 4), mutations: int = 4) -> SearchReport:
    """Look for models of the reduced formula whose erasure violates the source.

    Candidates come from random base words on the grid: the canonical
    extension, extensions built from every single-flip of the witness values,
    and random mutations of the annotation and of the added points.
    """
    horizon = max_constant(source) + 2
    report = SearchReport()
    seen = set()
    for _ in range(bases):
        w = random_word(rng, out.alphabet, max_len, horizon, grid, out.strict)
        w1 = out.witnesses(w)
        valuations = [w1]
        for d in out.definitions:
            for k in range(len(w)):
                events = [set(e) for e in w1.events]
                events[k] ^= {d.witness}
                valuations.append(w1.with_events(events))
        cands = []
        for v in valuations:
            cands.append(out.extend(w, v).extended)
        cands += _mutants(out, cands[0], rng, mutations, grid)
        for c in cands:
            if c in seen:
                continue
            seen.add(c)
            report.candidates += 1
            if Evaluator(c).holds(out.formula, 1):
                report.models.append(c)
                base = out.erase(c)
                if not len(base) or not Evaluator(base).holds(source, 1):
                    report.violations.append((c, base))
    return report
