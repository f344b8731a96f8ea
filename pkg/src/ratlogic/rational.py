"""Compilation of rational expressions over formula atoms.

Two automata are derived from an expression whose atoms are S = (φ_1..φ_m):

* the *single* DFA reads letters 0..m-1 (one chosen atom per position);
* the *exclusive* DFA reads bitmasks over S, i.e. the exclusive normal form
  letters, one per position, deterministically.

A marking (the set of atoms true at each position) is accepted under the
single semantics iff some choice of one true atom per position spells a word
of the language. Subset simulation on the single DFA decides that; running the
exclusive DFA on the masks decides it too, and the two must agree.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .formula import (
    EMPTY, EPS, FALSE, TRUE, And, Atom, Cat, Comp, Const, Empty, Eps, Formula, Not, Or,
    Plus, Prop, RatExpr, Star, Union, cat, conj, disj, neg, normalize, re_atoms, star,
    union, unparse,
)


class Undetermined(RuntimeError):
    pass


@dataclass(frozen=True)
class Dfa:
    """Total DFA; state 0 is initial. ``mask`` DFAs read bitmasks over ``atoms``."""

    atoms: Tuple[Formula, ...]
    delta: Tuple[Tuple[int, ...], ...]
    finals: FrozenSet[int]
    mask: bool = False

    @property
    def size(self) -> int:
        return len(self.delta)

    @property
    def letters(self) -> int:
        return 1 << len(self.atoms) if self.mask else len(self.atoms)

    def step(self, q: int, letter: int) -> int:
        return self.delta[q][letter]

    def run(self, letters: Iterable[int], start: int = 0) -> int:
        q = start
        for a in letters:
            q = self.delta[q][a]
        return q

    def accepts(self, letters: Iterable[int]) -> bool:
        return self.run(letters) in self.finals

    def sink_states(self) -> FrozenSet[int]:
        """States from which no final state is reachable."""
        alive = set(self.finals)
        changed = True
        while changed:
            changed = False
            for q in range(self.size):
                if q not in alive and any(r in alive for r in self.delta[q]):
                    alive.add(q)
                    changed = True
        return frozenset(q for q in range(self.size) if q not in alive)

    def dump(self) -> str:
        lines = [f"states {self.size} init 0 finals {sorted(self.finals)}"]
        for q, row in enumerate(self.delta):
            lines.append(f"{q}: " + " ".join(f"{a}->{r}" for a, r in enumerate(row)))
        return "\n".join(lines)


# --- epsilon-free NFA combinators ----------------------------------------------


class _Nfa:
    """Position-automaton style NFA: single initial state, no epsilon moves."""

    __slots__ = ("init", "finals", "trans", "states")

    def __init__(self):
        self.init = 0
        self.finals: Set[int] = set()
        self.trans: Dict[int, Dict[int, Set[int]]] = {}
        self.states: Set[int] = set()


class _Builder:
    def __init__(self, nletters: int):
        self.n = nletters
        self.counter = itertools.count()

    def fresh(self, nfa: _Nfa) -> int:
        q = next(self.counter)
        nfa.states.add(q)
        nfa.trans[q] = {}
        return q

    def letterset(self, letters: Iterable[int]) -> _Nfa:
        a = _Nfa()
        a.init = self.fresh(a)
        end = self.fresh(a)
        for x in letters:
            a.trans[a.init].setdefault(x, set()).add(end)
        a.finals = {end}
        return a

    def eps(self) -> _Nfa:
        a = _Nfa()
        a.init = self.fresh(a)
        a.finals = {a.init}
        return a

    def empty(self) -> _Nfa:
        a = _Nfa()
        a.init = self.fresh(a)
        return a

    def _absorb(self, dst: _Nfa, src: _Nfa):
        dst.states |= src.states
        for q, row in src.trans.items():
            dst.trans[q] = {x: set(ts) for x, ts in row.items()}

    def concat(self, a: _Nfa, b: _Nfa) -> _Nfa:
        out = _Nfa()
        self._absorb(out, a)
        self._absorb(out, b)
        out.init = a.init
        for f in a.finals:
            for x, ts in b.trans[b.init].items():
                out.trans[f].setdefault(x, set()).update(ts)
        out.finals = set(b.finals)
        if b.init in b.finals:
            out.finals |= a.finals
        return out

    def alt(self, a: _Nfa, b: _Nfa) -> _Nfa:
        out = _Nfa()
        self._absorb(out, a)
        self._absorb(out, b)
        out.init = self.fresh(out)
        for src in (a, b):
            for x, ts in src.trans[src.init].items():
                out.trans[out.init].setdefault(x, set()).update(ts)
        out.finals = set(a.finals) | set(b.finals)
        if a.init in a.finals or b.init in b.finals:
            out.finals.add(out.init)
        return out

    def star(self, a: _Nfa) -> _Nfa:
        out = _Nfa()
        self._absorb(out, a)
        out.init = self.fresh(out)
        first = a.trans[a.init]
        for x, ts in first.items():
            out.trans[out.init].setdefault(x, set()).update(ts)
        for f in a.finals:
            for x, ts in first.items():
                out.trans[f].setdefault(x, set()).update(ts)
        out.finals = set(a.finals) | {out.init}
        return out

    def from_dfa(self, d: "Dfa") -> _Nfa:
        out = _Nfa()
        ids = [self.fresh(out) for _ in range(d.size)]
        out.init = ids[0]
        for q, row in enumerate(d.delta):
            for x, r in enumerate(row):
                out.trans[ids[q]].setdefault(x, set()).add(ids[r])
        out.finals = {ids[q] for q in d.finals}
        return out


def _determinize(nfa: _Nfa, nletters: int, letter_map=None) -> Tuple[List[List[int]], Set[int]]:
    """Subset construction. ``letter_map(x)`` lists the NFA letters read by DFA letter x."""
    start = frozenset([nfa.init])
    index = {start: 0}
    order = [start]
    delta: List[List[int]] = []
    finals: Set[int] = set()
    i = 0
    while i < len(order):
        cur = order[i]
        if cur & nfa.finals:
            finals.add(i)
        row = []
        for x in range(nletters):
            reads = letter_map(x) if letter_map else (x,)
            nxt = set()
            for q in cur:
                t = nfa.trans[q]
                for y in reads:
                    nxt.update(t.get(y, ()))
            key = frozenset(nxt)
            if key not in index:
                index[key] = len(order)
                order.append(key)
            row.append(index[key])
        delta.append(row)
        i += 1
    return delta, finals


def minimize(delta: Sequence[Sequence[int]], finals: Iterable[int]) -> Tuple[Tuple[Tuple[int, ...], ...], FrozenSet[int]]:
    """Moore partition refinement on the reachable part; returns BFS-numbered states."""
    n = len(delta)
    reach = [0]
    seen = {0}
    for q in reach:
        for r in delta[q]:
            if r not in seen:
                seen.add(r)
                reach.append(r)
    finals = set(finals)
    block = {q: int(q in finals) for q in reach}
    while True:
        sig = {q: (block[q],) + tuple(block[r] for r in delta[q]) for q in reach}
        ids: Dict[tuple, int] = {}
        new = {q: ids.setdefault(sig[q], len(ids)) for q in reach}
        if len(ids) == len(set(block.values())):
            block = new
            break
        block = new
    # renumber by BFS from the initial block
    rep: Dict[int, int] = {}
    for q in reach:
        rep.setdefault(block[q], q)
    number = {block[0]: 0}
    order = [block[0]]
    out_rows = []
    for b in order:
        row = []
        for r in delta[rep[b]]:
            rb = block[r]
            if rb not in number:
                number[rb] = len(order)
                order.append(rb)
            row.append(number[rb])
        out_rows.append(tuple(row))
    out_finals = frozenset(number[block[q]] for q in reach if q in finals)
    return tuple(out_rows), out_finals


def _nfa_of(re: RatExpr, atoms: Tuple[Formula, ...], b: _Builder) -> _Nfa:
    if isinstance(re, Atom):
        return b.letterset([atoms.index(normalize(re.formula))])
    if re is EPS:
        return b.eps()
    if re is EMPTY:
        return b.empty()
    if isinstance(re, Cat):
        out = _nfa_of(re.parts[0], atoms, b)
        for p in re.parts[1:]:
            out = b.concat(out, _nfa_of(p, atoms, b))
        return out
    if isinstance(re, Union):
        out = _nfa_of(re.parts[0], atoms, b)
        for p in re.parts[1:]:
            out = b.alt(out, _nfa_of(p, atoms, b))
        return out
    if isinstance(re, Star):
        return b.star(_nfa_of(re.arg, atoms, b))
    if isinstance(re, Plus):
        inner = _nfa_of(re.arg, atoms, b)
        return b.concat(inner, b.star(_nfa_of(re.arg, atoms, b)))
    if isinstance(re, Comp):
        d = _single_dfa(re.arg, atoms)
        flipped = Dfa(atoms, d.delta, frozenset(range(d.size)) - d.finals)
        return b.from_dfa(flipped)
    raise TypeError(f"not a rational expression: {re!r}")


@lru_cache(maxsize=4096)
def _single_dfa(re: RatExpr, atoms: Tuple[Formula, ...]) -> Dfa:
    b = _Builder(len(atoms))
    nfa = _nfa_of(re, atoms, b)
    delta, finals = _determinize(nfa, len(atoms))
    rows, fin = minimize(delta, finals)
    return Dfa(atoms, rows, fin)


def compile_re(re: RatExpr, atoms: Optional[Sequence[Formula]] = None) -> Dfa:
    """Minimal total DFA over the single-choice letters (atom indices)."""
    atoms = tuple(atoms) if atoms is not None else re_atoms(re)
    return _single_dfa(re, atoms)


@lru_cache(maxsize=4096)
def _mask_dfa(re: RatExpr, atoms: Tuple[Formula, ...]) -> Dfa:
    single = _single_dfa(re, atoms)
    b = _Builder(len(atoms))
    nfa = b.from_dfa(single)
    m = len(atoms)
    members = [tuple(i for i in range(m) if x >> i & 1) for x in range(1 << m)]
    delta, finals = _determinize(nfa, 1 << m, lambda x: members[x])
    rows, fin = minimize(delta, finals)
    return Dfa(atoms, rows, fin, mask=True)


def compile_exnf(re: RatExpr, atoms: Optional[Sequence[Formula]] = None) -> Dfa:
    """Minimal DFA over exclusive-normal-form letters (bitmasks over the atoms)."""
    atoms = tuple(atoms) if atoms is not None else re_atoms(re)
    return _mask_dfa(re, atoms)


def mask_of(marking: Iterable, atoms: Sequence[Formula]) -> int:
    m = 0
    for x in marking:
        i = x if isinstance(x, int) else atoms.index(normalize(x))
        m |= 1 << i
    return m


def membership_single(dfa: Dfa, markings: Sequence[Iterable]) -> bool:
    """Some per-position choice of one marked atom spells an accepted word."""
    if dfa.mask:
        return dfa.accepts(mask_of(mk, dfa.atoms) for mk in markings)
    cur = {0}
    for mk in markings:
        idx = [x if isinstance(x, int) else dfa.atoms.index(normalize(x)) for x in mk]
        cur = {dfa.delta[q][i] for q in cur for i in idx}
        if not cur:
            return False
    return bool(cur & dfa.finals)


# --- exclusive normal form ------------------------------------------------------


def minterm(mask: int, atoms: Sequence[Formula]) -> Formula:
    return conj(*[(a if mask >> i & 1 else neg(a)) for i, a in enumerate(atoms)])


@dataclass(frozen=True)
class ExnfSet:
    original: Tuple[Formula, ...]
    exclusive: Tuple[Formula, ...]
    atom_map: Dict[Formula, Tuple[int, ...]]


def to_exnf(re: RatExpr, S: Optional[Sequence[Formula]] = None) -> Tuple[RatExpr, ExnfSet]:
    """Rewrite over mutually exclusive full conjunctions of literals over S.

    Complement does not commute with letter substitution, so expressions that
    contain it are rebuilt from the exclusive DFA by state elimination.
    """
    S = tuple(S) if S is not None else re_atoms(re)
    exclusive = tuple(minterm(m, S) for m in range(1 << len(S)))
    amap = {f: tuple(m for m in range(1 << len(S)) if m >> i & 1) for i, f in enumerate(S)}
    if any(isinstance(n, Comp) for n in _re_nodes(re)):
        d = compile_exnf(re, S)
        out = dfa_to_regex(d, 0, d.finals, label=lambda ls: union(*[Atom(exclusive[x]) for x in sorted(ls)]))
        return out, ExnfSet(S, exclusive, amap)

    def sub(e):
        if isinstance(e, Atom):
            return union(*[Atom(exclusive[m]) for m in amap[normalize(e.formula)]])
        if isinstance(e, Cat):
            return cat(*[sub(p) for p in e.parts])
        if isinstance(e, Union):
            return union(*[sub(p) for p in e.parts])
        if isinstance(e, Star):
            return star(sub(e.arg))
        if isinstance(e, Plus):
            return Plus(sub(e.arg))
        return e

    return sub(re), ExnfSet(S, exclusive, amap)


def _re_nodes(e: RatExpr):
    yield e
    if isinstance(e, (Cat, Union)):
        for p in e.parts:
            yield from _re_nodes(p)
    elif isinstance(e, (Star, Plus, Comp)):
        yield from _re_nodes(e.arg)


def nullable(re: RatExpr) -> bool:
    if isinstance(re, Atom) or re is EMPTY:
        return False
    if re is EPS or isinstance(re, Star):
        return True
    if isinstance(re, Cat):
        return all(nullable(p) for p in re.parts)
    if isinstance(re, Union):
        return any(nullable(p) for p in re.parts)
    if isinstance(re, Plus):
        return nullable(re.arg)
    if isinstance(re, Comp):
        return not nullable(re.arg)
    raise TypeError(re)


# --- state elimination ----------------------------------------------------------


def dfa_to_regex(dfa: Dfa, start: int, finals: Iterable[int], label=None) -> RatExpr:
    """Expression for the words leading from ``start`` into ``finals``.

    ``label`` turns a set of letters on one edge into an expression; by default
    letters are atoms (single DFA) or minterm formulas (mask DFA).
    """
    if label is None:
        label = lambda ls: letters_expr(dfa, ls)
    finals = set(finals)
    dead = dfa.sink_states() - finals
    states = [q for q in range(dfa.size) if q not in dead or q == start]
    S, F = "s", "f"
    edges: Dict[Tuple, RatExpr] = {}

    def add(p, q, e):
        if e is EMPTY:
            return
        old = edges.get((p, q))
        edges[(p, q)] = e if old is None else union(old, e)

    for q in states:
        groups: Dict[int, Set[int]] = {}
        for x, r in enumerate(dfa.delta[q]):
            if r in states and (r not in dead):
                groups.setdefault(r, set()).add(x)
        for r, ls in groups.items():
            add(q, r, label(frozenset(ls)))
    add(S, start, EPS)
    for q in finals:
        if q in states:
            add(q, F, EPS)
    remaining = list(states)
    while remaining:
        def degree(q):
            ins = sum(1 for (p, r) in edges if r == q and p != q)
            outs = sum(1 for (p, r) in edges if p == q and r != q)
            return ins * outs
        remaining.sort(key=degree)
        q = remaining.pop(0)
        loop = edges.pop((q, q), None)
        loop_e = star(loop) if loop is not None else EPS
        ins = [(p, e) for (p, r), e in edges.items() if r == q]
        outs = [(r, e) for (p, r), e in edges.items() if p == q]
        for p, _ in ins:
            edges.pop((p, q), None)
        for r, _ in outs:
            edges.pop((q, r), None)
        for p, e1 in ins:
            for r, e2 in outs:
                add(p, r, cat(e1, loop_e, e2))
    return edges.get((S, F), EMPTY)


def letters_expr(dfa: Dfa, letters: FrozenSet[int]) -> RatExpr:
    if not dfa.mask:
        return union(*[Atom(dfa.atoms[x]) for x in sorted(letters)])
    return Atom(boolean_cover(letters, dfa.atoms))


def boolean_cover(masks: Iterable[int], atoms: Sequence[Formula]) -> Formula:
    """Small DNF over the atoms true exactly on the given bitmasks (Quine–McCluskey)."""
    m = len(atoms)
    on = set(masks)
    if not on:
        return FALSE
    if len(on) == 1 << m:
        return TRUE
    # implicants as (value, care) pairs
    terms = {(x, (1 << m) - 1) for x in on}
    primes = set()
    while terms:
        merged = set()
        used = set()
        tl = sorted(terms)
        for i, (v1, c1) in enumerate(tl):
            for v2, c2 in tl[i + 1:]:
                if c1 != c2:
                    continue
                diff = (v1 ^ v2) & c1
                if diff and diff & (diff - 1) == 0:
                    merged.add((v1 & ~diff, c1 & ~diff))
                    used.add((v1, c1))
                    used.add((v2, c2))
        primes |= terms - used
        terms = merged

    def covers(t, x):
        v, c = t
        return (x & c) == (v & c)

    chosen = []
    left = set(on)
    while left:
        best = max(sorted(primes), key=lambda t: (sum(1 for x in left if covers(t, x)), -bin(t[1]).count("1")))
        chosen.append(best)
        left = {x for x in left if not covers(best, x)}
    out = []
    for v, c in chosen:
        lits = [(atoms[i] if v >> i & 1 else neg(atoms[i])) for i in range(m) if c >> i & 1]
        out.append(conj(*lits))
    return disj(*out)


def decompose(re: RatExpr, atoms: Optional[Sequence[Formula]] = None) -> List[Tuple[RatExpr, RatExpr]]:
    """One pair per state q of the minimal DFA: (words reaching q, words from q to acceptance)."""
    d = compile_re(re, atoms)
    out = []
    for q in range(d.size):
        out.append((dfa_to_regex(d, 0, [q]), dfa_to_regex(d, q, d.finals)))
    return out


# --- star-freeness ---------------------------------------------------------------


def is_star_free(re: RatExpr, cap: int = 12, monoid_cap: int = 50000) -> bool:
    """Syntactically star-free, or the minimal DFA is aperiodic.

    Raises ``Undetermined`` above the size caps.
    """
    if not any(isinstance(n, (Star, Plus)) for n in _re_nodes(re)):
        return True
    d = compile_re(re)
    return is_aperiodic(d, cap, monoid_cap)


def is_aperiodic(d: Dfa, cap: int = 12, monoid_cap: int = 50000) -> bool:
    if d.size > cap:
        raise Undetermined(f"DFA has {d.size} states (cap {cap})")
    gens = [tuple(d.delta[q][x] for q in range(d.size)) for x in range(d.letters)]
    seen = set(gens)
    frontier = list(gens)
    while frontier:
        nxt = []
        for f in frontier:
            for g in gens:
                h = tuple(g[f[q]] for q in range(d.size))
                if h not in seen:
                    seen.add(h)
                    nxt.append(h)
                    if len(seen) > monoid_cap:
                        raise Undetermined("transition monoid too large")
        frontier = nxt
    n = d.size
    for f in seen:
        p = f
        for _ in range(n - 1):
            p = tuple(f[p[q]] for q in range(n))
        if tuple(f[p[q]] for q in range(n)) != p:
            return False
    return True


# --- region formulas ---------------------------------------------------------------


@dataclass(frozen=True)
class RegionFormula:
    """Untimed behaviour inside one clock region, asserted at the region's first point.

    kind is one of: eps, top, first (Q), box (□ns P), box_or_eps, until (P U Q,
    non-strict), weak (P W Q), boxbot, and, or, and expr (an explicit
    expression, used once nested obligations have been stitched in).
    """

    kind: str
    p: Optional[Formula] = None
    q: Optional[Formula] = None
    parts: Tuple["RegionFormula", ...] = ()
    re: Optional[RatExpr] = None

    def __str__(self) -> str:
        k = self.kind
        if k == "eps":
            return "ε"
        if k == "top":
            return "⊤"
        if k == "boxbot":
            return "□⊥"
        if k == "expr":
            return f"re {unparse(self.re)}"
        if k == "first":
            return _short(self.q)
        if k == "box":
            return f"□ns {_short(self.p)}"
        if k == "box_or_eps":
            return f"□ns {_short(self.p)} ∨ ε"
        if k == "until":
            return f"{_short(self.p)} U {_short(self.q)}"
        if k == "weak":
            return f"{_short(self.p)} W {_short(self.q)}"
        sep = " ∧ " if k == "and" else " ∨ "
        return "(" + sep.join(str(x) for x in self.parts) + ")"


def _short(f: Formula) -> str:
    from .formula import pretty
    return pretty(f)


R_EPS = RegionFormula("eps")
R_TOP = RegionFormula("top")
R_BOXBOT = RegionFormula("boxbot")


def r_first(q): return RegionFormula("first", q=q)
def r_box(p): return RegionFormula("box", p=p)
def r_box_or_eps(p): return RegionFormula("box_or_eps", p=p)
def r_until(p, q): return RegionFormula("until", p=p, q=q)
def r_weak(p, q): return RegionFormula("weak", p=p, q=q)
def r_and(*xs): return RegionFormula("and", parts=tuple(xs))
def r_or(*xs): return RegionFormula("or", parts=tuple(xs))
def r_expr(re): return RegionFormula("expr", re=re)


def _bases(f: Formula, out: List[Formula]):
    if isinstance(f, Const):
        return
    if isinstance(f, (And, Or)):
        for a in f.args:
            _bases(a, out)
    elif isinstance(f, Not):
        _bases(f.arg, out)
    elif f not in out:
        out.append(f)


def _eval_bool(f: Formula, val: Dict[Formula, bool]) -> bool:
    if isinstance(f, Const):
        return f.value
    if isinstance(f, And):
        return all(_eval_bool(a, val) for a in f.args)
    if isinstance(f, Or):
        return any(_eval_bool(a, val) for a in f.args)
    if isinstance(f, Not):
        return not _eval_bool(f.arg, val)
    return val[f]


def region_bases(rf: RegionFormula) -> List[Formula]:
    out: List[Formula] = []
    for x in _rf_nodes(rf):
        for f in (x.p, x.q):
            if f is not None:
                _bases(f, out)
        if x.re is not None:
            for f in re_atoms(x.re):
                _bases(f, out)
    return out


def _rf_nodes(rf: RegionFormula):
    yield rf
    for x in rf.parts:
        yield from _rf_nodes(x)


def region_ltl_to_sf(rf: RegionFormula, bases: Optional[Sequence[Formula]] = None) -> RatExpr:
    """Star-free expression for the region segments satisfying ``rf``.

    Letters are the minterms over the base formulas, so they are mutually
    exclusive and complement means what it says.
    """
    bases = list(bases) if bases is not None else region_bases(rf)
    m = len(bases)
    terms = [minterm(x, bases) for x in range(1 << m)]

    def lset(f: Optional[Formula]) -> RatExpr:
        picks = []
        for x in range(1 << m):
            val = {b: bool(x >> i & 1) for i, b in enumerate(bases)}
            if _eval_bool(f, val):
                picks.append(Atom(terms[x]))
        return union(*picks)

    # Σ* spelled so that every letter occurs in the expression: complement is
    # taken relative to the expression's own atoms
    every = union(EPS, cat(union(*[Atom(t) for t in terms]), Comp(EMPTY)))

    def only(f):  # P*: no letter outside P
        bad = lset(neg(f)) if m else EMPTY
        return Comp(cat(every, bad, every)) if bad is not EMPTY else every

    def go(x: RegionFormula) -> RatExpr:
        k = x.kind
        if k == "eps":
            return EPS
        if k in ("top", "boxbot"):
            return every
        if k == "first":
            return cat(lset(x.q), every)
        if k == "box":
            return cat(lset(x.p), only(x.p))
        if k == "box_or_eps":
            return only(x.p)
        if k == "until":
            return cat(only(x.p), lset(x.q), every)
        if k == "weak":
            return union(cat(only(x.p), lset(x.q), every), only(x.p))
        if k == "and":
            return Comp(union(*[Comp(go(y)) for y in x.parts]))
        if k == "or":
            return union(*[go(y) for y in x.parts])
        if k == "expr":
            return x.re
        raise ValueError(f"region formula outside the template grammar: {k}")

    return go(rf)


def region_holds(rf: RegionFormula, seg: Sequence[Dict[Formula, bool]]) -> bool:
    """Direct semantics of a region formula on a segment of base valuations."""
    k = rf.kind
    ev = lambda f, v: _eval_bool(f, v)
    if k == "eps":
        return not seg
    if k in ("top", "boxbot"):
        return True
    if k == "first":
        return bool(seg) and ev(rf.q, seg[0])
    if k == "box":
        return bool(seg) and all(ev(rf.p, v) for v in seg)
    if k == "box_or_eps":
        return all(ev(rf.p, v) for v in seg)
    if k in ("until", "weak"):
        for v in seg:
            if ev(rf.q, v):
                return True
            if not ev(rf.p, v):
                return False
        return k == "weak"
    if k == "and":
        return all(region_holds(x, seg) for x in rf.parts)
    if k == "or":
        return any(region_holds(x, seg) for x in rf.parts)
    if k == "expr":
        atoms = re_atoms(rf.re)
        marks = [[a for a in atoms if _eval_bool(a, v)] for v in seg]
        return membership_single(compile_re(rf.re, atoms), marks)
    raise ValueError(k)
