"""Pointwise semantics on finite timed words.

``Evaluator`` computes a truth vector per (subformula, clock valuation) and
memoizes it for one word. ``oracle_eval`` is a deliberately naive recursive
evaluator sharing no code with it (rational membership is decided by brute
force over single-choice words and a recursive matcher); tests pit the two
against each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .formula import (
    EMPTY, EPS, And, Atom, Box, BoxNS, Cat, ClockIn, Comp, Const, Count, Diamond, DiamondNS,
    Formula, Freeze, ModCount, Next, Not, Or, Plus, Pnueli, Prop, Rat, RatExpr, Since, Star,
    TUntil, URat, Union, Until, UntilMod, UntilNS, WeakNext, WeakUntil, normalize, re_atoms,
)
from .rational import compile_re, membership_single
from .timed import ALWAYS, Interval, TimedWord, to_rational


class EvalError(ValueError):
    pass


def _in(iv: Interval, d) -> bool:
    return d >= 0 and iv.contains(d)


class Evaluator:
    """Memoized evaluation over one word; positions are 1-based in the API."""

    def __init__(self, w: TimedWord):
        self.w = w
        self.n = len(w)
        self.t = w.stamps
        self.ev = w.events
        self._memo: Dict[Tuple[Formula, Optional[Fraction]], Tuple[bool, ...]] = {}
        self._segs: Dict[Tuple[Interval, int], range] = {}

    def holds(self, f: Formula, i: int = 1, nu=None) -> bool:
        if not 1 <= i <= self.n:
            raise EvalError(f"position {i} out of range 1..{self.n}")
        return self.vec(f, None if nu is None else to_rational(nu))[i - 1]

    def vec(self, f: Formula, nu: Optional[Fraction] = None) -> Tuple[bool, ...]:
        key = (f, nu)
        hit = self._memo.get(key)
        if hit is None:
            if nu is not None and not _clock_dependent(f):
                hit = self.vec(f, None)
            else:
                hit = tuple(self._compute(f, nu))
            self._memo[key] = hit
        return hit

    # -- segments ---------------------------------------------------------------

    def tseg_range(self, iv: Interval, i: int) -> range:
        """0-based positions k with τ_k - τ_i in the interval (contiguous)."""
        key = (iv, i)
        hit = self._segs.get(key)
        if hit is None:
            base = self.t[i]
            ks = [k for k in range(self.n) if _in(iv, self.t[k] - base)]
            hit = self._segs[key] = range(ks[0], ks[-1] + 1) if ks else range(0)
        return hit

    def marking_rows(self, atoms: Sequence[Formula], nu) -> List[Tuple[int, ...]]:
        cols = [self.vec(a, nu) for a in atoms]
        return [tuple(x for x in range(len(atoms)) if cols[x][k]) for k in range(self.n)]

    # -- clauses ----------------------------------------------------------------

    def _compute(self, f: Formula, nu) -> List[bool]:
        n, t = self.n, self.t
        if isinstance(f, Prop):
            return [f.name in e for e in self.ev]
        if isinstance(f, Const):
            return [f.value] * n
        if isinstance(f, Not):
            return [not x for x in self.vec(f.arg, nu)]
        if isinstance(f, And):
            vs = [self.vec(a, nu) for a in f.args]
            return [all(v[k] for v in vs) for k in range(n)]
        if isinstance(f, Or):
            vs = [self.vec(a, nu) for a in f.args]
            return [any(v[k] for v in vs) for k in range(n)]
        if isinstance(f, (Until, TUntil, UntilNS)):
            iv = ALWAYS if isinstance(f, TUntil) else f.interval
            a, b = self.vec(f.left, nu), self.vec(f.right, nu)
            lo = 0 if isinstance(f, UntilNS) else 1
            out = []
            for i in range(n):
                ok = False
                for j in range(i + lo, n):
                    if b[j] and _in(iv, t[j] - t[i]):
                        ok = True
                        break
                    if not a[j]:
                        break
                out.append(ok)
            return out
        if isinstance(f, Since):
            a, b = self.vec(f.left, nu), self.vec(f.right, nu)
            out = []
            for i in range(n):
                ok = False
                for j in range(i - 1, -1, -1):
                    if b[j] and _in(f.interval, t[i] - t[j]):
                        ok = True
                        break
                    if not a[j]:
                        break
                out.append(ok)
            return out
        if isinstance(f, Next):
            a = self.vec(f.arg, nu)
            return [i + 1 < n and a[i + 1] and _in(f.interval, t[i + 1] - t[i]) for i in range(n)]
        if isinstance(f, WeakNext):
            a = self.vec(f.arg, nu)
            return [i + 1 >= n or a[i + 1] for i in range(n)]
        if isinstance(f, Rat):
            atoms = re_atoms(f.re)
            dfa = compile_re(f.re, atoms)
            rows = self.marking_rows(atoms, nu)
            return [membership_single(dfa, [rows[k] for k in self.tseg_range(f.interval, i)])
                    for i in range(n)]
        if isinstance(f, URat):
            atoms = re_atoms(f.re)
            dfa = compile_re(f.re, atoms)
            rows = self.marking_rows(atoms, nu)
            a, b = self.vec(f.left, nu), self.vec(f.right, nu)
            out = []
            for i in range(n):
                ok = False
                cur = {0}
                for j in range(i + 1, n):
                    if b[j] and _in(f.interval, t[j] - t[i]) and cur & dfa.finals:
                        ok = True
                        break
                    if not a[j]:
                        break
                    cur = {dfa.delta[q][x] for q in cur for x in rows[j]}
                    if not cur:
                        break
                out.append(ok)
            return out
        if isinstance(f, ClockIn):
            if nu is None:
                raise EvalError("clock constraint evaluated without a valuation")
            return [_in(f.interval, t[i] - nu) for i in range(n)]
        if isinstance(f, Freeze):
            return [self.vec(f.arg, t[i])[i] for i in range(n)]
        if isinstance(f, Diamond):
            a = self.vec(f.arg, nu)
            return [any(a[j] and _in(f.interval, t[j] - t[i]) for j in range(i + 1, n)) for i in range(n)]
        if isinstance(f, Box):
            a = self.vec(f.arg, nu)
            return [all(a[j] for j in range(i + 1, n) if _in(f.interval, t[j] - t[i])) for i in range(n)]
        if isinstance(f, DiamondNS):
            a = self.vec(f.arg, nu)
            return [any(a[i:]) for i in range(n)]
        if isinstance(f, BoxNS):
            a = self.vec(f.arg, nu)
            return [all(a[i:]) for i in range(n)]
        if isinstance(f, WeakUntil):
            a, b = self.vec(f.left, nu), self.vec(f.right, nu)
            out = []
            for i in range(n):
                ok = True
                for j in range(i, n):
                    if b[j]:
                        break
                    if not a[j]:
                        ok = False
                        break
                out.append(ok)
            return out
        if isinstance(f, Count):
            a = self.vec(f.arg, nu)
            return [sum(a[k] for k in self.tseg_range(f.interval, i)) >= f.n for i in range(n)]
        if isinstance(f, ModCount):
            a = self.vec(f.arg, nu)
            return [sum(a[k] for k in self.tseg_range(f.interval, i)) % f.n == f.k for i in range(n)]
        if isinstance(f, Pnueli):
            cols = [self.vec(g, nu) for g in f.args]
            out = []
            for i in range(n):
                seg = list(self.tseg_range(f.interval, i))
                idx = 0
                for k in seg:
                    if idx < len(cols) and cols[idx][k]:
                        idx += 1
                out.append(idx == len(cols))
            return out
        if isinstance(f, UntilMod):
            a, b, c = self.vec(f.left, nu), self.vec(f.right, nu), self.vec(f.counted, nu)
            out = []
            for i in range(n):
                ok = False
                cnt = 0
                for j in range(i + 1, n):
                    if b[j] and _in(f.interval, t[j] - t[i]) and cnt % f.n == f.k:
                        ok = True
                        break
                    if not a[j]:
                        break
                    cnt += c[j]
                out.append(ok)
            return out
        raise EvalError(f"cannot evaluate {type(f).__name__}")


class BatchEvaluator:
    """Evaluate formulas on many words of one length at once (numpy, exact).

    Stamps are scaled by a common denominator to integers, so interval tests
    stay exact. A value is a boolean array of shape (words, resets, positions):
    the middle axis has length 1 for clock-free formulas and one entry per
    reset position under a freeze. ``holds`` agrees with ``Evaluator.holds``.
    """

    def __init__(self, words: Sequence[TimedWord]):
        words = list(words)
        if not words:
            raise EvalError("empty batch")
        self.n = n = len(words[0])
        if n == 0 or any(len(w) != n for w in words):
            raise EvalError("batch words must share one positive length")
        self.words = words
        self.scale = math.lcm(*{t.denominator for w in words for t in w.stamps})
        self.t = np.array([[int(t * self.scale) for t in w.stamps] for w in words], dtype=np.int64)
        self.diff = self.t[:, None, :] - self.t[:, :, None]  # [w, i, j] = t_j - t_i
        self._memo: Dict[Tuple[Formula, str], np.ndarray] = {}
        self._ivs: Dict[Tuple[Interval, str], np.ndarray] = {}
        self._base: Optional[np.ndarray] = None

    def holds(self, f: Formula, i: int = 1, nu=None) -> np.ndarray:
        """Truth of f at 1-based position i for every word; nu is the clock value there."""
        if not 1 <= i <= self.n:
            raise EvalError(f"position {i} out of range 1..{self.n}")
        if nu is not None and _clock_dependent(f):
            shift = to_rational(nu) * self.scale
            if shift.denominator != 1:
                raise EvalError("valuation is not on the word's stamp grid")
            self._base = self.t[:, i - 1:i] - int(shift)
            self._memo = {k: v for k, v in self._memo.items() if k[1] != "top"}
            return self.vec(f, "top")[:, 0, i - 1]
        return self.vec(f, "")[:, 0, i - 1]

    def _in(self, iv: Interval, d: np.ndarray) -> np.ndarray:
        lo = iv.lo * self.scale
        ok = (d >= lo) if iv.lo_closed else (d > lo)
        ok &= d >= 0
        if iv.hi is not None:
            hi = iv.hi * self.scale
            ok &= (d <= hi) if iv.hi_closed else (d < hi)
        return ok

    def window(self, iv: Interval) -> np.ndarray:
        """[w, i, j]: t_j - t_i lies in the interval."""
        hit = self._ivs.get((iv, "w"))
        if hit is None:
            hit = self._ivs[(iv, "w")] = self._in(iv, self.diff)
        return hit

    def vec(self, f: Formula, ctx: str) -> np.ndarray:
        if not _clock_dependent(f):
            ctx = ""
        key = (f, ctx)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._memo[key] = self._compute(f, ctx)
        return hit

    def _shape(self, *vs: np.ndarray) -> Tuple[int, int, int]:
        return (len(self.words), max(v.shape[1] for v in vs), self.n)

    def _rows(self, atoms: Sequence[Formula], ctx: str) -> List[np.ndarray]:
        return [self.vec(a, ctx) for a in atoms]

    def _dfa_step(self, dfa, cur: np.ndarray, cols: List[np.ndarray], k: int) -> np.ndarray:
        new = np.zeros_like(cur)
        for q in range(dfa.size):
            cq = cur[..., q]
            if not cq.any():
                continue
            for x, col in enumerate(cols):
                q2 = dfa.delta[q][x]
                new[..., q2] |= cq & col[:, :, k]
        return new

    def _compute(self, f: Formula, ctx: str) -> np.ndarray:
        W, n = len(self.words), self.n
        if isinstance(f, Prop):
            return np.array([[f.name in e for e in w.events] for w in self.words], dtype=bool)[:, None, :]
        if isinstance(f, Const):
            return np.full((W, 1, n), f.value, dtype=bool)
        if isinstance(f, Not):
            return ~self.vec(f.arg, ctx)
        if isinstance(f, (And, Or)):
            vs = [self.vec(a, ctx) for a in f.args]
            out = np.broadcast_to(vs[0], self._shape(*vs)).copy()
            for v in vs[1:]:
                if isinstance(f, And):
                    out &= v
                else:
                    out |= v
            return out
        if isinstance(f, ClockIn):
            if ctx == "frz":
                return self._in(f.interval, self.diff)  # [w, reset i, k]
            if ctx == "top":
                return self._in(f.interval, self.t - self._base)[:, None, :]
            raise EvalError("clock constraint evaluated without a valuation")
        if isinstance(f, Freeze):
            inner = self.vec(f.arg, "frz")
            if inner.shape[1] == 1:
                return inner
            return np.diagonal(inner, axis1=1, axis2=2)[:, None, :].copy()
        if isinstance(f, Next):
            a, win = self.vec(f.arg, ctx), self.window(f.interval)
            out = np.zeros(self._shape(a), dtype=bool)
            for i in range(n - 1):
                out[:, :, i] = a[:, :, i + 1] & win[:, i, i + 1][:, None]
            return out
        if isinstance(f, WeakNext):
            a = self.vec(f.arg, ctx)
            out = np.ones(self._shape(a), dtype=bool)
            out[:, :, :-1] = a[:, :, 1:]
            return out
        if isinstance(f, (Until, TUntil, UntilNS)):
            iv = ALWAYS if isinstance(f, TUntil) else f.interval
            lo = 0 if isinstance(f, UntilNS) else 1
            return self._until(self.vec(f.left, ctx), self.vec(f.right, ctx), self.window(iv), lo)
        if isinstance(f, Diamond):
            a = self.vec(f.arg, ctx)
            return self._until(np.ones_like(a), a, self.window(f.interval), 1)
        if isinstance(f, Box):
            a = self.vec(f.arg, ctx)
            return ~self._until(np.ones_like(a), ~a, self.window(f.interval), 1)
        if isinstance(f, DiamondNS):
            a = self.vec(f.arg, ctx)
            return np.flip(np.logical_or.accumulate(np.flip(a, 2), axis=2), 2)
        if isinstance(f, BoxNS):
            a = self.vec(f.arg, ctx)
            return np.flip(np.logical_and.accumulate(np.flip(a, 2), axis=2), 2)
        if isinstance(f, WeakUntil):
            a, b = self.vec(f.left, ctx), self.vec(f.right, ctx)
            out = np.zeros(self._shape(a, b), dtype=bool)
            nxt = np.ones(out.shape[:2], dtype=bool)
            for i in range(n - 1, -1, -1):
                nxt = b[:, :, i] | (a[:, :, i] & nxt)
                out[:, :, i] = nxt
            return out
        if isinstance(f, Since):
            a, b, win = self.vec(f.left, ctx), self.vec(f.right, ctx), self.window(f.interval)
            out = np.zeros(self._shape(a, b), dtype=bool)
            for i in range(n):
                alive = np.ones(out.shape[:2], dtype=bool)
                for j in range(i - 1, -1, -1):
                    out[:, :, i] |= alive & b[:, :, j] & win[:, j, i][:, None]
                    alive &= a[:, :, j]
            return out
        if isinstance(f, Rat):
            atoms = re_atoms(f.re)
            dfa = compile_re(f.re, atoms)
            cols = self._rows(atoms, ctx)
            win = self.window(f.interval)
            R = max([c.shape[1] for c in cols], default=1)
            out = np.zeros((W, R, n), dtype=bool)
            finals = sorted(dfa.finals)
            for i in range(n):
                cur = np.zeros((W, R, dfa.size), dtype=bool)
                cur[..., 0] = True
                for k in range(n):
                    active = win[:, i, k]
                    if not active.any():
                        continue
                    new = self._dfa_step(dfa, cur, cols, k)
                    cur = np.where(active[:, None, None], new, cur)
                out[:, :, i] = cur[..., finals].any(axis=2)
            return out
        if isinstance(f, URat):
            atoms = re_atoms(f.re)
            dfa = compile_re(f.re, atoms)
            cols = self._rows(atoms, ctx)
            a, b, win = self.vec(f.left, ctx), self.vec(f.right, ctx), self.window(f.interval)
            out = np.zeros(self._shape(a, b, *cols), dtype=bool)
            R = out.shape[1]
            finals = sorted(dfa.finals)
            for i in range(n):
                cur = np.zeros((W, R, dfa.size), dtype=bool)
                cur[..., 0] = True
                alive = np.ones((W, R), dtype=bool)
                for j in range(i + 1, n):
                    hit = alive & b[:, :, j] & win[:, i, j][:, None] & cur[..., finals].any(axis=2)
                    out[:, :, i] |= hit
                    alive = alive & a[:, :, j]
                    cur = self._dfa_step(dfa, cur, cols, j)
            return out
        if isinstance(f, (Count, ModCount)):
            a, win = self.vec(f.arg, ctx), self.window(f.interval)
            cnt = np.einsum("wrk,wik->wri", a.astype(np.int64), win.astype(np.int64))
            return cnt >= f.n if isinstance(f, Count) else cnt % f.n == f.k
        raise EvalError(f"cannot batch-evaluate {type(f).__name__}")

    def _until(self, a, b, win, lo: int) -> np.ndarray:
        out = np.zeros(self._shape(a, b), dtype=bool)
        for i in range(self.n):
            alive = np.ones(out.shape[:2], dtype=bool)
            for j in range(i + lo, self.n):
                out[:, :, i] |= alive & b[:, :, j] & win[:, i, j][:, None]
                alive &= a[:, :, j]
        return out


_DEP: Dict[Formula, bool] = {}


def _clock_dependent(f: Formula) -> bool:
    """True when the formula reads the current clock valuation (a free clock)."""
    hit = _DEP.get(f)
    if hit is not None:
        return hit
    if isinstance(f, ClockIn):
        r = True
    elif isinstance(f, Freeze):
        r = False
    elif isinstance(f, (Rat, URat)):
        r = any(_clock_dependent(a) for a in re_atoms(f.re)) or (
            isinstance(f, URat) and (_clock_dependent(f.left) or _clock_dependent(f.right)))
    else:
        from .formula import children
        r = any(_clock_dependent(c) for c in children(f) if isinstance(c, Formula))
    _DEP[f] = r
    return r


def evaluate(w: TimedWord, i: int, f: Formula) -> bool:
    return Evaluator(w).holds(f, i)


def eval_tptl(w: TimedWord, i: int, nu, f: Formula) -> bool:
    return Evaluator(w).holds(f, i, nu)


def language_member(w: TimedWord, f: Formula) -> bool:
    return Evaluator(w).holds(f, 1)


def seg(w: TimedWord, S: Sequence[Formula], i: int, j: int) -> List[frozenset]:
    """Markings of positions strictly between i and j (1-based)."""
    ev = Evaluator(w)
    cols = [ev.vec(a) for a in S]
    return [frozenset(S[x] for x in range(len(S)) if cols[x][k - 1]) for k in range(i + 1, j)]


def tseg(w: TimedWord, S: Sequence[Formula], interval: Interval, i: int) -> List[frozenset]:
    """Markings of every position k with τ_k - τ_i in the interval."""
    ev = Evaluator(w)
    cols = [ev.vec(a) for a in S]
    return [frozenset(S[x] for x in range(len(S)) if cols[x][k])
            for k in ev.tseg_range(interval, i - 1)]


@dataclass(frozen=True)
class Marking:
    """Per-position subsets of ``S``: ``table[k-1]`` holds φ iff φ is true at k."""

    word: TimedWord
    S: Tuple[Formula, ...]
    table: Tuple[frozenset, ...]

    def at(self, k: int) -> frozenset:
        return self.table[k - 1]


def marking(w: TimedWord, S: Sequence[Formula]) -> Marking:
    ev = Evaluator(w)
    S = tuple(S)
    cols = [ev.vec(a) for a in S]
    table = tuple(frozenset(S[x] for x in range(len(S)) if cols[x][k]) for k in range(len(w)))
    return Marking(w, S, table)


# --- naive oracle --------------------------------------------------------------------


def re_match(re: RatExpr, word: Sequence[Formula]) -> bool:
    """Recursive membership of a word of atom formulas (no automata)."""
    word = tuple(word)
    return _match(re, word, 0, len(word), {})


def _match(re, word, a, b, memo):
    key = (re, a, b)
    if key in memo:
        return memo[key]
    if isinstance(re, Atom):
        r = b - a == 1 and normalize(re.formula) == word[a]
    elif re is EPS:
        r = a == b
    elif re is EMPTY:
        r = False
    elif isinstance(re, Union):
        r = any(_match(p, word, a, b, memo) for p in re.parts)
    elif isinstance(re, Cat):
        head, rest = re.parts[0], re.parts[1:]
        tail = rest[0] if len(rest) == 1 else Cat(rest)
        r = any(_match(head, word, a, m, memo) and _match(tail, word, m, b, memo) for m in range(a, b + 1))
    elif isinstance(re, (Star, Plus)):
        if a == b:
            r = isinstance(re, Star) or _match(re.arg, word, a, b, memo)
        else:
            r = any(_match(re.arg, word, a, m, memo) and _match(Star(re.arg), word, m, b, memo)
                    for m in range(a + 1, b + 1))
    elif isinstance(re, Comp):
        r = not _match(re.arg, word, a, b, memo)
    else:
        raise EvalError(f"not a rational expression: {re!r}")
    memo[key] = r
    return r


def oracle_single(re: RatExpr, marks: Sequence[Sequence[Formula]]) -> bool:
    """Brute force over every choice of one marked atom per position."""
    for choice in itertools.product(*marks):
        if re_match(re, choice):
            return True
    return False


def oracle_eval(w: TimedWord, i: int, f: Formula, nu=None) -> bool:
    """Naive clause-by-clause evaluation; exponential, for tests only."""
    n = len(w)
    t = w.stamps
    ev = lambda g, k, v=nu: oracle_eval(w, k, g, v)
    inI = lambda iv, d: d >= 0 and iv.contains(d)
    if isinstance(f, Prop):
        return f.name in w.event(i)
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return not ev(f.arg, i)
    if isinstance(f, And):
        return all(ev(a, i) for a in f.args)
    if isinstance(f, Or):
        return any(ev(a, i) for a in f.args)
    if isinstance(f, (Until, TUntil)):
        iv = ALWAYS if isinstance(f, TUntil) else f.interval
        return any(inI(iv, t[j - 1] - t[i - 1]) and ev(f.right, j) and all(ev(f.left, k) for k in range(i + 1, j))
                   for j in range(i + 1, n + 1))
    if isinstance(f, UntilNS):
        return any(inI(f.interval, t[j - 1] - t[i - 1]) and ev(f.right, j) and all(ev(f.left, k) for k in range(i, j))
                   for j in range(i, n + 1))
    if isinstance(f, Since):
        return any(inI(f.interval, t[i - 1] - t[j - 1]) and ev(f.right, j) and all(ev(f.left, k) for k in range(j + 1, i))
                   for j in range(1, i))
    if isinstance(f, Next):
        return i < n and inI(f.interval, t[i] - t[i - 1]) and ev(f.arg, i + 1)
    if isinstance(f, WeakNext):
        return i == n or ev(f.arg, i + 1)
    if isinstance(f, Diamond):
        return any(inI(f.interval, t[j - 1] - t[i - 1]) and ev(f.arg, j) for j in range(i + 1, n + 1))
    if isinstance(f, Box):
        return all(ev(f.arg, j) for j in range(i + 1, n + 1) if inI(f.interval, t[j - 1] - t[i - 1]))
    if isinstance(f, DiamondNS):
        return any(ev(f.arg, j) for j in range(i, n + 1))
    if isinstance(f, BoxNS):
        return all(ev(f.arg, j) for j in range(i, n + 1))
    if isinstance(f, WeakUntil):
        if all(ev(f.left, j) for j in range(i, n + 1)):
            return True
        return any(ev(f.right, j) and all(ev(f.left, k) for k in range(i, j)) for j in range(i, n + 1))
    if isinstance(f, ClockIn):
        return inI(f.interval, t[i - 1] - nu)
    if isinstance(f, Freeze):
        return oracle_eval(w, i, f.arg, t[i - 1])
    window = lambda iv: [k for k in range(1, n + 1) if inI(iv, t[k - 1] - t[i - 1])]
    if isinstance(f, Rat):
        S = re_atoms(f.re)
        marks = [[a for a in S if ev(a, k)] for k in window(f.interval)]
        return oracle_single(f.re, marks)
    if isinstance(f, URat):
        S = re_atoms(f.re)
        for j in range(i + 1, n + 1):
            if not (inI(f.interval, t[j - 1] - t[i - 1]) and ev(f.right, j)):
                continue
            if not all(ev(f.left, k) for k in range(i + 1, j)):
                continue
            marks = [[a for a in S if ev(a, k)] for k in range(i + 1, j)]
            if oracle_single(f.re, marks):
                return True
        return False
    if isinstance(f, Count):
        return sum(ev(f.arg, k) for k in window(f.interval)) >= f.n
    if isinstance(f, ModCount):
        return sum(ev(f.arg, k) for k in window(f.interval)) % f.n == f.k
    if isinstance(f, Pnueli):
        ks = window(f.interval)
        return any(all(ev(g, k) for g, k in zip(f.args, combo))
                   for combo in itertools.combinations(ks, len(f.args)))
    if isinstance(f, UntilMod):
        for j in range(i + 1, n + 1):
            if inI(f.interval, t[j - 1] - t[i - 1]) and ev(f.right, j) and all(ev(f.left, k) for k in range(i + 1, j)):
                if sum(ev(f.counted, k) for k in range(i + 1, j)) % f.n == f.k:
                    return True
        return False
    raise EvalError(f"oracle cannot evaluate {type(f).__name__}")
