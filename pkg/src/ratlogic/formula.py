"""Formula and rational-expression ASTs shared by MTL, RatMTL and 1-TPTL.

Nodes are hash-consed: constructing a node equal to a live one returns the same
object, so equality is identity and hashing is O(1). Large formulas built by the
reductions share subterms freely and evaluators memoize on node identity.
"""

from __future__ import annotations

import math
import re as _re
import weakref
from functools import lru_cache
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

from .timed import ALWAYS, Interval, parse_interval


class FormulaError(ValueError):
    pass


class DialectError(FormulaError):
    pass


_POOL: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()


class Node:
    __slots__ = ("__weakref__", "_key", "_h")
    fields: Tuple[str, ...] = ()

    def __new__(cls, *args):
        if len(args) != len(cls.fields):
            raise TypeError(f"{cls.__name__} takes {len(cls.fields)} arguments")
        key = (cls, args)
        node = _POOL.get(key)
        if node is not None:
            return node
        node = object.__new__(cls)
        node._key = args
        node._h = hash(key)
        _POOL[key] = node
        return node

    def __init__(self, *args):
        pass

    def __getattr__(self, name):
        try:
            idx = type(self).fields.index(name)
        except ValueError:
            raise AttributeError(name) from None
        return self._key[idx]

    def __hash__(self):
        return self._h

    def __eq__(self, other):
        return self is other

    def __ne__(self, other):
        return self is not other

    def __reduce__(self):
        return (type(self), self._key)

    def __repr__(self):
        return unparse(self)

    __str__ = __repr__


class Formula(Node):
    __slots__ = ()


class RatExpr(Node):
    __slots__ = ()


# --- formulas -----------------------------------------------------------------


class Prop(Formula):
    __slots__ = ()
    fields = ("name",)


class Const(Formula):
    __slots__ = ()
    fields = ("value",)


TRUE = Const(True)
FALSE = Const(False)


class Not(Formula):
    __slots__ = ()
    fields = ("arg",)


class And(Formula):
    __slots__ = ()
    fields = ("args",)


class Or(Formula):
    __slots__ = ()
    fields = ("args",)


class Until(Formula):
    """Strict future until: some later j with the gap in ``interval``."""

    __slots__ = ()
    fields = ("interval", "left", "right")


class Since(Formula):
    """Strict past mirror of ``Until``; internal to the reductions."""

    __slots__ = ()
    fields = ("interval", "left", "right")


class URat(Formula):
    __slots__ = ()
    fields = ("interval", "re", "left", "right")


class Rat(Formula):
    __slots__ = ()
    fields = ("interval", "re")


class Next(Formula):
    __slots__ = ()
    fields = ("interval", "arg")


class WeakNext(Formula):
    """True at the last position; otherwise the argument holds next."""

    __slots__ = ()
    fields = ("arg",)


class Freeze(Formula):
    __slots__ = ()
    fields = ("arg",)


class ClockIn(Formula):
    __slots__ = ()
    fields = ("interval",)


class TUntil(Formula):
    __slots__ = ()
    fields = ("left", "right")


# derived modalities: evaluated directly by counting, removed by expand_derived


class Diamond(Formula):
    __slots__ = ()
    fields = ("interval", "arg")


class Box(Formula):
    __slots__ = ()
    fields = ("interval", "arg")


class DiamondNS(Formula):
    __slots__ = ()
    fields = ("arg",)


class BoxNS(Formula):
    __slots__ = ()
    fields = ("arg",)


class UntilNS(Formula):
    __slots__ = ()
    fields = ("interval", "left", "right")


class WeakUntil(Formula):
    __slots__ = ()
    fields = ("left", "right")


class Count(Formula):
    """At least ``n`` points in the interval satisfy ``arg``."""

    __slots__ = ()
    fields = ("interval", "n", "arg")


class Pnueli(Formula):
    __slots__ = ()
    fields = ("interval", "args")


class ModCount(Formula):
    """The number of points in the interval satisfying ``arg`` is k mod n."""

    __slots__ = ()
    fields = ("interval", "k", "n", "arg")


class UntilMod(Formula):
    """``left`` until ``right`` with the count of ``counted`` strictly between equal to k mod n."""

    __slots__ = ()
    fields = ("interval", "k", "n", "counted", "left", "right")


DERIVED = (Diamond, Box, DiamondNS, BoxNS, UntilNS, WeakUntil, Count, Pnueli, ModCount, UntilMod)
TEMPORAL = (Until, Since, URat, Rat, Next, WeakNext, TUntil) + DERIVED

# --- rational expressions -------------------------------------------------------


class Atom(RatExpr):
    __slots__ = ()
    fields = ("formula",)


class Eps(RatExpr):
    __slots__ = ()
    fields = ()


class Empty(RatExpr):
    __slots__ = ()
    fields = ()


EPS = Eps()
EMPTY = Empty()


class Cat(RatExpr):
    __slots__ = ()
    fields = ("parts",)


class Union(RatExpr):
    __slots__ = ()
    fields = ("parts",)


class Star(RatExpr):
    __slots__ = ()
    fields = ("arg",)


class Plus(RatExpr):
    __slots__ = ()
    fields = ("arg",)


class Comp(RatExpr):
    """Complement relative to all words over the expression's atoms."""

    __slots__ = ()
    fields = ("arg",)


# --- smart constructors ----------------------------------------------------------


def prop(name: str) -> Prop:
    return Prop(name)


def neg(f: Formula) -> Formula:
    if f is TRUE:
        return FALSE
    if f is FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def conj(*fs: Formula) -> Formula:
    out: List[Formula] = []
    seen = set()
    for f in _flatten(fs, And):
        if f is FALSE:
            return FALSE
        if f is TRUE or f in seen:
            continue
        seen.add(f)
        out.append(f)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(*fs: Formula) -> Formula:
    out: List[Formula] = []
    seen = set()
    for f in _flatten(fs, Or):
        if f is TRUE:
            return TRUE
        if f is FALSE or f in seen:
            continue
        seen.add(f)
        out.append(f)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def _flatten(fs, kind) -> Iterator[Formula]:
    for f in fs:
        if isinstance(f, (list, tuple)):
            yield from _flatten(f, kind)
        elif isinstance(f, kind):
            yield from f.args
        else:
            yield f


def implies(f: Formula, g: Formula) -> Formula:
    return disj(neg(f), g)


def iff(f: Formula, g: Formula) -> Formula:
    return conj(implies(f, g), implies(g, f))


def until(f: Formula, g: Formula, interval: Interval = ALWAYS) -> Formula:
    return Until(interval, f, g)


def since(f: Formula, g: Formula, interval: Interval = ALWAYS) -> Formula:
    return Since(interval, f, g)


def eventually(f: Formula, interval: Interval = ALWAYS) -> Formula:
    return Until(interval, TRUE, f)


def once(f: Formula, interval: Interval = ALWAYS) -> Formula:
    return Since(interval, TRUE, f)


def always(f: Formula, interval: Interval = ALWAYS) -> Formula:
    return neg(Until(interval, TRUE, neg(f)))


def always_ns(f: Formula) -> Formula:
    return conj(f, always(f))


def nxt(f: Formula, interval: Interval = ALWAYS) -> Formula:
    return Next(interval, f)


def cat(*parts: RatExpr) -> RatExpr:
    out: List[RatExpr] = []
    for p in parts:
        if p is EMPTY:
            return EMPTY
        if p is EPS:
            continue
        if isinstance(p, Cat):
            out.extend(p.parts)
        else:
            out.append(p)
    if not out:
        return EPS
    if len(out) == 1:
        return out[0]
    return Cat(tuple(out))


def union(*parts: RatExpr) -> RatExpr:
    out: List[RatExpr] = []
    for p in parts:
        if p is EMPTY:
            continue
        for q in (p.parts if isinstance(p, Union) else (p,)):
            if q not in out:
                out.append(q)
    if not out:
        return EMPTY
    if len(out) == 1:
        return out[0]
    return Union(tuple(out))


def star(e: RatExpr) -> RatExpr:
    if e is EPS or e is EMPTY:
        return EPS
    if isinstance(e, Star):
        return e
    return Star(e)


def atom(f) -> Atom:
    return Atom(Prop(f) if isinstance(f, str) else f)


SIGMA_STAR = Star(Atom(TRUE))

# --- traversal -------------------------------------------------------------------


def children(node: Node) -> Tuple[Node, ...]:
    out = []
    for v in node._key:
        if isinstance(v, Node):
            out.append(v)
        elif isinstance(v, tuple):
            out.extend(x for x in v if isinstance(x, Node))
    return tuple(out)


def walk(node: Node) -> Iterator[Node]:
    """Every distinct node reachable from ``node`` (shared subterms visited once)."""
    seen = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        yield n
        stack.extend(children(n))


def rebuild(node: Node, fn: Callable[[Node], Node], memo: Optional[dict] = None) -> Node:
    """Bottom-up map: children are rebuilt first, then ``fn`` is applied to the new node."""
    if memo is None:
        memo = {}
    hit = memo.get(node)
    if hit is not None:
        return hit
    args = []
    for v in node._key:
        if isinstance(v, Node):
            args.append(rebuild(v, fn, memo))
        elif isinstance(v, tuple) and v and isinstance(v[0], Node):
            args.append(tuple(rebuild(x, fn, memo) for x in v))
        else:
            args.append(v)
    out = fn(type(node)(*args))
    memo[node] = out
    return out


def props(node: Node) -> frozenset:
    return frozenset(n.name for n in walk(node) if isinstance(n, Prop))


def intervals(node: Node) -> List[Interval]:
    out = []
    for n in walk(node):
        for v in n._key:
            if isinstance(v, Interval):
                out.append(v)
    return out


def max_constant(node: Node) -> int:
    best = 0
    for n in walk(node):
        for v in n._key:
            if isinstance(v, Interval):
                best = max(best, v.lo, v.hi or 0)
    return best


def has_punctual(node: Node) -> bool:
    return any(i.punctual for i in intervals(node))


def substitute(node: Node, mapping: dict) -> Node:
    """Replace whole subterms (keys are nodes) everywhere."""
    return rebuild(node, lambda n: mapping.get(n, n))


def top_level_set(f: Formula) -> Tuple[Formula, ...]:
    """The atom formulas of a Rat/URat expression, normalized, in first-occurrence order."""
    if not isinstance(f, (Rat, URat)):
        raise FormulaError("top_level_set expects a Rat or URat node")
    return re_atoms(f.re)


@lru_cache(maxsize=1 << 16)
def re_atoms(e: RatExpr) -> Tuple[Formula, ...]:
    out: List[Formula] = []

    def visit(x):
        if isinstance(x, Atom):
            g = normalize(x.formula)
            if g not in out:
                out.append(g)
        elif isinstance(x, (Cat, Union)):
            for p in x.parts:
                visit(p)
        elif isinstance(x, (Star, Plus, Comp)):
            visit(x.arg)

    visit(e)
    return tuple(out)


@lru_cache(maxsize=1 << 16)
def normalize(node: Node) -> Node:
    """Flatten and sort conjunctions/disjunctions so equal-up-to-ACI formulas coincide."""

    def step(n):
        if isinstance(n, (And, Or)):
            kind = type(n)
            flat = []
            for a in n.args:
                flat.extend(a.args if isinstance(a, kind) else (a,))
            uniq = sorted(set(flat), key=unparse)
            return uniq[0] if len(uniq) == 1 else kind(tuple(uniq))
        if isinstance(n, Union):
            flat = []
            for a in n.parts:
                flat.extend(a.parts if isinstance(a, Union) else (a,))
            uniq = sorted(set(flat), key=unparse)
            return uniq[0] if len(uniq) == 1 else Union(tuple(uniq))
        return n

    return rebuild(node, step)


# --- derived forms -----------------------------------------------------------------


def re_threshold(f: Formula, n: int) -> RatExpr:
    any_ = Star(Atom(TRUE))
    return cat(any_, *([Atom(f), any_] * n))


def re_pnueli(fs: Sequence[Formula]) -> RatExpr:
    any_ = Star(Atom(TRUE))
    parts: List[RatExpr] = [any_]
    for f in fs:
        parts += [Atom(f), any_]
    return cat(*parts)


def re_mod(f: Formula, k: int, n: int) -> RatExpr:
    """Words whose number of ``f`` letters is k mod n.

    The trailing block of non-``f`` letters is required: without it, words
    ending in ``¬f`` after the last counted ``f`` would be rejected.
    """
    if n < 1 or not 0 <= k < n:
        raise FormulaError(f"bad modulus k={k} n={n}")
    block = cat(Star(Atom(neg(f))), Atom(f))
    return cat(star(cat(*([block] * n))), *([block] * k), Star(Atom(neg(f))))


def until_ns(f: Formula, g: Formula, interval: Interval = ALWAYS) -> Formula:
    if interval.contains(0):
        return disj(g, conj(f, Until(interval, f, g)))
    return conj(f, Until(interval, f, g))


def expand_derived(node: Node, keep: Tuple[type, ...] = ()) -> Node:
    """Rewrite every derived modality into the core connectives, except the ``keep`` types."""

    def step(n):
        if keep and isinstance(n, keep):
            return n
        if isinstance(n, Diamond):
            return Until(n.interval, TRUE, n.arg)
        if isinstance(n, Box):
            return neg(Until(n.interval, TRUE, neg(n.arg)))
        if isinstance(n, DiamondNS):
            return disj(n.arg, Until(ALWAYS, TRUE, n.arg))
        if isinstance(n, BoxNS):
            return conj(n.arg, neg(Until(ALWAYS, TRUE, neg(n.arg))))
        if isinstance(n, UntilNS):
            return until_ns(n.left, n.right, n.interval)
        if isinstance(n, WeakUntil):
            box = conj(n.left, neg(Until(ALWAYS, TRUE, neg(n.left))))
            return disj(box, until_ns(n.left, n.right))
        if isinstance(n, Count):
            if n.n < 0:
                raise FormulaError("negative threshold")
            return Rat(n.interval, re_threshold(n.arg, n.n))
        if isinstance(n, Pnueli):
            return Rat(n.interval, re_pnueli(n.args))
        if isinstance(n, ModCount):
            return Rat(n.interval, re_mod(n.arg, n.k, n.n))
        if isinstance(n, UntilMod):
            return URat(n.interval, re_mod(n.counted, n.k, n.n), n.left, n.right)
        return n

    return rebuild(node, step)


def has_derived(node: Node) -> bool:
    return any(isinstance(n, DERIVED) for n in walk(node))


# --- size ------------------------------------------------------------------------


def formula_size(f: Formula) -> int:
    """Binary-encoded size: ⌈log2 K⌉ (at least 1) times the operator count.

    K is the largest interval constant or counting modulus.
    """
    K = max_constant(f)
    ops = 0
    for n in _walk_tree(f):
        if isinstance(n, (ModCount, UntilMod)):
            K = max(K, n.n)
        if isinstance(n, (Not, And, Or)):
            ops += max(1, len(n.args) - 1) if isinstance(n, (And, Or)) else 1
        elif isinstance(n, TEMPORAL) or isinstance(n, Freeze):
            ops += 1
    factor = max(1, math.ceil(math.log2(K))) if K > 0 else 1
    return factor * ops


def _walk_tree(node: Node) -> Iterator[Node]:
    """Tree walk that revisits shared subterms, for size accounting."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(c for c in children(n) if isinstance(c, Formula))


# --- dialects ----------------------------------------------------------------------

_RAT_ONLY = (URat, Rat, Count, Pnueli, ModCount, UntilMod)
_TPTL_ONLY = (Freeze, ClockIn, TUntil)


def check_dialect(f: Formula, dialect: str, closed: bool = True) -> None:
    if dialect not in ("mtl", "ratmtl", "tptl"):
        raise DialectError(f"unknown dialect {dialect!r}")
    for n in walk(f):
        if dialect != "tptl" and isinstance(n, _TPTL_ONLY):
            raise DialectError(f"{type(n).__name__} is a 1-TPTL construct, not allowed in {dialect}")
        if dialect != "ratmtl" and isinstance(n, _RAT_ONLY):
            raise DialectError(f"{type(n).__name__} needs the ratmtl dialect")
        if dialect == "tptl":
            iv = getattr(n, "interval", None) if not isinstance(n, ClockIn) else None
            if isinstance(iv, Interval) and iv != ALWAYS:
                raise DialectError("1-TPTL modalities are untimed; use clock constraints")
    if dialect == "tptl" and closed and _free_clock(f):
        raise DialectError("clock constraint outside any freeze")


def _free_clock(f: Formula) -> bool:
    memo = {}

    def free(n):
        if n in memo:
            return memo[n]
        if isinstance(n, ClockIn):
            r = True
        elif isinstance(n, Freeze):
            r = False
        else:
            r = any(free(c) for c in children(n))
        memo[n] = r
        return r

    return free(f)


# --- concrete syntax ----------------------------------------------------------------

_UNARY = {Not: "not", WeakNext: "wnext", Freeze: "freeze", DiamondNS: "diamondns", BoxNS: "boxns"}
_TIMED1 = {Next: "next", Diamond: "diamond", Box: "box"}
_TIMED2 = {Until: "until", Since: "since", UntilNS: "uns"}
_RE_UNARY = {Star: "star", Plus: "plus", Comp: "comp"}


@lru_cache(maxsize=1 << 16)
def unparse(node: Node) -> str:
    if isinstance(node, Prop):
        return node.name
    if isinstance(node, Const):
        return "true" if node.value else "false"
    t = type(node)
    if t in _UNARY:
        return f"({_UNARY[t]} {unparse(node.arg)})"
    if isinstance(node, And):
        return "(and " + " ".join(unparse(a) for a in node.args) + ")"
    if isinstance(node, Or):
        return "(or " + " ".join(unparse(a) for a in node.args) + ")"
    if t in _TIMED1:
        return f"({_TIMED1[t]}{_iv(node.interval)} {unparse(node.arg)})"
    if t in _TIMED2:
        keep = t is not UntilNS
        return f"({_TIMED2[t]}{_iv(node.interval, keep)} {unparse(node.left)} {unparse(node.right)})"
    if isinstance(node, URat):
        return f"(urat {node.interval} {unparse(node.re)} {unparse(node.left)} {unparse(node.right)})"
    if isinstance(node, Rat):
        return f"(rat {node.interval} {unparse(node.re)})"
    if isinstance(node, ClockIn):
        return f"(in {node.interval})"
    if isinstance(node, TUntil):
        return f"(tuntil {unparse(node.left)} {unparse(node.right)})"
    if isinstance(node, WeakUntil):
        return f"(w {unparse(node.left)} {unparse(node.right)})"
    if isinstance(node, Count):
        return f"(count {node.interval} {node.n} {unparse(node.arg)})"
    if isinstance(node, Pnueli):
        return f"(pn {node.interval} " + " ".join(unparse(a) for a in node.args) + ")"
    if isinstance(node, ModCount):
        return f"(mc {node.interval} {node.k} {node.n} {unparse(node.arg)})"
    if isinstance(node, UntilMod):
        return (f"(um {node.interval} {node.k} {node.n} {unparse(node.counted)} "
                f"{unparse(node.left)} {unparse(node.right)})")
    if isinstance(node, Atom):
        return unparse(node.formula)
    if node is EPS:
        return "eps"
    if node is EMPTY:
        return "empty"
    if isinstance(node, Cat):
        return "(cat " + " ".join(unparse(p) for p in node.parts) + ")"
    if isinstance(node, Union):
        return "(union " + " ".join(unparse(p) for p in node.parts) + ")"
    if t in _RE_UNARY:
        return f"({_RE_UNARY[t]} {unparse(node.arg)})"
    raise FormulaError(f"cannot print {t.__name__}")


def _iv(interval: Interval, keep: bool = False) -> str:
    if interval == ALWAYS and not keep:
        return ""
    return f" {interval}"


_TOKEN = _re.compile(r"\s*(?:([\[(]\s*\d+\s*,\s*(?:\d+|inf)\s*[\])])|(\()|(\))|([^\s()\[\]]+))")
_NAME = _re.compile(r"^[A-Za-z_][A-Za-z0-9_.']*$")


class _Tok:
    def __init__(self, kind, text, pos):
        self.kind, self.text, self.pos = kind, text, pos


def _tokenize(text: str) -> List[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        if text[pos] == ";":
            nl = text.find("\n", pos)
            pos = len(text) if nl < 0 else nl + 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaError(_where(text, pos, "unexpected character"))
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(_Tok("iv", m.group(1), start))
        elif m.group(2):
            toks.append(_Tok("(", "(", start))
        elif m.group(3):
            toks.append(_Tok(")", ")", start))
        else:
            toks.append(_Tok("word", m.group(4), start))
        pos = m.end()
    return toks


def _where(text: str, pos: int, msg: str) -> str:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return f"{msg} at line {line}, column {col}"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        pos = tok.pos if tok else (self.toks[self.i].pos if self.i < len(self.toks) else len(self.text))
        raise FormulaError(_where(self.text, pos, msg))

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, kind: Optional[str] = None) -> _Tok:
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of input")
        if kind and tok.kind != kind:
            self.fail(f"expected {kind!r}, found {tok.text!r}", tok)
        self.i += 1
        return tok

    def interval(self, optional: bool = False) -> Interval:
        tok = self.peek()
        if tok is not None and tok.kind == "iv":
            self.i += 1
            try:
                return parse_interval(tok.text)
            except ValueError as exc:
                self.fail(str(exc), tok)
        if optional:
            return ALWAYS
        self.fail("expected an interval")

    def natural(self) -> int:
        tok = self.take("word")
        if not tok.text.isdigit():
            self.fail("expected a natural number", tok)
        return int(tok.text)

    def formula(self) -> Formula:
        tok = self.take()
        if tok.kind == "word":
            if tok.text == "true":
                return TRUE
            if tok.text == "false":
                return FALSE
            if not _NAME.match(tok.text):
                self.fail(f"bad proposition name {tok.text!r}", tok)
            return Prop(tok.text)
        if tok.kind != "(":
            self.fail(f"unexpected {tok.text!r}", tok)
        head = self.take("word")
        op = head.text
        if op in ("not", "wnext", "freeze", "diamondns", "boxns"):
            cls = {v: k for k, v in _UNARY.items()}[op]
            out = cls(self.formula())
        elif op in ("and", "or"):
            args = []
            while self.peek() is not None and self.peek().kind != ")":
                args.append(self.formula())
            if len(args) < 2:
                self.fail(f"{op} needs at least two arguments", head)
            out = (And if op == "and" else Or)(tuple(args))
        elif op in ("implies", "iff"):
            a, b = self.formula(), self.formula()
            out = implies(a, b) if op == "implies" else iff(a, b)
        elif op in ("next", "diamond", "box"):
            cls = {v: k for k, v in _TIMED1.items()}[op]
            iv = self.interval(optional=True)
            out = cls(iv, self.formula())
        elif op in ("until", "since", "uns"):
            cls = {v: k for k, v in _TIMED2.items()}[op]
            iv = self.interval(optional=op == "uns")
            out = cls(iv, self.formula(), self.formula())
        elif op == "urat":
            iv = self.interval()
            r = self.ratexpr()
            out = URat(iv, r, self.formula(), self.formula())
        elif op == "rat":
            iv = self.interval()
            out = Rat(iv, self.ratexpr())
        elif op == "in":
            out = ClockIn(self.interval())
        elif op == "tuntil":
            out = TUntil(self.formula(), self.formula())
        elif op == "w":
            out = WeakUntil(self.formula(), self.formula())
        elif op == "count":
            iv = self.interval()
            out = Count(iv, self.natural(), self.formula())
        elif op == "pn":
            iv = self.interval()
            args = []
            while self.peek() is not None and self.peek().kind != ")":
                args.append(self.formula())
            out = Pnueli(iv, tuple(args))
        elif op == "mc":
            iv = self.interval()
            k, n = self.natural(), self.natural()
            if n < 1 or k >= n:
                self.fail(f"bad modulus {k}%{n}", head)
            out = ModCount(iv, k, n, self.formula())
        elif op == "um":
            iv = self.interval()
            k, n = self.natural(), self.natural()
            if n < 1 or k >= n:
                self.fail(f"bad modulus {k}%{n}", head)
            out = UntilMod(iv, k, n, self.formula(), self.formula(), self.formula())
        else:
            self.fail(f"unknown operator {op!r}", head)
        self.take(")")
        return out

    def ratexpr(self) -> RatExpr:
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of input")
        if tok.kind == "word" and tok.text in ("eps", "empty"):
            self.i += 1
            return EPS if tok.text == "eps" else EMPTY
        if tok.kind == "(" and self.i + 1 < len(self.toks):
            head = self.toks[self.i + 1].text
            if head in ("cat", "union", "star", "plus", "comp"):
                self.i += 2
                if head in ("cat", "union"):
                    parts = []
                    while self.peek() is not None and self.peek().kind != ")":
                        parts.append(self.ratexpr())
                    if len(parts) < 2:
                        self.fail(f"{head} needs at least two parts")
                    out = (Cat if head == "cat" else Union)(tuple(parts))
                else:
                    out = {"star": Star, "plus": Plus, "comp": Comp}[head](self.ratexpr())
                self.take(")")
                return out
        return Atom(self.formula())


def parse_formula(text: str, dialect: Optional[str] = None, closed: bool = True) -> Formula:
    p = _Parser(text)
    f = p.formula()
    if p.peek() is not None:
        p.fail("trailing input")
    if dialect:
        check_dialect(f, dialect, closed)
    return f


def parse_ratexpr(text: str) -> RatExpr:
    p = _Parser(text)
    r = p.ratexpr()
    if p.peek() is not None:
        p.fail("trailing input")
    return r


def pretty(node: Node) -> str:
    """Infix rendering for documentation; not parseable."""
    if isinstance(node, Prop):
        return node.name
    if isinstance(node, Const):
        return "⊤" if node.value else "⊥"
    if isinstance(node, Not):
        return "¬" + pretty(node.arg)
    if isinstance(node, And):
        return "(" + " ∧ ".join(pretty(a) for a in node.args) + ")"
    if isinstance(node, Or):
        return "(" + " ∨ ".join(pretty(a) for a in node.args) + ")"
    if isinstance(node, Until):
        return f"({pretty(node.left)} U{node.interval} {pretty(node.right)})"
    if isinstance(node, Since):
        return f"({pretty(node.left)} S{node.interval} {pretty(node.right)})"
    if isinstance(node, UntilNS):
        return f"({pretty(node.left)} Uns{_sub(node.interval)} {pretty(node.right)})"
    if isinstance(node, WeakUntil):
        return f"({pretty(node.left)} W {pretty(node.right)})"
    if isinstance(node, TUntil):
        return f"({pretty(node.left)} U {pretty(node.right)})"
    if isinstance(node, Next):
        return f"O{_sub(node.interval)}{pretty(node.arg)}"
    if isinstance(node, WeakNext):
        return f"Ō{pretty(node.arg)}"
    if isinstance(node, Freeze):
        return f"x.{pretty(node.arg)}"
    if isinstance(node, ClockIn):
        return f"x∈{node.interval}"
    if isinstance(node, BoxNS):
        return f"□ns {pretty(node.arg)}"
    if isinstance(node, DiamondNS):
        return f"◇ns {pretty(node.arg)}"
    if isinstance(node, Box):
        return f"□{_sub(node.interval)}{pretty(node.arg)}"
    if isinstance(node, Diamond):
        return f"◇{_sub(node.interval)}{pretty(node.arg)}"
    if isinstance(node, Rat):
        return f"Rat{node.interval}[{pretty(node.re)}]"
    if isinstance(node, URat):
        return f"({pretty(node.left)} URat{node.interval},{pretty(node.re)} {pretty(node.right)})"
    if isinstance(node, Atom):
        return pretty(node.formula)
    if isinstance(node, Cat):
        return ".".join(pretty(p) for p in node.parts)
    if isinstance(node, Union):
        return "(" + " + ".join(pretty(p) for p in node.parts) + ")"
    if isinstance(node, Star):
        return f"({pretty(node.arg)})*"
    if isinstance(node, Plus):
        return f"({pretty(node.arg)})+"
    if isinstance(node, Comp):
        return f"¬({pretty(node.arg)})"
    return unparse(node)


def _sub(interval: Interval) -> str:
    return "" if interval == ALWAYS else str(interval)


# --- random generators (tests and fuzzing) ---------------------------------------


BASE = (Prop("a"), Prop("b"), TRUE, Not(Prop("a")))


def random_interval(rng, K: int = 2, unbounded: bool = True, punctual: bool = True) -> Interval:
    """Interval with integer bounds at most K (K + 1 when punctual ones are excluded)."""
    lo = rng.randint(0, K)
    if unbounded and rng.random() < 0.25:
        return Interval(lo, None, rng.random() < 0.5, False)
    hi = rng.randint(lo if punctual else lo + 1, K if punctual else K + 1)
    if hi == lo:
        return Interval.point(lo)
    return Interval(lo, hi, rng.random() < 0.5, rng.random() < 0.5)


def random_re(rng, atoms: Sequence[Formula], depth: int = 2) -> RatExpr:
    roll = rng.random()
    if depth == 0 or roll < 0.3:
        return Atom(rng.choice(list(atoms)))
    if roll < 0.55:
        return cat(random_re(rng, atoms, depth - 1), random_re(rng, atoms, depth - 1))
    if roll < 0.75:
        return union(random_re(rng, atoms, depth - 1), random_re(rng, atoms, depth - 1))
    if roll < 0.95:
        return star(random_re(rng, atoms, depth - 1))
    return Comp(random_re(rng, atoms, depth - 1))


def random_formula(rng, modalities: int = 2, depth: int = 3, kinds: Sequence[str] = ("rat",),
                   K: int = 2, punctual: bool = True) -> Formula:
    """Random formula over a, b with at most ``modalities`` occurrences of the given kinds.

    Kinds: "rat" (Rat), "urat" (URat) and "um" (modulo-counting until). With
    ``punctual`` off, every interval is non-punctual (the MITL fragment).
    """
    budget = [modalities]
    base = [Prop("a"), Prop("b"), Not(Prop("a"))]

    def iv(unbounded=True):
        return random_interval(rng, K, unbounded, punctual)

    def go(d):
        roll = rng.random()
        if d == 0:
            return rng.choice(base)
        if budget[0] > 0 and roll < 0.45:
            budget[0] -= 1
            kind = rng.choice(list(kinds))
            inner = [go(d - 1), Prop("a"), Prop("b"), TRUE]
            atoms = list(dict.fromkeys(rng.sample(inner, 2)))
            if kind == "rat":
                return Rat(iv(), random_re(rng, atoms))
            if kind == "urat":
                return URat(random_interval(rng, K, True, False), random_re(rng, atoms),
                            rng.choice([TRUE, Prop("a")]), go(d - 1))
            if kind == "um":
                return UntilMod(random_interval(rng, K, True, False), rng.randint(0, 1), 2, rng.choice(base),
                                rng.choice([TRUE, Prop("a")]), go(d - 1))
            raise FormulaError(f"unknown modality kind {kind!r}")
        if roll < 0.6:
            return conj(go(d - 1), go(d - 1))
        if roll < 0.7:
            return neg(go(d - 1))
        if roll < 0.85:
            return Until(iv(), go(d - 1), go(d - 1))
        return rng.choice(base)

    return go(depth)


def random_derived(rng, K: int = 2) -> Formula:
    """A derived counting modality over at most three base formulas."""
    pick = lambda: rng.choice(BASE)
    iv = random_interval(rng, K)
    roll = rng.randrange(4)
    if roll == 0:
        return Count(iv, rng.randint(0, 3), pick())
    if roll == 1:
        return Pnueli(iv, tuple(pick() for _ in range(rng.randint(1, 3))))
    if roll == 2:
        n = rng.randint(1, 3)
        return ModCount(iv, rng.randrange(n), n, pick())
    n = rng.randint(1, 3)
    return UntilMod(iv, rng.randrange(n), n, pick(), pick(), pick())
